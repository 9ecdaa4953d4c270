#ifndef SETDYN_H
#define SETDYN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SdAlgorithm {
  SD_ALGORITHM_REVERSE_BFS = 0,
  SD_ALGORITHM_DISTANCE_MATRIX = 1,
} SdAlgorithm;

/**
 * Built-in maps.
 */
typedef enum SdMap {
  SD_MAP_CHIALVO = 0,
  SD_MAP_HENON = 1,
  SD_MAP_LESLIE = 2,
} SdMap;

typedef enum SdMetric {
  SD_METRIC_L1 = 0,
  SD_METRIC_L2 = 1,
} SdMetric;

/**
 * Result of a call.
 */
typedef enum SdStatus {
  SD_STATUS_OK = 0,
  /**
   * Bad argument value (grid, interval, dimension, index).
   */
  SD_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A required pointer was null.
   */
  SD_STATUS_NULL_POINTER = 2,
  /**
   * The cell set is not strongly connected.
   */
  SD_STATUS_NOT_STRONGLY_CONNECTED = 3,
  /**
   * A computation could not be certified or diverged.
   */
  SD_STATUS_CONTRACT_VIOLATION = 4,
  /**
   * Output buffer too small; the required length was written.
   */
  SD_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * Bug inside the library.
   */
  SD_STATUS_INTERNAL = 6,
} SdStatus;

/**
 * Morse decomposition of one parameter box, with the graph it came from.
 */
typedef struct SdAnalysis SdAnalysis;

/**
 * Recurrence times over one Morse set.
 */
typedef struct SdField SdField;

/**
 * Summary statistics of a recurrence field.
 */
typedef struct SdFieldStats {
  size_t cells;
  double mean_rec;
  double median_rec;
  double frrv;
  double nfrrv;
  uint32_t min_rec;
  uint32_t max_rec;
} SdFieldStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on this thread.
 */
const char *sd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sd_version(void);

/**
 * Number of parameters of `map`.
 */
size_t sd_map_param_count(enum SdMap map);

/**
 * Builds the cell graph of `map` on a planar grid and decomposes it.
 *
 * `params` holds `2 * nparams` values, `lo, hi` per parameter in the map's
 * order. `bounds` holds `x_lo, x_hi, y_lo, y_hi`; `resolution` holds the
 * cell counts along x and y.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be writable.
 */
enum SdStatus sd_analyze(enum SdMap map,
                         const double *params,
                         size_t nparams,
                         const double *bounds,
                         const size_t *resolution,
                         struct SdAnalysis **out);

/**
 * # Safety
 * `h` is null or a handle from [`sd_analyze`] not yet freed.
 */
void sd_analysis_free(struct SdAnalysis *h);

/**
 * Number of Morse sets, or 0 for a null handle.
 *
 * # Safety
 * `h` is null or a live handle.
 */
size_t sd_analysis_set_count(const struct SdAnalysis *h);

/**
 * Cells, attracting flag and boundary flag of set `set`.
 *
 * # Safety
 * `h` is null or a live handle; the outputs are writable.
 */
enum SdStatus sd_analysis_set_info(const struct SdAnalysis *h,
                                   size_t set,
                                   size_t *cells,
                                   bool *attracting,
                                   bool *touches_boundary);

/**
 * Linear cell indices (`i * ny + j`) of set `set`, ascending.
 *
 * # Safety
 * `h` is null or a live handle; `buf` is valid for `cap` writes and `len`
 * for one.
 */
enum SdStatus sd_analysis_set_cells(const struct SdAnalysis *h,
                                    size_t set,
                                    size_t *buf,
                                    size_t cap,
                                    size_t *len);

/**
 * Whether a path leads from set `from` to set `to`. False for bad input.
 *
 * # Safety
 * `h` is null or a live handle.
 */
bool sd_analysis_reaches(const struct SdAnalysis *h, size_t from, size_t to);

/**
 * Recurrence field of Morse set `set`.
 *
 * # Safety
 * `h` is null or a live handle; `out` is writable.
 */
enum SdStatus sd_analysis_recurrence(const struct SdAnalysis *h,
                                     size_t set,
                                     enum SdAlgorithm algorithm,
                                     struct SdField **out);

/**
 * Recurrence field of an arbitrary cell set of the analysed graph. Fails
 * with [`SdStatus::NotStronglyConnected`] unless the cells form one
 * strongly connected component.
 *
 * # Safety
 * `h` is null or a live handle; `cells` is valid for `n` reads; `out` is
 * writable.
 */
enum SdStatus sd_analysis_recurrence_of_cells(const struct SdAnalysis *h,
                                              const size_t *cells,
                                              size_t n,
                                              struct SdField **out);

/**
 * # Safety
 * `h` is null or a handle from a recurrence call not yet freed.
 */
void sd_field_free(struct SdField *h);

/**
 * # Safety
 * `h` is null or a live handle; `out` is writable.
 */
enum SdStatus sd_field_stats(const struct SdField *h, struct SdFieldStats *out);

/**
 * Cells and their recurrence times, both in ascending cell order.
 *
 * # Safety
 * `h` is null or a live handle; `cells` and `rec` are valid for `cap`
 * writes; `len` is writable.
 */
enum SdStatus sd_field_values(const struct SdField *h,
                              size_t *cells,
                              uint32_t *rec,
                              size_t cap,
                              size_t *len);

/**
 * DBSCAN over `n` points of dimension `dim` stored row by row. Writes one
 * label per point: cluster ids from 1, -1 for noise.
 *
 * # Safety
 * `points` is valid for `n * dim` reads and `labels` for `n` writes.
 */
enum SdStatus sd_dbscan(const double *points,
                        size_t n,
                        size_t dim,
                        double eps,
                        size_t minpts,
                        enum SdMetric metric,
                        int64_t *labels);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SETDYN_H */
