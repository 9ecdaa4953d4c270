//! Finite resolution recurrence inside a Morse set.
//!
//! The recurrence time of a cell is the length of the shortest non-trivial
//! cycle through it in the graph restricted to the set. Two algorithms are
//! provided:
//!
//! * [`RecurrenceAlgorithm::ReverseBfs`] (default): for each vertex `v`, a
//!   breadth-first search from `v` over reversed edges stops at the first
//!   successor `w` of `v`; then `rec(v) = 1 + dist(w -> v)`. Memory is linear
//!   in the size of the set.
//! * [`RecurrenceAlgorithm::DistanceMatrix`]: the all-pairs form
//!   `rec(v) = min_u D[v][u] + D[u][v]` over a full distance matrix. Quadratic
//!   memory; kept as a cross-check.
//!
//! From the recurrence field we derive the recurrence variation (sum of
//! absolute mixed differences over complete `2^n` blocks of cells), its
//! normalized form, the median and the reduced 10-bar histogram.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digraph::{bfs_distances, strongly_connected_components, Csr};
use crate::error::{Error, Result};
use crate::graphrep::{MorseSet, Representation};
use crate::grid::{CellIndex, Grid};

/// Largest set accepted by the quadratic-memory algorithm.
pub const DISTANCE_MATRIX_LIMIT: usize = 20_000;

pub const HISTOGRAM_BARS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecurrenceAlgorithm {
    #[default]
    ReverseBfs,
    DistanceMatrix,
}

impl std::str::FromStr for RecurrenceAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reverse-bfs" => Ok(RecurrenceAlgorithm::ReverseBfs),
            "distance-matrix" => Ok(RecurrenceAlgorithm::DistanceMatrix),
            _ => Err(Error::InvalidArgument(format!(
                "unknown recurrence algorithm `{s}` (expected reverse-bfs or distance-matrix)"
            ))),
        }
    }
}

impl std::fmt::Display for RecurrenceAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RecurrenceAlgorithm::ReverseBfs => "reverse-bfs",
            RecurrenceAlgorithm::DistanceMatrix => "distance-matrix",
        })
    }
}

/// Checks that `g` is a single strongly connected component in which every
/// vertex lies on a cycle.
pub fn check_strongly_connected(g: &Csr) -> Result<()> {
    let n = g.len();
    if n == 0 {
        return Err(Error::EmptySet);
    }
    let comps = strongly_connected_components(g);
    if comps.count != 1 || (n == 1 && !g.has_edge(0, 0)) {
        return Err(Error::NotStronglyConnected {
            components: comps.count,
            cells: n,
        });
    }
    Ok(())
}

/// Recurrence times of all vertices of a strongly connected graph.
pub fn recurrence_times(g: &Csr, algorithm: RecurrenceAlgorithm) -> Result<Vec<u32>> {
    check_strongly_connected(g)?;
    match algorithm {
        RecurrenceAlgorithm::ReverseBfs => Ok(reverse_bfs(g)),
        RecurrenceAlgorithm::DistanceMatrix => distance_matrix(g),
    }
}

struct Scratch {
    stamp: Vec<u32>,
    target: Vec<u32>,
    dist: Vec<u32>,
    queue: Vec<u32>,
}

fn reverse_bfs(g: &Csr) -> Vec<u32> {
    let n = g.len();
    let rev = g.reversed();
    (0..n)
        .into_par_iter()
        .map_init(
            || Scratch {
                stamp: vec![u32::MAX; n],
                target: vec![u32::MAX; n],
                dist: vec![0; n],
                queue: Vec::new(),
            },
            |s, v| {
                if g.has_edge(v, v) {
                    return 1;
                }
                let gen = v as u32;
                for &w in g.successors(v) {
                    s.target[w as usize] = gen;
                }
                s.queue.clear();
                s.queue.push(gen);
                s.stamp[v] = gen;
                s.dist[v] = 0;
                let mut head = 0;
                while head < s.queue.len() {
                    let u = s.queue[head] as usize;
                    head += 1;
                    let du = s.dist[u];
                    for &w in rev.successors(u) {
                        let w = w as usize;
                        if s.stamp[w] != gen {
                            s.stamp[w] = gen;
                            s.dist[w] = du + 1;
                            if s.target[w] == gen {
                                return du + 2;
                            }
                            s.queue.push(w as u32);
                        }
                    }
                }
                unreachable!("strongly connected graph has a cycle through every vertex")
            },
        )
        .collect()
}

fn distance_matrix(g: &Csr) -> Result<Vec<u32>> {
    let n = g.len();
    if n > DISTANCE_MATRIX_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "distance-matrix recurrence limited to {DISTANCE_MATRIX_LIMIT} cells, set has {n}"
        )));
    }
    let rows: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map_init(
            || (Vec::new(), Vec::new()),
            |(dist, queue), v| {
                bfs_distances(g, v, dist, queue);
                dist.clone()
            },
        )
        .collect();
    Ok((0..n)
        .map(|v| {
            if g.has_edge(v, v) {
                1
            } else {
                (0..n)
                    .filter(|&u| u != v)
                    .map(|u| rows[v][u].saturating_add(rows[u][v]))
                    .min()
                    .unwrap_or(u32::MAX)
            }
        })
        .collect())
}

/// Sum over all cells `K` of `cells` whose `2^n` forward neighbours
/// `K + δ, δ ∈ {0,1}^n` all belong to `cells`, of the absolute mixed
/// difference of `values` over that block.
///
/// `cells` must be sorted; `values[i]` belongs to `cells[i]`.
pub fn frrv(grid: &Grid, cells: &[CellIndex], values: &[f64]) -> f64 {
    assert_eq!(cells.len(), values.len());
    debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
    let n = grid.dim();
    let lookup = |c: CellIndex| cells.binary_search(&c).ok().map(|i| values[i]);
    let mut total = 0.0;
    'cells: for (i, &base) in cells.iter().enumerate() {
        let mut sum = 0.0;
        for mask in 0usize..(1 << n) {
            let mut cell = base;
            for axis in 0..n {
                if mask & (1 << axis) != 0 {
                    match grid.neighbor(cell, axis, true) {
                        Some(next) => cell = next,
                        None => continue 'cells,
                    }
                }
            }
            let Some(v) = (if mask == 0 { Some(values[i]) } else { lookup(cell) }) else {
                continue 'cells;
            };
            if (n - mask.count_ones() as usize) % 2 == 0 {
                sum += v;
            } else {
                sum -= v;
            }
        }
        total += sum.abs();
    }
    total
}

/// `frrv / (mean_rec * card^(1/n))`.
pub fn nfrrv(frrv: f64, mean_rec: f64, card: usize, dim: usize) -> Result<f64> {
    if card == 0 {
        return Err(Error::EmptySet);
    }
    if !(mean_rec > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mean recurrence must be positive, got {mean_rec}"
        )));
    }
    let root = match dim {
        1 => card as f64,
        2 => (card as f64).sqrt(),
        3 => (card as f64).cbrt(),
        _ => (card as f64).powf(1.0 / dim as f64),
    };
    Ok(frrv / (mean_rec * root))
}

/// Median; mean of the two middle order statistics for even counts.
pub fn median(values: &[u32]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let m = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] as f64 + v[m] as f64) / 2.0
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceHistogram {
    /// Recurrence value -> number of cells.
    pub raw: BTreeMap<u32, usize>,
    /// Reduced histogram: 10 bars summing to 1, or all zero when degenerate.
    pub reduced: [f64; HISTOGRAM_BARS],
    /// No recurrence value other than 1 is present.
    pub degenerate: bool,
}

impl RecurrenceHistogram {
    pub fn from_values(rec: &[u32]) -> Self {
        let mut raw = BTreeMap::new();
        for &r in rec {
            *raw.entry(r).or_insert(0usize) += 1;
        }
        Self::from_counts(raw)
    }

    /// Drops the bar for recurrence 1, splits `[min, max]` of the remaining
    /// values into 10 equal-width bins (half-open, last one closed) and
    /// normalizes to unit mass. A single remaining value puts all mass into
    /// the first bar.
    pub fn from_counts(raw: BTreeMap<u32, usize>) -> Self {
        let mut reduced = [0.0; HISTOGRAM_BARS];
        let rest: Vec<(u32, usize)> = raw.iter().filter(|(&r, _)| r != 1).map(|(&r, &c)| (r, c)).collect();
        let total: usize = rest.iter().map(|&(_, c)| c).sum();
        if total == 0 {
            return RecurrenceHistogram {
                raw,
                reduced,
                degenerate: true,
            };
        }
        let lo = rest.first().unwrap().0 as u64;
        let hi = rest.last().unwrap().0 as u64;
        for &(r, c) in &rest {
            let bin = if hi == lo {
                0
            } else {
                // integer arithmetic keeps bin edges exact
                ((HISTOGRAM_BARS as u64 * (r as u64 - lo)) / (hi - lo)).min(HISTOGRAM_BARS as u64 - 1) as usize
            };
            reduced[bin] += c as f64;
        }
        for b in &mut reduced {
            *b /= total as f64;
        }
        RecurrenceHistogram {
            raw,
            reduced,
            degenerate: false,
        }
    }

    pub fn total(&self) -> usize {
        self.raw.values().sum()
    }
}

/// Recurrence times over one Morse set together with derived statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceField {
    pub cells: Vec<CellIndex>,
    pub rec: Vec<u32>,
    pub dim: usize,
    pub mean_rec: f64,
    pub median_rec: f64,
    pub frrv: f64,
    pub nfrrv: f64,
}

impl RecurrenceField {
    /// Recurrence of `set` in the graph of `rep` restricted to `set`.
    pub fn compute(rep: &Representation, set: &MorseSet, algorithm: RecurrenceAlgorithm) -> Result<Self> {
        let sub = rep.graph().induced(&set.cells);
        let rec = recurrence_times(&sub, algorithm)?;
        Self::from_values(rep.grid(), set.cells.clone(), rec)
    }

    pub fn from_values(grid: &Grid, cells: Vec<CellIndex>, rec: Vec<u32>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::EmptySet);
        }
        let card = cells.len();
        let mean_rec = rec.iter().map(|&r| r as f64).sum::<f64>() / card as f64;
        let values: Vec<f64> = rec.iter().map(|&r| r as f64).collect();
        let frrv = frrv(grid, &cells, &values);
        let nfrrv = nfrrv(frrv, mean_rec, card, grid.dim())?;
        let median_rec = median(&rec)?;
        Ok(RecurrenceField {
            cells,
            rec,
            dim: grid.dim(),
            mean_rec,
            median_rec,
            frrv,
            nfrrv,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn histogram(&self) -> RecurrenceHistogram {
        RecurrenceHistogram::from_values(&self.rec)
    }

    pub fn min_rec(&self) -> u32 {
        self.rec.iter().copied().min().unwrap_or(0)
    }

    pub fn max_rec(&self) -> u32 {
        self.rec.iter().copied().max().unwrap_or(0)
    }
}
