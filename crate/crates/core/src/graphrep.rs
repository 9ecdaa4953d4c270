//! Combinatorial representation of a map on a grid and its numerical Morse
//! decomposition.
//!
//! For a cell `Q` the image rectangle `f(Q)` is enclosed with interval
//! arithmetic, inflated by one ulp in every direction and covered by grid
//! cells under the closed-intersection convention. The exact image therefore
//! lies in the interior of the union of the successor cells unless the
//! inflated rectangle leaves the grid domain, in which case the cell is
//! marked escaped. Escaped cells keep their in-domain successors; the part of
//! the image outside the domain flows to an implicit sink that never belongs
//! to a Morse set.
//!
//! Morse sets are the non-trivial strongly connected components (two or more
//! cells, or one cell with a self-loop). Sets are numbered by their smallest
//! cell. Reachability between sets is stored in the direction of the flow:
//! `reach[i]` lists the sets that some path starting in set `i` enters.
//! The strict order `i ≺ j` of the Morse decomposition (forward limits in the
//! lower set) is therefore `reach[j].contains(i)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digraph::{strongly_connected_components, Csr};
use crate::dynsys::{ParamBox, ParamMap};
use crate::error::{Error, Result};
use crate::grid::{CellIndex, Grid};
use crate::interval::IntervalRect;

const CHUNK: usize = 2048;

#[derive(Clone, Debug)]
pub struct Representation {
    grid: Grid,
    graph: Csr,
    escaped: Vec<bool>,
    warnings: Vec<String>,
}

impl Representation {
    /// Encloses `map` over every cell of `grid`, valid for all parameters in
    /// `params`.
    pub fn build(map: &dyn ParamMap, params: &ParamBox, grid: &Grid) -> Result<Representation> {
        map.check_arity(params.len(), grid.dim())?;
        let n = grid.len();
        let chunks: Vec<(Vec<usize>, Vec<u32>, Vec<bool>, Vec<String>)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(n);
                let mut counts = Vec::with_capacity(end - start);
                let mut targets = Vec::new();
                let mut escaped = Vec::with_capacity(end - start);
                let mut warnings = Vec::new();
                for cell in start..end {
                    let rect = grid.cell_rect(cell);
                    let image = map
                        .eval_interval(params.intervals(), rect.components())
                        .and_then(IntervalRect::new)
                        .and_then(|r| r.inflate_ulps(1));
                    match image {
                        Ok(image) => {
                            let cover = grid.cover(&image);
                            counts.push(cover.cells.len());
                            targets.extend(cover.cells.iter().map(|&t| t as u32));
                            escaped.push(cover.escaped);
                        }
                        Err(e) => {
                            warnings.push(format!("cell {:?}: {e}", grid.coords_vec(cell)));
                            counts.push(0);
                            escaped.push(true);
                        }
                    }
                }
                (counts, targets, escaped, warnings)
            })
            .collect();

        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        let mut escaped = Vec::with_capacity(n);
        let mut warnings = Vec::new();
        for (c, t, e, w) in chunks {
            for k in c {
                offsets.push(offsets.last().unwrap() + k);
            }
            targets.extend(t);
            escaped.extend(e);
            warnings.extend(w);
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(Representation {
            grid: grid.clone(),
            graph: Csr::from_raw(offsets, targets),
            escaped,
            warnings,
        })
    }

    /// Representation with explicitly given successor lists (out-of-range
    /// successors are rejected).
    pub fn from_adjacency(grid: Grid, successors: Vec<Vec<usize>>, escaped: Vec<bool>) -> Result<Self> {
        let n = grid.len();
        if successors.len() != n || escaped.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: successors.len().max(escaped.len()),
            });
        }
        if let Some(&bad) = successors.iter().flatten().find(|&&t| t >= n) {
            return Err(Error::InvalidArgument(format!("successor {bad} out of range")));
        }
        Ok(Representation {
            grid,
            graph: Csr::from_lists(successors),
            escaped,
            warnings: Vec::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn graph(&self) -> &Csr {
        &self.graph
    }

    pub fn successors(&self, cell: CellIndex) -> &[u32] {
        self.graph.successors(cell)
    }

    pub fn is_escaped(&self, cell: CellIndex) -> bool {
        self.escaped[cell]
    }

    pub fn escaped_count(&self) -> usize {
        self.escaped.iter().filter(|&&e| e).count()
    }

    /// Cells whose enclosure failed; they are treated as escaped.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Hull of the successor cells of `cell`, `None` when it has none.
    pub fn image_hull(&self, cell: CellIndex) -> Option<IntervalRect> {
        let succ = self.successors(cell);
        let first = self.grid.cell_rect(*succ.first()? as usize);
        Some(
            succ[1..]
                .iter()
                .fold(first, |acc, &s| acc.hull(&self.grid.cell_rect(s as usize))),
        )
    }
}

/// Sorted list of grid cells forming one Morse set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseSet {
    pub cells: Vec<CellIndex>,
}

impl MorseSet {
    pub fn new(mut cells: Vec<CellIndex>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        MorseSet { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: CellIndex) -> bool {
        self.cells.binary_search(&cell).is_ok()
    }

    /// Hull of the set's cell rectangles.
    pub fn bounding_box(&self, grid: &Grid) -> Option<IntervalRect> {
        let first = grid.cell_rect(*self.cells.first()?);
        Some(
            self.cells[1..]
                .iter()
                .fold(first, |acc, &c| acc.hull(&grid.cell_rect(c))),
        )
    }

    /// Inclusive index ranges of the set along each axis.
    pub fn index_box(&self, grid: &Grid) -> Vec<(usize, usize)> {
        let mut out = vec![(usize::MAX, 0usize); grid.dim()];
        let mut coords = Vec::new();
        for &c in &self.cells {
            grid.coords_into(c, &mut coords);
            for (r, &j) in out.iter_mut().zip(&coords) {
                r.0 = r.0.min(j);
                r.1 = r.1.max(j);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MorseDecomposition {
    pub sets: Vec<MorseSet>,
    /// `reach[i]`: sorted indices of the sets reachable by a path leaving set `i`.
    pub reach: Vec<Vec<usize>>,
    /// Transitive reduction of `reach`, as `(source, target)` in flow direction.
    pub reduced_edges: Vec<(usize, usize)>,
    pub attracting: Vec<bool>,
    /// Contains an escaped cell or a cell on the grid boundary; such a set is
    /// not certified as an isolating neighbourhood.
    pub touches_boundary: Vec<bool>,
}

impl MorseDecomposition {
    pub fn compute(rep: &Representation) -> MorseDecomposition {
        let g = rep.graph();
        let comps = strongly_connected_components(g);
        let n = g.len();

        let mut members: Vec<Vec<CellIndex>> = vec![Vec::new(); comps.count];
        for v in 0..n {
            members[comps.comp[v] as usize].push(v);
        }
        let nontrivial = |c: usize| {
            let m = &members[c];
            m.len() > 1 || g.has_edge(m[0], m[0])
        };
        // order Morse sets by smallest member cell
        let mut morse_comps: Vec<usize> = (0..comps.count).filter(|&c| nontrivial(c)).collect();
        morse_comps.sort_by_key(|&c| members[c][0]);
        let mut morse_of_comp = vec![u32::MAX; comps.count];
        for (i, &c) in morse_comps.iter().enumerate() {
            morse_of_comp[c] = i as u32;
        }
        let p = morse_comps.len();

        // First Morse sets hit from each component without passing through
        // another Morse set. Component ids are reverse-topological, so
        // increasing id order visits successors first.
        let mut first_hit: Vec<Vec<u32>> = vec![Vec::new(); comps.count];
        let mut direct: Vec<Vec<u32>> = vec![Vec::new(); p];
        let mut acc: Vec<u32> = Vec::new();
        for c in 0..comps.count {
            acc.clear();
            for &v in &members[c] {
                for &w in g.successors(v) {
                    let cw = comps.comp[w as usize] as usize;
                    if cw == c {
                        continue;
                    }
                    if morse_of_comp[cw] != u32::MAX {
                        acc.push(morse_of_comp[cw]);
                    } else {
                        acc.extend_from_slice(&first_hit[cw]);
                    }
                }
            }
            acc.sort_unstable();
            acc.dedup();
            let m = morse_of_comp[c];
            if m != u32::MAX {
                direct[m as usize] = acc.clone();
                first_hit[c] = vec![m];
            } else {
                first_hit[c] = acc.clone();
            }
        }
        drop(first_hit);

        // transitive closure over the Morse DAG, downstream sets first
        let mut reach: Vec<Vec<usize>> = vec![Vec::new(); p];
        let mut topo: Vec<usize> = (0..p).collect();
        topo.sort_by_key(|&i| morse_comps[i]);
        for &i in &topo {
            let mut r: Vec<usize> = Vec::new();
            for &j in &direct[i] {
                r.push(j as usize);
                r.extend_from_slice(&reach[j as usize]);
            }
            r.sort_unstable();
            r.dedup();
            reach[i] = r;
        }

        let reduced_edges = transitive_reduction(&reach);

        let sets: Vec<MorseSet> = morse_comps
            .iter()
            // members are pushed in increasing vertex order, hence sorted
            .map(|&c| MorseSet {
                cells: std::mem::take(&mut members[c]),
            })
            .collect();
        let attracting = sets.iter().map(|s| is_attracting(rep, s)).collect();
        let grid = rep.grid();
        let touches_boundary = sets
            .iter()
            .map(|s| s.cells.iter().any(|&c| rep.is_escaped(c) || grid.is_boundary(c)))
            .collect();

        MorseDecomposition {
            sets,
            reach,
            reduced_edges,
            attracting,
            touches_boundary,
        }
    }

    /// Reassembles a decomposition from stored parts; the reduced edges are
    /// recomputed from `reach`.
    pub fn from_parts(
        sets: Vec<MorseSet>,
        reach: Vec<Vec<usize>>,
        attracting: Vec<bool>,
        touches_boundary: Vec<bool>,
    ) -> Result<Self> {
        let p = sets.len();
        if reach.len() != p || attracting.len() != p || touches_boundary.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: reach.len(),
            });
        }
        let mut reach = reach;
        for r in &mut reach {
            r.sort_unstable();
            r.dedup();
            if r.iter().any(|&j| j >= p) {
                return Err(Error::InvalidArgument("reachability refers to a missing set".into()));
            }
        }
        Ok(MorseDecomposition {
            reduced_edges: transitive_reduction(&reach),
            sets,
            reach,
            attracting,
            touches_boundary,
        })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// `i ≺ j`: some orbit runs from set `j` down to set `i`.
    pub fn precedes(&self, i: usize, j: usize) -> bool {
        self.reach[j].binary_search(&i).is_ok()
    }

    /// Path from set `from` to set `to` (flow direction).
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        self.reach[from].binary_search(&to).is_ok()
    }

    pub fn total_cells(&self) -> usize {
        self.sets.iter().map(MorseSet::len).sum()
    }

    pub fn boundary_count(&self) -> usize {
        self.touches_boundary.iter().filter(|&&b| b).count()
    }

    /// Index of the largest set (ties broken by lower index).
    pub fn largest(&self) -> Option<usize> {
        (0..self.sets.len()).max_by(|&a, &b| self.sets[a].len().cmp(&self.sets[b].len()).then(b.cmp(&a)))
    }

    /// Set index of every cell, for membership lookups.
    pub fn membership(&self, ncells: usize) -> Vec<Option<u32>> {
        let mut out = vec![None; ncells];
        for (i, s) in self.sets.iter().enumerate() {
            for &c in &s.cells {
                out[c] = Some(i as u32);
            }
        }
        out
    }
}

/// Edges `(i, j)` of a transitively closed relation not implied by a path
/// through a third set.
fn transitive_reduction(reach: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (i, r) in reach.iter().enumerate() {
        for &j in r {
            let implied = r.iter().any(|&k| k != j && reach[k].binary_search(&j).is_ok());
            if !implied {
                out.push((i, j));
            }
        }
    }
    out
}

/// `F(N) ⊆ N` and no cell of `N` escapes the grid.
pub fn is_attracting(rep: &Representation, set: &MorseSet) -> bool {
    set.cells
        .iter()
        .all(|&c| !rep.is_escaped(c) && rep.successors(c).iter().all(|&s| set.contains(s as usize)))
}

/// `max` over the set's cells of the diameter of the hull of the cell's
/// successors; graph paths in the set shadow pseudo-orbits with this jump bound.
pub fn pseudo_orbit_delta(rep: &Representation, set: &MorseSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    Ok(set
        .cells
        .iter()
        .filter_map(|&c| rep.image_hull(c))
        .map(|r| r.diameter())
        .fold(0.0, f64::max))
}
