//! Uniform rectangular grids.
//!
//! Cell `(j_1, ..., j_n)` of a `d_1 x ... x d_n` grid over
//! `[a_1, a_1 + w_1] x ... x [a_n, a_n + w_n]` is the product of
//! `[a_i + j_i w_i / d_i, a_i + (j_i + 1) w_i / d_i]`. Grid lines are kept as
//! outward-rounded enclosures so that every rectangle handed out contains the
//! exact cell, and every cover contains the exact covered set.
//!
//! Cells are linearized row-major: the last coordinate varies fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalRect};

/// Linear (row-major) index of a grid cell.
pub type CellIndex = usize;

/// A product of compact intervals with positive width in every dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalRect", into = "IntervalRect")]
pub struct RectangularSet(IntervalRect);

impl TryFrom<IntervalRect> for RectangularSet {
    type Error = Error;

    fn try_from(r: IntervalRect) -> Result<Self> {
        RectangularSet::new(r)
    }
}

impl From<RectangularSet> for IntervalRect {
    fn from(r: RectangularSet) -> Self {
        r.0
    }
}

impl RectangularSet {
    pub fn new(bounds: IntervalRect) -> Result<Self> {
        if let Some(i) = bounds.iter().position(|c| !(c.width() > 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "dimension {i} has zero width: {}",
                bounds[i]
            )));
        }
        Ok(RectangularSet(bounds))
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        RectangularSet::new(IntervalRect::from_bounds(bounds)?)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn rect(&self) -> &IntervalRect {
        &self.0
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.0[axis].lo()
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.0[axis].hi()
    }
}

/// Integer-tuple cell address.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub Vec<usize>);

impl CellId {
    pub fn coords(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for CellId {
    fn from(v: Vec<usize>) -> Self {
        CellId(v)
    }
}

/// Result of covering a rectangle by grid cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cover {
    /// Sorted linear indices of all cells whose closed rectangle meets the input.
    pub cells: Vec<CellIndex>,
    /// The input rectangle reaches outside the grid domain.
    pub escaped: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    domain: RectangularSet,
    resolution: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    /// `edges[axis][j]` encloses the j-th grid line along `axis`.
    edges: Vec<Vec<Interval>>,
}

/// Serialized form of a [`Grid`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: RectangularSet,
    pub resolution: Vec<usize>,
}

impl TryFrom<GridSpec> for Grid {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        Grid::new(s.domain, s.resolution)
    }
}

impl From<Grid> for GridSpec {
    fn from(g: Grid) -> Self {
        GridSpec {
            domain: g.domain,
            resolution: g.resolution,
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.resolution == other.resolution
    }
}

impl Grid {
    pub fn new(domain: RectangularSet, resolution: Vec<usize>) -> Result<Self> {
        if resolution.len() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                found: resolution.len(),
            });
        }
        if resolution.contains(&0) {
            return Err(Error::InvalidGrid(format!(
                "resolution must be positive in every dimension, got {resolution:?}"
            )));
        }
        let len = resolution
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| Error::InvalidGrid(format!("too many cells for resolution {resolution:?}")))?;
        let mut strides = vec![1usize; resolution.len()];
        for axis in (0..resolution.len().saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * resolution[axis + 1];
        }
        let edges = (0..domain.dim())
            .map(|axis| axis_edges(domain.lo(axis), domain.hi(axis), resolution[axis]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Grid {
            domain,
            resolution,
            strides,
            len,
            edges,
        })
    }

    /// Convenience constructor for `bounds = [(lo, hi), ...]`.
    pub fn from_bounds(bounds: &[(f64, f64)], resolution: &[usize]) -> Result<Self> {
        Grid::new(RectangularSet::from_bounds(bounds)?, resolution.to_vec())
    }

    pub fn domain(&self) -> &RectangularSet {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn linear(&self, id: &CellId) -> Result<CellIndex> {
        self.linear_coords(id.coords())
    }

    pub fn linear_coords(&self, coords: &[usize]) -> Result<CellIndex> {
        if coords.len() != self.dim() || coords.iter().zip(&self.resolution).any(|(j, d)| j >= d) {
            return Err(Error::CellOutOfRange {
                coords: coords.to_vec(),
                resolution: self.resolution.clone(),
            });
        }
        Ok(coords.iter().zip(&self.strides).map(|(j, s)| j * s).sum())
    }

    pub fn coords(&self, index: CellIndex) -> CellId {
        CellId(self.coords_vec(index))
    }

    pub fn coords_vec(&self, index: CellIndex) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim());
        self.coords_into(index, &mut out);
        out
    }

    pub fn coords_into(&self, mut index: CellIndex, out: &mut Vec<usize>) {
        debug_assert!(index < self.len);
        out.clear();
        for &s in &self.strides {
            out.push(index / s);
            index %= s;
        }
    }

    /// Enclosure of the grid line `j` along `axis` (`0 <= j <= d`).
    pub fn edge(&self, axis: usize, j: usize) -> Interval {
        self.edges[axis][j]
    }

    /// Outward-rounded rectangle containing the exact cell.
    pub fn cell_bounds(&self, id: &CellId) -> Result<IntervalRect> {
        let index = self.linear(id)?;
        Ok(self.cell_rect(index))
    }

    pub fn cell_rect(&self, index: CellIndex) -> IntervalRect {
        let mut comps = Vec::with_capacity(self.dim());
        let mut rem = index;
        for (axis, &s) in self.strides.iter().enumerate() {
            let j = rem / s;
            rem %= s;
            let e = &self.edges[axis];
            comps.push(Interval::new(e[j].lo(), e[j + 1].hi()).expect("grid edges are ordered"));
        }
        IntervalRect::new(comps).expect("grid has dimension >= 1")
    }

    /// Cells whose closed rectangle meets `rect` (closed-intersection
    /// convention), plus whether `rect` reaches outside the grid domain.
    pub fn cover(&self, rect: &IntervalRect) -> Cover {
        assert_eq!(rect.dim(), self.dim(), "rectangle dimension mismatch");
        let mut escaped = false;
        let mut ranges = Vec::with_capacity(self.dim());
        for (axis, r) in rect.iter().enumerate() {
            if r.lo() < self.domain.lo(axis) || r.hi() > self.domain.hi(axis) {
                escaped = true;
            }
            match self.axis_range(axis, r) {
                Some(range) => ranges.push(range),
                None => {
                    return Cover {
                        cells: Vec::new(),
                        escaped: true,
                    }
                }
            }
        }
        let count: usize = ranges.iter().map(|(a, b)| b - a + 1).product();
        let mut cells = Vec::with_capacity(count);
        self.push_block(&ranges, 0, 0, &mut cells);
        Cover { cells, escaped }
    }

    // Inclusive index range of cells along `axis` possibly meeting `r`.
    fn axis_range(&self, axis: usize, r: &Interval) -> Option<(usize, usize)> {
        let e = &self.edges[axis];
        let d = self.resolution[axis];
        // first j with e[j + 1].hi >= r.lo
        let first = e[1..].partition_point(|edge| edge.hi() < r.lo());
        // one past the last j with e[j].lo <= r.hi
        let end = e[..d].partition_point(|edge| edge.lo() <= r.hi());
        if first < end {
            Some((first, end - 1))
        } else {
            None
        }
    }

    fn push_block(&self, ranges: &[(usize, usize)], axis: usize, base: usize, out: &mut Vec<usize>) {
        let (a, b) = ranges[axis];
        if axis + 1 == ranges.len() {
            out.extend((a..=b).map(|j| base + j));
        } else {
            for j in a..=b {
                self.push_block(ranges, axis + 1, base + j * self.strides[axis], out);
            }
        }
    }

    pub fn is_boundary(&self, index: CellIndex) -> bool {
        let mut rem = index;
        for (axis, &s) in self.strides.iter().enumerate() {
            let j = rem / s;
            rem %= s;
            if j == 0 || j + 1 == self.resolution[axis] {
                return true;
            }
        }
        false
    }

    /// All cells with some coordinate equal to `0` or `d_i - 1`, sorted.
    pub fn boundary_cells(&self) -> Vec<CellIndex> {
        (0..self.len).filter(|&i| self.is_boundary(i)).collect()
    }

    /// Cell containing `p` under the half-open convention `[e_j, e_{j+1})`
    /// (closed on the far side of the domain); `None` outside the domain.
    /// Plain floating point, for simulation bookkeeping only.
    pub fn locate(&self, p: &[f64]) -> Option<CellIndex> {
        let mut index = 0;
        for (axis, &x) in p.iter().enumerate() {
            let (lo, hi) = (self.domain.lo(axis), self.domain.hi(axis));
            if !(x >= lo && x <= hi) {
                return None;
            }
            let d = self.resolution[axis];
            let j = (((x - lo) / (hi - lo)) * d as f64) as usize;
            index += j.min(d - 1) * self.strides[axis];
        }
        Some(index)
    }

    /// Neighbouring cell across a face, if it exists.
    pub fn neighbor(&self, index: CellIndex, axis: usize, forward: bool) -> Option<CellIndex> {
        let j = (index / self.strides[axis]) % self.resolution[axis];
        if forward {
            (j + 1 < self.resolution[axis]).then(|| index + self.strides[axis])
        } else {
            (j > 0).then(|| index - self.strides[axis])
        }
    }

    pub fn cell_widths(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|a| (self.domain.hi(a) - self.domain.lo(a)) / self.resolution[a] as f64)
            .collect()
    }
}

fn axis_edges(lo: f64, hi: f64, d: usize) -> Result<Vec<Interval>> {
    let lo_i = Interval::point(lo)?;
    let width = Interval::point(hi)?.sub(&lo_i)?;
    let mut edges = Vec::with_capacity(d + 1);
    edges.push(lo_i);
    for j in 1..d {
        let offset = width.scale(j as f64)?.div_positive(d as f64)?;
        let e = lo_i.add(&offset)?;
        // clamp into the domain: the exact grid line lies inside it
        edges.push(Interval::new(e.lo().max(lo), e.hi().min(hi))?);
    }
    edges.push(Interval::point(hi)?);
    Ok(edges)
}
