//! Plain floating-point trajectory simulation. Nothing here is rigorous; the
//! results guide the choice of phase-space boxes and flag parameter regions
//! with large attractors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::ParamMap;
use crate::error::{Error, Result};
use crate::grid::{CellIndex, Grid};

/// Starting points used for cover-size maps.
pub const DEFAULT_COVER_ICS: [[f64; 2]; 4] = [[0.01, 0.01], [1.0, 1.0], [10.0, 2.0], [2.0, 10.0]];

/// Uniform lattice with `counts[i]` points along axis `i`, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub counts: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
}

impl Lattice {
    pub fn new(counts: Vec<usize>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if counts.len() != bounds.len() {
            return Err(Error::DimensionMismatch {
                expected: bounds.len(),
                found: counts.len(),
            });
        }
        if counts.contains(&0) {
            return Err(Error::InvalidArgument("lattice counts must be positive".into()));
        }
        if bounds
            .iter()
            .any(|&(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi)
        {
            return Err(Error::InvalidArgument(
                "lattice bounds must be finite and ordered".into(),
            ));
        }
        Ok(Lattice { counts, bounds })
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate `i` along `axis`.
    pub fn value(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        let n = self.counts[axis];
        if n == 1 {
            lo
        } else if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    /// Point `index`, last axis varying fastest.
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.counts.len()];
        for axis in (0..self.counts.len()).rev() {
            let n = self.counts[axis];
            out[axis] = self.value(axis, index % n);
            index /= n;
        }
        out
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialConditions {
    List(Vec<Vec<f64>>),
    Lattice(Lattice),
}

impl InitialConditions {
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            InitialConditions::List(v) => v.clone(),
            InitialConditions::Lattice(l) => l.points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub ics: InitialConditions,
    pub burn_in: u64,
    pub sample: u64,
    /// Grid for counting visited cells.
    pub cover: Option<Grid>,
}

impl SimConfig {
    /// Four fixed starting points, 10^4 discarded and 10^4 counted iterations,
    /// cover grid 1024x1024 over `[-0.1, 7.5] x [-1.3, 2.7]`.
    pub fn cover_default() -> Self {
        SimConfig {
            ics: InitialConditions::List(DEFAULT_COVER_ICS.iter().map(|p| p.to_vec()).collect()),
            burn_in: 10_000,
            sample: 10_000,
            cover: Some(Grid::from_bounds(&[(-0.1, 7.5), (-1.3, 2.7)], &[1024, 1024]).expect("valid default grid")),
        }
    }

    /// 30x30 starting points over `[0, 100] x [-100, 100]`, 10^4 discarded and
    /// 100 recorded iterations.
    pub fn bounds_default() -> Self {
        SimConfig {
            ics: InitialConditions::Lattice(
                Lattice::new(vec![30, 30], vec![(0.0, 100.0), (-100.0, 100.0)]).expect("valid lattice"),
            ),
            burn_in: 10_000,
            sample: 100,
            cover: None,
        }
    }

    fn validate(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        let ics = self.ics.points();
        for p in &ics {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("initial conditions must be finite".into()));
            }
        }
        if let Some(g) = &self.cover {
            if g.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: g.dim(),
                });
            }
        }
        Ok(ics)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub ic: Vec<f64>,
    /// Coordinate-wise range over the sampled iterates; `None` when diverged
    /// or when nothing was sampled.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub diverged: bool,
}

/// Iterates `state` in place `steps` times; false once a value is non-finite.
fn advance(map: &dyn ParamMap, params: &[f64], state: &mut Vec<f64>, scratch: &mut Vec<f64>, steps: u64) -> bool {
    for _ in 0..steps {
        if !map.eval_point_into(params, state, scratch) {
            return false;
        }
        std::mem::swap(state, scratch);
    }
    true
}

fn trajectory<F: FnMut(&[f64])>(
    map: &dyn ParamMap,
    params: &[f64],
    ic: &[f64],
    burn_in: u64,
    sample: u64,
    mut visit: F,
) -> bool {
    let mut state = ic.to_vec();
    let mut scratch = vec![0.0; map.dim()];
    if !advance(map, params, &mut state, &mut scratch, burn_in) {
        return false;
    }
    for _ in 0..sample {
        if !map.eval_point_into(params, &state, &mut scratch) {
            return false;
        }
        std::mem::swap(&mut state, &mut scratch);
        visit(&state);
    }
    true
}

/// Tail ranges of every configured trajectory.
pub fn simulate(map: &dyn ParamMap, params: &[f64], cfg: &SimConfig) -> Result<Vec<TrajectorySummary>> {
    map.check_arity(params.len(), map.dim())?;
    let ics = cfg.validate(map.dim())?;
    Ok(ics
        .into_par_iter()
        .map(|ic| {
            let mut bounds: Vec<(f64, f64)> = vec![(f64::INFINITY, f64::NEG_INFINITY); map.dim()];
            let ok = trajectory(map, params, &ic, cfg.burn_in, cfg.sample, |s| {
                for (b, &v) in bounds.iter_mut().zip(s) {
                    b.0 = b.0.min(v);
                    b.1 = b.1.max(v);
                }
            });
            TrajectorySummary {
                ic,
                bounds: (ok && cfg.sample > 0).then_some(bounds),
                diverged: !ok,
            }
        })
        .collect())
}

/// Coordinate-wise hull of the non-diverged tails.
pub fn union_bounds(summaries: &[TrajectorySummary]) -> Option<Vec<(f64, f64)>> {
    summaries
        .iter()
        .filter_map(|s| s.bounds.clone())
        .reduce(|a, b| a.iter().zip(&b).map(|(x, y)| (x.0.min(y.0), x.1.max(y.1))).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSize {
    /// Largest count over the starting points.
    pub cells: usize,
    /// Count per starting point; `None` for diverged trajectories.
    pub per_ic: Vec<Option<usize>>,
}

impl CoverSize {
    pub fn diverged(&self) -> usize {
        self.per_ic.iter().filter(|c| c.is_none()).count()
    }
}

/// Number of cover-grid cells visited by the sampled part of each
/// trajectory, maximised over starting points. Iterates outside the grid are
/// not counted.
pub fn attractor_cover_size(map: &dyn ParamMap, params: &[f64], cfg: &SimConfig) -> Result<CoverSize> {
    map.check_arity(params.len(), map.dim())?;
    let ics = cfg.validate(map.dim())?;
    let grid = cfg
        .cover
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("cover size needs a cover grid".into()))?;
    let per_ic: Vec<Option<usize>> = ics
        .par_iter()
        .map(|ic| {
            let mut cells: Vec<CellIndex> = Vec::with_capacity(cfg.sample as usize);
            let ok = trajectory(map, params, ic, cfg.burn_in, cfg.sample, |s| {
                if let Some(c) = grid.locate(s) {
                    cells.push(c);
                }
            });
            ok.then(|| {
                cells.sort_unstable();
                cells.dedup();
                cells.len()
            })
        })
        .collect();
    Ok(CoverSize {
        cells: per_ic.iter().flatten().copied().max().unwrap_or(0),
        per_ic,
    })
}

/// Cover sizes over a lattice of parameter values. Parameters not listed in
/// `varying` keep their value from `base`; axis `i` of `lattice` sets
/// parameter `varying[i]`.
pub fn cover_size_map(
    map: &dyn ParamMap,
    base: &[f64],
    varying: &[usize],
    lattice: &Lattice,
    cfg: &SimConfig,
) -> Result<Vec<(Vec<f64>, CoverSize)>> {
    if varying.len() != lattice.counts.len() {
        return Err(Error::DimensionMismatch {
            expected: lattice.counts.len(),
            found: varying.len(),
        });
    }
    (0..lattice.len())
        .into_par_iter()
        .map(|i| {
            let mut p = base.to_vec();
            for (&k, v) in varying.iter().zip(lattice.point(i)) {
                *p.get_mut(k)
                    .ok_or_else(|| Error::InvalidArgument(format!("no parameter {k}")))? = v;
            }
            let size = attractor_cover_size(map, &p, cfg)?;
            Ok((p, size))
        })
        .collect()
}

/// Union of tail ranges over a lattice of parameter values.
pub fn bounds_over_lattice(
    map: &dyn ParamMap,
    base: &[f64],
    varying: &[usize],
    lattice: &Lattice,
    cfg: &SimConfig,
) -> Result<(Option<Vec<(f64, f64)>>, usize)> {
    let per: Vec<Vec<TrajectorySummary>> = (0..lattice.len())
        .into_par_iter()
        .map(|i| {
            let mut p = base.to_vec();
            for (&k, v) in varying.iter().zip(lattice.point(i)) {
                p[k] = v;
            }
            simulate(map, &p, cfg)
        })
        .collect::<Result<_>>()?;
    let all: Vec<TrajectorySummary> = per.into_iter().flatten().collect();
    let diverged = all.iter().filter(|s| s.diverged).count();
    Ok((union_bounds(&all), diverged))
}
