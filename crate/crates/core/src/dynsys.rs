//! Built-in parameterized planar maps.
//!
//! Each map has a plain floating-point evaluator (used for simulation) and an
//! interval evaluator whose result contains `f_lambda(x)` for every parameter
//! `lambda` in a [`ParamBox`] and every state `x` in a rectangle. The interval
//! evaluator follows the same operation order as the point evaluator, so the
//! round-to-nearest point result always lies inside the interval result.
//!
//! New maps plug in by implementing [`ParamMap`]; nothing downstream depends
//! on the concrete map.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalRect};

/// A parameterized map `f_lambda : R^n -> R^n`.
pub trait ParamMap: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn param_names(&self) -> &[&'static str];

    /// Plain round-to-nearest evaluation. Returns `false` when some output
    /// is not finite.
    fn eval_point_into(&self, params: &[f64], state: &[f64], out: &mut [f64]) -> bool;

    /// Interval extension over a parameter box and a state rectangle.
    fn eval_interval(&self, params: &[Interval], state: &[Interval]) -> Result<Vec<Interval>>;

    fn eval_point(&self, params: &[f64], state: &[f64]) -> Result<Vec<f64>> {
        self.check_arity(params.len(), state.len())?;
        let mut out = vec![0.0; self.dim()];
        if self.eval_point_into(params, state, &mut out) {
            Ok(out)
        } else {
            Err(Error::Diverged)
        }
    }

    fn eval_rect(&self, params: &ParamBox, state: &IntervalRect) -> Result<IntervalRect> {
        self.check_arity(params.len(), state.dim())?;
        IntervalRect::new(self.eval_interval(params.intervals(), state.components())?)
    }

    fn check_arity(&self, nparams: usize, dim: usize) -> Result<()> {
        if nparams != self.param_names().len() {
            return Err(Error::DimensionMismatch {
                expected: self.param_names().len(),
                found: nparams,
            });
        }
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: dim,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    /// `x' = x^2 e^(y - x) + k`, `y' = a y - b x + c`.
    Chialvo,
    /// `x' = 1 + y - a x^2`, `y' = b x`.
    Henon,
    /// `x' = (t1 x + t2 y) e^(-0.1 (x + y))`, `y' = 0.7 x`.
    Leslie,
}

impl MapKind {
    pub const ALL: [MapKind; 3] = [MapKind::Chialvo, MapKind::Henon, MapKind::Leslie];

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            MapKind::Chialvo => &["a", "b", "c", "k"],
            MapKind::Henon => &["a", "b"],
            MapKind::Leslie => &["t1", "t2"],
        }
    }

    /// Default parameter values. The Leslie values are indicative only.
    pub fn default_params(self) -> &'static [f64] {
        match self {
            MapKind::Chialvo => &[0.89, 0.6, 0.28, 0.0],
            MapKind::Henon => &[1.4, 0.3],
            MapKind::Leslie => &[20.0, 20.0],
        }
    }

    /// A phase-space box enclosing the interesting recurrent dynamics at the
    /// default parameters.
    pub fn default_phase_box(self) -> [(f64, f64); 2] {
        match self {
            MapKind::Chialvo => [(-0.1, 9.0), (-5.0, 3.0)],
            MapKind::Henon => [(-1.5, 1.5), (-0.5, 0.5)],
            MapKind::Leslie => [(-1.0, 80.0), (-1.0, 60.0)],
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapKind::Chialvo => "chialvo",
            MapKind::Henon => "henon",
            MapKind::Leslie => "leslie",
        })
    }
}

impl FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chialvo" => Ok(MapKind::Chialvo),
            "henon" | "hénon" => Ok(MapKind::Henon),
            "leslie" => Ok(MapKind::Leslie),
            other => Err(Error::InvalidArgument(format!("unknown map `{other}`"))),
        }
    }
}

impl ParamMap for MapKind {
    fn name(&self) -> &str {
        match self {
            MapKind::Chialvo => "chialvo",
            MapKind::Henon => "henon",
            MapKind::Leslie => "leslie",
        }
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> &[&'static str] {
        MapKind::param_names(*self)
    }

    #[inline]
    fn eval_point_into(&self, p: &[f64], s: &[f64], out: &mut [f64]) -> bool {
        let (x, y) = (s[0], s[1]);
        match self {
            MapKind::Chialvo => {
                let (a, b, c, k) = (p[0], p[1], p[2], p[3]);
                out[0] = x * x * (y - x).exp() + k;
                out[1] = a * y - b * x + c;
            }
            MapKind::Henon => {
                let (a, b) = (p[0], p[1]);
                out[0] = 1.0 + y - a * (x * x);
                out[1] = b * x;
            }
            MapKind::Leslie => {
                let (t1, t2) = (p[0], p[1]);
                out[0] = (t1 * x + t2 * y) * (-0.1 * (x + y)).exp();
                out[1] = 0.7 * x;
            }
        }
        out[0].is_finite() && out[1].is_finite()
    }

    fn eval_interval(&self, p: &[Interval], s: &[Interval]) -> Result<Vec<Interval>> {
        let (x, y) = (&s[0], &s[1]);
        match self {
            MapKind::Chialvo => {
                let (a, b, c, k) = (&p[0], &p[1], &p[2], &p[3]);
                let nx = x.sqr()?.mul(&y.sub(x)?.exp()?)?.add(k)?;
                let ny = a.mul(y)?.sub(&b.mul(x)?)?.add(c)?;
                Ok(vec![nx, ny])
            }
            MapKind::Henon => {
                let (a, b) = (&p[0], &p[1]);
                let one = Interval::point(1.0)?;
                let nx = one.add(y)?.sub(&a.mul(&x.sqr()?)?)?;
                let ny = b.mul(x)?;
                Ok(vec![nx, ny])
            }
            MapKind::Leslie => {
                let (t1, t2) = (&p[0], &p[1]);
                let lin = t1.mul(x)?.add(&t2.mul(y)?)?;
                let damp = x.add(y)?.scale(-0.1)?.exp()?;
                Ok(vec![lin.mul(&damp)?, x.scale(0.7)?])
            }
        }
    }
}

/// One interval per map parameter, in the map's parameter order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamBox(Vec<Interval>);

impl ParamBox {
    pub fn new(intervals: Vec<Interval>) -> Self {
        ParamBox(intervals)
    }

    pub fn from_point(values: &[f64]) -> Result<Self> {
        Ok(ParamBox(
            values.iter().map(|&v| Interval::point(v)).collect::<Result<Vec<_>>>()?,
        ))
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn set(&mut self, index: usize, value: Interval) {
        self.0[index] = value;
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.0.len() && self.0.iter().zip(p).all(|(i, &v)| i.contains(v))
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.0.iter().map(Interval::mid).collect()
    }
}
