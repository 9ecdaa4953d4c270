//! Closed floating-point intervals with outward-rounded arithmetic.
//!
//! Every operation returns an interval containing the exact real image of its
//! operands. Endpoints are computed in round-to-nearest; the rounding error of
//! each endpoint is then recovered with an error-free transformation (TwoSum
//! for sums, a fused multiply-add residual for products and quotients) and the
//! endpoint is moved one ulp outward only when it was rounded inward. Results
//! that are exact in binary floating point therefore stay exact, e.g.
//! `[1,2] + [3,4] = [4,6]`.
//!
//! `exp` is the single trust point of the rigor chain: the platform `exp` is
//! assumed to be faithfully rounded (error below one ulp), and both endpoints
//! are inflated outward by two ulps on top of that.
//!
//! Empty and unbounded intervals cannot be constructed; any operation whose
//! endpoint overflows fails with [`Error::Enclosure`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude the residual of a product may be inexact (gradual
/// underflow), so both endpoints are widened unconditionally.
const TINY_PRODUCT: f64 = 1.0e-290;

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}, {:?}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

// Sum with its exact rounding error (Knuth's TwoSum).
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn add_down(a: f64, b: f64) -> f64 {
    let (s, err) = two_sum(a, b);
    if err < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    let (s, err) = two_sum(a, b);
    if err > 0.0 {
        s.next_up()
    } else {
        s
    }
}

fn mul_down(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if p.abs() < TINY_PRODUCT {
        return p.next_down();
    }
    if a.mul_add(b, -p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

fn mul_up(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if p.abs() < TINY_PRODUCT {
        return p.next_up();
    }
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

// Quotients by a positive divisor; the residual x - q*d has the sign of the
// error of q.
fn div_down(x: f64, d: f64) -> f64 {
    debug_assert!(d > 0.0);
    let q = x / d;
    if q != 0.0 && q.abs() < TINY_PRODUCT {
        return q.next_down();
    }
    if (-q).mul_add(d, x) < 0.0 {
        q.next_down()
    } else {
        q
    }
}

fn div_up(x: f64, d: f64) -> f64 {
    debug_assert!(d > 0.0);
    let q = x / d;
    if q != 0.0 && q.abs() < TINY_PRODUCT {
        return q.next_up();
    }
    if (-q).mul_add(d, x) > 0.0 {
        q.next_up()
    } else {
        q
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    pub fn point(x: f64) -> Result<Self> {
        Interval::new(x, x)
    }

    /// Symmetric interval `[center - radius, center + radius]`, rounded outward.
    pub fn centered(center: f64, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidInterval {
                lo: center - radius,
                hi: center + radius,
            });
        }
        Interval::checked(add_down(center, -radius), add_up(center, radius))
    }

    fn checked(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() {
            debug_assert!(lo <= hi);
            Ok(Interval { lo, hi })
        } else {
            Err(Error::Enclosure("non-finite endpoint"))
        }
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Moves each endpoint `ulps` representable values outward.
    pub fn inflate_ulps(&self, ulps: u32) -> Result<Interval> {
        let (mut lo, mut hi) = (self.lo, self.hi);
        for _ in 0..ulps {
            lo = lo.next_down();
            hi = hi.next_up();
        }
        Interval::checked(lo, hi)
    }

    pub fn add(&self, other: &Interval) -> Result<Interval> {
        Interval::checked(add_down(self.lo, other.lo), add_up(self.hi, other.hi))
    }

    pub fn sub(&self, other: &Interval) -> Result<Interval> {
        Interval::checked(add_down(self.lo, -other.hi), add_up(self.hi, -other.lo))
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(&self, other: &Interval) -> Result<Interval> {
        let (a, b, c, d) = (self.lo, self.hi, other.lo, other.hi);
        let lo = mul_down(a, c)
            .min(mul_down(a, d))
            .min(mul_down(b, c))
            .min(mul_down(b, d));
        let hi = mul_up(a, c).max(mul_up(a, d)).max(mul_up(b, c)).max(mul_up(b, d));
        Interval::checked(lo, hi)
    }

    pub fn scale(&self, c: f64) -> Result<Interval> {
        self.mul(&Interval::point(c)?)
    }

    pub fn sqr(&self) -> Result<Interval> {
        let (a, b) = (self.lo, self.hi);
        if a >= 0.0 {
            Interval::checked(mul_down(a, a), mul_up(b, b))
        } else if b <= 0.0 {
            Interval::checked(mul_down(b, b), mul_up(a, a))
        } else {
            Interval::checked(0.0, mul_up(a, a).max(mul_up(b, b)))
        }
    }

    pub fn exp(&self) -> Result<Interval> {
        let lo = self.lo.exp().next_down().next_down().max(0.0);
        let hi = self.hi.exp().next_up().next_up();
        Interval::checked(lo, hi)
    }

    /// Division by a positive scalar.
    pub fn div_positive(&self, d: f64) -> Result<Interval> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "divisor must be positive and finite, got {d}"
            )));
        }
        Interval::checked(div_down(self.lo, d), div_up(self.hi, d))
    }
}

/// Product of `n >= 1` intervals.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalRect(Vec<Interval>);

impl fmt::Debug for IntervalRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl IntervalRect {
    pub fn new(components: Vec<Interval>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        Ok(IntervalRect(components))
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        let comps = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        IntervalRect::new(comps)
    }

    pub fn from_point(p: &[f64]) -> Result<Self> {
        let comps = p.iter().map(|&x| Interval::point(x)).collect::<Result<Vec<_>>>()?;
        IntervalRect::new(comps)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[Interval] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.0.iter()
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && self.0.iter().zip(p).all(|(i, &x)| i.contains(x))
    }

    pub fn contains_rect(&self, other: &IntervalRect) -> bool {
        other.dim() == self.dim() && self.0.iter().zip(other.iter()).all(|(a, b)| a.contains_interval(b))
    }

    pub fn intersects(&self, other: &IntervalRect) -> bool {
        other.dim() == self.dim() && self.0.iter().zip(other.iter()).all(|(a, b)| a.intersects(b))
    }

    pub fn hull(&self, other: &IntervalRect) -> IntervalRect {
        debug_assert_eq!(self.dim(), other.dim());
        IntervalRect(self.0.iter().zip(other.iter()).map(|(a, b)| a.hull(b)).collect())
    }

    pub fn inflate_ulps(&self, ulps: u32) -> Result<IntervalRect> {
        Ok(IntervalRect(
            self.0
                .iter()
                .map(|i| i.inflate_ulps(ulps))
                .collect::<Result<Vec<_>>>()?,
        ))
    }

    /// Euclidean length of the diagonal.
    pub fn diameter(&self) -> f64 {
        self.0.iter().map(|i| i.width() * i.width()).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(Interval::mid).collect()
    }
}

impl std::ops::Index<usize> for IntervalRect {
    type Output = Interval;

    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}
