//! Energy along the dilation path `t ↦ (t²u(t·), t²v(t·))` and projection
//! onto the constraint set `J = 0`.
//!
//! Along the path the four pieces of the breakdown scale as
//! `a ~ t³`, `b ~ t`, `c ~ t³`, `d ~ t^{4q−3}`, so the energy is the
//! polynomial `f(t) = μt + νt³ − σt^p`.

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBreakdown, Functional, ModelParams};
use crate::error::{Error, Result};
use crate::radial::{enforce_boundary, rescale, RadialField, StatePair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCoefficients {
    pub mu: f64,
    pub nu: f64,
    pub sigma: f64,
    pub p: f64,
}

impl PathCoefficients {
    pub fn new(mu: f64, nu: f64, sigma: f64, p: f64) -> Self {
        PathCoefficients { mu, nu, sigma, p }
    }

    pub fn from_breakdown(bd: &EnergyBreakdown, q: f64) -> Self {
        PathCoefficients {
            mu: bd.b / 2.0,
            nu: bd.a / 2.0 + bd.c / 4.0,
            sigma: bd.d / (2.0 * q),
            p: 4.0 * q - 3.0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::NoMaximum(self.sigma));
        }
        if !(self.mu + self.nu > 0.0) {
            return Err(Error::DegeneratePair("mu = nu = 0".into()));
        }
        if !(self.mu >= 0.0 && self.nu >= 0.0 && self.p > 3.0) {
            return Err(Error::Domain(format!("bad path coefficients {self:?}")));
        }
        Ok(())
    }

    pub(crate) fn value(&self, t: f64) -> f64 {
        self.mu * t + self.nu * t.powi(3) - self.sigma * t.powf(self.p)
    }

    fn slope(&self, t: f64) -> f64 {
        self.mu + 3.0 * self.nu * t * t - self.p * self.sigma * t.powf(self.p - 1.0)
    }

    fn curvature(&self, t: f64) -> f64 {
        6.0 * self.nu * t - self.p * (self.p - 1.0) * self.sigma * t.powf(self.p - 2.0)
    }
}

pub fn path_energy(c: &PathCoefficients, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("path parameter t = {t} < 0")));
    }
    Ok(c.value(t))
}

/// `f′(t)`.
pub fn path_slope(c: &PathCoefficients, t: f64) -> f64 {
    c.slope(t)
}

/// Bracket `[lo, hi]` with `pred(lo)` true and `pred(hi)` false, found by
/// doubling/halving from 1.
fn bracket(pred: impl Fn(f64) -> bool) -> (f64, f64) {
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    if pred(1.0) {
        while pred(hi) {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        while !pred(lo) {
            hi = lo;
            lo *= 0.5;
        }
    }
    (lo, hi)
}

/// The unique `t* > 0` with `f′(t*) = 0`, the maximizer of `f` on `t > 0`.
pub fn critical_t(c: &PathCoefficients) -> Result<f64> {
    c.check()?;
    let (mut lo, mut hi) = bracket(|t| c.slope(t) > 0.0);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..400 {
        let s = c.slope(t);
        if s > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // relative to the size of the terms of f′, which can be far below σ
        let size = c.mu + 3.0 * c.nu * t * t + c.p * c.sigma * t.powf(c.p - 1.0);
        if s.abs() <= 1e-15 * size || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
        let k = c.curvature(t);
        let newton = t - s / k;
        t = if k < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Ok(t)
}

/// The unique `T > t*` with `f(T) = 0`.
pub fn path_zero(c: &PathCoefficients) -> Result<f64> {
    let ts = critical_t(c)?;
    // f(t)/t = μ + νt² − σt^{p−1}, positive at t*, decreasing beyond.
    let reduced = |t: f64| c.mu + c.nu * t * t - c.sigma * t.powf(c.p - 1.0);
    let mut lo = ts;
    let mut hi = 2.0 * ts;
    while reduced(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if reduced(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Projection evaluated from the breakdown alone: `(t*, f(t*))`.
pub fn algebraic_projection(bd: &EnergyBreakdown, q: f64) -> Result<(f64, f64)> {
    let c = PathCoefficients::from_breakdown(bd, q);
    let t = critical_t(&c)?;
    Ok((t, c.value(t)))
}

/// `J` of the dilated pair `γ(t)` from the breakdown of the undilated one.
pub fn constraint_along_path(bd: &EnergyBreakdown, q: f64, t: f64) -> f64 {
    let scaled = EnergyBreakdown {
        a: bd.a * t.powi(3),
        b: bd.b * t,
        c: bd.c * t.powi(3),
        d: bd.d * t.powf(4.0 * q - 3.0),
    };
    scaled.constraint_j(q)
}

/// Dilates both components by `t`, keeping the boundary convention of the
/// variational discretization.
pub fn dilate(s: &StatePair, t: f64) -> Result<StatePair> {
    let fix = |f: &RadialField| -> Result<RadialField> {
        let mut vals = rescale(f, t)?.field.into_values();
        enforce_boundary(f.grid(), &mut vals);
        RadialField::new(f.grid(), vals)
    };
    Ok(StatePair { u: fix(&s.u)?, v: fix(&s.v)? })
}

pub(crate) fn project_with(f: &Functional, s: &StatePair) -> Result<(StatePair, f64)> {
    if s.is_zero() {
        return Err(Error::DegeneratePair("trivial pair".into()));
    }
    let bd = f.breakdown(s);
    let c = PathCoefficients::from_breakdown(&bd, f.q);
    let t = critical_t(&c)?;
    Ok((dilate(s, t)?, t))
}

/// Dilates `s` onto `J = 0` and returns the dilation factor.
pub fn project(s: &StatePair, p: &ModelParams) -> Result<(StatePair, f64)> {
    project_with(&Functional::from(*p), s)
}
