//! Angular profile `h(y) = y^q + (1−y)^q + 2β y^{q/2}(1−y)^{q/2}` on `[0, 1]`
//! and its maximizer.
//!
//! The sign of `h′` on `(0, 1/2]` is the sign of `g(t)` at `t = y/(1−y)`, and
//! `g′` has the sign of `r`, so the maximizer is located by bisection on `g`
//! inside a bracket delimited by the unique zero of `r`.

use serde::{Deserialize, Serialize};

use crate::energy::check_solver_q;
use crate::error::{Error, Result};

/// Relative width of the band around a threshold inside which the tie
/// regimes are reported.
pub const TIE_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime")]
pub enum HRegime {
    /// Maximum 1, attained only at `y ∈ {0, 1}`.
    EndpointOnly,
    /// Unique maximizer `y ∈ (0, 1/2)` (and its mirror). `y = 0` when the
    /// maximizer lies below the smallest positive `f64` (`q` just under 2).
    InteriorUnique { y: f64, value: f64 },
    /// Maximizer `y = 1/2`, value `(1+β)/2^{q−1} > 1`.
    HalfMax { value: f64 },
    /// `q = 2`, `β = 1`: `h ≡ 1`.
    TiePlateau,
    /// `q ∈ (2,3)`, `β = 2^{q−1}−1`: maxima 1 at `{0, 1/2, 1}`.
    TieThree,
}

impl HRegime {
    pub fn name(&self) -> &'static str {
        match self {
            HRegime::EndpointOnly => "EndpointOnly",
            HRegime::InteriorUnique { .. } => "InteriorUnique",
            HRegime::HalfMax { .. } => "HalfMax",
            HRegime::TiePlateau => "TiePlateau",
            HRegime::TieThree => "TieThree",
        }
    }

    pub fn is_tie(&self) -> bool {
        matches!(self, HRegime::TiePlateau | HRegime::TieThree)
    }

    /// Whether a ground state with both components nonzero is predicted.
    /// `None` at ties, where both kinds coexist.
    pub fn predicts_vectorial(&self) -> Option<bool> {
        match self {
            HRegime::EndpointOnly => Some(false),
            HRegime::InteriorUnique { .. } | HRegime::HalfMax { .. } => Some(true),
            HRegime::TiePlateau | HRegime::TieThree => None,
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta = {beta} must be ≥ 0")));
    }
    Ok(())
}

pub fn h_eval(y: f64, q: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!("y = {y} outside [0, 1]")));
    }
    let z = 1.0 - y;
    Ok(y.powf(q) + z.powf(q) + 2.0 * beta * (y * z).powf(q / 2.0))
}

/// `h(y) − 1`, accurate when the excess is far below rounding of `h`.
pub fn h_excess(y: f64, q: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::Domain(format!("y = {y} outside [0, 1]")));
    }
    let s = y.min(1.0 - y);
    let big = (q * (-s).ln_1p()).exp_m1();
    Ok(s.powf(q) + big + 2.0 * beta * (s * (1.0 - s)).powf(q / 2.0))
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("t = {t} outside (0, 1]")));
    }
    Ok(())
}

/// `g(t) = t^{q−1} − 1 + β t^{q/2−1} − β t^{q/2}`.
pub fn g_eval(t: f64, q: f64, beta: f64) -> Result<f64> {
    check_t(t)?;
    Ok(g_raw(t, q, beta))
}

/// `r(t) = 2(q−1) t^{q/2} − βqt + β(q−2)`.
pub fn r_eval(t: f64, q: f64, beta: f64) -> Result<f64> {
    check_t(t)?;
    Ok(r_raw(t, q, beta))
}

fn g_raw(t: f64, q: f64, beta: f64) -> f64 {
    t.powf(q - 1.0) - 1.0 + beta * t.powf(q / 2.0 - 1.0) - beta * t.powf(q / 2.0)
}

fn r_raw(t: f64, q: f64, beta: f64) -> f64 {
    2.0 * (q - 1.0) * t.powf(q / 2.0) - beta * q * t + beta * (q - 2.0)
}

fn near(x: f64, threshold: f64) -> bool {
    (x - threshold).abs() <= TIE_BAND * threshold.abs().max(f64::MIN_POSITIVE)
}

/// Threshold in `β` separating the regimes at this `q`.
pub fn threshold(q: f64) -> f64 {
    if q < 2.0 {
        q - 1.0
    } else {
        2f64.powf(q - 1.0) - 1.0
    }
}

pub fn classify(q: f64, beta: f64) -> Result<HRegime> {
    check_solver_q(q).map_err(|e| Error::Domain(e.to_string()))?;
    check_beta(beta)?;
    if beta == 0.0 {
        return Ok(HRegime::EndpointOnly);
    }
    let half = || HRegime::HalfMax { value: h_eval(0.5, q, beta).expect("in range") };
    let thr = threshold(q);
    if q < 2.0 && !near(q, 2.0) {
        if beta >= thr || near(beta, thr) {
            return Ok(half());
        }
        let t = interior_zero(q, beta);
        let y = t / (1.0 + t);
        let value = h_eval(y, q, beta)?;
        return Ok(HRegime::InteriorUnique { y, value });
    }
    if near(beta, thr) {
        return Ok(if near(q, 2.0) { HRegime::TiePlateau } else { HRegime::TieThree });
    }
    Ok(if beta < thr { HRegime::EndpointOnly } else { half() })
}

/// Zero of `g` in `(0, 1)` for `q < 2`, `0 < β < q − 1`.
fn interior_zero(q: f64, beta: f64) -> f64 {
    // r is concave with r(0) < 0 < r(1); its zero is the minimizer of g.
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if r_raw(m, q, beta) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let t_min = 0.5 * (a + b);
    if g_raw(f64::MIN_POSITIVE, q, beta) <= 0.0 {
        return 0.0;
    }
    // β t^{q/2−1} = 2 makes g positive.
    let mut lo = (beta / 2.0).powf(1.0 / (1.0 - q / 2.0)).min(0.5 * t_min).max(f64::MIN_POSITIVE);
    while g_raw(lo, q, beta) <= 0.0 {
        lo *= 0.5;
    }
    let mut hi = t_min;
    // bisect in log t: the root can sit many decades below 1
    for _ in 0..400 {
        // lo·hi can go subnormal
        let m = (0.5 * (lo.ln() + hi.ln())).exp();
        let m = if m > lo && m < hi { m } else { 0.5 * (lo + hi) };
        if m <= lo || m >= hi {
            break;
        }
        let gm = g_raw(m, q, beta);
        if gm == 0.0 {
            return m;
        }
        if gm > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    if g_raw(lo, q, beta).abs() <= g_raw(hi, q, beta).abs() {
        lo
    } else {
        hi
    }
}

/// Maximizer in `[0, 1/2]` and the maximum. Tie regimes report `y = 1/2`.
pub fn h_max(q: f64, beta: f64) -> Result<(f64, f64)> {
    Ok(match classify(q, beta)? {
        HRegime::EndpointOnly => (0.0, 1.0),
        HRegime::InteriorUnique { y, value } => (y, value),
        HRegime::HalfMax { value } => (0.5, value),
        HRegime::TiePlateau | HRegime::TieThree => (0.5, h_eval(0.5, q, beta)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_values() {
        for q in [1.6, 2.0, 2.9] {
            for beta in [0.0, 0.5, 4.0] {
                assert_eq!(h_eval(0.0, q, beta).unwrap(), 1.0);
                assert_eq!(h_eval(1.0, q, beta).unwrap(), 1.0);
                assert_eq!(g_eval(1.0, q, beta).unwrap(), 0.0);
            }
        }
        assert!(h_eval(-0.1, 2.0, 1.0).is_err());
        assert!(h_eval(1.1, 2.0, 1.0).is_err());
        assert!(g_eval(0.0, 2.0, 1.0).is_err());
        assert!(r_eval(1.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn plateau_and_half_value() {
        assert!((h_eval(0.3, 2.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((h_eval(0.5, 2.0, 2.0).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn g_limits_at_origin() {
        let near0 = g_eval(1e-8, 1.8, 0.3).unwrap();
        assert!(near0 > 0.0 && near0 > g_eval(1e-4, 1.8, 0.3).unwrap());
        assert!(g_eval(1e-300, 1.8, 0.3).unwrap() > 1e5);
        // slow approach: β t^{q/2−1} ≈ 3e-3 at 1e-8
        assert!((g_eval(1e-8, 2.5, 0.3).unwrap() + 1.0).abs() < 1e-2);
        assert!((g_eval(1e-40, 2.5, 0.3).unwrap() + 1.0).abs() < 1e-10);
    }

    #[test]
    fn spec_classifications() {
        assert_eq!(classify(1.8, 0.9).unwrap(), HRegime::HalfMax { value: h_eval(0.5, 1.8, 0.9).unwrap() });
        assert_eq!(classify(2.5, 1.0).unwrap(), HRegime::EndpointOnly);
        assert_eq!(classify(2.0, 1.0).unwrap(), HRegime::TiePlateau);
        assert_eq!(classify(2.5, 2f64.powf(1.5) - 1.0).unwrap(), HRegime::TieThree);
        assert!(classify(1.4, 1.0).is_err());
        assert!(classify(3.0, 1.0).is_err());
        assert!(classify(2.0, -1.0).is_err());
        let ys: Vec<f64> = [0.01, 0.1, 0.4]
            .iter()
            .map(|&b| match classify(1.8, b).unwrap() {
                HRegime::InteriorUnique { y, .. } => {
                    let t = y / (1.0 - y);
                    assert!(g_eval(t, 1.8, b).unwrap().abs() <= 1e-12);
                    y
                }
                other => panic!("{other:?}"),
            })
            .collect();
        assert!(ys[0] < ys[1] && ys[1] < ys[2] && ys[0] < 0.05);
    }

    #[test]
    fn h_max_examples() {
        assert_eq!(h_max(2.4, 0.0).unwrap(), (0.0, 1.0));
        let (y, v) = h_max(2.0, 3.0).unwrap();
        assert_eq!(y, 0.5);
        assert!((v - 2.0).abs() < 1e-15);
        let (y, v) = h_max(1.8, 0.4).unwrap();
        assert!(y > 0.0 && y < 0.5 && v > 1.0);
        for k in 0..=10_000 {
            let s = k as f64 / 10_000.0;
            assert!(v >= h_eval(s, 1.8, 0.4).unwrap() - 1e-15);
        }
    }

    #[test]
    fn excess_matches_and_resolves() {
        for (y, q, b) in [(0.3, 1.8, 0.4), (0.5, 2.5, 3.0), (0.1, 2.5, 0.2)] {
            let e = h_excess(y, q, b).unwrap();
            assert!((e - (h_eval(y, q, b).unwrap() - 1.0)).abs() < 1e-15);
        }
        let (y, v) = h_max(1.9, 0.1).unwrap();
        assert_eq!(v, 1.0);
        assert!(h_excess(y, 1.9, 0.1).unwrap() > 0.0);
    }

    #[test]
    fn tiny_beta_root_is_resolved() {
        // y ≈ β^{1/(1−q/2)}: far below 1e-16 here
        let (y, _) = h_max(1.9, 0.1).unwrap();
        assert!(y > 0.0 && y < 1e-15);
        let t = y / (1.0 - y);
        assert!(g_eval(t, 1.9, 0.1).unwrap().abs() < 1e-10);
        let approx = 0.1f64.powf(20.0);
        assert!((y / approx - 1.0).abs() < 0.5, "{y}");
    }
}
