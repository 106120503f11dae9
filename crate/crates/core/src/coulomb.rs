//! Newtonian potential of a radial density.
//!
//! For `ρ = u² + v²`,
//! `φ(r) = Q(r)/r + P(r)` with `Q(r) = 4π∫₀^r s²ρ` and `P(r) = 4π∫_r^{r_max} sρ`.
//!
//! [`solve_phi`] evaluates both running integrals with a fourth-order
//! cumulative rule. The energy functional uses a separate symmetric
//! discretization ([`lumped_potential`]) whose quadratic form is exactly
//! differentiable on the grid.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::radial::{self, grad_norm_sq, RadialField, RadialGrid, StatePair};

pub const FAR_TOL: f64 = 1e-3;
pub const CROSS_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub phi: RadialField,
    /// `∫ρ` over the truncated ball.
    pub total_charge: f64,
}

impl Potential {
    /// `r_max φ(r_max)` against the enclosed charge.
    pub fn far_field_error(&self) -> f64 {
        let g = self.phi.grid();
        (self.phi.values()[g.n()] * g.r_max() - self.total_charge).abs()
    }
}

/// Cumulative integrals `∫_{r_0}^{r_k} f` for `k = 0..n`, fourth order on
/// smooth `f`. Interior cells use the four-point rule
/// `h/24 (−f_{k−1} + 13f_k + 13f_{k+1} − f_{k+2})`; the two end cells use
/// one-sided cubic weights.
fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len() - 1;
    let mut out = vec![0.0; n + 1];
    for k in 0..n {
        let cell = if k == 0 {
            9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]
        } else if k == n - 1 {
            9.0 * f[n] + 19.0 * f[n - 1] - 5.0 * f[n - 2] + f[n - 3]
        } else {
            -f[k - 1] + 13.0 * f[k] + 13.0 * f[k + 1] - f[k + 2]
        };
        out[k + 1] = out[k] + cell * h / 24.0;
    }
    out
}

fn density(s: &StatePair) -> Vec<f64> {
    s.u.values().iter().zip(s.v.values()).map(|(a, b)| a * a + b * b).collect()
}

/// Potential of an arbitrary sampled density.
pub fn potential_of_density(rho: &RadialField) -> Potential {
    let grid = rho.grid();
    let n = grid.n();
    let h = grid.h();
    let r = grid.nodes();
    let inner: Vec<f64> = (0..=n).map(|i| 4.0 * PI * r[i] * r[i] * rho.values()[i]).collect();
    let outer: Vec<f64> = (0..=n).map(|i| 4.0 * PI * r[i] * rho.values()[i]).collect();
    let q = cumulative(&inner, h);
    let p_cum = cumulative(&outer, h);
    let p_total = p_cum[n];
    let phi: Vec<f64> = (0..=n)
        .map(|i| {
            let tail = p_total - p_cum[i];
            if i == 0 {
                tail
            } else {
                q[i] / r[i] + tail
            }
        })
        .collect();
    Potential { phi: RadialField::from_raw(grid, phi), total_charge: q[n] }
}

pub fn solve_phi(s: &StatePair) -> Potential {
    let rho = RadialField::from_raw(s.grid(), density(s));
    potential_of_density(&rho)
}

/// Simpson value of `∫(u² + v²)φ`.
pub fn coulomb_energy(s: &StatePair, p: &Potential) -> Result<f64> {
    if s.grid() != p.phi.grid() {
        return Err(Error::Domain("potential and pair live on different grids".into()));
    }
    let rho = RadialField::from_raw(s.grid(), density(s));
    radial::inner(&rho, &p.phi)
}

/// `‖∇φ‖₂²` over all of ℝ³: the grid part plus the exterior
/// `4πQ²/r_max` of the exact point-charge tail.
pub fn field_energy(p: &Potential) -> f64 {
    let g = p.phi.grid();
    grad_norm_sq(&p.phi) + 4.0 * PI * p.total_charge.powi(2) / g.r_max()
}

/// Relative defect of `‖∇φ‖₂² = 4π∫ρφ`.
pub fn identity_defect(s: &StatePair, p: &Potential) -> Result<f64> {
    let lhs = field_energy(p);
    let rhs = 4.0 * PI * coulomb_energy(s, p)?;
    Ok(if lhs == 0.0 { rhs.abs() } else { (lhs - rhs).abs() / lhs })
}

/// Gaussian elimination without pivoting on a banded matrix stored by rows:
/// `band[i][k]` is entry `(i, i + k − w)`. Fine for the positive definite
/// systems built here.
fn solve_banded(mut band: Vec<Vec<f64>>, w: usize, mut rhs: Vec<f64>) -> Vec<f64> {
    let m = band.len();
    for k in 0..m {
        let piv = band[k][w];
        assert!(piv != 0.0, "singular banded system");
        for i in k + 1..(k + w + 1).min(m) {
            let l = band[i][w + k - i] / piv;
            if l == 0.0 {
                continue;
            }
            for j in k..(k + w + 1).min(m) {
                band[i][w + j - i] -= l * band[k][w + j - k];
            }
            rhs[i] -= l * rhs[k];
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let mut acc = rhs[k];
        for j in k + 1..(k + w + 1).min(m) {
            acc -= band[k][w + j - k] * x[j];
        }
        x[k] = acc / band[k][w];
    }
    x
}

/// The matrix of `−h² W″` on `W_1..W_n` with `W_0 = 0`, odd reflection at the
/// origin and even reflection at `r_max`, last row halved so it is symmetric.
fn poisson_band(n: usize, coef: &[f64]) -> Vec<Vec<f64>> {
    let w = coef.len() - 1;
    let mut band = vec![vec![0.0; 2 * w + 1]; n];
    let (ni, wi) = (n as isize, w as isize);
    for i in 1..=ni {
        for off in -wi..=wi {
            let c = coef[off.unsigned_abs()];
            let mut col = i + off;
            let mut sign = 1.0;
            if col < 0 {
                col = -col;
                sign = -1.0;
            } else if col > ni {
                col = 2 * ni - col;
            }
            if col == 0 {
                continue;
            }
            band[(i - 1) as usize][(col - i + wi) as usize] += sign * c;
        }
    }
    for x in band[n - 1].iter_mut() {
        *x *= 0.5;
    }
    band
}

/// Potential of the interior density `ρ` from the discretization of
/// `−W″ = 4πrρ`, `W = rφ`, with `W(0) = 0` and `W′(r_max) = 0` (the exterior
/// field of the enclosed charge), using the kinetic stencil. The map
/// `ρ ↦ φ = G M ρ` has `G` symmetric, so `Σ m_i ρ_i φ_i` has gradient
/// `2 m_i φ_i` in `ρ`. Boundary densities are ignored.
pub(crate) fn lumped_potential(grid: RadialGrid, rho: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let h = grid.h();
    let rhs: Vec<f64> = (1..=n)
        .map(|i| if i == n { 0.0 } else { h * h * 4.0 * PI * grid.r(i) * rho[i] })
        .collect();
    let coef = grid.stencil().coefficients();
    let w = solve_banded(poisson_band(n, coef), coef.len() - 1, rhs);
    let mut phi = vec![0.0; n + 1];
    for i in 1..=n {
        phi[i] = w[i - 1] / grid.r(i);
    }
    phi[0] = (4.0 * phi[1] - phi[2]) / 3.0;
    phi
}

#[cfg(test)]
mod tests {
    use super::*;

    use libm::erf;
    use crate::radial::Stencil;

    #[test]
    fn zero_density() {
        let g = RadialGrid::new(128, 5.0).unwrap();
        let s = StatePair::zeros(g);
        let p = solve_phi(&s);
        assert!(p.phi.is_zero());
        assert_eq!(coulomb_energy(&s, &p).unwrap(), 0.0);
    }

    #[test]
    fn uniform_ball() {
        let g = RadialGrid::new(4096, 2.0).unwrap();
        let u = RadialField::from_fn(g, |r| {
            if r < 1.0 {
                1.0
            } else if r == 1.0 {
                0.5_f64.sqrt()
            } else {
                0.0
            }
        })
        .unwrap();
        let s = StatePair::new(u, RadialField::zeros(g)).unwrap();
        let p = solve_phi(&s);
        assert!((p.phi.values()[0] - 2.0 * PI).abs() / (2.0 * PI) < 1e-6);
        for i in 0..g.len() {
            let r = g.r(i);
            if r >= 1.0 + 2.0 * g.h() {
                let exact = 4.0 * PI / 3.0 / r;
                let rel = (p.phi.values()[i] - exact).abs() / exact;
                assert!(rel < 1e-6, "r = {r}: {rel}");
            }
        }
        let e = coulomb_energy(&s, &p).unwrap();
        let exact = 32.0 * PI * PI / 15.0;
        assert!((e - exact).abs() / exact < 1e-5, "{e}");
    }

    #[test]
    fn gaussian_potential() {
        let g = RadialGrid::new(4096, 10.0).unwrap();
        let u = RadialField::from_fn(g, |r| (-0.5 * r * r).exp()).unwrap();
        let s = StatePair::new(u, RadialField::zeros(g)).unwrap();
        let p = solve_phi(&s);
        let c = PI.powf(1.5);
        for i in 0..g.len() {
            let r = g.r(i);
            let exact = if r == 0.0 { 2.0 * PI } else { c * erf(r) / r };
            let rel = (p.phi.values()[i] - exact).abs() / exact;
            assert!(rel < 1e-6, "r = {r}: {rel}");
        }
        assert!(p.far_field_error() <= FAR_TOL * p.total_charge);
        assert!(identity_defect(&s, &p).unwrap() < CROSS_TOL);
    }

    #[test]
    fn swap_symmetry_exact() {
        let g = RadialGrid::new(256, 10.0).unwrap();
        let u = RadialField::from_fn(g, |r| (-r).exp()).unwrap();
        let v = RadialField::from_fn(g, |r| (-0.5 * r * r).exp()).unwrap();
        let s = StatePair::new(u, v).unwrap();
        let e1 = coulomb_energy(&s, &solve_phi(&s)).unwrap();
        let t = s.swapped();
        let e2 = coulomb_energy(&t, &solve_phi(&t)).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn poisson_residual_second_order() {
        let defect = |n: usize| {
            let g = RadialGrid::new(n, 12.0).unwrap();
            let u = RadialField::from_fn(g, |r| (-0.5 * r * r).exp()).unwrap();
            let s = StatePair::new(u.clone(), RadialField::zeros(g)).unwrap();
            let p = solve_phi(&s);
            let h = g.h();
            let w: Vec<f64> = (0..g.len()).map(|i| g.r(i) * p.phi.values()[i]).collect();
            let mut worst = 0.0_f64;
            for i in 1..g.n() {
                let lap = (2.0 * w[i] - w[i - 1] - w[i + 1]) / (g.r(i) * h * h);
                let rho = u.values()[i].powi(2);
                worst = worst.max((lap - 4.0 * PI * rho).abs());
            }
            worst
        };
        let (e1, e2) = (defect(512), defect(1024));
        assert!(e2 < 1e-3 * 4.0 * PI);
        assert!((3.5..4.5).contains(&(e1 / e2)), "{}", e1 / e2);
    }

    #[test]
    fn lumped_potential_matches_cumulative_rule() {
        let g = RadialGrid::new(2048, 12.0).unwrap();
        let u = RadialField::from_fn(g, |r| (-0.5 * r * r).exp()).unwrap();
        let rho: Vec<f64> = u.values().iter().map(|x| x * x).collect();
        let mut interior = rho.clone();
        interior[0] = 0.0;
        let lumped = lumped_potential(g, &interior);
        let exact = solve_phi(&StatePair::new(u, RadialField::zeros(g)).unwrap());
        for i in 1..g.n() {
            let rel = (lumped[i] - exact.phi.values()[i]).abs() / exact.phi.values()[i];
            assert!(rel < 1e-7, "node {i}: {rel}");
        }
    }

    #[test]
    fn poisson_band_is_symmetric() {
        for stencil in [Stencil::Second, Stencil::Twelfth] {
            let coef = stencil.coefficients();
            let w = coef.len() - 1;
            let band = poisson_band(64, coef);
            for i in 0..64 {
                for k in 1..=w {
                    if i + k < 64 {
                        assert_eq!(band[i][w + k], band[i + k][w - k], "row {i} offset {k}");
                    }
                }
            }
        }
    }
}
