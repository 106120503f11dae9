//! The energy functional, its constraint, the identity residuals and the
//! first and second variations.
//!
//! All quantities come from one discretization (lumped trapezoid mass,
//! `w = r·u` kinetic form, symmetric Coulomb kernel) so that
//! [`Functional::gradient`] is the exact gradient of [`Functional::energy`]
//! with respect to the lumped inner product `⟨f, g⟩ = Σ m_i f_i g_i`.

use serde::{Deserialize, Serialize};

use crate::coulomb::lumped_potential;
use crate::error::{Error, Result};
use crate::radial::{
    compensated_sum, dirichlet_form_values, helmholtz_solve_values, neg_laplacian_values,
    RadialField, RadialGrid, StatePair,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub q: f64,
    pub lambda: f64,
    pub beta: f64,
}

impl ModelParams {
    /// Diagnostic range: `q > 1`, `λ ≥ 0`, `β ≥ 0`.
    pub fn new(q: f64, lambda: f64, beta: f64) -> Result<Self> {
        let p = ModelParams { q, lambda, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0 && self.q.is_finite()) {
            return Err(Error::InvalidParams(format!("q = {} must exceed 1", self.q)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParams(format!("lambda = {} must be ≥ 0", self.lambda)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams(format!("beta = {} must be ≥ 0", self.beta)));
        }
        Ok(())
    }

    /// Solver range: `3/2 < q < 3`, `λ > 0`.
    pub fn validate_solver(&self) -> Result<()> {
        self.validate()?;
        check_solver_q(self.q)?;
        if self.lambda <= 0.0 {
            return Err(Error::InvalidParams("solver requires lambda > 0".into()));
        }
        Ok(())
    }
}

pub(crate) fn check_solver_q(q: f64) -> Result<()> {
    if !(q > 1.5 && q < 3.0) {
        return Err(Error::InvalidParams(format!("q = {q} outside (3/2, 3)")));
    }
    Ok(())
}

/// `½‖∇u‖² + ½‖u‖² + (λ/4)∫φu² − (κ/2q)(‖u‖^{2q} + ‖v‖^{2q}) − (β/q)∫|u|^q|v|^q`
/// summed over both components. `κ = 1` is the system; `v ≡ 0` with general
/// `(λ, κ)` is the scalar problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub q: f64,
    pub lambda: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl From<ModelParams> for Functional {
    fn from(p: ModelParams) -> Self {
        Functional { q: p.q, lambda: p.lambda, beta: p.beta, kappa: 1.0 }
    }
}

impl Functional {
    pub fn scalar(lambda: f64, kappa: f64, q: f64) -> Result<Self> {
        ModelParams::new(q, lambda, 0.0)?;
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParams(format!("kappa = {kappa} must be positive")));
        }
        Ok(Functional { q, lambda, beta: 0.0, kappa })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl EnergyBreakdown {
    pub fn scale(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    pub fn energy(&self, q: f64) -> f64 {
        compensated_sum([self.a / 2.0, self.b / 2.0, self.c / 4.0, -self.d / (2.0 * q)])
    }

    pub fn constraint_j(&self, q: f64) -> f64 {
        compensated_sum([
            1.5 * self.a,
            0.5 * self.b,
            0.75 * self.c,
            -(4.0 * q - 3.0) / (2.0 * q) * self.d,
        ])
    }

    /// `a + b + c − d`, the sum of both Nehari residuals.
    pub fn nehari_sum(&self) -> f64 {
        compensated_sum([self.a, self.b, self.c, -self.d])
    }

    pub fn pohozaev(&self, q: f64) -> f64 {
        compensated_sum([0.5 * self.a, 1.5 * self.b, 1.25 * self.c, -3.0 / (2.0 * q) * self.d])
    }

    pub fn nonexistence(&self, q: f64) -> f64 {
        compensated_sum([
            (1.0 - q / 3.0) * self.a,
            (1.0 - q) * self.b,
            (1.0 - 5.0 * q / 6.0) * self.c,
        ])
    }
}

/// Per-component pieces of the breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComponentSplit {
    pub kinetic: [f64; 2],
    pub mass: [f64; 2],
    /// `λ∫u²φ`, `λ∫v²φ`.
    pub coulomb: [f64; 2],
    /// `κ‖u‖^{2q}`, `κ‖v‖^{2q}`.
    pub power: [f64; 2],
    /// `β∫|u|^q|v|^q`.
    pub cross: f64,
}

impl ComponentSplit {
    pub fn breakdown(&self) -> EnergyBreakdown {
        EnergyBreakdown {
            a: self.kinetic[0] + self.kinetic[1],
            b: self.mass[0] + self.mass[1],
            c: self.coulomb[0] + self.coulomb[1],
            d: compensated_sum([self.power[0], self.power[1], 2.0 * self.cross]),
        }
    }

    pub fn nehari(&self) -> (f64, f64) {
        let r = |k: usize| {
            compensated_sum([
                self.kinetic[k],
                self.mass[k],
                self.coulomb[k],
                -self.power[k],
                -self.cross,
            ])
        };
        (r(0), r(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub nehari1: f64,
    pub nehari2: f64,
    pub pohozaev: f64,
    pub j: f64,
    pub nonexistence: f64,
    pub grad_norm: f64,
}

impl Residuals {
    /// Largest of the identity residuals relative to `scale` (gradient excluded).
    pub fn max_identity_relative(&self, scale: f64) -> f64 {
        [self.nehari1, self.nehari2, self.pohozaev, self.j, self.nonexistence]
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()))
            / scale
    }
}

/// `sign(x)|x|^e`.
#[inline]
pub(crate) fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// `|x|^e`, taken as 0 at `x = 0` even for `e < 0`.
#[inline]
fn guarded_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(e)
    }
}

/// The discrete state the functional acts on: interior node values of both
/// components plus the lumped potential of `u² + v²`.
pub(crate) struct Evaluated {
    pub split: ComponentSplit,
    pub phi: Vec<f64>,
}

impl Functional {
    pub fn params(&self) -> ModelParams {
        ModelParams { q: self.q, lambda: self.lambda, beta: self.beta }
    }

    pub(crate) fn evaluate(&self, grid: RadialGrid, u: &[f64], v: &[f64]) -> Evaluated {
        let n = grid.n();
        let m = grid.mass_weights();
        let rho: Vec<f64> = (0..=n)
            .map(|i| if i == 0 || i == n { 0.0 } else { u[i] * u[i] + v[i] * v[i] })
            .collect();
        let phi = lumped_potential(grid, &rho);
        let q = self.q;
        let interior = 1..n;
        let mass = |f: &[f64]| compensated_sum(interior.clone().map(|i| m[i] * f[i] * f[i]));
        let coul =
            |f: &[f64]| compensated_sum(interior.clone().map(|i| m[i] * f[i] * f[i] * phi[i]));
        let power =
            |f: &[f64]| compensated_sum(interior.clone().map(|i| m[i] * f[i].abs().powf(2.0 * q)));
        let cross = if self.beta == 0.0 {
            0.0
        } else {
            self.beta
                * compensated_sum(
                    interior.clone().map(|i| m[i] * (u[i].abs() * v[i].abs()).powf(q)),
                )
        };
        let split = ComponentSplit {
            kinetic: [dirichlet_form_values(grid, u), dirichlet_form_values(grid, v)],
            mass: [mass(u), mass(v)],
            coulomb: [self.lambda * coul(u), self.lambda * coul(v)],
            power: [self.kappa * power(u), self.kappa * power(v)],
            cross,
        };
        Evaluated { split, phi }
    }

    pub fn split(&self, s: &StatePair) -> ComponentSplit {
        self.evaluate(s.grid(), s.u.values(), s.v.values()).split
    }

    pub fn breakdown(&self, s: &StatePair) -> EnergyBreakdown {
        self.split(s).breakdown()
    }

    pub fn energy(&self, s: &StatePair) -> f64 {
        self.breakdown(s).energy(self.q)
    }

    /// Residuals of the identities; `grad_norm` is the preconditioned
    /// gradient norm `√⟨g, (−Δ+1)⁻¹g⟩`.
    pub fn residuals(&self, s: &StatePair) -> Residuals {
        let ev = self.evaluate(s.grid(), s.u.values(), s.v.values());
        let bd = ev.split.breakdown();
        let (n1, n2) = ev.split.nehari();
        let (gu, gv) = self.gradient_values(s.grid(), s.u.values(), s.v.values(), &ev.phi);
        Residuals {
            nehari1: n1,
            nehari2: n2,
            pohozaev: bd.pohozaev(self.q),
            j: bd.constraint_j(self.q),
            nonexistence: bd.nonexistence(self.q),
            grad_norm: precond_norm(s.grid(), &gu, &gv),
        }
    }

    pub(crate) fn gradient_values(
        &self,
        grid: RadialGrid,
        u: &[f64],
        v: &[f64],
        phi: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let n = grid.n();
        let q = self.q;
        let component = |f: &[f64], other: &[f64]| {
            let mut out = vec![0.0; n + 1];
            neg_laplacian_values(grid, f, &mut out);
            for i in 1..n {
                let x = f[i];
                let mut gi = out[i] + x + self.lambda * phi[i] * x
                    - self.kappa * signed_pow(x, 2.0 * q - 1.0);
                if self.beta != 0.0 {
                    gi -= self.beta * other[i].abs().powf(q) * signed_pow(x, q - 1.0);
                }
                out[i] = gi;
            }
            out
        };
        (component(u, v), component(v, u))
    }

    /// Gradient of the energy in the lumped `L²` inner product. Zero on the
    /// boundary nodes, which the discretization does not treat as unknowns.
    pub fn gradient(&self, s: &StatePair) -> StatePair {
        let ev = self.evaluate(s.grid(), s.u.values(), s.v.values());
        let (gu, gv) = self.gradient_values(s.grid(), s.u.values(), s.v.values(), &ev.phi);
        StatePair { u: RadialField::from_raw(s.grid(), gu), v: RadialField::from_raw(s.grid(), gv) }
    }

    /// Second variation applied to `(du, dv)`, lumped `L²` representation.
    pub(crate) fn hessian_apply(
        &self,
        grid: RadialGrid,
        u: &[f64],
        v: &[f64],
        phi: &[f64],
        du: &[f64],
        dv: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let n = grid.n();
        let q = self.q;
        let drho: Vec<f64> = (0..=n)
            .map(|i| if i == 0 || i == n { 0.0 } else { 2.0 * (u[i] * du[i] + v[i] * dv[i]) })
            .collect();
        let dphi = lumped_potential(grid, &drho);
        let component = |f: &[f64], df: &[f64], g: &[f64], dg: &[f64]| {
            let mut out = vec![0.0; n + 1];
            neg_laplacian_values(grid, df, &mut out);
            for i in 1..n {
                let x = f[i];
                let mut hi = out[i] + df[i] + self.lambda * (phi[i] * df[i] + dphi[i] * x)
                    - self.kappa * (2.0 * q - 1.0) * x.abs().powf(2.0 * q - 2.0) * df[i];
                if self.beta != 0.0 {
                    let y = g[i];
                    hi -= self.beta
                        * ((q - 1.0) * guarded_pow(x, q - 2.0) * y.abs().powf(q) * df[i]
                            + q * signed_pow(x, q - 1.0) * signed_pow(y, q - 1.0) * dg[i]);
                }
                out[i] = hi;
            }
            out
        };
        (component(u, du, v, dv), component(v, dv, u, du))
    }
}

/// `√⟨g, (−Δ+1)⁻¹ g⟩` in the lumped inner product.
pub(crate) fn precond_norm(grid: RadialGrid, gu: &[f64], gv: &[f64]) -> f64 {
    let pu = helmholtz_solve_values(grid, gu);
    let pv = helmholtz_solve_values(grid, gv);
    lumped_dot(grid, gu, &pu, gv, &pv).max(0.0).sqrt()
}

pub(crate) fn lumped_dot(grid: RadialGrid, a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let m = grid.mass_weights();
    compensated_sum((1..grid.n()).map(|i| m[i] * (a[i] * b[i] + c[i] * d[i])))
}

/// Lumped inner product of two pairs.
pub fn pair_dot(s: &StatePair, t: &StatePair) -> Result<f64> {
    if s.grid() != t.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(lumped_dot(s.grid(), s.u.values(), t.u.values(), s.v.values(), t.v.values()))
}

/// `‖f‖²_{H¹} = ‖∇f‖² + ‖f‖²` in the variational discretization.
pub fn h1_norm_sq(f: &RadialField) -> f64 {
    let g = f.grid();
    let m = g.mass_weights();
    dirichlet_form_values(g, f.values())
        + compensated_sum((1..g.n()).map(|i| m[i] * f.values()[i].powi(2)))
}

pub fn breakdown(s: &StatePair, p: &ModelParams) -> EnergyBreakdown {
    Functional::from(*p).breakdown(s)
}

pub fn energy_i(s: &StatePair, p: &ModelParams) -> f64 {
    Functional::from(*p).energy(s)
}

pub fn constraint_j(s: &StatePair, p: &ModelParams) -> f64 {
    breakdown(s, p).constraint_j(p.q)
}

pub fn nehari_residuals(s: &StatePair, p: &ModelParams) -> (f64, f64) {
    Functional::from(*p).split(s).nehari()
}

pub fn pohozaev_residual(s: &StatePair, p: &ModelParams) -> f64 {
    breakdown(s, p).pohozaev(p.q)
}

pub fn nonexistence_combination(s: &StatePair, p: &ModelParams) -> f64 {
    breakdown(s, p).nonexistence(p.q)
}

pub fn gradient_i(s: &StatePair, p: &ModelParams) -> StatePair {
    Functional::from(*p).gradient(s)
}

/// `(−Δ+1)⁻¹` applied componentwise to the gradient.
pub fn precond_gradient(s: &StatePair, p: &ModelParams) -> StatePair {
    let g = gradient_i(s, p);
    let grid = s.grid();
    StatePair {
        u: RadialField::from_raw(grid, helmholtz_solve_values(grid, g.u.values())),
        v: RadialField::from_raw(grid, helmholtz_solve_values(grid, g.v.values())),
    }
}

/// Scalar functional `½‖∇u‖² + ½‖u‖² + (Λ/4)∫φ_u u² − (κ/2q)‖u‖^{2q}`.
pub fn scalar_energy(u: &RadialField, lambda: f64, kappa: f64, q: f64) -> Result<f64> {
    let f = Functional::scalar(lambda, kappa, q)?;
    let s = StatePair { u: u.clone(), v: RadialField::zeros(u.grid()) };
    Ok(f.energy(&s))
}
