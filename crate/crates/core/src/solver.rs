//! Ground states by minimization of the projected level
//! `Ψ(s) = max_t I(γ_s(t))`, followed by a Newton polish on `∇I = 0`.
//!
//! The descent stage works on `Ψ` evaluated from the breakdown, which is
//! exact in `t`; its gradient follows from the envelope theorem,
//! `∇Ψ = t ∇μ + t³ ∇ν − t^p ∇σ` at `t = t*(s)`. With `proj_each_step` the
//! iterate is dilated onto the constraint before each step, so `t* ≈ 1` and
//! `∇Ψ ≈ ∇I`. The polish stage solves `H δ = −∇I` with preconditioned MINRES.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    h1_norm_sq, lumped_dot, precond_norm, signed_pow, EnergyBreakdown, Functional, ModelParams,
    Residuals,
};
use crate::error::{Error, Result};
use crate::hbeta::h_max;
use crate::krylov::minres;
use crate::manifold::{critical_t, dilate, PathCoefficients};
use crate::radial::{
    enforce_boundary, helmholtz_solve_values, neg_laplacian_values, RadialField, RadialGrid,
    StatePair,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Convergence: preconditioned gradient norm ≤ `tol_grad · (a+b+c+d)`.
    pub tol_grad: f64,
    pub proj_each_step: bool,
    pub max_iter: usize,
    pub step0: f64,
    pub backtrack: f64,
    pub multi_start: usize,
    pub grid: RadialGrid,
    /// Component-norm ratio above which a state counts as vectorial.
    pub vec_tol: f64,
    /// Convergence: `|J| ≤ proj_tol · (a+b+c+d)`.
    pub proj_tol: f64,
    /// Run the Newton stage after descent.
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_grad: 1e-6,
            proj_each_step: true,
            max_iter: 5000,
            step0: 0.5,
            backtrack: 0.5,
            multi_start: 3,
            grid: RadialGrid::default(),
            vec_tol: 1e-12,
            proj_tol: 1e-3,
            polish: true,
        }
    }
}

impl SolverConfig {
    pub fn with_grid(grid: RadialGrid) -> Self {
        SolverConfig { grid, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_grad", self.tol_grad),
            ("step0", self.step0),
            ("vec_tol", self.vec_tol),
            ("proj_tol", self.proj_tol),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} = {x} must be positive")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParams(format!(
                "backtrack = {} must lie in (0, 1)",
                self.backtrack
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParams("max_iter must be ≥ 1".into()));
        }
        if self.multi_start == 0 {
            return Err(Error::InvalidParams("multi_start must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Semitrivial,
    Vectorial,
    Trivial,
}

#[derive(Debug, Clone)]
pub enum Init {
    Symmetric,
    Asymmetric,
    AngleSeeded,
    Custom { pair: StatePair, tag: String },
}

impl Init {
    pub fn tag(&self) -> String {
        match self {
            Init::Symmetric => "symmetric".into(),
            Init::Asymmetric => "asymmetric".into(),
            Init::AngleSeeded => "angle-seeded".into(),
            Init::Custom { tag, .. } => format!("custom:{tag}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateResult {
    #[serde(skip)]
    pub pair: StatePair,
    pub params: Functional,
    pub grid: RadialGrid,
    pub level: f64,
    pub breakdown: EnergyBreakdown,
    pub residuals: Residuals,
    pub classification: Classification,
    /// `min/max` of the component `L²` norms.
    pub component_ratio: f64,
    /// Dilation applied by the last projection.
    pub t_final: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    pub converged: bool,
    pub init_tag: String,
    pub runtime_s: f64,
    /// Projected level after each accepted descent step.
    #[serde(skip)]
    pub history: Vec<f64>,
}

impl Default for StatePair {
    fn default() -> Self {
        StatePair::zeros(RadialGrid::default())
    }
}

impl GroundStateResult {
    pub fn scale(&self) -> f64 {
        self.breakdown.scale()
    }

    /// `‖(u, v)‖_H`.
    pub fn h_norm(&self) -> f64 {
        (h1_norm_sq(&self.pair.u) + h1_norm_sq(&self.pair.v)).sqrt()
    }

    /// Recomputes breakdown, level and residuals from `pair`.
    pub fn refresh(&mut self) {
        let bd = self.params.breakdown(&self.pair);
        self.breakdown = bd;
        self.level = bd.energy(self.params.q);
        self.residuals = self.params.residuals(&self.pair);
    }
}

fn mass(grid: RadialGrid, f: &[f64]) -> f64 {
    let m = grid.mass_weights();
    (1..grid.n()).map(|i| m[i] * f[i] * f[i]).sum()
}

fn l2_norms(s: &StatePair) -> (f64, f64) {
    let g = s.grid();
    (mass(g, s.u.values()).sqrt(), mass(g, s.v.values()).sqrt())
}

/// `min/max` of the component `L²` norms, 0 for the zero pair.
pub fn component_ratio(s: &StatePair) -> f64 {
    let (a, b) = l2_norms(s);
    let hi = a.max(b);
    if hi == 0.0 {
        0.0
    } else {
        a.min(b) / hi
    }
}

/// Trivial below `1e−10` in `L²`; vectorial when the norm ratio exceeds `vec_tol`.
pub fn classify_pair(s: &StatePair, vec_tol: f64) -> Classification {
    let (a, b) = l2_norms(s);
    if a.max(b) < 1e-10 {
        Classification::Trivial
    } else if a.min(b) / a.max(b) > vec_tol {
        Classification::Vectorial
    } else {
        Classification::Semitrivial
    }
}

/// Gradient pieces of each breakdown term at node `i`, for one component.
struct Pieces {
    /// `∇(b/2)`
    mass: Vec<f64>,
    /// `∇(a/2 + c/4)`
    cubic: Vec<f64>,
    /// `∇(d/2q)`
    power: Vec<f64>,
}

fn pieces(f: &Functional, grid: RadialGrid, x: &[f64], other: &[f64], phi: &[f64]) -> Pieces {
    let n = grid.n();
    let mut cubic = vec![0.0; n + 1];
    neg_laplacian_values(grid, x, &mut cubic);
    let mut mass = vec![0.0; n + 1];
    let mut power = vec![0.0; n + 1];
    for i in 1..n {
        mass[i] = x[i];
        cubic[i] += f.lambda * phi[i] * x[i];
        let mut p = f.kappa * signed_pow(x[i], 2.0 * f.q - 1.0);
        if f.beta != 0.0 {
            p += f.beta * other[i].abs().powf(f.q) * signed_pow(x[i], f.q - 1.0);
        }
        power[i] = p;
    }
    Pieces { mass, cubic, power }
}

struct Stage<'a> {
    f: Functional,
    grid: RadialGrid,
    cfg: &'a SolverConfig,
    frozen: [bool; 2],
}

struct Measured {
    bd: EnergyBreakdown,
    t: f64,
    level: f64,
    phi: Vec<f64>,
}

/// Dilation is re-applied to the iterate only once `t*` drifts this far
/// from 1; between re-applications the level is projected exactly in `t`.
const DRIFT: f64 = 1e-2;

/// Ratio below which a component is treated as extinct where that is safe.
const FREEZE_RATIO: f64 = 1e-6;

impl Stage<'_> {
    fn measure(&self, u: &[f64], v: &[f64]) -> Result<Measured> {
        let ev = self.f.evaluate(self.grid, u, v);
        let bd = ev.split.breakdown();
        let c = PathCoefficients::from_breakdown(&bd, self.f.q);
        let t = critical_t(&c)?;
        Ok(Measured { bd, t, level: c.value(t), phi: ev.phi })
    }

    /// A component may be dropped when nothing can regrow it: without
    /// coupling, or when the coupling is superlinear in it (`q ≥ 2`).
    fn may_freeze(&self) -> bool {
        self.f.beta == 0.0 || self.f.q >= 2.0
    }

    fn try_freeze(&mut self, u: &mut [f64], v: &mut [f64]) {
        let (mu, mv) = (mass(self.grid, u).sqrt(), mass(self.grid, v).sqrt());
        let hi = mu.max(mv);
        for (k, (x, norm)) in [(&mut *u, mu), (&mut *v, mv)].into_iter().enumerate() {
            if !self.frozen[k] && (norm == 0.0 || (self.may_freeze() && norm < FREEZE_RATIO * hi)) {
                x.iter_mut().for_each(|e| *e = 0.0);
                self.frozen[k] = true;
            }
        }
    }

    fn envelope_gradient(&self, u: &[f64], v: &[f64], m: &Measured) -> (Vec<f64>, Vec<f64>) {
        let t = m.t;
        let t3 = t * t * t;
        let tp = t.powf(4.0 * self.f.q - 3.0);
        let one = |x: &[f64], y: &[f64], frozen: bool| {
            if frozen {
                return vec![0.0; x.len()];
            }
            let p = pieces(&self.f, self.grid, x, y, &m.phi);
            (0..x.len()).map(|i| t * p.mass[i] + t3 * p.cubic[i] - tp * p.power[i]).collect()
        };
        (one(u, v, self.frozen[0]), one(v, u, self.frozen[1]))
    }

    /// Preconditioned descent on Ψ. Returns the number of accepted steps.
    fn descend(
        &mut self,
        u: &mut Vec<f64>,
        v: &mut Vec<f64>,
        switch_tol: f64,
        history: &mut Vec<f64>,
    ) -> Result<usize> {
        let grid = self.grid;
        let mut iters = 0;
        let mut stalls = 0;
        while iters < self.cfg.max_iter {
            let mut m = self.measure(u, v)?;
            if self.cfg.proj_each_step && (m.t - 1.0).abs() > DRIFT {
                let s = dilate(&pair_of(grid, u, v), m.t)?;
                *u = s.u.into_values();
                *v = s.v.into_values();
                self.zero_frozen(u, v);
                m = self.measure(u, v)?;
            }
            if iters % 50 == 49 {
                self.try_freeze(u, v);
                m = self.measure(u, v)?;
            }
            let (gu, gv) = self.envelope_gradient(u, v, &m);
            let pu = helmholtz_solve_values(grid, &gu);
            let pv = helmholtz_solve_values(grid, &gv);
            let gn2 = lumped_dot(grid, &gu, &pu, &gv, &pv).max(0.0);
            if gn2.sqrt() <= switch_tol * m.bd.scale() {
                break;
            }
            let mut alpha = self.cfg.step0;
            let mut accepted = None;
            while alpha > 1e-12 {
                let mut tu: Vec<f64> = u.iter().zip(&pu).map(|(a, b)| a - alpha * b).collect();
                let mut tv: Vec<f64> = v.iter().zip(&pv).map(|(a, b)| a - alpha * b).collect();
                enforce_boundary(grid, &mut tu);
                enforce_boundary(grid, &mut tv);
                self.zero_frozen(&mut tu, &mut tv);
                if let Ok(trial) = self.measure(&tu, &tv) {
                    if trial.level <= m.level - 1e-4 * alpha * gn2 {
                        accepted = Some((tu, tv, trial.level));
                        break;
                    }
                }
                alpha *= self.cfg.backtrack;
            }
            match accepted {
                Some((tu, tv, level)) => {
                    let gain = m.level - level;
                    *u = tu;
                    *v = tv;
                    history.push(level);
                    iters += 1;
                    if gain <= 1e-15 * level.abs() {
                        stalls += 1;
                        if stalls >= 20 {
                            break;
                        }
                    } else {
                        stalls = 0;
                    }
                }
                None => break,
            }
        }
        self.try_freeze(u, v);
        Ok(iters)
    }

    fn zero_frozen(&self, u: &mut [f64], v: &mut [f64]) {
        if self.frozen[0] {
            u.iter_mut().for_each(|e| *e = 0.0);
        }
        if self.frozen[1] {
            v.iter_mut().for_each(|e| *e = 0.0);
        }
    }

    fn free_gradient(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
        let ev = self.f.evaluate(self.grid, u, v);
        let (mut gu, mut gv) = self.f.gradient_values(self.grid, u, v, &ev.phi);
        self.zero_frozen(&mut gu, &mut gv);
        let gn = precond_norm(self.grid, &gu, &gv);
        (gu, gv, ev.phi, gn)
    }

    /// Newton on `∇I = 0` with the active components as unknowns.
    fn polish(&self, u: &mut Vec<f64>, v: &mut Vec<f64>) -> usize {
        let grid = self.grid;
        let n = grid.n();
        let k = n - 1;
        let m = grid.mass_weights();
        let (mut gu, mut gv, mut phi, mut gn) = self.free_gradient(u, v);
        let mut steps = 0;
        let mut size = mass(grid, u) + mass(grid, v);
        for _ in 0..40 {
            let scale = self.f.breakdown(&pair_of(grid, u, v)).scale();
            if gn <= 1e-14 * scale {
                break;
            }
            // Euclidean-symmetric form: mass-weighted Hessian, preconditioner
            // (M(−Δ+1))⁻¹.
            let pack = |a: &[f64], b: &[f64]| -> Vec<f64> {
                let mut out = Vec::with_capacity(2 * k);
                out.extend((1..n).map(|i| m[i] * a[i]));
                out.extend((1..n).map(|i| m[i] * b[i]));
                out
            };
            let unpack = |x: &[f64]| -> (Vec<f64>, Vec<f64>) {
                let mut a = vec![0.0; n + 1];
                let mut b = vec![0.0; n + 1];
                a[1..n].copy_from_slice(&x[..k]);
                b[1..n].copy_from_slice(&x[k..]);
                if self.frozen[0] {
                    a.iter_mut().for_each(|e| *e = 0.0);
                }
                if self.frozen[1] {
                    b.iter_mut().for_each(|e| *e = 0.0);
                }
                (a, b)
            };
            let (uu, vv, ph) = (&*u, &*v, &phi);
            let apply = |x: &[f64]| {
                let (du, dv) = unpack(x);
                let (mut hu, mut hv) = self.f.hessian_apply(grid, uu, vv, ph, &du, &dv);
                self.zero_frozen(&mut hu, &mut hv);
                pack(&hu, &hv)
            };
            let precond = |y: &[f64]| {
                let mut a = vec![0.0; n + 1];
                let mut b = vec![0.0; n + 1];
                for i in 1..n {
                    a[i] = y[i - 1] / m[i];
                    b[i] = y[k + i - 1] / m[i];
                }
                let (mut pa, mut pb) =
                    (helmholtz_solve_values(grid, &a), helmholtz_solve_values(grid, &b));
                self.zero_frozen(&mut pa, &mut pb);
                let mut out = Vec::with_capacity(2 * k);
                out.extend_from_slice(&pa[1..n]);
                out.extend_from_slice(&pb[1..n]);
                out
            };
            let rhs: Vec<f64> = pack(&gu, &gv).into_iter().map(|x| -x).collect();
            let (delta, _) = minres(apply, precond, &rhs, 1e-11, 2000);
            let (du, dv) = unpack(&delta);
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..10 {
                let mut tu: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + alpha * b).collect();
                let mut tv: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a + alpha * b).collect();
                enforce_boundary(grid, &mut tu);
                enforce_boundary(grid, &mut tv);
                self.zero_frozen(&mut tu, &mut tv);
                // far from a nontrivial critical point Newton may head for 0
                let tsize = mass(grid, &tu) + mass(grid, &tv);
                if !(tsize > 0.5 * size && tsize < 2.0 * size) {
                    alpha *= 0.5;
                    continue;
                }
                let (tgu, tgv, tphi, tgn) = self.free_gradient(&tu, &tv);
                if tgn < gn {
                    size = tsize;
                    *u = tu;
                    *v = tv;
                    gu = tgu;
                    gv = tgv;
                    phi = tphi;
                    gn = tgn;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
            steps += 1;
        }
        steps
    }
}

fn pair_of(grid: RadialGrid, u: &[f64], v: &[f64]) -> StatePair {
    StatePair {
        u: RadialField::from_raw(grid, u.to_vec()),
        v: RadialField::from_raw(grid, v.to_vec()),
    }
}

/// Runs one start to completion.
fn run(f: Functional, cfg: &SolverConfig, start: &StatePair, tag: String) -> Result<GroundStateResult> {
    let clock = Instant::now();
    let grid = start.grid();
    if start.is_zero() {
        return Err(Error::DegeneratePair("initial pair is zero".into()));
    }
    let mut u = start.u.values().to_vec();
    let mut v = start.v.values().to_vec();
    enforce_boundary(grid, &mut u);
    enforce_boundary(grid, &mut v);
    let mut stage = Stage { f, grid, cfg, frozen: [false, false] };
    stage.try_freeze(&mut u, &mut v);
    let mut history = Vec::new();
    let mut switch = if cfg.polish { 1e-3 } else { cfg.tol_grad };
    let mut iterations = 0;
    let mut newton_iterations = 0;
    loop {
        iterations += stage.descend(&mut u, &mut v, switch, &mut history)?;
        if !cfg.polish {
            break;
        }
        newton_iterations += stage.polish(&mut u, &mut v);
        let (.., gn) = stage.free_gradient(&u, &v);
        let scale = stage.f.breakdown(&pair_of(grid, &u, &v)).scale();
        // Newton did not take hold: descend further before trying again
        if gn <= cfg.tol_grad * scale || switch <= cfg.tol_grad || iterations >= cfg.max_iter {
            break;
        }
        switch = (switch * 1e-2).max(cfg.tol_grad);
    }
    let m = stage.measure(&u, &v)?;
    let mut pair = pair_of(grid, &u, &v).abs();
    let mut t_final = 1.0;
    if !cfg.polish && cfg.proj_each_step {
        pair = dilate(&pair, m.t)?;
        t_final = m.t;
    } else if cfg.polish {
        t_final = m.t;
    }
    let mut result = GroundStateResult {
        classification: classify_pair(&pair, cfg.vec_tol),
        component_ratio: component_ratio(&pair),
        pair,
        params: f,
        grid,
        level: 0.0,
        breakdown: EnergyBreakdown::default(),
        residuals: Residuals::default(),
        t_final,
        iterations,
        newton_iterations,
        converged: false,
        init_tag: tag,
        runtime_s: 0.0,
        history,
    };
    result.refresh();
    let scale = result.scale();
    result.converged = result.residuals.grad_norm <= cfg.tol_grad * scale
        && result.residuals.j.abs() <= cfg.proj_tol * scale
        && result.level > 0.0;
    result.runtime_s = clock.elapsed().as_secs_f64();
    Ok(result)
}

fn gaussian(grid: RadialGrid) -> RadialField {
    RadialField::from_fn(grid, |r| (-0.5 * r * r).exp()).expect("finite")
}

fn start_pair(init: &Init, q: f64, beta: f64, grid: RadialGrid) -> Result<StatePair> {
    let g = gaussian(grid);
    Ok(match init {
        Init::Symmetric => StatePair { u: g.clone(), v: g },
        Init::Asymmetric => StatePair { u: g.clone(), v: g.scaled(0.05) },
        Init::AngleSeeded => {
            let (y, _) = h_max(q, beta)?;
            StatePair { u: g.scaled(y.sqrt()), v: g.scaled((1.0 - y).sqrt()) }
        }
        Init::Custom { pair, .. } => {
            if pair.grid() != grid {
                return Err(Error::GridMismatch);
            }
            pair.clone()
        }
    })
}

fn pick_best(results: Vec<Result<GroundStateResult>>) -> Result<GroundStateResult> {
    let mut errors = Vec::new();
    let mut best: Option<GroundStateResult> = None;
    let mut fallback: Option<GroundStateResult> = None;
    for r in results {
        match r {
            Ok(res) if res.converged => {
                if best.as_ref().map_or(true, |b| res.level < b.level) {
                    best = Some(res);
                }
            }
            Ok(res) => {
                errors.push(format!("{}: unconverged (grad {:.3e})", res.init_tag, res.residuals.grad_norm));
                if fallback.as_ref().map_or(true, |b| res.residuals.grad_norm < b.residuals.grad_norm) {
                    fallback = Some(res);
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    match (best, fallback) {
        (Some(b), _) => Ok(b),
        (None, Some(mut f)) => {
            f.init_tag = format!("{} [{}]", f.init_tag, errors.join("; "));
            Ok(f)
        }
        (None, None) => Err(Error::Unconverged(errors.join("; "))),
    }
}

/// Scalar ground state of `½‖∇u‖² + ½‖u‖² + (Λ/4)∫φ_u u² − (κ/2q)‖u‖^{2q}`.
/// The returned pair has `v ≡ 0`.
pub fn solve_scalar(lambda: f64, kappa: f64, q: f64, cfg: &SolverConfig) -> Result<GroundStateResult> {
    cfg.validate()?;
    crate::energy::check_solver_q(q)?;
    let f = Functional::scalar(lambda, kappa, q)?;
    let start = StatePair { u: gaussian(cfg.grid), v: RadialField::zeros(cfg.grid) };
    run(f, cfg, &start, "scalar".into())
}

/// Two-component ground state: the lowest converged level over `init` and
/// up to `multi_start − 1` further starts from the menu.
pub fn solve_system(p: &ModelParams, cfg: &SolverConfig, init: &Init) -> Result<GroundStateResult> {
    cfg.validate()?;
    p.validate_solver()?;
    let f = Functional::from(*p);
    let mut inits = vec![init.clone()];
    for extra in [Init::AngleSeeded, Init::Asymmetric, Init::Symmetric] {
        if inits.len() >= cfg.multi_start {
            break;
        }
        if extra.tag() != init.tag() {
            inits.push(extra);
        }
    }
    let results: Vec<Result<GroundStateResult>> = inits
        .par_iter()
        .map(|i| {
            let start = start_pair(i, p.q, p.beta, cfg.grid)?;
            run(f, cfg, &start, i.tag())
        })
        .collect();
    pick_best(results)
}

/// Constant-angle candidate: the scalar ground state with `κ = max h`,
/// lifted to `(ρ√y, ρ√(1−y))`.
pub fn solve_reduced(p: &ModelParams, cfg: &SolverConfig) -> Result<GroundStateResult> {
    p.validate_solver()?;
    let (y, hmax) = h_max(p.q, p.beta)?;
    let scalar = solve_scalar(p.lambda, hmax, p.q, cfg)?;
    let rho = &scalar.pair.u;
    let pair = StatePair { u: rho.scaled(y.sqrt()), v: rho.scaled((1.0 - y).sqrt()) };
    let mut result = GroundStateResult {
        classification: classify_pair(&pair, cfg.vec_tol),
        component_ratio: component_ratio(&pair),
        pair,
        params: Functional::from(*p),
        init_tag: format!("reduced:y={y:.17e}"),
        ..scalar
    };
    result.refresh();
    Ok(result)
}

/// `min(‖(u−w, v)‖_H, ‖(u, v−w)‖_H)`.
pub fn dist_to_semitrivial(s: &StatePair, w: &RadialField) -> Result<f64> {
    if s.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    let a = h1_norm_sq(&s.u.combine(1.0, w, -1.0)?) + h1_norm_sq(&s.v);
    let b = h1_norm_sq(&s.u) + h1_norm_sq(&s.v.combine(1.0, w, -1.0)?);
    Ok(a.min(b).sqrt())
}
