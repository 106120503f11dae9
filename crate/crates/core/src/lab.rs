//! Parameter sweeps over `(q, β)` and the limits `β → 0⁺`, `β → ∞`, with
//! the level checks each experiment is expected to show.
//!
//! Cells are independent solves and run on the rayon pool. Tables are plain
//! serializable rows; persistence is left to the caller.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{check_solver_q, Functional, ModelParams};
use crate::error::{Error, Result};
use crate::hbeta::{classify, threshold, HRegime};
use crate::manifold::{critical_t, path_zero, PathCoefficients};
use crate::radial::{RadialField, RadialGrid, StatePair};
use crate::solver::{
    dist_to_semitrivial, solve_reduced, solve_scalar, solve_system, Classification,
    GroundStateResult, Init, SolverConfig,
};

/// Half-width of the excluded band around the regime thresholds.
pub const THRESHOLD_BAND: f64 = 1e-2;

pub const DEFAULT_Q_GRID: [f64; 7] = [1.7, 1.8, 1.9, 2.0, 2.2, 2.5, 2.8];
pub const DEFAULT_BETA_GRID: [f64; 9] = [0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: f64,
    pub beta: f64,
    pub lambda: f64,
    /// `m_β` from the multi-start system solve.
    pub level: f64,
    /// `𝔫`, the scalar level at `(λ, κ = 1)`.
    pub scalar_level: f64,
    /// Level of the constant-angle lift.
    pub reduced_level: f64,
    /// `I(𝔷_β, 𝔷_β) = 2·level(2λ, 1+β)`.
    pub equal_level: f64,
    /// Domain radius the cell was solved on.
    pub r_max: f64,
    pub regime: String,
    pub classification: Classification,
    pub y_beta: f64,
    pub h_max: f64,
    pub ratio: f64,
    pub h_norm: f64,
    pub dist_semitrivial: f64,
    /// Largest identity residual over `a+b+c+d`.
    pub max_residual: f64,
    pub converged: bool,
    pub init_tag: String,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Agree,
    Disagree,
    Band,
    Unconverged,
}

/// Whether `β` lies within [`THRESHOLD_BAND`] of the threshold at `q`.
pub fn in_band(q: f64, beta: f64) -> bool {
    (beta - threshold(q)).abs() <= THRESHOLD_BAND
}

impl SweepRow {
    /// Vectorial or semitrivial, as predicted by the angular analysis.
    pub fn predicted(&self) -> Option<Classification> {
        let regime = classify(self.q, self.beta).ok()?;
        regime.predicts_vectorial().map(|v| {
            if v {
                Classification::Vectorial
            } else {
                Classification::Semitrivial
            }
        })
    }

    pub fn verdict(&self) -> Verdict {
        if !self.converged {
            return Verdict::Unconverged;
        }
        if in_band(self.q, self.beta) {
            return Verdict::Band;
        }
        match self.predicted() {
            Some(c) if c == self.classification => Verdict::Agree,
            Some(_) => Verdict::Disagree,
            None => Verdict::Band,
        }
    }

    /// `𝔫 − m_β`.
    pub fn gap(&self) -> f64 {
        self.scalar_level - self.level
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub skipped_band: usize,
    pub unconverged: usize,
}

impl Summary {
    pub fn of(rows: &[SweepRow]) -> Self {
        let mut s = Summary::default();
        for r in rows {
            match r.verdict() {
                Verdict::Agree => s.passed += 1,
                Verdict::Disagree => s.failed += 1,
                Verdict::Band => s.skipped_band += 1,
                Verdict::Unconverged => s.unconverged += 1,
            }
        }
        s
    }

    /// Agreement over the asserted cells; `None` if there are none.
    pub fn agreement_rate(&self) -> Option<f64> {
        let n = self.passed + self.failed;
        (n > 0).then(|| self.passed as f64 / n as f64)
    }
}

/// Scalar ground state `𝔴` at `(λ, κ = 1)`.
#[derive(Debug, Clone)]
pub struct ScalarReference {
    pub level: f64,
    pub profile: RadialField,
    pub converged: bool,
}

pub fn scalar_reference(q: f64, lambda: f64, cfg: &SolverConfig) -> Result<ScalarReference> {
    let r = solve_scalar(lambda, 1.0, q, cfg)?;
    Ok(ScalarReference { level: r.level, profile: r.pair.u, converged: r.converged })
}

/// Mass fraction allowed beyond a fitted domain.
const TAIL_MASS: f64 = 1e-14;
const FIT_MARGIN: f64 = 1.5;

/// Smallest node radius beyond which `u` carries less than `tail` of its mass.
fn tail_radius(u: &RadialField, tail: f64) -> f64 {
    let g = u.grid();
    let w = g.mass_weights();
    let x = u.values();
    let total: f64 = (0..g.len()).map(|i| w[i] * x[i] * x[i]).sum();
    let mut acc = 0.0;
    for i in (0..g.len()).rev() {
        acc += w[i] * x[i] * x[i];
        if acc > tail * total {
            return g.r(i);
        }
    }
    0.0
}

/// Shrinks `r_max` at fixed `n` to the support of the scalar reference at
/// `(λ, κ = 1)`, the widest state of a `q` row. Concentrated states
/// (`q` near 3/2) are otherwise left with a handful of nodes.
pub fn fit_domain(q: f64, lambda: f64, cfg: &SolverConfig) -> Result<(SolverConfig, ScalarReference)> {
    let n = cfg.grid.n();
    let mut c = *cfg;
    let mut reference = scalar_reference(q, lambda, &c)?;
    for _ in 0..2 {
        let r = FIT_MARGIN * tail_radius(&reference.profile, TAIL_MASS);
        if !(r > 0.0) || r >= 0.9 * c.grid.r_max() {
            break;
        }
        c.grid = cfg.grid.resized(n, r)?;
        reference = scalar_reference(q, lambda, &c)?;
    }
    Ok((c, reference))
}

fn regime_name(q: f64, beta: f64) -> Result<(String, f64, f64)> {
    let regime = classify(q, beta)?;
    let (y, h) = crate::hbeta::h_max(q, beta)?;
    let name = match regime {
        HRegime::InteriorUnique { .. } => "InteriorUnique",
        other => other.name(),
    };
    Ok((name.to_string(), y, h))
}

/// Solves one `(q, β)` cell against a precomputed scalar reference.
pub fn sweep_cell(
    q: f64,
    beta: f64,
    lambda: f64,
    cfg: &SolverConfig,
    reference: &ScalarReference,
) -> Result<SweepRow> {
    let clock = Instant::now();
    let p = ModelParams::new(q, lambda, beta)?;
    p.validate_solver()?;
    let sys = solve_system(&p, cfg, &Init::AngleSeeded)?;
    let reduced = solve_reduced(&p, cfg)?;
    let equal = solve_scalar(2.0 * lambda, 1.0 + beta, q, cfg)?;
    let (regime, y_beta, h_max) = regime_name(q, beta)?;
    Ok(SweepRow {
        q,
        beta,
        lambda,
        level: sys.level,
        scalar_level: reference.level,
        reduced_level: reduced.level,
        equal_level: 2.0 * equal.level,
        r_max: cfg.grid.r_max(),
        regime,
        classification: sys.classification,
        y_beta,
        h_max,
        ratio: sys.component_ratio,
        h_norm: sys.h_norm(),
        dist_semitrivial: dist_to_semitrivial(&sys.pair, &reference.profile)?,
        max_residual: sys.residuals.max_identity_relative(sys.scale()),
        converged: sys.converged && reference.converged,
        init_tag: sys.init_tag,
        runtime_s: clock.elapsed().as_secs_f64(),
    })
}

fn references(qs: &[f64], lambda: f64, cfg: &SolverConfig) -> Result<Vec<(SolverConfig, ScalarReference)>> {
    qs.par_iter().map(|&q| fit_domain(q, lambda, cfg)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseTable {
    pub rows: Vec<SweepRow>,
    pub summary: Summary,
}

/// One row per `(q, β)` cell, rows ordered by `q` then `β`.
pub fn phase_diagram(
    q_grid: &[f64],
    beta_grid: &[f64],
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<PhaseTable> {
    for &q in q_grid {
        check_solver_q(q)?;
    }
    let refs = references(q_grid, lambda, cfg)?;
    let cells: Vec<(usize, f64)> = (0..q_grid.len())
        .flat_map(|i| beta_grid.iter().map(move |&b| (i, b)))
        .collect();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(i, b)| sweep_cell(q_grid[i], b, lambda, &refs[i].0, &refs[i].1))
        .collect::<Result<_>>()?;
    let summary = Summary::of(&rows);
    Ok(PhaseTable { rows, summary })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaZeroTable {
    pub rows: Vec<SweepRow>,
    /// `𝔫 − m_β > 0` on every row.
    pub all_below: bool,
    /// Relative gap of the last row below that of the first.
    pub gap_shrinks: bool,
    pub dist_shrinks: bool,
}

/// `m_β` and the distance to the semitrivial states along a decreasing `β`
/// sequence, `q ∈ (3/2, 2)`.
pub fn beta_to_zero(q: f64, betas: &[f64], lambda: f64, cfg: &SolverConfig) -> Result<BetaZeroTable> {
    check_solver_q(q)?;
    if q >= 2.0 {
        return Err(Error::Domain(format!("beta_to_zero needs q < 2, got {q}")));
    }
    if betas.len() < 2 || betas.windows(2).any(|w| !(w[1] < w[0])) || betas.iter().any(|&b| b <= 0.0) {
        return Err(Error::InvalidParams("beta sequence must be positive and decreasing".into()));
    }
    let (cfg, reference) = fit_domain(q, lambda, cfg)?;
    let rows: Vec<SweepRow> = betas
        .par_iter()
        .map(|&b| sweep_cell(q, b, lambda, &cfg, &reference))
        .collect::<Result<_>>()?;
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    Ok(BetaZeroTable {
        all_below: rows.iter().all(|r| r.gap() > 0.0),
        gap_shrinks: last.gap() / last.scalar_level < first.gap() / first.scalar_level,
        dist_shrinks: last.dist_semitrivial < first.dist_semitrivial,
        rows,
    })
}

/// Upper bound on `m_β` from the path through a fixed pair `(u, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathBound {
    pub beta: f64,
    /// `T_β`, where `γ_{u,u}(T_β)` meets the constraint.
    pub t: f64,
    /// `I(γ_{u,u}(T_β))`.
    pub level: f64,
    /// `(2/3)T(‖u‖² + ((2q−3)/q)(1+β)T^{4q−4}‖u‖_{2q}^{2q})`; equals `level`.
    pub closed_form: f64,
    /// `p σ T^{p−1} / μ`, tends to 1.
    pub critical_ratio: f64,
    /// `σ 𝔗^{p−1} / μ` at the path zero `𝔗`, tends to 1.
    pub zero_ratio: f64,
}

/// Bound for the Gaussian `u = e^{−r²/2}`.
pub fn gaussian_path_bound(q: f64, lambda: f64, beta: f64, grid: RadialGrid) -> Result<PathBound> {
    let p = ModelParams::new(q, lambda, beta)?;
    let u = RadialField::from_fn(grid, |r| (-0.5 * r * r).exp())?;
    let pair = StatePair { u: u.clone(), v: u };
    let bd = Functional::from(p).breakdown(&pair);
    let c = PathCoefficients::from_breakdown(&bd, q);
    let t = critical_t(&c)?;
    let zero = path_zero(&c)?;
    let mass = bd.b / 2.0;
    let power = bd.d / (2.0 * (1.0 + beta));
    let closed_form =
        2.0 / 3.0 * t * (mass + (2.0 * q - 3.0) / q * (1.0 + beta) * t.powf(4.0 * q - 4.0) * power);
    Ok(PathBound {
        beta,
        t,
        level: c.value(t),
        closed_form,
        critical_ratio: c.p * c.sigma * t.powf(c.p - 1.0) / c.mu,
        zero_ratio: c.sigma * zero.powf(c.p - 1.0) / c.mu,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaInfTable {
    pub rows: Vec<SweepRow>,
    pub bounds: Vec<PathBound>,
    pub norm_decreasing: bool,
    pub level_decreasing: bool,
    /// `m_last / m_first`.
    pub collapse_ratio: f64,
    /// `m_β ≤` the Gaussian path bound on every row.
    pub bound_holds: bool,
}

pub fn beta_to_infinity(q: f64, betas: &[f64], lambda: f64, cfg: &SolverConfig) -> Result<BetaInfTable> {
    check_solver_q(q)?;
    if betas.len() < 2 || betas.windows(2).any(|w| !(w[1] > w[0])) || betas[0] < 0.0 {
        return Err(Error::InvalidParams("beta sequence must be nonnegative and increasing".into()));
    }
    let (cfg, reference) = fit_domain(q, lambda, cfg)?;
    let rows: Vec<SweepRow> = betas
        .par_iter()
        .map(|&b| sweep_cell(q, b, lambda, &cfg, &reference))
        .collect::<Result<_>>()?;
    let bounds: Vec<PathBound> = betas
        .iter()
        .map(|&b| gaussian_path_bound(q, lambda, b, cfg.grid))
        .collect::<Result<_>>()?;
    Ok(BetaInfTable {
        norm_decreasing: rows.windows(2).all(|w| w[1].h_norm < w[0].h_norm),
        level_decreasing: rows.windows(2).all(|w| w[1].level < w[0].level),
        collapse_ratio: rows[rows.len() - 1].level / rows[0].level,
        bound_holds: rows.iter().zip(&bounds).all(|(r, b)| r.level <= b.level),
        rows,
        bounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualRow {
    pub beta: f64,
    pub m_beta: f64,
    /// `I(𝔷_β, 𝔷_β)`.
    pub equal_level: f64,
    pub scalar_level: f64,
    /// `(I(𝔷_β, 𝔷_β) − m_β) / m_β`.
    pub relative_gap: f64,
    /// `β` strictly below, above or within the band of the threshold.
    pub side: Side,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Below,
    Band,
    Above,
}

fn side(q: f64, beta: f64) -> Side {
    if in_band(q, beta) {
        Side::Band
    } else if beta < threshold(q) {
        Side::Below
    } else {
        Side::Above
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EqualTable {
    pub q: f64,
    pub rows: Vec<EqualRow>,
    /// `(𝔫, 𝓘_{2λ,0}(𝔷_0), 2𝓘_{2λ,0}(𝔷_0))`.
    pub chain: [f64; 3],
    pub chain_holds: bool,
}

impl EqualRow {
    /// Strict gap below threshold, equality within `tol` above it.
    pub fn as_expected(&self, tol: f64) -> Option<bool> {
        match self.side {
            Side::Below => Some(self.relative_gap > tol),
            Side::Above => Some(self.relative_gap.abs() <= tol),
            Side::Band => None,
        }
    }
}

pub fn equal_components_study(
    q: f64,
    betas: &[f64],
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<EqualTable> {
    check_solver_q(q)?;
    let (cfg, reference) = fit_domain(q, lambda, cfg)?;
    let z0 = solve_scalar(2.0 * lambda, 1.0, q, &cfg)?;
    let rows: Vec<EqualRow> = betas
        .par_iter()
        .map(|&b| {
            let p = ModelParams::new(q, lambda, b)?;
            let sys = solve_system(&p, &cfg, &Init::AngleSeeded)?;
            let z = solve_scalar(2.0 * lambda, 1.0 + b, q, &cfg)?;
            let equal_level = 2.0 * z.level;
            Ok(EqualRow {
                beta: b,
                m_beta: sys.level,
                equal_level,
                scalar_level: reference.level,
                relative_gap: (equal_level - sys.level) / sys.level,
                side: side(q, b),
                converged: sys.converged && z.converged,
            })
        })
        .collect::<Result<_>>()?;
    let chain = [reference.level, z0.level, 2.0 * z0.level];
    Ok(EqualTable { q, rows, chain, chain_holds: chain[0] < chain[1] && chain[1] < chain[2] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub n: usize,
    pub h: f64,
    pub level: f64,
    pub converged: bool,
    /// `|m(n) − m(n/2)|`, absent on the first row.
    pub diff: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridTable {
    pub rows: Vec<GridRow>,
    /// Differences strictly decreasing along the refinement.
    pub cauchy: bool,
    /// `log₂(d_{k−1}/d_k)` from the last three levels.
    pub order: Option<f64>,
    /// Relative change of `m_β` when `r_max` doubles at fixed `h`.
    pub r_max_sensitivity: f64,
}

/// Self-convergence of `m_β` over `n_list` (each entry twice the previous)
/// at the grid radius of `cfg`.
pub fn grid_convergence(p: &ModelParams, n_list: &[usize], cfg: &SolverConfig) -> Result<GridTable> {
    p.validate_solver()?;
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::InvalidParams("n_list must hold ≥ 3 successive doublings".into()));
    }
    let r_max = cfg.grid.r_max();
    let solve_at = |n: usize, r: f64| -> Result<GroundStateResult> {
        let c = SolverConfig { grid: cfg.grid.resized(n, r)?, ..*cfg };
        solve_system(p, &c, &Init::AngleSeeded)
    };
    let results: Vec<GroundStateResult> =
        n_list.par_iter().map(|&n| solve_at(n, r_max)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(results.len());
    for (k, r) in results.iter().enumerate() {
        rows.push(GridRow {
            n: n_list[k],
            h: r.grid.h(),
            level: r.level,
            converged: r.converged,
            diff: (k > 0).then(|| (r.level - results[k - 1].level).abs()),
        });
    }
    let diffs: Vec<f64> = rows.iter().filter_map(|r| r.diff).collect();
    let cauchy = diffs.windows(2).all(|w| w[1] < w[0]);
    let order = match diffs.as_slice() {
        [.., a, b] if *a > 0.0 && *b > 0.0 => Some((a / b).log2()),
        _ => None,
    };
    let base = n_list[n_list.len() / 2];
    let near = solve_at(base, r_max)?;
    let far = solve_at(2 * base, 2.0 * r_max)?;
    Ok(GridTable {
        rows,
        cauchy,
        order,
        r_max_sensitivity: ((far.level - near.level) / near.level).abs(),
    })
}
