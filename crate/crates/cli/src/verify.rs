//! Recomputes a stored result from its profile and compares.

use std::path::Path;

use spgs::solver::{classify_pair, Classification};

use crate::output::{load_result, read_profile};
use crate::CliError;

/// Relative agreement required between stored and recomputed scalars.
const MATCH_TOL: f64 = 1e-9;
/// Identity residual tolerance relative to `a+b+c+d`.
const IDENTITY_TOL: f64 = 1e-4;

pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

pub struct Report {
    pub checks: Vec<Check>,
    /// Whether the profile was available, so field-level checks ran.
    pub from_profile: bool,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let size = a.abs().max(b.abs());
    if size == 0.0 {
        0.0
    } else {
        (a - b).abs() / size
    }
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, value, limit, pass: value <= limit }
}

/// `profile` overrides the path recorded in the result file.
pub fn verify(path: &Path, profile: Option<&Path>) -> Result<Report, CliError> {
    let file = load_result(path)?;
    let stored = &file.result;
    let tol = file.tolerances;
    let q = stored.params.q;
    let mut checks = Vec::new();
    let bd = stored.breakdown;
    checks.push(check("level = breakdown energy", rel(stored.level, bd.energy(q)), MATCH_TOL));
    // J vanishes at a solution, so compare on the scale of the terms
    checks.push(check(
        "J = breakdown constraint",
        (stored.residuals.j - bd.constraint_j(q)).abs() / bd.scale(),
        MATCH_TOL,
    ));
    let profile_path = match (profile, &file.profile) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(name)) => Some(path.parent().unwrap_or(Path::new(".")).join(name)),
        (None, None) => None,
    };
    let mut scale = bd.scale();
    let mut residuals = stored.residuals;
    if let Some(p) = &profile_path {
        let pair = read_profile(p, stored.grid)?;
        let fresh = stored.params.breakdown(&pair);
        let worst = [(bd.a, fresh.a), (bd.b, fresh.b), (bd.c, fresh.c), (bd.d, fresh.d)]
            .iter()
            .map(|&(x, y)| rel(x, y))
            .fold(0.0, f64::max);
        checks.push(check("breakdown recomputed", worst, MATCH_TOL));
        checks.push(check("level recomputed", rel(stored.level, fresh.energy(q)), MATCH_TOL));
        scale = fresh.scale();
        residuals = stored.params.residuals(&pair);
        let class = classify_pair(&pair, tol.vec_tol);
        checks.push(Check {
            name: "classification recomputed",
            value: if class == stored.classification { 0.0 } else { 1.0 },
            limit: 0.0,
            pass: class == stored.classification && class != Classification::Trivial,
        });
    }
    if stored.converged {
        checks.push(check("identity residuals / scale", residuals.max_identity_relative(scale), IDENTITY_TOL));
        checks.push(check("|J| / scale", residuals.j.abs() / scale, tol.proj_tol));
        if profile_path.is_some() {
            checks.push(check("gradient / scale", residuals.grad_norm / scale, tol.tol_grad));
        }
        checks.push(Check { name: "level > 0", value: -stored.level, limit: 0.0, pass: stored.level > 0.0 });
    }
    Ok(Report { checks, from_profile: profile_path.is_some() })
}
