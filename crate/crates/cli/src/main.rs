//! `spgs`: batch front-end for ground-state solves and the lab experiments.
//!
//! Exit codes: 0 success, 1 invalid configuration or input, 2 a solve did
//! not converge, 3 verification failure.

mod config;
mod output;
mod plot;
mod verify;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use spgs::hbeta::{classify, h_max, threshold};
use spgs::lab::{
    beta_to_infinity, beta_to_zero, equal_components_study, grid_convergence, phase_diagram, SweepRow,
    DEFAULT_BETA_GRID, DEFAULT_Q_GRID,
};
use spgs::radial::{RadialField, RadialGrid, StatePair};
use spgs::solver::{solve_scalar, solve_system, GroundStateResult, Init};

use config::{InitKind, RunConfig, KEYS, OUT_DIR_ENV};
use output::{ensure_dir, save_result, write_json, write_rows, write_text, Tolerances};
use plot::{line_plot, Series};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { code: 1, message }
    }

    fn unconverged(message: String) -> Self {
        CliError { code: 2, message }
    }

    fn verification(message: String) -> Self {
        CliError { code: 3, message }
    }
}

/// Parameter errors are configuration errors; numerical failures count as
/// non-convergence.
impl From<spgs::Error> for CliError {
    fn from(e: spgs::Error) -> Self {
        use spgs::Error::*;
        match e {
            InvalidGrid(_) | InvalidParams(_) | Domain(_) | GridMismatch => CliError::config(e.to_string()),
            NonFinite(_) | DegeneratePair(_) | NoMaximum(_) | Unconverged(_) => CliError::unconverged(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "spgs", version, about = "Radial ground states of a two-component Schrödinger–Poisson system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r_max: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One system solve: result JSON, profile CSV, optional SVG.
    Solve(Common),
    /// Scalar solve at explicit (lambda, kappa, q).
    Scalar {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Classification of h_β over q_list × beta_list.
    Hbeta(Common),
    /// Phase diagram over q_list × beta_list.
    Phase(Common),
    /// Decreasing β toward 0 at fixed q < 2.
    Beta0(Common),
    /// Increasing β at fixed q.
    Betainf(Common),
    /// Equal-components levels against m_β.
    Equal(Common),
    /// Self-convergence of m_β over n_list.
    Converge(Common),
    /// Recompute a stored result from its profile.
    Verify {
        result: PathBuf,
        /// Profile CSV, if not the one recorded in the result.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// List configuration keys.
    Keys,
}

fn load_config(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &c.config {
        cfg.apply_file(path)?;
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            cfg.out_dir = PathBuf::from(dir);
        }
    }
    for kv in &c.set {
        cfg.apply_override(kv)?;
    }
    cfg.q = c.q.unwrap_or(cfg.q);
    cfg.lambda = c.lambda.unwrap_or(cfg.lambda);
    cfg.beta = c.beta.unwrap_or(cfg.beta);
    cfg.n = c.n.unwrap_or(cfg.n);
    cfg.r_max = c.r_max.unwrap_or(cfg.r_max);
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn tolerances(cfg: &RunConfig) -> Tolerances {
    Tolerances { tol_grad: cfg.tol_grad, proj_tol: cfg.proj_tol, vec_tol: cfg.vec_tol }
}

/// Amplitudes and widths of a Gaussian pair drawn from `seed`.
fn random_pair(grid: RadialGrid, seed: u64) -> Result<StatePair, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> Result<RadialField, CliError> {
        let amp: f64 = rng.gen_range(0.3..1.5);
        let width: f64 = rng.gen_range(0.25..1.0);
        Ok(RadialField::from_fn(grid, move |r| amp * (-width * r * r).exp())?)
    };
    let u = gauss()?;
    let v = gauss()?;
    Ok(StatePair::new(u, v)?)
}

fn init_of(cfg: &RunConfig, grid: RadialGrid) -> Result<Init, CliError> {
    Ok(match cfg.init {
        InitKind::AngleSeeded => Init::AngleSeeded,
        InitKind::Symmetric => Init::Symmetric,
        InitKind::Asymmetric => Init::Asymmetric,
        InitKind::Random => {
            Init::Custom { pair: random_pair(grid, cfg.seed)?, tag: format!("random(seed={})", cfg.seed) }
        }
    })
}

fn profile_plot(result: &GroundStateResult, title: &str) -> String {
    let g = result.grid;
    let phi = spgs::coulomb::solve_phi(&result.pair).phi;
    // stop where both components have decayed below 1e-6 of their peak
    let peak = result.pair.u.max_abs().max(result.pair.v.max_abs());
    let last = (0..g.len())
        .rev()
        .find(|&i| result.pair.u.values()[i].abs().max(result.pair.v.values()[i].abs()) > 1e-6 * peak)
        .unwrap_or(g.n());
    let end = (last + last / 10 + 2).min(g.n());
    let series = |name: &str, f: &RadialField| Series {
        name: name.into(),
        points: (0..=end).map(|i| (g.r(i), f.values()[i])).collect(),
    };
    line_plot(
        title,
        "r",
        "value",
        &[series("u", &result.pair.u), series("v", &result.pair.v), series("phi", &phi)],
    )
}

fn finish_solve(cfg: &RunConfig, stem: &str, kind: &str, result: &GroundStateResult) -> Result<(), CliError> {
    let path = save_result(&cfg.out_dir, stem, kind, result, tolerances(cfg), cfg.emit_profiles)?;
    write_text(&cfg.out_dir.join(format!("{stem}.config")), &cfg.to_text())?;
    if cfg.emit_plots {
        let title = format!("{kind} q={} λ={} β={}", result.params.q, result.params.lambda, result.params.beta);
        write_text(&cfg.out_dir.join(format!("{stem}_profile.svg")), &profile_plot(result, &title))?;
    }
    println!(
        "{kind}: level {:.12} classification {:?} converged {} residual {:.2e} ({})",
        result.level,
        result.classification,
        result.converged,
        result.residuals.max_identity_relative(result.scale()),
        path.display()
    );
    if result.converged {
        Ok(())
    } else {
        Err(CliError::unconverged(format!("{kind} solve did not converge (grad {:.2e})", result.residuals.grad_norm)))
    }
}

fn cmd_solve(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let p = cfg.solver_model()?;
    let solver = cfg.solver()?;
    let init = init_of(&cfg, solver.grid)?;
    let result = solve_system(&p, &solver, &init)?;
    finish_solve(&cfg, "result", "system", &result)
}

fn cmd_scalar(c: &Common, kappa: Option<f64>) -> Result<(), CliError> {
    let mut cfg = load_config(c)?;
    cfg.kappa = kappa.unwrap_or(cfg.kappa);
    let solver = cfg.solver()?;
    let result = solve_scalar(cfg.lambda, cfg.kappa, cfg.q, &solver)?;
    finish_solve(&cfg, "scalar", "scalar", &result)
}

#[derive(Serialize)]
struct HbetaRow {
    q: f64,
    beta: f64,
    regime: String,
    y: f64,
    h_max: f64,
    threshold: f64,
}

fn cmd_hbeta(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let qs = cfg.q_list.clone().unwrap_or_else(|| vec![cfg.q]);
    let betas = cfg.beta_list.clone().unwrap_or_else(|| vec![cfg.beta]);
    let mut rows = Vec::new();
    for &q in &qs {
        for &beta in &betas {
            let regime = classify(q, beta)?;
            let (y, value) = h_max(q, beta)?;
            rows.push(HbetaRow { q, beta, regime: regime.name().into(), y, h_max: value, threshold: threshold(q) });
        }
    }
    ensure_dir(&cfg.out_dir)?;
    write_rows(&cfg.out_dir.join("hbeta.csv"), &rows)?;
    println!("q,beta,regime,y,h_max");
    for r in &rows {
        println!("{},{},{},{:e},{}", r.q, r.beta, r.regime, r.y, r.h_max);
    }
    Ok(())
}

fn any_unconverged(rows: &[SweepRow], what: &str) -> Result<(), CliError> {
    let bad = rows.iter().filter(|r| !r.converged).count();
    if bad > 0 {
        Err(CliError::unconverged(format!("{what}: {bad} of {} cells did not converge", rows.len())))
    } else {
        Ok(())
    }
}

fn level_plot(path: &Path, title: &str, rows: &[SweepRow], normalize: bool) -> Result<(), CliError> {
    let mut qs: Vec<f64> = rows.iter().map(|r| r.q).collect();
    qs.dedup();
    let series: Vec<Series> = qs
        .iter()
        .map(|&q| Series {
            name: format!("q = {q}"),
            points: rows
                .iter()
                .filter(|r| r.q == q)
                .map(|r| (r.beta, if normalize { r.level / r.scalar_level } else { r.level }))
                .collect(),
        })
        .collect();
    let ylabel = if normalize { "m_β / n" } else { "m_β" };
    write_text(path, &line_plot(title, "β", ylabel, &series))
}

fn cmd_phase(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let qs = cfg.q_list.clone().unwrap_or_else(|| DEFAULT_Q_GRID.to_vec());
    let betas = cfg.beta_list.clone().unwrap_or_else(|| DEFAULT_BETA_GRID.to_vec());
    cfg.model()?;
    let table = phase_diagram(&qs, &betas, cfg.lambda, &cfg.solver()?)?;
    ensure_dir(&cfg.out_dir)?;
    write_rows(&cfg.out_dir.join("phase.csv"), &table.rows)?;
    write_json(&cfg.out_dir.join("phase.json"), &table.summary)?;
    write_text(&cfg.out_dir.join("phase.config"), &cfg.to_text())?;
    if cfg.emit_plots {
        level_plot(&cfg.out_dir.join("phase.svg"), "m_β / n against β", &table.rows, true)?;
    }
    let s = &table.summary;
    println!(
        "phase: {} cells, passed {}, failed {}, band {}, unconverged {}",
        table.rows.len(),
        s.passed,
        s.failed,
        s.skipped_band,
        s.unconverged
    );
    any_unconverged(&table.rows, "phase")
}

#[derive(Serialize)]
struct BetaZeroSummary {
    q: f64,
    all_below: bool,
    gap_shrinks: bool,
    dist_shrinks: bool,
}

fn cmd_beta0(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let betas = cfg.beta_list.clone().unwrap_or_else(|| vec![0.4, 0.2, 0.1, 0.05]);
    let t = beta_to_zero(cfg.q, &betas, cfg.lambda, &cfg.solver()?)?;
    ensure_dir(&cfg.out_dir)?;
    write_rows(&cfg.out_dir.join("beta0.csv"), &t.rows)?;
    let summary = BetaZeroSummary { q: cfg.q, all_below: t.all_below, gap_shrinks: t.gap_shrinks, dist_shrinks: t.dist_shrinks };
    write_json(&cfg.out_dir.join("beta0.json"), &summary)?;
    write_text(&cfg.out_dir.join("beta0.config"), &cfg.to_text())?;
    if cfg.emit_plots {
        level_plot(&cfg.out_dir.join("beta0.svg"), "m_β / n as β decreases", &t.rows, true)?;
    }
    println!("beta0: all below {}, gap shrinks {}, distance shrinks {}", t.all_below, t.gap_shrinks, t.dist_shrinks);
    any_unconverged(&t.rows, "beta0")
}

#[derive(Serialize)]
struct BetaInfSummary {
    q: f64,
    norm_decreasing: bool,
    level_decreasing: bool,
    collapse_ratio: f64,
    bound_holds: bool,
}

fn cmd_betainf(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let betas = cfg.beta_list.clone().unwrap_or_else(|| vec![10.0, 100.0, 1000.0]);
    let t = beta_to_infinity(cfg.q, &betas, cfg.lambda, &cfg.solver()?)?;
    ensure_dir(&cfg.out_dir)?;
    write_rows(&cfg.out_dir.join("betainf.csv"), &t.rows)?;
    write_rows(&cfg.out_dir.join("betainf_bounds.csv"), &t.bounds)?;
    let summary = BetaInfSummary {
        q: cfg.q,
        norm_decreasing: t.norm_decreasing,
        level_decreasing: t.level_decreasing,
        collapse_ratio: t.collapse_ratio,
        bound_holds: t.bound_holds,
    };
    write_json(&cfg.out_dir.join("betainf.json"), &summary)?;
    write_text(&cfg.out_dir.join("betainf.config"), &cfg.to_text())?;
    if cfg.emit_plots {
        level_plot(&cfg.out_dir.join("betainf.svg"), "m_β as β grows", &t.rows, false)?;
    }
    println!(
        "betainf: norm decreasing {}, level decreasing {}, m_last/m_first {:.4}, bound holds {}",
        t.norm_decreasing, t.level_decreasing, t.collapse_ratio, t.bound_holds
    );
    any_unconverged(&t.rows, "betainf")
}

#[derive(Serialize)]
struct EqualSummary {
    q: f64,
    chain: [f64; 3],
    chain_holds: bool,
}

fn cmd_equal(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let betas = cfg.beta_list.clone().unwrap_or_else(|| vec![cfg.beta]);
    let t = equal_components_study(cfg.q, &betas, cfg.lambda, &cfg.solver()?)?;
    ensure_dir(&cfg.out_dir)?;
    write_rows(&cfg.out_dir.join("equal.csv"), &t.rows)?;
    write_json(&cfg.out_dir.join("equal.json"), &EqualSummary { q: t.q, chain: t.chain, chain_holds: t.chain_holds })?;
    write_text(&cfg.out_dir.join("equal.config"), &cfg.to_text())?;
    for r in &t.rows {
        println!("equal: β {} m_β {:.10} I(z,z) {:.10} gap {:.3e} {:?}", r.beta, r.m_beta, r.equal_level, r.relative_gap, r.side);
    }
    let bad = t.rows.iter().filter(|r| !r.converged).count();
    if bad > 0 {
        return Err(CliError::unconverged(format!("equal: {bad} rows did not converge")));
    }
    Ok(())
}

#[derive(Serialize)]
struct ConvergeSummary {
    cauchy: bool,
    order: Option<f64>,
    r_max_sensitivity: f64,
}

fn cmd_converge(c: &Common) -> Result<(), CliError> {
    let cfg = load_config(c)?;
    let p = cfg.solver_model()?;
    let ns = cfg.n_list.clone().unwrap_or_else(|| vec![512, 1024, 2048, 4096]);
    let t = grid_convergence(&p, &ns, &cfg.solver()?)?;
    ensure_dir(&cfg.out_dir)?;
    write_rows(&cfg.out_dir.join("converge.csv"), &t.rows)?;
    let summary = ConvergeSummary { cauchy: t.cauchy, order: t.order, r_max_sensitivity: t.r_max_sensitivity };
    write_json(&cfg.out_dir.join("converge.json"), &summary)?;
    write_text(&cfg.out_dir.join("converge.config"), &cfg.to_text())?;
    for r in &t.rows {
        println!("converge: n {} level {:.12} diff {}", r.n, r.level, r.diff.map_or("-".into(), |d| format!("{d:.3e}")));
    }
    println!("converge: cauchy {}, order {:?}, r_max sensitivity {:.2e}", t.cauchy, t.order, t.r_max_sensitivity);
    if t.rows.iter().any(|r| !r.converged) {
        return Err(CliError::unconverged("converge: some grids did not converge".into()));
    }
    Ok(())
}

fn cmd_verify(result: &Path, profile: Option<&Path>) -> Result<(), CliError> {
    let report = verify::verify(result, profile)?;
    for c in &report.checks {
        println!("{} {:<28} {:.3e} (limit {:.1e})", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.limit);
    }
    if !report.from_profile {
        println!("note: no profile, field-level checks skipped");
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::verification(format!("{} failed", result.display())))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(c) => cmd_solve(c),
        Command::Scalar { common, kappa } => cmd_scalar(common, *kappa),
        Command::Hbeta(c) => cmd_hbeta(c),
        Command::Phase(c) => cmd_phase(c),
        Command::Beta0(c) => cmd_beta0(c),
        Command::Betainf(c) => cmd_betainf(c),
        Command::Equal(c) => cmd_equal(c),
        Command::Converge(c) => cmd_converge(c),
        Command::Verify { result, profile } => cmd_verify(result, profile.as_deref()),
        Command::Keys => {
            for (k, d) in KEYS {
                println!("{k:<14} {d}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spgs: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
