//! Flat `key = value` run configuration.
//!
//! Sources, later ones winning: built-in defaults, the `--config` file, the
//! `SPGS_OUT_DIR` environment variable (output directory only), then
//! command-line overrides. Unknown keys are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spgs::energy::ModelParams;
use spgs::radial::{RadialGrid, Stencil};
use spgs::solver::SolverConfig;

use crate::CliError;

pub const OUT_DIR_ENV: &str = "SPGS_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    AngleSeeded,
    Symmetric,
    Asymmetric,
    /// Seeded random Gaussian pair.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub q: f64,
    pub lambda: f64,
    pub beta: f64,
    /// Coupling of the scalar problem (`scalar` only).
    pub kappa: f64,
    pub n: usize,
    pub r_max: f64,
    pub stencil: Stencil,
    pub tol_grad: f64,
    pub max_iter: usize,
    pub multi_start: usize,
    pub vec_tol: f64,
    pub proj_tol: f64,
    pub init: InitKind,
    pub seed: u64,
    pub q_list: Option<Vec<f64>>,
    pub beta_list: Option<Vec<f64>>,
    pub n_list: Option<Vec<usize>>,
    pub out_dir: PathBuf,
    pub emit_profiles: bool,
    pub emit_plots: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = SolverConfig::default();
        RunConfig {
            q: 2.5,
            lambda: 1.0,
            beta: 0.5,
            kappa: 1.0,
            n: s.grid.n(),
            r_max: s.grid.r_max(),
            stencil: s.grid.stencil(),
            tol_grad: s.tol_grad,
            max_iter: s.max_iter,
            multi_start: s.multi_start,
            vec_tol: s.vec_tol,
            proj_tol: s.proj_tol,
            init: InitKind::AngleSeeded,
            seed: 0,
            q_list: None,
            beta_list: None,
            n_list: None,
            out_dir: PathBuf::from("out"),
            emit_profiles: true,
            emit_plots: false,
        }
    }
}

/// Every accepted key with a one-line description, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("q", "power exponent, 3/2 < q < 3 for solves"),
    ("lambda", "Coulomb coupling λ ≥ 0 (> 0 for solves)"),
    ("beta", "cooperative coupling β ≥ 0"),
    ("kappa", "power coefficient of the scalar problem"),
    ("n", "grid intervals (even, ≥ 64)"),
    ("r_max", "truncation radius"),
    ("stencil", "kinetic/Coulomb stencil: twelfth | second"),
    ("tol_grad", "gradient tolerance relative to a+b+c+d"),
    ("max_iter", "descent iteration cap"),
    ("multi_start", "number of starts for system solves"),
    ("vec_tol", "component-norm ratio above which a state is vectorial"),
    ("proj_tol", "constraint tolerance relative to a+b+c+d"),
    ("init", "first start: angle | symmetric | asymmetric | random"),
    ("seed", "RNG seed for init = random"),
    ("q_list", "comma-separated q values (hbeta, phase)"),
    ("beta_list", "comma-separated β values (hbeta, phase, beta0, betainf, equal)"),
    ("n_list", "comma-separated doubling n values (converge)"),
    ("out_dir", "output directory (env SPGS_OUT_DIR)"),
    ("emit_profiles", "write profile CSVs: true | false"),
    ("emit_plots", "write SVG plots: true | false"),
];

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::config(msg.into())
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>().map_err(|_| invalid(format!("{key}: '{v}' is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse::<usize>().map_err(|_| invalid(format!("{key}: '{v}' is not a nonnegative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(format!("{key}: '{v}' is not a boolean"))),
    }
}

fn parse_list<T>(key: &str, v: &str, item: impl Fn(&str, &str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    let out: Vec<T> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| item(key, s)).collect::<Result<_, _>>()?;
    if out.is_empty() {
        return Err(invalid(format!("{key}: empty list")));
    }
    Ok(out)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "q" => self.q = parse_f64(key, v)?,
            "lambda" => self.lambda = parse_f64(key, v)?,
            "beta" => self.beta = parse_f64(key, v)?,
            "kappa" => self.kappa = parse_f64(key, v)?,
            "n" => self.n = parse_usize(key, v)?,
            "r_max" => self.r_max = parse_f64(key, v)?,
            "stencil" => {
                self.stencil = match v {
                    "twelfth" => Stencil::Twelfth,
                    "second" => Stencil::Second,
                    _ => return Err(invalid(format!("stencil: '{v}' is not twelfth or second"))),
                }
            }
            "tol_grad" => self.tol_grad = parse_f64(key, v)?,
            "max_iter" => self.max_iter = parse_usize(key, v)?,
            "multi_start" => self.multi_start = parse_usize(key, v)?,
            "vec_tol" => self.vec_tol = parse_f64(key, v)?,
            "proj_tol" => self.proj_tol = parse_f64(key, v)?,
            "init" => {
                self.init = match v {
                    "angle" => InitKind::AngleSeeded,
                    "symmetric" => InitKind::Symmetric,
                    "asymmetric" => InitKind::Asymmetric,
                    "random" => InitKind::Random,
                    _ => return Err(invalid(format!("init: unknown start '{v}'"))),
                }
            }
            "seed" => self.seed = v.parse().map_err(|_| invalid(format!("seed: '{v}' is not an integer")))?,
            "q_list" => self.q_list = Some(parse_list(key, v, parse_f64)?),
            "beta_list" => self.beta_list = Some(parse_list(key, v, parse_f64)?),
            "n_list" => self.n_list = Some(parse_list(key, v, parse_usize)?),
            "out_dir" => self.out_dir = PathBuf::from(v),
            "emit_profiles" => self.emit_profiles = parse_bool(key, v)?,
            "emit_plots" => self.emit_plots = parse_bool(key, v)?,
            other => return Err(invalid(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| invalid(format!("{origin}:{}: expected key = value", k + 1)))?;
            self.set(key, value).map_err(|e| invalid(format!("{origin}:{}: {}", k + 1, e.message)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `KEY=VALUE` from the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), CliError> {
        let (key, value) = kv.split_once('=').ok_or_else(|| invalid(format!("--set {kv}: expected key=value")))?;
        self.set(key, value)
    }

    pub fn model(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.q, self.lambda, self.beta).map_err(|e| invalid(e.to_string()))
    }

    /// Model parameters in the solver range.
    pub fn solver_model(&self) -> Result<ModelParams, CliError> {
        let p = self.model()?;
        p.validate_solver().map_err(|e| invalid(e.to_string()))?;
        Ok(p)
    }

    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let grid = RadialGrid::new(self.n, self.r_max).map_err(|e| invalid(e.to_string()))?.with_stencil(self.stencil);
        let cfg = SolverConfig {
            grid,
            tol_grad: self.tol_grad,
            max_iter: self.max_iter,
            multi_start: self.multi_start,
            vec_tol: self.vec_tol,
            proj_tol: self.proj_tol,
            ..SolverConfig::default()
        };
        cfg.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(cfg)
    }

    /// The configuration in file syntax, for the record.
    pub fn to_text(&self) -> String {
        let list = |v: &Option<Vec<f64>>| v.as_ref().map(|v| v.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        let mut out = String::new();
        let init = match self.init {
            InitKind::AngleSeeded => "angle",
            InitKind::Symmetric => "symmetric",
            InitKind::Asymmetric => "asymmetric",
            InitKind::Random => "random",
        };
        let stencil = match self.stencil {
            Stencil::Second => "second",
            Stencil::Twelfth => "twelfth",
        };
        let fields: Vec<(&str, Option<String>)> = vec![
            ("q", Some(self.q.to_string())),
            ("lambda", Some(self.lambda.to_string())),
            ("beta", Some(self.beta.to_string())),
            ("kappa", Some(self.kappa.to_string())),
            ("n", Some(self.n.to_string())),
            ("r_max", Some(self.r_max.to_string())),
            ("stencil", Some(stencil.into())),
            ("tol_grad", Some(self.tol_grad.to_string())),
            ("max_iter", Some(self.max_iter.to_string())),
            ("multi_start", Some(self.multi_start.to_string())),
            ("vec_tol", Some(self.vec_tol.to_string())),
            ("proj_tol", Some(self.proj_tol.to_string())),
            ("init", Some(init.into())),
            ("seed", Some(self.seed.to_string())),
            ("q_list", list(&self.q_list)),
            ("beta_list", list(&self.beta_list)),
            (
                "n_list",
                self.n_list.as_ref().map(|v| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
            ),
            ("out_dir", Some(self.out_dir.display().to_string())),
            ("emit_profiles", Some(self.emit_profiles.to_string())),
            ("emit_plots", Some(self.emit_plots.to_string())),
        ];
        for (k, v) in fields {
            if let Some(v) = v {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}
