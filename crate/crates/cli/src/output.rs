//! Result files: JSON documents, CSV tables and profile CSVs.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spgs::coulomb::solve_phi;
use spgs::radial::{RadialField, RadialGrid, StatePair};
use spgs::solver::GroundStateResult;

use crate::CliError;

pub const RESULT_SCHEMA: &str = "spgs-result/1";

/// Solver tolerances the result was judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol_grad: f64,
    pub proj_tol: f64,
    pub vec_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub schema: String,
    /// `system` or `scalar`.
    pub kind: String,
    pub tolerances: Tolerances,
    /// Profile CSV next to this file, if one was written.
    pub profile: Option<String>,
    pub h_norm: f64,
    pub result: GroundStateResult,
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::config(format!("{}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Columns `r,u,v,phi` at full precision.
pub fn write_profile(path: &Path, pair: &StatePair) -> Result<(), CliError> {
    let grid = pair.grid();
    let phi = solve_phi(pair).phi;
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| io_err(path, e))?);
    let mut body = String::from("r,u,v,phi\n");
    for i in 0..grid.len() {
        body.push_str(&format!(
            "{:e},{:e},{:e},{:e}\n",
            grid.r(i),
            pair.u.values()[i],
            pair.v.values()[i],
            phi.values()[i]
        ));
    }
    out.write_all(body.as_bytes()).map_err(|e| io_err(path, e))?;
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads `r,u,v[,phi]` and checks the `r` column against `grid`.
pub fn read_profile(path: &Path, grid: RadialGrid) -> Result<StatePair, CliError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().ok_or_else(|| io_err(path, "empty profile"))?.map_err(|e| io_err(path, e))?;
    if !header.trim().starts_with("r,u,v") {
        return Err(io_err(path, format!("unexpected header '{header}'")));
    }
    let (mut u, mut v) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| io_err(path, format!("line {}: {e}", k + 2)))?;
        if cols.len() < 3 {
            return Err(io_err(path, format!("line {}: expected r,u,v", k + 2)));
        }
        let i = u.len();
        if i >= grid.len() || (cols[0] - grid.r(i)).abs() > 1e-12 * grid.r_max() {
            return Err(io_err(path, format!("line {}: r = {} off the result grid", k + 2, cols[0])));
        }
        u.push(cols[1]);
        v.push(cols[2]);
    }
    if u.len() != grid.len() {
        return Err(io_err(path, format!("{} rows for a grid of {} nodes", u.len(), grid.len())));
    }
    let field = |x| RadialField::new(grid, x).map_err(|e| io_err(path, e));
    StatePair::new(field(u)?, field(v)?).map_err(|e| io_err(path, e))
}

/// Writes `<stem>.json` and, if asked, `<stem>_profile.csv`.
pub fn save_result(
    dir: &Path,
    stem: &str,
    kind: &str,
    result: &GroundStateResult,
    tolerances: Tolerances,
    profiles: bool,
) -> Result<PathBuf, CliError> {
    ensure_dir(dir)?;
    let profile = if profiles {
        let name = format!("{stem}_profile.csv");
        write_profile(&dir.join(&name), &result.pair)?;
        Some(name)
    } else {
        None
    };
    let file = ResultFile {
        schema: RESULT_SCHEMA.into(),
        kind: kind.into(),
        tolerances,
        profile,
        h_norm: result.h_norm(),
        result: result.clone(),
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &file)?;
    Ok(path)
}

pub fn load_result(path: &Path) -> Result<ResultFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: ResultFile = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    if file.schema != RESULT_SCHEMA {
        return Err(io_err(path, format!("schema '{}' is not {RESULT_SCHEMA}", file.schema)));
    }
    Ok(file)
}
