//! Radial functions on a uniform grid over `[0, r_max]`.
//!
//! Every integral is a volume integral over ℝ³ of a radial function, so the
//! `4πr²` weight is folded into the quadrature. Two rules live here:
//!
//! * composite Simpson ([`integrate`]) for general-purpose measurement of
//!   sampled fields;
//! * the lumped trapezoid rule ([`mass_integral`]) paired with the
//!   `w = r·f` kinetic form ([`dirichlet_form`]). This pair is the
//!   variational discretization: its gradient is a wide-stencil radial
//!   Laplacian ([`Stencil`]), spectrally equivalent to the three-point one
//!   that [`helmholtz_solve`] inverts. For integrands even in `r` the trapezoid
//!   rule converges faster than any power of `h`.
//!
//! Fields handed to the variational forms are pinned at `f(r_max) = 0`; the
//! value at the origin is slaved to the interior by the even extension
//! `f(0) = (4 f(h) − f(2h)) / 3`.

use std::f64::consts::PI;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 64;
pub const DEFAULT_NODES: usize = 2048;
pub const DEFAULT_R_MAX: f64 = 30.0;
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Central difference used for `−w″` in the kinetic and Coulomb operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Three-point, second order.
    Second,
    /// Thirteen-point, twelfth order.
    #[default]
    Twelfth,
}

impl Stencil {
    /// `c[0] w_i + Σ_j c[j] (w_{i−j} + w_{i+j})` approximates `−h² w″`.
    pub(crate) fn coefficients(self) -> &'static [f64] {
        match self {
            Stencil::Second => &SECOND_DIFF_2,
            Stencil::Twelfth => &SECOND_DIFF_12,
        }
    }

    /// Nominal order of accuracy in `h`.
    pub fn order(self) -> u32 {
        match self {
            Stencil::Second => 2,
            Stencil::Twelfth => 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct RadialGrid {
    n: usize,
    r_max: f64,
    stencil: Stencil,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    n: usize,
    r_max: f64,
    #[serde(default)]
    stencil: Stencil,
}

impl TryFrom<GridSpec> for RadialGrid {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        Ok(RadialGrid::new(spec.n, spec.r_max)?.with_stencil(spec.stencil))
    }
}

impl From<RadialGrid> for GridSpec {
    fn from(grid: RadialGrid) -> Self {
        GridSpec { n: grid.n, r_max: grid.r_max, stencil: grid.stencil }
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid { n: DEFAULT_NODES, r_max: DEFAULT_R_MAX, stencil: Stencil::default() }
    }
}

impl RadialGrid {
    /// `n` intervals (so `n + 1` nodes). Simpson needs `n` even.
    pub fn new(n: usize, r_max: f64) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::InvalidGrid(format!("n = {n} < {MIN_NODES}")));
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("n = {n} must be even")));
        }
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidGrid(format!("r_max = {r_max} must be positive")));
        }
        Ok(RadialGrid { n, r_max, stencil: Stencil::default() })
    }

    pub fn with_stencil(self, stencil: Stencil) -> Self {
        RadialGrid { stencil, ..self }
    }

    /// Same stencil, new size.
    pub fn resized(&self, n: usize, r_max: f64) -> Result<Self> {
        Ok(RadialGrid::new(n, r_max)?.with_stencil(self.stencil))
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.n as f64
    }

    /// Number of nodes, `n + 1`.
    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn r(&self, i: usize) -> f64 {
        if i == self.n {
            self.r_max
        } else {
            i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.r(i)).collect()
    }

    /// Composite Simpson weights including `4πr²`.
    pub fn simpson_weights(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.n)
            .map(|i| {
                let c = if i == 0 || i == self.n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                4.0 * PI * self.r(i).powi(2) * c * h / 3.0
            })
            .collect()
    }

    /// Lumped trapezoid weights `4π r_i² h` on interior nodes; zero on both ends.
    pub fn mass_weights(&self) -> Vec<f64> {
        let h = self.h();
        (0..=self.n)
            .map(|i| {
                if i == 0 || i == self.n {
                    0.0
                } else {
                    4.0 * PI * self.r(i).powi(2) * h
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} samples for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(RadialField { grid, values })
    }

    pub(crate) fn from_raw(grid: RadialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert!(values.iter().all(|x| x.is_finite()));
        RadialField { grid, values }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.r(i))).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        RadialField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> RadialGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    /// `|f(r_max)| ≤ tol · max|f|`.
    pub fn tail_admissible(&self, tol: f64) -> bool {
        self.values[self.grid.n].abs() <= tol * self.max_abs()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn abs(&self) -> Self {
        RadialField::from_raw(self.grid, self.values.iter().map(|x| x.abs()).collect())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        RadialField::from_raw(self.grid, self.values.iter().map(|x| alpha * x).collect())
    }

    /// `alpha·self + beta·other`.
    pub fn combine(&self, alpha: f64, other: &RadialField, beta: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Self::new(self.grid, values)
    }

    /// Two columns, `r,value`, full round-trip precision.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "r,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.17e},{:.17e}", self.grid.r(i), v)?;
        }
        Ok(())
    }

    pub fn read_csv(grid: RadialGrid, input: impl BufRead) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for (k, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::Domain(e.to_string()))?;
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let _r = cols.next();
            let v: f64 = cols
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Domain(format!("bad CSV row {k}: {line}")))?;
            values.push(v);
        }
        Self::new(grid, values)
    }
}

/// A two-component state on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub u: RadialField,
    pub v: RadialField,
}

impl StatePair {
    pub fn new(u: RadialField, v: RadialField) -> Result<Self> {
        if u.grid != v.grid {
            return Err(Error::GridMismatch);
        }
        Ok(StatePair { u, v })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        StatePair { u: RadialField::zeros(grid), v: RadialField::zeros(grid) }
    }

    pub fn grid(&self) -> RadialGrid {
        self.u.grid
    }

    pub fn swapped(&self) -> Self {
        StatePair { u: self.v.clone(), v: self.u.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }

    pub fn abs(&self) -> Self {
        StatePair { u: self.u.abs(), v: self.v.abs() }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        StatePair { u: self.u.scaled(alpha), v: self.v.scaled(alpha) }
    }

    pub fn combine(&self, alpha: f64, other: &StatePair, beta: f64) -> Result<Self> {
        Ok(StatePair {
            u: self.u.combine(alpha, &other.u, beta)?,
            v: self.v.combine(alpha, &other.v, beta)?,
        })
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Simpson value of `4π ∫₀^{r_max} f(r) r² dr`.
pub fn integrate(f: &RadialField) -> f64 {
    let w = f.grid.simpson_weights();
    compensated_sum(w.iter().zip(&f.values).map(|(w, x)| w * x))
}

/// Simpson inner product `∫ f g`.
pub fn inner(f: &RadialField, g: &RadialField) -> Result<f64> {
    if f.grid != g.grid {
        return Err(Error::GridMismatch);
    }
    let w = f.grid.simpson_weights();
    Ok(compensated_sum(
        w.iter().zip(f.values.iter().zip(&g.values)).map(|(w, (a, b))| w * a * b),
    ))
}

/// `‖f‖_p^p` (the p-th power, not the root).
pub fn lp_norm_p(f: &RadialField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p exponent p = {p} < 1")));
    }
    let w = f.grid.simpson_weights();
    Ok(compensated_sum(w.iter().zip(&f.values).map(|(w, x)| w * x.abs().powf(p))))
}

/// `f′` by centered differences; `f′(0) = 0` by symmetry, one-sided
/// second order at `r_max`.
pub fn derivative(f: &RadialField) -> RadialField {
    let n = f.grid.n;
    let h = f.grid.h();
    let x = &f.values;
    let mut d = vec![0.0; n + 1];
    for i in 1..n {
        d[i] = (x[i + 1] - x[i - 1]) / (2.0 * h);
    }
    d[n] = (3.0 * x[n] - 4.0 * x[n - 1] + x[n - 2]) / (2.0 * h);
    RadialField::from_raw(f.grid, d)
}

/// `‖∇f‖₂²` from the centered-difference derivative and Simpson.
pub fn grad_norm_sq(f: &RadialField) -> f64 {
    let d = derivative(f);
    let w = f.grid.simpson_weights();
    compensated_sum(w.iter().zip(&d.values).map(|(w, x)| w * x * x))
}

/// Lumped trapezoid `Σ m_i f_i` over interior nodes.
pub fn mass_integral(grid: RadialGrid, values: &[f64]) -> f64 {
    let h = grid.h();
    compensated_sum((1..grid.n).map(|i| 4.0 * PI * grid.r(i).powi(2) * h * values[i]))
}

/// Kinetic form `Σ m_i f_i (−Δ_h f)_i` with the grid stencil of
/// [`neg_laplacian_values`]. Approximates `‖∇f‖₂²` to the stencil order for
/// fields that vanish at `r_max`.
pub fn dirichlet_form(f: &RadialField) -> f64 {
    dirichlet_form_values(f.grid, &f.values)
}

pub(crate) fn dirichlet_form_values(grid: RadialGrid, values: &[f64]) -> f64 {
    let n = grid.n;
    let h = grid.h();
    let mut lap = vec![0.0; n + 1];
    neg_laplacian_values(grid, values, &mut lap);
    compensated_sum((1..n).map(|i| 4.0 * PI * grid.r(i).powi(2) * h * values[i] * lap[i]))
}

/// `w = r f` on `j ∈ [−n, 2n]`: zero at both ends, odd reflection across
/// `r = 0` and `r = r_max`.
#[inline]
fn w_ext(grid: RadialGrid, values: &[f64], j: isize) -> f64 {
    let n = grid.n as isize;
    let k = if j < 0 {
        return -w_ext(grid, values, -j);
    } else if j > n {
        return -w_ext(grid, values, 2 * n - j);
    } else {
        j as usize
    };
    if k == 0 || k == grid.n {
        0.0
    } else {
        grid.r(k) * values[k]
    }
}

const SECOND_DIFF_2: [f64; 2] = [2.0, -1.0];

/// `c_k = 2(−1)^{k+1}(m!)²/(k²(m−k)!(m+k)!)`, `m = 6`.
const SECOND_DIFF_12: [f64; 7] = [5369.0 / 1800.0, -12.0 / 7.0, 15.0 / 56.0, -10.0 / 189.0, 1.0 / 112.0, -2.0 / 1925.0, 1.0 / 16632.0];

/// `(−Δ_h f)_i = (−h² w″)_i / (r_i h²)` with `w = r f` and the grid stencil on
/// interior nodes, zero on the ends. This is the lumped `L²` gradient of
/// `½ dirichlet_form`; the reflections keep the operator symmetric.
pub(crate) fn neg_laplacian_values(grid: RadialGrid, values: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let h2 = grid.h() * grid.h();
    let w = |j: isize| w_ext(grid, values, j);
    let coef = grid.stencil.coefficients();
    out[0] = 0.0;
    out[n] = 0.0;
    for i in 1..n {
        let j = i as isize;
        let mut acc = coef[0] * w(j);
        for (k, c) in coef.iter().enumerate().skip(1) {
            let k = k as isize;
            acc += c * (w(j - k) + w(j + k));
        }
        out[i] = acc / (grid.r(i) * h2);
    }
}

/// Three-point `(2w_i − w_{i−1} − w_{i+1}) / (r_i h²)`, the operator inverted
/// by [`helmholtz_solve`].
fn neg_laplacian3_values(grid: RadialGrid, values: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let h2 = grid.h() * grid.h();
    let w = |i: usize| if i == 0 || i == n { 0.0 } else { grid.r(i) * values[i] };
    out[0] = 0.0;
    out[n] = 0.0;
    for i in 1..n {
        out[i] = (2.0 * w(i) - w(i - 1) - w(i + 1)) / (grid.r(i) * h2);
    }
}

/// Re-derive the boundary nodes from the interior: even extension at the
/// origin, Dirichlet at `r_max`.
pub(crate) fn enforce_boundary(grid: RadialGrid, values: &mut [f64]) {
    let n = grid.n;
    values[0] = (4.0 * values[1] - values[2]) / 3.0;
    values[n] = 0.0;
}

/// `(−Δ_h + 1) f` with the same stencil as [`helmholtz_solve`].
pub fn apply_helmholtz(f: &RadialField) -> RadialField {
    let mut out = vec![0.0; f.grid.len()];
    neg_laplacian3_values(f.grid, &f.values, &mut out);
    for i in 1..f.grid.n {
        out[i] += f.values[i];
    }
    RadialField::from_raw(f.grid, out)
}

/// Thomas algorithm for a tridiagonal system. `sub[0]` and `sup[last]` are ignored.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    assert!(sub.len() == m && sup.len() == m && rhs.len() == m);
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut pivot = diag[0];
    assert!(pivot != 0.0, "singular tridiagonal system");
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..m {
        pivot = diag[i] - sub[i] * c[i - 1];
        assert!(pivot != 0.0, "singular tridiagonal system");
        c[i] = sup[i] / pivot;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

pub(crate) fn helmholtz_solve_values(grid: RadialGrid, rhs: &[f64]) -> Vec<f64> {
    let n = grid.n;
    let h2 = grid.h() * grid.h();
    let m = n - 1;
    let off = vec![-1.0 / h2; m];
    let diag = vec![2.0 / h2 + 1.0; m];
    let b: Vec<f64> = (1..n).map(|i| grid.r(i) * rhs[i]).collect();
    let w = solve_tridiagonal(&off, &diag, &off, &b);
    let mut g = vec![0.0; n + 1];
    for i in 1..n {
        g[i] = w[i - 1] / grid.r(i);
    }
    enforce_boundary(grid, &mut g);
    g
}

/// Solves `(−Δ + 1) g = rhs` through `w = r g`:
/// `−w″ + w = r·rhs`, `w(0) = w(r_max) = 0`, three-point stencil.
pub fn helmholtz_solve(rhs: &RadialField) -> RadialField {
    RadialField::from_raw(rhs.grid, helmholtz_solve_values(rhs.grid, &rhs.values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub field: RadialField,
    /// Fraction of `∫ f²` lying beyond `r_max / t`, lost by the dilation.
    pub tail_loss: f64,
    pub tail_warning: bool,
}

/// Shape-preserving (Fritsch–Carlson) slopes on a uniform grid, `f′(0) = 0`.
fn monotone_slopes(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len() - 1;
    let delta: Vec<f64> = (0..n).map(|i| (values[i + 1] - values[i]) / h).collect();
    let mut d = vec![0.0; n + 1];
    for i in 1..n {
        let (a, b) = (delta[i - 1], delta[i]);
        d[i] = if a * b <= 0.0 { 0.0 } else { 2.0 / (1.0 / a + 1.0 / b) };
    }
    // one-sided three-point end slope, clipped to stay monotone
    let mut end = (3.0 * delta[n - 1] - delta[n - 2]) / 2.0;
    if end * delta[n - 1] <= 0.0 {
        end = 0.0;
    } else if delta[n - 1] * delta[n - 2] <= 0.0 && end.abs() > 3.0 * delta[n - 1].abs() {
        end = 3.0 * delta[n - 1];
    }
    d[n] = end;
    d
}

fn hermite(values: &[f64], slopes: &[f64], h: f64, x: f64) -> f64 {
    let n = values.len() - 1;
    let pos = x / h;
    let k = (pos.floor() as usize).min(n - 1);
    let s = pos - k as f64;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * values[k] + h10 * h * slopes[k] + h01 * values[k + 1] + h11 * h * slopes[k + 1]
}

/// `g(r) = t² f(t r)` by monotone cubic interpolation; `g = 0` where
/// `t r > r_max`.
pub fn rescale(f: &RadialField, t: f64) -> Result<Rescaled> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("rescale factor t = {t} must be positive")));
    }
    if t == 1.0 {
        return Ok(Rescaled { field: f.clone(), tail_loss: 0.0, tail_warning: false });
    }
    let grid = f.grid;
    let h = grid.h();
    let slopes = monotone_slopes(&f.values, h);
    let t2 = t * t;
    let values: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = t * grid.r(i);
            if x > grid.r_max {
                0.0
            } else {
                t2 * hermite(&f.values, &slopes, h, x)
            }
        })
        .collect();
    let tail_loss = if t > 1.0 {
        let cut = grid.r_max / t;
        let w = grid.simpson_weights();
        let total = compensated_sum(w.iter().zip(&f.values).map(|(w, x)| w * x * x));
        let lost = compensated_sum(
            (0..grid.len()).filter(|&i| grid.r(i) > cut).map(|i| w[i] * f.values[i].powi(2)),
        );
        if total > 0.0 {
            lost / total
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(Rescaled {
        field: RadialField::new(grid, values)?,
        tail_loss,
        tail_warning: tail_loss > DEFAULT_TAIL_TOL,
    })
}
