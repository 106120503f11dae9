//! Radial ground states of a two-component Schrödinger–Poisson system with
//! power-type cooperative coupling,
//!
//! ```text
//! −Δu + u + λφu = |u|^{2q−2}u + β|v|^q|u|^{q−2}u
//! −Δv + v + λφv = |v|^{2q−2}v + β|u|^q|v|^{q−2}v
//! −Δφ = 4π(u² + v²)
//! ```
//!
//! computed by constrained minimization on the Nehari–Pohozaev set.

pub mod coulomb;
pub mod energy;
pub mod error;
pub mod hbeta;
pub mod krylov;
pub mod lab;
pub mod manifold;
pub mod radial;
pub mod solver;

pub use error::{Error, Result};
