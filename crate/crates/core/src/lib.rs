//! Exact orbit kernels and ergodic diagnostics for distal skew products on
//! tori, the Furstenberg lacunary cocycle family, the Heisenberg nilflow and
//! self-joinings.
//!
//! Torus coordinates are 128-bit fixed-point fractions ([`Frac`]) so affine
//! orbits are computed without rounding drift; real-valued observables are
//! evaluated from exactly reduced phases.

pub mod cli;
pub mod config;
pub mod demos;
pub mod diagnostics;
pub mod error;
pub mod flows;
pub mod joinings;
pub mod lacunary;
pub mod nilflow;
pub mod precise;
pub mod torus;

pub use error::{Error, Result};
pub use torus::{Frac, TorusPoint};
