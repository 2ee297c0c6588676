//! Numerical analysis of nonuniform exponential behavior of evolution
//! families on the half-line.
//!
//! The entry point for most work is [`Analysis`], which binds a family to a
//! time grid and a sup-sampling rule and caches transition matrices.

pub mod analysis;
pub mod cache;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod exponents;
pub mod family;
pub mod generator;
pub mod grid;
pub mod linalg;
pub mod norm;
pub mod semigroup;
pub mod witness;

pub use analysis::{Analysis, Thresholds};
pub use cache::{propagate_rows, FamilyEvalCache};
pub use error::{Error, Result};
pub use family::{BuiltinMatrix, Coefficient, EvolutionFamily, IntegratorConfig, Potential, TimePoint};
pub use grid::{GridFunction, SupSampling, TimeGrid};
pub use linalg::StateMatrix;
