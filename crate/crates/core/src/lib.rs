//! Optimal council weights for two-tier voting under collective bias models.
//!
//! The crate covers the large-population limit (closed-form weights from a
//! handful of averaged bias statistics), exact and Monte Carlo moments for
//! finite group sizes, and the sign analysis of the constant weight term.

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod finite_n;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod nonneg;
pub mod quadrature;

pub use asymptotics::{
    AsymptoticSummary, CbmSpec, HeteroSolution, TightSolution, WeightReport, WeightSolution,
};
pub use config::{KernelConfig, MeasureConfig, ModelConfig};
pub use error::{CbmError, ErrorKind, Result};
pub use finite_n::{Estimate, FiniteMoments, FiniteWeights, Method, VoteSample};
pub use kernels::{BiasKernel, KernelMoments};
pub use linalg::SymMatrix;
pub use measures::{IntervalQuery, LocalMoments, Measure, Part};
pub use nonneg::{ContractionFamily, ContractionReport, FosdReport, RamReport, RibbonReport};
pub use quadrature::QuadratureRule;
