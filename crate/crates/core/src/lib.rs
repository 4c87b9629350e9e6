//! Kriging-based sequential search: Matérn kernels, simple kriging, space-filling
//! and greedy designs, MMSE/IMSE criteria, sample-path simulation, and
//! convergence-rate estimation.

pub mod config;
pub mod criteria;
pub mod design;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod kernel;
pub mod kriging;
pub mod linalg;
pub mod output;
pub mod rates;
pub mod simulate;
pub mod sobol;

pub use criteria::{imse, mmse, worst_case_linf_sq, Criterion, CriterionValue};
pub use design::{
    fill_distance, greedy_mmse, random_design, tensor_grid, CandidateKind, CandidateSet, Design,
};
pub use error::{Error, Result};
pub use geometry::{Domain, PointSet};
pub use kernel::{MaternKernel, Smoothness};
pub use kriging::{KrigingModel, PosteriorGrid};
pub use rates::{fit_exponent, theory_slope, Problem, RateReport};
pub use simulate::{SamplePath, StrategyTrace};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
