//! Adaptive-to-model lack-of-fit testing for partially parametric
//! single-index regression models `Y = G(beta'X, W, theta) + e`.
//!
//! The pipeline estimates the partial central subspace of `Y | X` given `W`
//! ([`sdr`]), fits the hypothesized mean function by nonlinear least squares
//! ([`model`]), evaluates a residual-marked empirical-process statistic on the
//! projected covariates and calibrates it with a multiplier Monte Carlo
//! procedure ([`lackfit`]). [`sim`] generates the benchmark designs and runs
//! size/power experiments.

// `!(v > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod lackfit;
pub mod rng;
pub mod model;
pub mod report;
pub mod sdr;
pub mod sim;

pub use data::{load_csv, prepare_boston, standardize, write_csv, ColumnNames, Dataset, Schema, Standardization};
pub use error::{Error, Result};
pub use model::{finite_diff_grad, influence_vectors, nls_fit, FitResult, ModelFamily};
pub use sdr::{estimate_basis, BasisEstimate, CandidateMatrix, SdrConfig};
pub use lackfit::{
    build_projected, mc_pvalue, mc_replicate, pvalue_from_replicates, rho_matrix, run_test, tn_statistic,
    McSummary, ProjectedSample, TestConfig, TestReport,
};
pub use report::{ReportRecord, ResolvedConfig};
pub use sim::{generate, power_experiment, CaseId, ExperimentSpec, GridPoint, PowerRow, PowerTable, SimDesign};
