//! Balanced distribution adaptation between a labeled source domain and an
//! unlabeled target domain.
//!
//! The library learns a projection that minimizes a `mu`-weighted mix of the
//! marginal and class-conditional maximum mean discrepancy between the two
//! domains, subject to a variance-preserving constraint, then labels the
//! target samples with a nearest-neighbor classifier that is refined over a
//! fixed number of pseudo-label iterations. Setting `mu = 0` recovers
//! marginal-only adaptation and `mu = 0.5` (unweighted) the equal-weight
//! joint variant; the `weighted` flag switches the class terms to their
//! prior-weighted form for imbalanced problems.

pub mod adapt;
pub mod classifier;
pub mod data_io;
pub mod eigsolver;
pub mod error;
pub mod kernel;
pub mod mmd;
pub mod types;

pub use adapt::{
    best_of_sweep, fit, special_case_jda, sweep_mu, sweep_runs, AdaptModel, DEFAULT_MU_GRID,
};
pub use classifier::{accuracy, knn_predict, NnModel};
pub use eigsolver::{solve_projection, Projection};
pub use error::{Error, Result};
pub use kernel::{centering_matrix, linear_kernel, rbf_kernel, stack_domains, InputMatrix, InputMode};
pub use mmd::{
    build_combined, build_m0, build_mc, build_wc, combine, estimate_priors, mmd_distance,
    ClassPriors, MmdKind, MmdMatrix,
};
pub use types::{
    label_histogram, validate_pair, AdaptConfig, IterationRecord, KernelChoice, Label,
    LabeledDomain, RunReport, UnlabeledDomain,
};
