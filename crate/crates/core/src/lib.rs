//! Two-step robust linear regression under strong contamination.
//!
//! The estimator runs in two stages. A spectral filtering loop first finds
//! sample weights on the capped simplex whose weighted covariate mean is a
//! robust location estimate and whose weighted second moment carries a
//! small top eigenvalue. A weighted Huber regression on the recentered,
//! reweighted design then produces the coefficient estimate.
//!
//! Everything in this crate is `no_std` and only needs `alloc`. File
//! formats, the experiment harness and the command-line front end live in
//! the `rhuber` companion crate.
//!
//! Module map:
//!
//! * [`dataset`]: clean generators, contamination attacks, oracle bookkeeping.
//! * [`simplex`]: the capped simplex and Euclidean projection onto it.
//! * [`spectral`]: weighted second moments, power iteration, coordinate medians.
//! * [`robust_weights`]: the filtering loop and its spectral certificate.
//! * [`huber`]: Huber calculus, the weighted Huber program, the joint
//!   `(theta, beta)` formulation and least-squares baselines.
//! * [`diagnostics`]: error metrics, rate bundles and the deterministic
//!   condition report.
#![no_std]
// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod diagnostics;
mod error;
pub mod huber;
pub mod linalg;
pub mod rng;
pub mod robust_weights;
pub mod simplex;
pub mod spectral;
pub mod stats;

pub use dataset::{
    AttackSpec, ContaminationSpec, Dataset, DesignSpec, GeneratorSpec, NoiseSpec, OracleInstance,
};
pub use diagnostics::{ConditionReport, ErrorMetrics, RateBundle};
pub use error::{Error, Result};
pub use huber::{EstimationResult, HuberConfig, SolverKind};
pub use linalg::Matrix;
pub use robust_weights::{
    CertificateReport, CovarianceMode, RobustWeightConfig, RobustWeightResult, Termination,
};
pub use simplex::WeightVector;
pub use spectral::{Eigenpair, SecondMoment};
