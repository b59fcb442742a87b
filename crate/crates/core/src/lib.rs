//! Sufficient dimension reduction for responses on Riemannian manifolds.
//!
//! Responses are SPD matrices (log-Euclidean or log-Cholesky metric) or
//! points on the unit sphere. They are embedded in Euclidean coordinates
//! through group logarithms or a tangent plane, after which the intrinsic
//! OPG and MAVE estimators recover the central mean subspace of the
//! predictors.

pub mod basis;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod local_fit;
pub mod manifold;
pub mod select;
pub mod simgen;
pub mod smoothing;

pub use basis::{subspace_error, Basis};
pub use error::{Error, Result};
pub use estimators::{
    fit, fit_both, imave_fit, iopg_fit, EmbeddedSample, Estimator, FitOptions, FitReport, Method, Metric,
    Responses,
};
pub use evaluation::{run_cv_study, run_experiment, run_replications, CvStudy, ExperimentResult};
pub use select::{select_dimension, CvResult};
pub use simgen::{generate, GeneratedData, ModelId, ModelSpec};
pub use smoothing::{BandwidthRule, KernelKind};
