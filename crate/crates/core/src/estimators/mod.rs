//! Intrinsic OPG and MAVE estimators of the dimension-reduction subspace.
//!
//! Both estimators work on an [`EmbeddedSample`]: responses are first
//! flattened by the chosen metric, after which the algorithms run on the
//! Euclidean coordinates.

mod embed;
mod imave;
mod iopg;
mod standardize;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::time::{Duration, Instant};

pub use embed::{embed_responses, Basepoint, EmbeddedPoint, EmbeddedSample, Metric, Responses};
pub use imave::imave_fit;
pub use iopg::iopg_fit;
pub use standardize::{standardize_predictors, Standardization};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::local_fit::{fit_projected, LocalFit, Ridge};
use crate::smoothing::{weights_from_projected, BandwidthRule, KernelKind};

/// Anchors whose neighborhood stays degenerate after this many bandwidth
/// inflations are skipped.
const MAX_INFLATIONS: usize = 5;
const INFLATION_FACTOR: f64 = 1.5;
/// Fraction of skipped anchors above which an iteration fails.
const MAX_SKIPPED_FRACTION: f64 = 0.2;

/// Tuning of one estimation run.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Number of alternating iterations.
    pub max_iters: usize,
    pub kernel: KernelKind,
    pub bandwidth: BandwidthRule,
    pub ridge: Ridge,
    /// Standardize predictors before fitting (used by [`fit`]).
    pub standardize: bool,
    /// Stop once consecutive bases differ by less than this subspace error.
    pub early_stop: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 30,
            kernel: KernelKind::Quartic,
            bandwidth: BandwidthRule::default(),
            ridge: Ridge::default(),
            standardize: true,
            early_stop: None,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Validation("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Iopg,
    Imave,
}

/// A metric paired with an algorithm, e.g. `eu-imave`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Estimator {
    pub metric: Metric,
    pub method: Method,
}

impl Estimator {
    pub const ALL: [Estimator; 6] = [
        Estimator::new(Metric::LogEuclidean, Method::Iopg),
        Estimator::new(Metric::LogEuclidean, Method::Imave),
        Estimator::new(Metric::LogCholesky, Method::Iopg),
        Estimator::new(Metric::LogCholesky, Method::Imave),
        Estimator::new(Metric::Sphere, Method::Iopg),
        Estimator::new(Metric::Sphere, Method::Imave),
    ];

    pub const fn new(metric: Metric, method: Method) -> Self {
        Self { metric, method }
    }

    pub fn name(&self) -> String {
        let m = match self.method {
            Method::Iopg => "iopg",
            Method::Imave => "imave",
        };
        format!("{}-{}", self.metric.prefix(), m)
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == lower)
            .ok_or_else(|| Error::Validation(format!("unknown method '{s}'")))
    }
}

/// Basis estimate with run diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Estimate in the coordinates the algorithm ran on.
    pub basis: Basis,
    /// Estimate mapped back to the original predictor scale, when the
    /// predictors were standardized.
    pub original_basis: Option<Basis>,
    pub standardization: Option<Standardization>,
    /// Largest number of anchors skipped in any iteration.
    pub skipped_anchors: usize,
    /// Iterations run by the final stage.
    pub iterations: usize,
    /// Bandwidth used in the final iteration.
    pub final_bandwidth: f64,
    /// Wall-clock time of the run, including the iOPG start of iMAVE.
    pub elapsed: Duration,
}

/// Diagnostics of one algorithm run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct RunStats {
    pub iterations: usize,
    pub bandwidth: f64,
    pub skipped: usize,
}

/// Runs `method` on `sample`, standardizing first when requested.
pub fn fit(sample: &EmbeddedSample, method: Method, d: usize, opts: &FitOptions) -> Result<FitReport> {
    opts.validate()?;
    let start = Instant::now();
    let (work, standardization) = if opts.standardize {
        let (x, st) = standardize_predictors(&sample.x)?;
        let mut s = sample.clone();
        s.x = x;
        (std::borrow::Cow::Owned(s), Some(st))
    } else {
        (std::borrow::Cow::Borrowed(sample), None)
    };
    let (basis, stats) = match method {
        Method::Iopg => iopg::run(&work, d, opts)?,
        Method::Imave => {
            let (init, s0) = iopg::run(&work, d, opts)?;
            let (b, s1) = imave::run(&work, d, opts, &init)?;
            (b, RunStats { skipped: s0.skipped.max(s1.skipped), ..s1 })
        }
    };
    let original_basis = standardization
        .as_ref()
        .map(|st| st.to_original(&basis))
        .transpose()?;
    Ok(FitReport {
        basis,
        original_basis,
        standardization,
        skipped_anchors: stats.skipped,
        iterations: stats.iterations,
        final_bandwidth: stats.bandwidth,
        elapsed: start.elapsed(),
    })
}

/// Runs iOPG and then iMAVE from the iOPG estimate, returning both reports.
/// Equivalent to two calls of [`fit`] but shares the iOPG stage.
pub fn fit_both(sample: &EmbeddedSample, d: usize, opts: &FitOptions) -> Result<(FitReport, FitReport)> {
    opts.validate()?;
    let (work, standardization) = if opts.standardize {
        let (x, st) = standardize_predictors(&sample.x)?;
        let mut s = sample.clone();
        s.x = x;
        (std::borrow::Cow::Owned(s), Some(st))
    } else {
        (std::borrow::Cow::Borrowed(sample), None)
    };
    let start = Instant::now();
    let (b0, s0) = iopg::run(&work, d, opts)?;
    let t0 = start.elapsed();
    let (b1, s1) = imave::run(&work, d, opts, &b0)?;
    let t1 = start.elapsed();
    let report = |basis: Basis, stats: RunStats, elapsed: Duration| -> Result<FitReport> {
        Ok(FitReport {
            original_basis: standardization.as_ref().map(|st| st.to_original(&basis)).transpose()?,
            basis,
            standardization: standardization.clone(),
            skipped_anchors: stats.skipped,
            iterations: stats.iterations,
            final_bandwidth: stats.bandwidth,
            elapsed,
        })
    };
    let s1 = RunStats { skipped: s0.skipped.max(s1.skipped), ..s1 };
    Ok((report(b0, s0, t0)?, report(b1, s1, t1)?))
}

impl FitReport {
    /// Estimate on the original predictor scale.
    pub fn estimate(&self) -> &Basis {
        self.original_basis.as_ref().unwrap_or(&self.basis)
    }
}

/// Normalized weights at anchor `j`, inflating the bandwidth while fewer
/// than `min_support` samples carry positive weight. `None` means the anchor
/// is skipped.
fn anchor_weights(
    kernel_coords: &DMatrix<f64>,
    j: usize,
    h: f64,
    kind: KernelKind,
    min_support: usize,
) -> Option<DVector<f64>> {
    let mut h = h;
    for _ in 0..=MAX_INFLATIONS {
        if let Ok(w) = weights_from_projected(kernel_coords, j, h, kind, true) {
            if w.iter().filter(|&&v| v > 0.0).count() >= min_support {
                return Some(w);
            }
        }
        h *= INFLATION_FACTOR;
    }
    None
}

/// Weights and local linear fit at every anchor, computed in parallel and
/// returned in anchor order.
fn local_fits(
    z: &DMatrix<f64>,
    kernel_coords: &DMatrix<f64>,
    design: &DMatrix<f64>,
    h: f64,
    opts: &FitOptions,
) -> Result<Vec<Option<(DVector<f64>, LocalFit)>>> {
    let n = z.nrows();
    let min_support = design.ncols() + 1;
    let fits: Vec<Option<(DVector<f64>, LocalFit)>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let w = anchor_weights(kernel_coords, j, h, opts.kernel, min_support)?;
            let fit = fit_projected(z, design, j, &w, opts.ridge).ok()?;
            Some((w, fit))
        })
        .collect();
    let skipped = fits.iter().filter(|f| f.is_none()).count();
    if skipped as f64 > MAX_SKIPPED_FRACTION * n as f64 {
        return Err(Error::Estimation(format!(
            "{skipped} of {n} anchors have degenerate neighborhoods at bandwidth {h}"
        )));
    }
    Ok(fits)
}

fn check_d(d: usize, p: usize) -> Result<()> {
    if d == 0 || d > p {
        return Err(Error::Validation(format!(
            "structural dimension must satisfy 1 <= d <= p = {p}, got {d}"
        )));
    }
    Ok(())
}

fn converged(prev: &Basis, next: &Basis, opts: &FitOptions) -> bool {
    match opts.early_stop {
        Some(tol) => crate::basis::subspace_error(prev, next).is_ok_and(|e| e < tol),
        None => false,
    }
}
