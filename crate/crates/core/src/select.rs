//! Leave-one-out cross-validation of the structural dimension.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::estimators::{fit, EmbeddedSample, FitOptions, Method};
use crate::smoothing::KernelKind;

/// CV curve over working dimensions `1..=p_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// `CV(l)` for `l = 1..=p_max`; `None` where fitting failed.
    pub cv_values: Vec<Option<f64>>,
    /// Bandwidth used for each working dimension.
    pub bandwidths: Vec<f64>,
    /// Anchors skipped (empty leave-one-out neighborhoods) per dimension.
    pub skipped: Vec<usize>,
    /// Failure message per dimension, if any.
    pub failures: Vec<Option<String>>,
    /// Selected dimension (1-based).
    pub d_hat: usize,
}

/// Nadaraya-Watson prediction of `Z_j` from the other samples, with kernel
/// distances measured along `B`. `None` when no other sample has positive
/// kernel weight.
pub fn nw_loo_predict(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    basis: &Basis,
    h: f64,
    j: usize,
    kind: KernelKind,
) -> Result<Option<DVector<f64>>> {
    check_inputs(z, x, basis, h)?;
    if j >= x.nrows() {
        return Err(Error::Validation(format!("anchor {j} out of range")));
    }
    let proj = x * basis.matrix();
    Ok(loo_from_projected(z, &proj, h, j, kind))
}

fn check_inputs(z: &DMatrix<f64>, x: &DMatrix<f64>, basis: &Basis, h: f64) -> Result<()> {
    if z.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: z.nrows(),
        });
    }
    if basis.p() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: basis.p(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::Validation(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

fn loo_from_projected(
    z: &DMatrix<f64>,
    proj: &DMatrix<f64>,
    h: f64,
    j: usize,
    kind: KernelKind,
) -> Option<DVector<f64>> {
    let (n, l) = proj.shape();
    let inv_h2 = 1.0 / (h * h);
    let mut total = 0.0;
    let mut acc = DVector::<f64>::zeros(z.ncols());
    for i in 0..n {
        if i == j {
            continue;
        }
        let mut v2 = 0.0;
        for c in 0..l {
            let diff = proj[(i, c)] - proj[(j, c)];
            v2 += diff * diff;
        }
        let k = kind.profile(v2 * inv_h2);
        if k > 0.0 {
            total += k;
            acc.axpy(k, &z.row(i).transpose(), 1.0);
        }
    }
    (total > 0.0).then(|| acc / total)
}

/// `CV = (1/n') Σ_j ‖Z_j − â_j‖²` over the `n'` anchors with a nonempty
/// leave-one-out neighborhood. Returns the value and the skipped count.
pub fn cv_value(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    basis: &Basis,
    h: f64,
    kind: KernelKind,
) -> Result<(f64, usize)> {
    check_inputs(z, x, basis, h)?;
    let proj = x * basis.matrix();
    let n = x.nrows();
    let residuals: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            loo_from_projected(z, &proj, h, j, kind)
                .map(|pred| (z.row(j).transpose() - pred).norm_squared())
        })
        .collect();
    let used: Vec<f64> = residuals.iter().flatten().copied().collect();
    if used.is_empty() {
        return Err(Error::Selection(format!(
            "every anchor has an empty neighborhood at bandwidth {h}"
        )));
    }
    let skipped = n - used.len();
    Ok((used.iter().sum::<f64>() / used.len() as f64, skipped))
}

/// Fits a basis for every working dimension `l = 1..=p_max` and returns the
/// minimizer of the leave-one-out criterion.
pub fn select_dimension(
    sample: &EmbeddedSample,
    method: Method,
    opts: &FitOptions,
    p_max: usize,
) -> Result<CvResult> {
    let (n, p) = sample.x.shape();
    if p_max == 0 || p_max > p {
        return Err(Error::Validation(format!(
            "p_max must satisfy 1 <= p_max <= p = {p}, got {p_max}"
        )));
    }
    let per_dim: Vec<(f64, Result<(f64, usize)>)> = (1..=p_max)
        .into_par_iter()
        .map(|l| {
            let h = opts.bandwidth.cv_bandwidth(n, p, l);
            let outcome = fit(sample, method, l, opts).and_then(|report| {
                let x = match &report.standardization {
                    Some(st) => std::borrow::Cow::Owned(st.apply(&sample.x)?),
                    None => std::borrow::Cow::Borrowed(&sample.x),
                };
                cv_value(&sample.z, &x, &report.basis, h, opts.kernel)
            });
            (h, outcome)
        })
        .collect();

    let mut result = CvResult {
        cv_values: Vec::with_capacity(p_max),
        bandwidths: Vec::with_capacity(p_max),
        skipped: Vec::with_capacity(p_max),
        failures: Vec::with_capacity(p_max),
        d_hat: 0,
    };
    let mut best: Option<(usize, f64)> = None;
    for (idx, (h, outcome)) in per_dim.into_iter().enumerate() {
        result.bandwidths.push(h);
        match outcome {
            Ok((cv, skipped)) => {
                if best.is_none_or(|(_, b)| cv < b) {
                    best = Some((idx + 1, cv));
                }
                result.cv_values.push(Some(cv));
                result.skipped.push(skipped);
                result.failures.push(None);
            }
            Err(e) => {
                result.cv_values.push(None);
                result.skipped.push(0);
                result.failures.push(Some(e.to_string()));
            }
        }
    }
    match best {
        Some((d, _)) => {
            result.d_hat = d;
            Ok(result)
        }
        None => Err(Error::Selection(
            "estimation failed for every working dimension".into(),
        )),
    }
}
