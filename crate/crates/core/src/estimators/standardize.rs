use nalgebra::{DMatrix, DVector};

use crate::basis::Basis;
use crate::error::{Error, Result};

/// Per-column location and scale used to standardize predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: DVector<f64>,
    pub scale: DVector<f64>,
}

impl Standardization {
    /// Maps a basis estimated on standardized predictors back to the
    /// original coordinates: `diag(1/scale) B`, re-orthonormalized.
    pub fn to_original(&self, b: &Basis) -> Result<Basis> {
        let mut m = b.matrix().clone();
        for (r, s) in self.scale.iter().enumerate() {
            m.row_mut(r).scale_mut(1.0 / s);
        }
        Basis::orthonormalize(m)
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, c| {
            (x[(i, c)] - self.mean[c]) / self.scale[c]
        }))
    }
}

/// Centers every column and scales it to unit sample standard deviation.
pub fn standardize_predictors(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardization)> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(Error::Validation("need at least 2 rows to standardize".into()));
    }
    let mut mean = DVector::zeros(p);
    let mut scale = DVector::zeros(p);
    for c in 0..p {
        let col = x.column(c);
        let mu = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if !(sd > 1e-12 * mu.abs().max(1.0)) {
            return Err(Error::Validation(format!(
                "predictor column {} is constant and cannot be standardized",
                c + 1
            )));
        }
        mean[c] = mu;
        scale[c] = sd;
    }
    let st = Standardization { mean, scale };
    let z = st.apply(x)?;
    Ok((z, st))
}
