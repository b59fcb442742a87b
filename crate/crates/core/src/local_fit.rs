//! Weighted local linear least squares at one anchor.
//!
//! The full normal equations use the design `χ_i = (I_q, I_q ⊗ r_iᵀ)ᵀ`, which
//! is `I_q ⊗ (1, r_iᵀ)ᵀ` up to a permutation of rows. The system therefore
//! splits into one `(1+k)×(1+k)` weighted least-squares problem shared by all
//! `q` response coordinates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tikhonov term added to the local Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    /// Absolute value added to every diagonal entry.
    Fixed(f64),
    /// Multiple of `trace(Gram)/(1+k)`.
    Relative(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-8)
    }
}

impl Ridge {
    /// Absolute ridge for a Gram matrix of the given trace and order.
    pub fn resolve(self, trace: f64, order: usize) -> f64 {
        match self {
            Ridge::Fixed(r) => r,
            Ridge::Relative(c) => c * trace / order as f64,
        }
    }
}

/// Intercept and slopes of the local linear fit at one anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub anchor: usize,
    /// Local intercept `a_j`, length `q`.
    pub intercept: DVector<f64>,
    /// Slope matrix `q×k`; row `l` is the gradient of coordinate `l`.
    pub slope: DMatrix<f64>,
}

impl LocalFit {
    /// Fitted value at reduced regressor `r`.
    pub fn predict(&self, r: &[f64]) -> DVector<f64> {
        let mut out = self.intercept.clone();
        for (l, o) in out.iter_mut().enumerate() {
            *o += r
                .iter()
                .enumerate()
                .map(|(c, rc)| self.slope[(l, c)] * rc)
                .sum::<f64>();
        }
        out
    }
}

/// Local linear fit at anchor `j` from reduced coordinates `proj` whose row
/// `i` is `Bᵀ X_i`, so that `r_i = proj_i − proj_j`.
pub fn fit_projected(
    z: &DMatrix<f64>,
    proj: &DMatrix<f64>,
    j: usize,
    w: &DVector<f64>,
    ridge: Ridge,
) -> Result<LocalFit> {
    let (n, k) = proj.shape();
    let q = z.ncols();
    if z.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: z.nrows(),
        });
    }
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.len(),
        });
    }
    if j >= n {
        return Err(Error::Validation(format!("anchor {j} out of range for {n} samples")));
    }
    let order = k + 1;
    let mut gram = DMatrix::<f64>::zeros(order, order);
    let mut rhs = DMatrix::<f64>::zeros(order, q);
    let mut row = vec![0.0; order];
    row[0] = 1.0;
    for i in 0..n {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for c in 0..k {
            row[c + 1] = proj[(i, c)] - proj[(j, c)];
        }
        for b in 0..order {
            let wb = wi * row[b];
            for a in b..order {
                gram[(a, b)] += wb * row[a];
            }
            for l in 0..q {
                rhs[(b, l)] += wb * z[(i, l)];
            }
        }
    }
    for b in 0..order {
        for a in (b + 1)..order {
            gram[(b, a)] = gram[(a, b)];
        }
    }
    let lambda = ridge.resolve(gram.trace(), order);
    for a in 0..order {
        gram[(a, a)] += lambda;
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient { anchor: j })?;
    let coef = chol.solve(&rhs);
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient { anchor: j });
    }
    let intercept = coef.row(0).transpose();
    let slope = coef.rows(1, k).transpose();
    Ok(LocalFit {
        anchor: j,
        intercept,
        slope,
    })
}

/// Local linear fit of `Z` on `Bᵀ(X_i − X_j)` with weights `w`.
///
/// `basis = None` uses the full design `X_i − X_j`.
pub fn local_linear_fit(
    z: &DMatrix<f64>,
    x: &DMatrix<f64>,
    basis: Option<&DMatrix<f64>>,
    j: usize,
    w: &DVector<f64>,
    ridge: Ridge,
) -> Result<LocalFit> {
    match basis {
        Some(b) => {
            if b.nrows() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: x.ncols(),
                    found: b.nrows(),
                });
            }
            fit_projected(z, &(x * b), j, w, ridge)
        }
        None => fit_projected(z, x, j, w, ridge),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn constant_response_has_zero_slope() {
        let x = dmatrix![0.0, 1.0; 0.5, 0.2; 1.0, 0.7; 0.3, 0.3];
        let z = DMatrix::from_fn(4, 3, |_, l| [1.5, -2.0, 0.25][l]);
        let w = DVector::from_column_slice(&[0.4, 0.3, 0.2, 0.1]);
        let fit = local_linear_fit(&z, &x, None, 1, &w, Ridge::Fixed(0.0)).unwrap();
        assert_relative_eq!(fit.intercept.as_slice(), &[1.5, -2.0, 0.25][..], epsilon = 1e-12);
        assert!(fit.slope.amax() < 1e-12);
    }

    #[test]
    fn singular_gram_without_ridge_is_reported() {
        let x = dmatrix![0.0, 1.0; 0.5, 0.2; 1.0, 0.7];
        let z = DMatrix::from_element(3, 1, 1.0);
        let w = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
        let err = local_linear_fit(&z, &x, None, 1, &w, Ridge::Fixed(0.0)).unwrap_err();
        assert_eq!(err, Error::RankDeficient { anchor: 1 });
        // the default ridge repairs it
        let fit = local_linear_fit(&z, &x, None, 1, &w, Ridge::default()).unwrap();
        assert_relative_eq!(fit.intercept[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn prediction_uses_slope_rows() {
        let fit = LocalFit {
            anchor: 0,
            intercept: DVector::from_column_slice(&[1.0, 2.0]),
            slope: dmatrix![1.0, 0.0; 0.5, -1.0],
        };
        assert_eq!(fit.predict(&[2.0, 3.0]).as_slice(), &[3.0, 0.0]);
    }
}
