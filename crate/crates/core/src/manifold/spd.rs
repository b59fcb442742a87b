//! Symmetric positive definite matrices under the log-Euclidean and
//! log-Cholesky metrics.
//!
//! Both metrics flatten `Sym+(m)` onto a fixed vector space: the matrix
//! logarithm sends an SPD matrix to `Sym(m)`, and the Cholesky map sends its
//! Cholesky factor to the space of lower-triangular matrices. Distances are
//! Frobenius norms in those spaces.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a logarithm is refused.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// Relative tolerance used to accept a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

fn check_square(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() == 0 || a.nrows() != a.ncols() {
        return Err(Error::Validation(format!(
            "expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    Ok(a.nrows())
}

/// Symmetrizes `a` as `(a + aᵀ)/2` after checking it is symmetric within
/// `SYMMETRY_TOL · max(1, ‖a‖_F)`.
fn symmetrized(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = check_square(&a)?;
    let tol = SYMMETRY_TOL * a.norm().max(1.0);
    for k in 0..m {
        for l in 0..k {
            let gap = (a[(k, l)] - a[(l, k)]).abs();
            if gap > tol {
                return Err(Error::Validation(format!(
                    "matrix is not symmetric: |a[{k}][{l}] - a[{l}][{k}]| = {gap:e}"
                )));
            }
        }
    }
    let t = a.transpose();
    Ok((a + t) * 0.5)
}

/// A symmetric `m×m` matrix, the tangent space at the identity of `Sym+(m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        symmetrized(entries).map(Self)
    }

    pub fn zeros(m: usize) -> Self {
        Self(DMatrix::zeros(m, m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// A symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix(DMatrix<f64>);

impl SpdMatrix {
    /// Validates symmetry and positive definiteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let a = symmetrized(entries)?;
        if a.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self(a))
    }

    pub fn identity(m: usize) -> Self {
        Self(DMatrix::identity(m, m))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// A lower-triangular `m×m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriMatrix(DMatrix<f64>);

impl LowerTriMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let m = check_square(&entries)?;
        for k in 0..m {
            for l in (k + 1)..m {
                if entries[(k, l)] != 0.0 {
                    return Err(Error::Validation(format!(
                        "entry [{k}][{l}] above the diagonal is nonzero"
                    )));
                }
            }
        }
        Ok(Self(entries))
    }

    pub fn zeros(m: usize) -> Self {
        Self(DMatrix::zeros(m, m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// Rebuilds `Q diag(f(λ)) Qᵀ`.
fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (mut col, &lambda) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
        col *= f(lambda);
    }
    let out = scaled * q.transpose();
    let t = out.transpose();
    (out + t) * 0.5
}

/// Matrix logarithm via the symmetric eigendecomposition.
pub fn spd_log(s: &SpdMatrix) -> Result<SymMatrix> {
    let eig = SymmetricEigen::new(s.0.clone());
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = EIGENVALUE_FLOOR * max;
    if !(min > floor) || min <= 0.0 {
        return Err(Error::Singular {
            eigenvalue: min,
            floor,
        });
    }
    Ok(SymMatrix(spectral_map(&eig, f64::ln)))
}

/// Matrix exponential via the symmetric eigendecomposition.
pub fn spd_exp(v: &SymMatrix) -> SpdMatrix {
    let eig = SymmetricEigen::new(v.0.clone());
    SpdMatrix(spectral_map(&eig, f64::exp))
}

/// The log-Euclidean group operation `exp(log S1 + log S2)`.
pub fn group_op(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<SpdMatrix> {
    check_dims(s1.dim(), s2.dim())?;
    let sum = spd_log(s1)?.0 + spd_log(s2)?.0;
    Ok(spd_exp(&SymMatrix(sum)))
}

/// Geodesic distance `‖log S1 − log S2‖_F` under the log-Euclidean metric.
pub fn dist_log_euclidean(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64> {
    check_dims(s1.dim(), s2.dim())?;
    Ok((spd_log(s1)?.0 - spd_log(s2)?.0).norm())
}

/// Lower Cholesky factor with positive diagonal.
pub fn cholesky_factor(s: &SpdMatrix) -> Result<LowerTriMatrix> {
    let chol = s.0.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(LowerTriMatrix(chol.l()))
}

/// Keeps the strict lower triangle and replaces the diagonal by its log.
pub fn chol_map(l: &LowerTriMatrix) -> Result<LowerTriMatrix> {
    let mut out = l.0.clone();
    for k in 0..out.nrows() {
        let d = out[(k, k)];
        if !(d > 0.0) {
            return Err(Error::Domain(format!(
                "Cholesky factor diagonal entry {k} is {d}, expected positive"
            )));
        }
        out[(k, k)] = d.ln();
    }
    Ok(LowerTriMatrix(out))
}

/// Inverse of [`chol_map`]: exponentiates the diagonal.
pub fn chol_map_inverse(t: &LowerTriMatrix) -> LowerTriMatrix {
    let mut out = t.0.clone();
    for k in 0..out.nrows() {
        out[(k, k)] = out[(k, k)].exp();
    }
    LowerTriMatrix(out)
}

/// Geodesic distance under the log-Cholesky metric.
pub fn dist_log_cholesky(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64> {
    check_dims(s1.dim(), s2.dim())?;
    let a = chol_map(&cholesky_factor(s1)?)?;
    let b = chol_map(&cholesky_factor(s2)?)?;
    Ok((a.0 - b.0).norm())
}

/// Recovers the SPD matrix `L Lᵀ` from a log-Cholesky coordinate matrix.
pub fn from_log_cholesky(t: &LowerTriMatrix) -> SpdMatrix {
    let l = chol_map_inverse(t).0;
    let s = &l * l.transpose();
    let st = s.transpose();
    SpdMatrix((s + st) * 0.5)
}

/// Closed-form log-Euclidean Fréchet mean: `exp` of the average logarithm.
pub fn frechet_mean_log_euclidean(points: &[SpdMatrix]) -> Result<SpdMatrix> {
    let first = points
        .first()
        .ok_or_else(|| Error::Validation("empty sample".into()))?;
    let m = first.dim();
    let mut acc = DMatrix::zeros(m, m);
    for s in points {
        check_dims(m, s.dim())?;
        acc += spd_log(s)?.0;
    }
    Ok(spd_exp(&SymMatrix(acc / points.len() as f64)))
}

/// Closed-form log-Cholesky Fréchet mean: average of the Cholesky maps.
pub fn frechet_mean_log_cholesky(points: &[SpdMatrix]) -> Result<SpdMatrix> {
    let first = points
        .first()
        .ok_or_else(|| Error::Validation("empty sample".into()))?;
    let m = first.dim();
    let mut acc = DMatrix::zeros(m, m);
    for s in points {
        check_dims(m, s.dim())?;
        acc += chol_map(&cholesky_factor(s)?)?.0;
    }
    Ok(from_log_cholesky(&LowerTriMatrix(acc / points.len() as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use std::f64::consts::E;

    fn spd(a: DMatrix<f64>) -> SpdMatrix {
        SpdMatrix::new(a).unwrap()
    }

    #[test]
    fn log_of_identity_is_zero() {
        let l = spd_log(&SpdMatrix::identity(2)).unwrap();
        assert_relative_eq!(l.matrix(), &DMatrix::zeros(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn log_of_diagonal() {
        let l = spd_log(&SpdMatrix::from_diagonal(&[E, 1.0]).unwrap()).unwrap();
        assert_relative_eq!(l.matrix(), &dmatrix![1.0, 0.0; 0.0, 0.0], epsilon = 1e-14);
    }

    #[test]
    fn log_of_two_by_two() {
        // eigenpairs (3, (1,1)/√2) and (1, (1,-1)/√2)
        let l = spd_log(&spd(dmatrix![2.0, 1.0; 1.0, 2.0])).unwrap();
        let h = 3f64.ln() / 2.0;
        assert_relative_eq!(l.matrix(), &dmatrix![h, h; h, h], epsilon = 1e-14);
        assert_relative_eq!(h, 0.5493061443340549, epsilon = 1e-15);
    }

    #[test]
    fn exp_examples() {
        let z = spd_exp(&SymMatrix::zeros(3));
        assert_relative_eq!(z.matrix(), &DMatrix::identity(3, 3), epsilon = 1e-15);
        let e = spd_exp(&SymMatrix::new(dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap());
        assert_relative_eq!(e.matrix(), &dmatrix![E, 0.0; 0.0, 1.0], epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_symmetric() {
        let err = SpdMatrix::new(dmatrix![2.0, 1.0; 0.5, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(SymMatrix::new(dmatrix![0.0, 1.0; 0.0, 0.0]).is_err());
    }

    #[test]
    fn symmetrizes_round_off() {
        let s = SpdMatrix::new(dmatrix![2.0, 1.0; 1.0 + 1e-14, 2.0]).unwrap();
        assert_eq!(s.matrix()[(0, 1)], s.matrix()[(1, 0)]);
    }

    #[test]
    fn rejects_near_singular_log() {
        let s = spd(dmatrix![1.0, 0.0; 0.0, 1e-14]);
        match spd_log(&s) {
            Err(Error::Singular { eigenvalue, .. }) => assert_relative_eq!(eigenvalue, 1e-14),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn group_identity_and_diagonal_product() {
        let s = spd(dmatrix![3.0, 0.5; 0.5, 1.0]);
        let r = group_op(&s, &SpdMatrix::identity(2)).unwrap();
        assert_relative_eq!(r.matrix(), s.matrix(), epsilon = 1e-13);
        let a = SpdMatrix::from_diagonal(&[2.0, 3.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[5.0, 0.25]).unwrap();
        let r = group_op(&a, &b).unwrap();
        assert_relative_eq!(r.matrix(), &dmatrix![10.0, 0.0; 0.0, 0.75], epsilon = 1e-13);
        assert!(group_op(&a, &SpdMatrix::identity(3)).is_err());
    }

    #[test]
    fn distance_examples() {
        let i = SpdMatrix::identity(2);
        let s = SpdMatrix::from_diagonal(&[E * E, 1.0]).unwrap();
        assert_relative_eq!(dist_log_euclidean(&i, &s).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(dist_log_cholesky(&i, &s).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(dist_log_euclidean(&s, &s).unwrap(), 0.0);
        assert_eq!(dist_log_cholesky(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky_factor(&SpdMatrix::identity(3)).unwrap();
        assert_eq!(l.matrix(), &DMatrix::identity(3, 3));
        let l = cholesky_factor(&SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap()).unwrap();
        assert_relative_eq!(l.matrix(), &dmatrix![2.0, 0.0; 0.0, 3.0], epsilon = 1e-15);
        let l = cholesky_factor(&spd(dmatrix![4.0, 2.0; 2.0, 5.0])).unwrap();
        assert_relative_eq!(l.matrix(), &dmatrix![2.0, 0.0; 1.0, 2.0], epsilon = 1e-15);
    }

    #[test]
    fn chol_map_examples() {
        let z = chol_map(&LowerTriMatrix::new(DMatrix::identity(2, 2)).unwrap()).unwrap();
        assert_eq!(z.matrix(), &DMatrix::zeros(2, 2));
        let l = LowerTriMatrix::new(dmatrix![1.0, 0.0; 2.0, 3.0]).unwrap();
        let t = chol_map(&l).unwrap();
        assert_relative_eq!(t.matrix(), &dmatrix![0.0, 0.0; 2.0, 3f64.ln()], epsilon = 1e-15);
        assert_relative_eq!(chol_map_inverse(&t).matrix(), l.matrix(), epsilon = 1e-12);
        assert_eq!(chol_map_inverse(&LowerTriMatrix::zeros(2)).matrix(), &DMatrix::identity(2, 2));
    }

    #[test]
    fn chol_map_rejects_nonpositive_diagonal() {
        let l = LowerTriMatrix::new(dmatrix![1.0, 0.0; 2.0, 0.0]).unwrap();
        assert!(matches!(chol_map(&l), Err(Error::Domain(_))));
        assert!(LowerTriMatrix::new(dmatrix![1.0, 1.0; 0.0, 1.0]).is_err());
    }

    #[test]
    fn closed_form_frechet_means() {
        let a = SpdMatrix::from_diagonal(&[E, 1.0]).unwrap();
        let b = SpdMatrix::from_diagonal(&[1.0 / E, E * E]).unwrap();
        let mean = frechet_mean_log_euclidean(&[a.clone(), b.clone()]).unwrap();
        assert_relative_eq!(mean.matrix(), &dmatrix![1.0, 0.0; 0.0, E], epsilon = 1e-13);
        let mean = frechet_mean_log_cholesky(&[a, b]).unwrap();
        assert_relative_eq!(mean.matrix(), &dmatrix![1.0, 0.0; 0.0, E], epsilon = 1e-13);
    }
}
