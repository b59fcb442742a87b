//! Row-wise lower-triangle vectorization.
//!
//! Coordinates are ordered `(a11, a21, a22, a31, a32, a33, ...)`.

use nalgebra::{DMatrix, DVector};

use super::spd::{LowerTriMatrix, SymMatrix};
use crate::error::{Error, Result};

/// Embedded response coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(DVector<f64>);

impl TangentVector {
    pub fn new(coords: DVector<f64>) -> Self {
        Self(coords)
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self(DVector::from_column_slice(coords))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// `m(m+1)/2`.
pub fn tri_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Inverts [`tri_len`], returning `m` when `q` is triangular.
pub fn tri_side(q: usize) -> Option<usize> {
    let mut m = 0;
    while tri_len(m) < q {
        m += 1;
    }
    (tri_len(m) == q).then_some(m)
}

/// Index of `(k, l)` with `l <= k` in the row-wise ordering.
pub fn tri_index(k: usize, l: usize) -> usize {
    debug_assert!(l <= k);
    tri_len(k) + l
}

fn lower_rowwise(a: &DMatrix<f64>) -> DVector<f64> {
    let m = a.nrows();
    let mut out = DVector::zeros(tri_len(m));
    let mut idx = 0;
    for k in 0..m {
        for l in 0..=k {
            out[idx] = a[(k, l)];
            idx += 1;
        }
    }
    out
}

fn check_len(v: &TangentVector, m: usize) -> Result<()> {
    if v.len() != tri_len(m) {
        return Err(Error::DimensionMismatch {
            expected: tri_len(m),
            found: v.len(),
        });
    }
    Ok(())
}

/// Lower triangle of a symmetric matrix, read by row.
pub fn vecs(a: &SymMatrix) -> TangentVector {
    TangentVector(lower_rowwise(a.matrix()))
}

/// Inverse of [`vecs`].
pub fn unvecs(v: &TangentVector, m: usize) -> Result<SymMatrix> {
    check_len(v, m)?;
    let mut a = DMatrix::zeros(m, m);
    for k in 0..m {
        for l in 0..=k {
            let x = v.0[tri_index(k, l)];
            a[(k, l)] = x;
            a[(l, k)] = x;
        }
    }
    SymMatrix::new(a)
}

/// Lower triangle of a lower-triangular matrix, read by row.
pub fn vecl(t: &LowerTriMatrix) -> TangentVector {
    TangentVector(lower_rowwise(t.matrix()))
}

/// Inverse of [`vecl`].
pub fn unvecl(v: &TangentVector, m: usize) -> Result<LowerTriMatrix> {
    check_len(v, m)?;
    let mut a = DMatrix::zeros(m, m);
    for k in 0..m {
        for l in 0..=k {
            a[(k, l)] = v.0[tri_index(k, l)];
        }
    }
    LowerTriMatrix::new(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn vecs_examples() {
        let a = SymMatrix::new(dmatrix![1.0, 2.0; 2.0, 3.0]).unwrap();
        assert_eq!(vecs(&a).as_slice(), &[1.0, 2.0, 3.0]);
        let i3 = SymMatrix::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(vecs(&i3).as_slice(), &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn unvecs_round_trips() {
        for a in [
            dmatrix![1.0, 2.0; 2.0, 3.0],
            DMatrix::identity(3, 3),
            dmatrix![1.0, -4.0, 0.5; -4.0, 2.0, 7.0; 0.5, 7.0, -3.0],
        ] {
            let m = a.nrows();
            let s = SymMatrix::new(a).unwrap();
            assert_eq!(unvecs(&vecs(&s), m).unwrap(), s);
        }
        let v = TangentVector::from_slice(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(vecs(&unvecs(&v, 3).unwrap()), v);
    }

    #[test]
    fn unvecs_length_mismatch() {
        let v = TangentVector::from_slice(&[1.0, 2.0]);
        assert!(matches!(
            unvecs(&v, 2),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn vecl_examples() {
        let t = LowerTriMatrix::new(dmatrix![0.0, 0.0; 2.0, 3f64.ln()]).unwrap();
        assert_eq!(vecl(&t).as_slice(), &[0.0, 2.0, 3f64.ln()]);
        assert_eq!(vecl(&LowerTriMatrix::zeros(3)).as_slice(), &[0.0; 6]);
        assert_eq!(unvecl(&vecl(&t), 2).unwrap(), t);
    }

    #[test]
    fn triangular_helpers() {
        assert_eq!(tri_side(6), Some(3));
        assert_eq!(tri_side(15), Some(5));
        assert_eq!(tri_side(5), None);
        assert_eq!(tri_index(2, 1), 4);
    }
}
