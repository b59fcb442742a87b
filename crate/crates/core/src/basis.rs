//! Column-orthonormal dimension-reduction bases and the subspace error.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-10;
const EIGEN_TIE_GAP: f64 = 1e-12;

/// A `p×d` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis(DMatrix<f64>);

impl Basis {
    /// Accepts `mat` if `matᵀ mat = I_d` within `1e-10`.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let (p, d) = mat.shape();
        if d == 0 || d > p {
            return Err(Error::Validation(format!("basis must be p×d with 1 <= d <= p, got {p}×{d}")));
        }
        let gap = (mat.transpose() * &mat - DMatrix::identity(d, d)).norm();
        if !(gap <= ORTHO_TOL) {
            return Err(Error::Validation(format!(
                "basis columns are not orthonormal: ‖BᵀB − I‖_F = {gap:e}"
            )));
        }
        Ok(Self(mat))
    }

    /// Orthonormalizes the columns of `mat` by QR, flipping signs so that
    /// the triangular factor has a positive diagonal.
    pub fn orthonormalize(mat: DMatrix<f64>) -> Result<Self> {
        let (p, d) = mat.shape();
        if d == 0 || d > p {
            return Err(Error::Validation(format!("basis must be p×d with 1 <= d <= p, got {p}×{d}")));
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("basis has non-finite entries".into()));
        }
        let scale = mat.amax();
        let qr = mat.qr();
        let r = qr.r();
        let mut q = qr.q();
        for k in 0..d {
            let rk = r[(k, k)];
            if !(rk.abs() > 1e-13 * scale) {
                return Err(Error::Validation(format!("basis column {k} is linearly dependent")));
            }
            if rk < 0.0 {
                q.column_mut(k).neg_mut();
            }
        }
        Ok(Self(q))
    }

    /// The first `d` coordinate axes.
    pub fn identity(p: usize, d: usize) -> Result<Self> {
        Self::new(DMatrix::identity(p, d))
    }

    pub fn p(&self) -> usize {
        self.0.nrows()
    }

    pub fn d(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Orthogonal projector `B Bᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.0 * self.0.transpose()
    }

    /// `‖BᵀB − I‖_F`.
    pub fn orthonormality_gap(&self) -> f64 {
        (self.0.transpose() * &self.0 - DMatrix::identity(self.d(), self.d())).norm()
    }
}

/// `‖B̂B̂ᵀ − B₀B₀ᵀ‖_F`, in `[0, √(2d)]`.
pub fn subspace_error(bhat: &Basis, b0: &Basis) -> Result<f64> {
    if bhat.p() != b0.p() {
        return Err(Error::DimensionMismatch {
            expected: b0.p(),
            found: bhat.p(),
        });
    }
    Ok((bhat.projector() - b0.projector()).norm())
}

/// Flips `v` so its largest-magnitude entry is positive.
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
///
/// Each eigenvector has its largest-magnitude entry positive; eigenvalues
/// closer than `1e-12` are ordered by the lexicographic order of their
/// vectors.
pub fn sorted_eigen(sym: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(sym.clone());
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&val, col)| {
            let mut v = col.clone_owned();
            fix_sign(&mut v);
            (val, v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    // stable pass grouping near-equal eigenvalues
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && (pairs[end - 1].0 - pairs[end].0).abs() < EIGEN_TIE_GAP {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|a, b| lexicographic(&b.1, &a.1));
        }
        start = end;
    }
    pairs.into_iter().unzip()
}

/// Eigenvectors of the `d` largest eigenvalues as a basis.
pub fn top_eigenvectors(sym: &DMatrix<f64>, d: usize) -> Result<Basis> {
    let p = sym.nrows();
    if d == 0 || d > p {
        return Err(Error::Validation(format!("cannot take {d} eigenvectors of a {p}×{p} matrix")));
    }
    let (_, vecs) = sorted_eigen(sym);
    let cols: Vec<DVector<f64>> = vecs.into_iter().take(d).collect();
    let mat = DMatrix::from_columns(&cols);
    Basis::new(mat.clone()).or_else(|_| Basis::orthonormalize(mat))
}
