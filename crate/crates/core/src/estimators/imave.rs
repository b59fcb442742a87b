use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::{check_d, converged, iopg, local_fits, EmbeddedSample, FitOptions, RunStats};
use crate::basis::Basis;
use crate::error::{Error, Result};

/// Condition number above which the basis update switches to the
/// Moore-Penrose pseudo-inverse.
const PINV_CONDITION: f64 = 1e12;

/// Intrinsic minimum average variance estimation.
///
/// Alternates local linear fits on the reduced design `Bᵀ(X_i − X_j)` with a
/// weighted least-squares update of `vec(B)` given the fitted gradients.
/// Starts from `b_init`, or from the iOPG estimate when `None`.
pub fn imave_fit(
    sample: &EmbeddedSample,
    d: usize,
    opts: &FitOptions,
    b_init: Option<&Basis>,
) -> Result<Basis> {
    opts.validate()?;
    let init = match b_init {
        Some(b) => {
            if b.p() != sample.p() || b.d() != d {
                return Err(Error::Validation(format!(
                    "initial basis is {}×{}, expected {}×{d}",
                    b.p(),
                    b.d(),
                    sample.p()
                )));
            }
            b.clone()
        }
        None => iopg::run(sample, d, opts)?.0,
    };
    run(sample, d, opts, &init).map(|(b, _)| b)
}

/// Per-anchor pieces of the basis update: `S_j = Σ_i w_ij Δx Δxᵀ`,
/// `M_j = C_j C_jᵀ` and the right-hand side block vector.
struct AnchorTerms {
    scatter: DMatrix<f64>,
    gradient_gram: DMatrix<f64>,
    rhs: DVector<f64>,
}

pub(super) fn run(
    sample: &EmbeddedSample,
    d: usize,
    opts: &FitOptions,
    init: &Basis,
) -> Result<(Basis, RunStats)> {
    let (n, p) = sample.x.shape();
    let q = sample.q();
    check_d(d, p)?;
    let x = &sample.x;
    let z = &sample.z;
    let mut schedule = opts.bandwidth.schedule(n, p, d)?;
    let mut basis = init.clone();
    let mut stats = RunStats::default();

    for t in 1..=opts.max_iters {
        let h = schedule.current();
        let proj = x * basis.matrix();
        let fits = local_fits(z, &proj, &proj, h, opts)?;

        let terms: Vec<Option<AnchorTerms>> = fits
            .par_iter()
            .enumerate()
            .map(|(j, entry)| {
                let (w, fit) = entry.as_ref()?;
                // C_j is d×q with column l the gradient of coordinate l
                let c = fit.slope.transpose();
                let mut scatter = DMatrix::<f64>::zeros(p, p);
                let mut rhs = DVector::<f64>::zeros(p * d);
                let mut dx = DVector::<f64>::zeros(p);
                let mut resid = DVector::<f64>::zeros(q);
                for i in 0..n {
                    let wi = w[i];
                    if wi == 0.0 {
                        continue;
                    }
                    for r in 0..p {
                        dx[r] = x[(i, r)] - x[(j, r)];
                    }
                    for l in 0..q {
                        resid[l] = z[(i, l)] - fit.intercept[l];
                    }
                    scatter.ger(wi, &dx, &dx, 1.0);
                    let u = &c * &resid;
                    for k in 0..d {
                        rhs.rows_mut(k * p, p).axpy(wi * u[k], &dx, 1.0);
                    }
                }
                Some(AnchorTerms {
                    scatter,
                    gradient_gram: &c * c.transpose(),
                    rhs,
                })
            })
            .collect();

        let mut lhs = DMatrix::<f64>::zeros(p * d, p * d);
        let mut rhs = DVector::<f64>::zeros(p * d);
        let mut used = 0usize;
        for term in terms.iter().flatten() {
            for a in 0..d {
                for b in 0..d {
                    let g = term.gradient_gram[(a, b)];
                    lhs.view_mut((a * p, b * p), (p, p))
                        .zip_apply(&term.scatter, |v, s| *v += g * s);
                }
            }
            rhs += &term.rhs;
            used += 1;
        }
        if used == 0 {
            return Err(Error::Estimation("no anchor produced a local fit".into()));
        }

        let vec_b = solve_update(lhs, &rhs, opts)?;
        let raw = DMatrix::from_column_slice(p, d, vec_b.as_slice());
        let next = Basis::orthonormalize(raw).map_err(|e| {
            Error::Estimation(format!("basis update collapsed at iteration {t}: {e}"))
        })?;

        stats = RunStats {
            iterations: t,
            bandwidth: h,
            skipped: stats.skipped.max(n - used),
        };
        let stop = converged(&basis, &next, opts);
        basis = next;
        if stop {
            break;
        }
        if t < opts.max_iters {
            schedule.advance();
        }
    }
    Ok((basis, stats))
}

/// Solves the ridge-stabilized `pd×pd` system, falling back to the
/// pseudo-inverse when it is ill-conditioned.
fn solve_update(mut lhs: DMatrix<f64>, rhs: &DVector<f64>, opts: &FitOptions) -> Result<DVector<f64>> {
    let order = lhs.nrows();
    let lambda = opts.ridge.resolve(lhs.trace(), order);
    for a in 0..order {
        lhs[(a, a)] += lambda;
    }
    let sym = (&lhs + lhs.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, |a, b| a.max(b.abs()));
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Estimation("basis update system is zero".into()));
    }
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let cutoff = if min > 0.0 && max / min <= PINV_CONDITION {
        0.0
    } else {
        max / PINV_CONDITION
    };
    let v = &eig.eigenvectors;
    let mut coef = v.transpose() * rhs;
    for (c, &lam) in coef.iter_mut().zip(eig.eigenvalues.iter()) {
        *c = if lam > cutoff { *c / lam } else { 0.0 };
    }
    let out = v * coef;
    if out.iter().any(|x| !x.is_finite()) || out.norm() == 0.0 {
        return Err(Error::Estimation("basis update is degenerate".into()));
    }
    Ok(out)
}
