use nalgebra::DMatrix;

use super::{check_d, converged, local_fits, EmbeddedSample, FitOptions, RunStats};
use crate::basis::{top_eigenvectors, Basis};
use crate::error::{Error, Result};

/// Intrinsic outer product of gradients.
///
/// Each iteration fits local linear models on the full design `X_i − X_j`
/// with kernel weights measured along the current basis (the identity at
/// the start), averages the outer products of the fitted gradients and keeps
/// the top `d` eigenvectors.
pub fn iopg_fit(sample: &EmbeddedSample, d: usize, opts: &FitOptions) -> Result<Basis> {
    opts.validate()?;
    run(sample, d, opts).map(|(b, _)| b)
}

pub(super) fn run(sample: &EmbeddedSample, d: usize, opts: &FitOptions) -> Result<(Basis, RunStats)> {
    let (n, p) = sample.x.shape();
    check_d(d, p)?;
    let mut schedule = opts.bandwidth.schedule(n, p, d)?;
    let mut kernel_coords = sample.x.clone();
    let mut basis: Option<Basis> = None;
    let mut stats = RunStats::default();

    for t in 1..=opts.max_iters {
        let h = schedule.current();
        let fits = local_fits(&sample.z, &kernel_coords, &sample.x, h, opts)?;
        let mut outer = DMatrix::<f64>::zeros(p, p);
        let mut used = 0usize;
        for (_, fit) in fits.iter().flatten() {
            // slope is q×p; accumulate slopeᵀ slope
            outer.gemm_tr(1.0, &fit.slope, &fit.slope, 1.0);
            used += 1;
        }
        if used == 0 {
            return Err(Error::Estimation("no anchor produced a local fit".into()));
        }
        outer /= used as f64;
        let next = top_eigenvectors(&outer, d)?;

        stats = RunStats {
            iterations: t,
            bandwidth: h,
            skipped: stats.skipped.max(n - used),
        };
        let stop = basis.as_ref().is_some_and(|b| converged(b, &next, opts));
        kernel_coords = &sample.x * next.matrix();
        basis = Some(next);
        if stop {
            break;
        }
        if t < opts.max_iters {
            schedule.advance();
        }
    }
    Ok((basis.expect("at least one iteration"), stats))
}
