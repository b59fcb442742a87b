//! Kernels, bandwidth schedules and normalized local weights.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default bandwidth constant of the iterative schedule.
pub const DEFAULT_C0: f64 = 2.34;

/// Kernel family. Both depend on the input only through its squared norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    /// `K(v²) = 15/16 (1 − v²)² 1(v² < 1)`.
    #[default]
    Quartic,
    /// `k(u) = exp(−‖u‖²/2)`.
    Gaussian,
}

impl KernelKind {
    /// Kernel profile as a function of the squared scaled norm `v²`.
    #[inline]
    pub fn profile(self, v2: f64) -> f64 {
        match self {
            KernelKind::Quartic => {
                if v2 < 1.0 {
                    let t = 1.0 - v2;
                    0.9375 * t * t
                } else {
                    0.0
                }
            }
            KernelKind::Gaussian => (-0.5 * v2).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Quartic => "quartic",
            KernelKind::Gaussian => "gaussian",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quartic" | "biweight" => Ok(KernelKind::Quartic),
            "gaussian" | "normal" => Ok(KernelKind::Gaussian),
            other => Err(Error::Validation(format!("unknown kernel '{other}'"))),
        }
    }
}

fn check_bandwidth(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Validation(format!("bandwidth must be positive, got {h}")));
    }
    Ok(())
}

/// `K_h(u) = K(u/h) / h^dim(u)`.
pub fn kernel_eval(kind: KernelKind, u: &[f64], h: f64) -> Result<f64> {
    check_bandwidth(h)?;
    let v2 = u.iter().map(|x| (x / h) * (x / h)).sum::<f64>();
    Ok(kind.profile(v2) / h.powi(u.len() as i32))
}

/// `h0 = c0 · n^{−1/(max(p,3)+6)}`.
pub fn initial_bandwidth(n: usize, p: usize, c0: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Validation(format!("need at least 2 samples, got {n}")));
    }
    if p == 0 {
        return Err(Error::Validation("need at least one predictor".into()));
    }
    let p0 = p.max(3) as f64;
    Ok(c0 * (n as f64).powf(-1.0 / (p0 + 6.0)))
}

/// Lower limit `c0 · n^{−1/(d+4)}` of the shrinking schedule.
pub fn floor_bandwidth(n: usize, d: usize, c0: f64) -> f64 {
    c0 * (n as f64).powf(-1.0 / (d as f64 + 4.0))
}

/// Shrink factor `r_n = n^{−1/(2(p0+6))}`.
pub fn shrink_factor(n: usize, p: usize) -> f64 {
    let p0 = p.max(3) as f64;
    (n as f64).powf(-1.0 / (2.0 * (p0 + 6.0)))
}

/// `max(r_n h_t, c0 n^{−1/(d+4)})`.
pub fn next_bandwidth(h_t: f64, n: usize, p: usize, d: usize, c0: f64) -> f64 {
    (shrink_factor(n, p) * h_t).max(floor_bandwidth(n, d, c0))
}

/// Normal-reference bandwidth `{4/(p+2)}^{1/(p+4)} n^{−1/(d+4)}`.
pub fn normal_reference_bandwidth(n: usize, p: usize, d: usize) -> f64 {
    let p = p as f64;
    (4.0 / (p + 2.0)).powf(1.0 / (p + 4.0)) * (n as f64).powf(-1.0 / (d as f64 + 4.0))
}

/// How an estimator chooses its bandwidth across iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Start at `c0 n^{−1/(p0+6)}` and shrink by `r_n` each iteration down to
    /// `c0 n^{−1/(d+4)}`.
    Schedule { c0: f64 },
    /// Constant normal-reference bandwidth.
    NormalReference,
    /// Constant user bandwidth.
    Fixed(f64),
}

impl Default for BandwidthRule {
    fn default() -> Self {
        BandwidthRule::Schedule { c0: DEFAULT_C0 }
    }
}

impl BandwidthRule {
    /// Iterator-style state for one estimation run.
    pub fn schedule(self, n: usize, p: usize, d: usize) -> Result<BandwidthSchedule> {
        let h0 = match self {
            BandwidthRule::Schedule { c0 } => initial_bandwidth(n, p, c0)?,
            BandwidthRule::NormalReference => normal_reference_bandwidth(n, p, d),
            BandwidthRule::Fixed(h) => h,
        };
        check_bandwidth(h0)?;
        Ok(BandwidthSchedule {
            rule: self,
            n,
            p,
            d,
            current: h0,
        })
    }

    /// Bandwidth for the leave-one-out criterion at working dimension `l`.
    pub fn cv_bandwidth(self, n: usize, p: usize, l: usize) -> f64 {
        match self {
            BandwidthRule::Schedule { c0 } => floor_bandwidth(n, l, c0),
            BandwidthRule::NormalReference => normal_reference_bandwidth(n, p, l),
            BandwidthRule::Fixed(h) => h,
        }
    }
}

/// Bandwidth sequence `h_0, h_1, ...` of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthSchedule {
    rule: BandwidthRule,
    n: usize,
    p: usize,
    d: usize,
    current: f64,
}

impl BandwidthSchedule {
    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn advance(&mut self) {
        if let BandwidthRule::Schedule { c0 } = self.rule {
            self.current = next_bandwidth(self.current, self.n, self.p, self.d, c0);
        }
    }
}

/// Normalized kernel weights of every sample around anchor `j` from
/// precomputed reduced coordinates `proj` (rows `Bᵀ X_i`).
///
/// With `include_self = false` the `i = j` term is dropped. Fails when all
/// kernel values vanish.
pub fn weights_from_projected(
    proj: &DMatrix<f64>,
    j: usize,
    h: f64,
    kind: KernelKind,
    include_self: bool,
) -> Result<DVector<f64>> {
    let (n, k) = proj.shape();
    if j >= n {
        return Err(Error::Validation(format!("anchor {j} out of range for {n} samples")));
    }
    check_bandwidth(h)?;
    let inv_h2 = 1.0 / (h * h);
    let mut w = DVector::zeros(n);
    let mut total = 0.0;
    for i in 0..n {
        if i == j && !include_self {
            continue;
        }
        let mut v2 = 0.0;
        for c in 0..k {
            let diff = proj[(i, c)] - proj[(j, c)];
            v2 += diff * diff;
        }
        let kv = kind.profile(v2 * inv_h2);
        w[i] = kv;
        total += kv;
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateNeighborhood {
            anchor: j,
            bandwidth: h,
        });
    }
    w /= total;
    Ok(w)
}

/// `w_ij = K_h(Bᵀ(X_i − X_j)) / Σ_i K_h(Bᵀ(X_i − X_j))`, self-weight included.
///
/// `basis = None` means the identity.
pub fn local_weights(
    x: &DMatrix<f64>,
    basis: Option<&DMatrix<f64>>,
    j: usize,
    h: f64,
    kind: KernelKind,
) -> Result<DVector<f64>> {
    match basis {
        Some(b) => {
            if b.nrows() != x.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: x.ncols(),
                    found: b.nrows(),
                });
            }
            weights_from_projected(&(x * b), j, h, kind, true)
        }
        None => weights_from_projected(x, j, h, kind, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn quartic_values() {
        let k = KernelKind::Quartic;
        assert_eq!(kernel_eval(k, &[0.0, 0.0], 1.0).unwrap(), 15.0 / 16.0);
        assert_eq!(kernel_eval(k, &[0.6, 0.8], 1.0).unwrap(), 0.0);
        assert_eq!(kernel_eval(k, &[2.0], 2.0).unwrap(), 0.0);
        assert_relative_eq!(kernel_eval(k, &[0.5], 1.0).unwrap(), 0.52734375, epsilon = 1e-15);
        // scaling by h^dim
        assert_relative_eq!(
            kernel_eval(k, &[1.0, 0.0], 2.0).unwrap(),
            0.52734375 / 4.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn gaussian_values() {
        let k = KernelKind::Gaussian;
        assert_eq!(kernel_eval(k, &[0.0], 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            kernel_eval(k, &[1.0, 1.0], 0.5).unwrap(),
            (-4.0f64).exp() / 0.25,
            epsilon = 1e-15
        );
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        assert!(kernel_eval(KernelKind::Quartic, &[0.0], 0.0).is_err());
        assert!(kernel_eval(KernelKind::Gaussian, &[0.0], -1.0).is_err());
    }

    #[test]
    fn initial_bandwidth_examples() {
        let h = initial_bandwidth(100, 10, 2.34).unwrap();
        assert_relative_eq!(h, 2.34 * 100f64.powf(-1.0 / 16.0), epsilon = 1e-15);
        assert!((h - 1.75475).abs() < 5e-5);
        let h = initial_bandwidth(200, 3, 2.34).unwrap();
        assert!((h - 1.29881).abs() < 5e-5);
        assert!(initial_bandwidth(1, 3, 2.34).is_err());
    }

    #[test]
    fn next_bandwidth_examples() {
        let h = next_bandwidth(1.7549, 100, 10, 1, 2.34);
        assert_relative_eq!(h, 100f64.powf(-1.0 / 32.0) * 1.7549, epsilon = 1e-15);
        assert!((h - 1.51968).abs() < 5e-5);
        let floor = floor_bandwidth(100, 1, 2.34);
        assert!((floor - 0.9316).abs() < 5e-5);
        assert_eq!(next_bandwidth(floor, 100, 10, 1, 2.34), floor);
        assert_eq!(next_bandwidth(floor * 1.01, 100, 10, 1, 2.34), floor);
    }

    #[test]
    fn schedule_is_monotone_and_reaches_floor() {
        let mut s = BandwidthRule::default().schedule(200, 10, 2).unwrap();
        let floor = floor_bandwidth(200, 2, DEFAULT_C0);
        let mut prev = s.current();
        let mut reached = None;
        for t in 0..200 {
            s.advance();
            assert!(s.current() <= prev);
            assert!(s.current() >= floor);
            prev = s.current();
            if reached.is_none() && s.current() == floor {
                reached = Some(t);
            }
        }
        assert!(reached.is_some());
    }

    #[test]
    fn fixed_rules_do_not_move() {
        let mut s = BandwidthRule::NormalReference.schedule(200, 5, 2).unwrap();
        let h = s.current();
        assert_relative_eq!(h, (4.0f64 / 7.0).powf(1.0 / 9.0) * 200f64.powf(-1.0 / 6.0));
        s.advance();
        assert_eq!(s.current(), h);
    }

    #[test]
    fn coincident_pair_splits_evenly() {
        let x = dmatrix![0.3, 0.1; 0.3, 0.1];
        let w = local_weights(&x, None, 0, 0.5, KernelKind::Quartic).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn isolated_anchor_without_self_term_fails() {
        let x = dmatrix![0.0; 5.0; 6.0];
        let err = weights_from_projected(&x, 0, 1.0, KernelKind::Quartic, false).unwrap_err();
        assert!(matches!(err, Error::DegenerateNeighborhood { anchor: 0, .. }));
        // the self term alone keeps estimation weights defined
        let w = local_weights(&x, None, 0, 1.0, KernelKind::Quartic).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);
    }
}
