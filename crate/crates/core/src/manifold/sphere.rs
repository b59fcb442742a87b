//! The unit sphere S² in ℝ³.

use nalgebra::Vector3;

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-10;
const MEAN_TOL: f64 = 1e-10;
const MEAN_MAX_ITERS: usize = 100;

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint(Vector3<f64>);

impl SpherePoint {
    /// Accepts `coords` when its norm is within `1e-12` of one.
    pub fn new(coords: Vector3<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Validation(format!(
                "sphere point has norm {norm}, expected 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalize(coords: Vector3<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("cannot normalize a zero vector".into()));
        }
        Ok(Self(coords / norm))
    }

    pub fn coords(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.0.x, self.0.y, self.0.z]
    }
}

/// Riemannian exponential map at `p`.
pub fn sphere_exp(p: &SpherePoint, v: &Vector3<f64>) -> Result<SpherePoint> {
    let inner = p.0.dot(v);
    if inner.abs() > TANGENT_TOL {
        return Err(Error::Domain(format!(
            "vector is not tangent at p: <p, v> = {inner:e}"
        )));
    }
    let theta = v.norm();
    if theta == 0.0 {
        return Ok(*p);
    }
    let y = p.0 * theta.cos() + v * (theta.sin() / theta);
    Ok(SpherePoint(y / y.norm()))
}

/// Riemannian logarithm map at `p`; fails for antipodal points.
pub fn sphere_log(p: &SpherePoint, y: &SpherePoint) -> Result<Vector3<f64>> {
    let c = p.0.dot(&y.0).clamp(-1.0, 1.0);
    let w = y.0 - p.0 * c;
    let s = w.norm();
    if c < 0.0 && s < 1e-12 {
        return Err(Error::Domain("points are antipodal; the logarithm is undefined".into()));
    }
    if s == 0.0 {
        return Ok(Vector3::zeros());
    }
    let theta = s.atan2(c);
    Ok(w * (theta / s))
}

/// Great-circle distance.
pub fn sphere_dist(a: &SpherePoint, b: &SpherePoint) -> f64 {
    a.0.cross(&b.0).norm().atan2(a.0.dot(&b.0))
}

/// Fréchet mean by the intrinsic gradient iteration
/// `mean <- exp_mean(avg log_mean(y_i))`.
pub fn frechet_mean_sphere(points: &[SpherePoint]) -> Result<SpherePoint> {
    if points.is_empty() {
        return Err(Error::Validation("empty sample".into()));
    }
    let sum: Vector3<f64> = points.iter().map(|p| p.0).sum();
    let mut mean = SpherePoint::normalize(sum).unwrap_or(points[0]);
    let inv_n = 1.0 / points.len() as f64;
    for _ in 0..MEAN_MAX_ITERS {
        let mut step = Vector3::zeros();
        for y in points {
            step += sphere_log(&mean, y)?;
        }
        step *= inv_n;
        // strip round-off normal component so the step stays tangent
        step -= mean.0 * mean.0.dot(&step);
        mean = sphere_exp(&mean, &step)?;
        if step.norm() < MEAN_TOL {
            return Ok(mean);
        }
    }
    Err(Error::NonConvergence {
        iterations: MEAN_MAX_ITERS,
        last: mean.to_array(),
    })
}

/// Deterministic orthonormal frame `(t1, t2)` of the tangent plane at `p`.
///
/// `t1` is the Gram-Schmidt projection of the coordinate axis least aligned
/// with `p`; `t2 = p × t1`.
pub fn tangent_frame(p: &SpherePoint) -> (Vector3<f64>, Vector3<f64>) {
    let c = p.0;
    let axis = (0..3)
        .min_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs()))
        .unwrap_or(0);
    let mut e = Vector3::zeros();
    e[axis] = 1.0;
    let t1 = (e - c * c.dot(&e)).normalize();
    let t2 = c.cross(&t1);
    (t1, t2)
}
