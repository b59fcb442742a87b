//! Flattening manifold-valued responses into Euclidean regression targets.

use nalgebra::{DMatrix, Vector3};

use crate::error::{Error, Result};
use crate::manifold::{
    chol_map, cholesky_factor, frechet_mean_sphere, from_log_cholesky, spd_exp, spd_log,
    sphere_exp, sphere_log, tangent_frame, tri_len, unvecl, unvecs, vecl, vecs, SpdMatrix,
    SpherePoint, TangentVector,
};

/// Geometry used to embed the responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    LogEuclidean,
    LogCholesky,
    Sphere,
}

impl Metric {
    pub fn prefix(self) -> &'static str {
        match self {
            Metric::LogEuclidean => "eu",
            Metric::LogCholesky => "ch",
            Metric::Sphere => "sphere",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "eu" | "log-euclidean" => Ok(Metric::LogEuclidean),
            "ch" | "log-cholesky" => Ok(Metric::LogCholesky),
            "sphere" => Ok(Metric::Sphere),
            other => Err(Error::Validation(format!("unknown metric '{other}'"))),
        }
    }
}

/// Manifold-valued responses.
#[derive(Debug, Clone, PartialEq)]
pub enum Responses {
    Spd(Vec<SpdMatrix>),
    Sphere(Vec<SpherePoint>),
}

impl Responses {
    pub fn len(&self) -> usize {
        match self {
            Responses::Spd(v) => v.len(),
            Responses::Sphere(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keeps the responses at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> Responses {
        match self {
            Responses::Spd(v) => Responses::Spd(idx.iter().map(|&i| v[i].clone()).collect()),
            Responses::Sphere(v) => Responses::Sphere(idx.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Point whose tangent space carries the embedded responses.
#[derive(Debug, Clone, PartialEq)]
pub enum Basepoint {
    /// Identity of `Sym+(m)`.
    Identity { m: usize },
    /// Sphere Fréchet mean with an orthonormal tangent frame.
    Sphere {
        mean: SpherePoint,
        frame: [Vector3<f64>; 2],
    },
}

/// Predictors with embedded responses, ready for estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSample {
    /// `n×p` predictors.
    pub x: DMatrix<f64>,
    /// `n×q` embedded responses.
    pub z: DMatrix<f64>,
    pub metric: Metric,
    pub basepoint: Basepoint,
}

impl EmbeddedSample {
    pub fn new(x: DMatrix<f64>, y: &Responses, metric: Metric) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if x.ncols() == 0 {
            return Err(Error::Validation("no predictors".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("predictors have non-finite entries".into()));
        }
        let (z, basepoint) = embed_responses(y, metric)?;
        Ok(Self {
            x,
            z,
            metric,
            basepoint,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    /// Same sample with rows reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let x = DMatrix::from_fn(perm.len(), self.p(), |i, c| self.x[(perm[i], c)]);
        let z = DMatrix::from_fn(perm.len(), self.q(), |i, c| self.z[(perm[i], c)]);
        Self {
            x,
            z,
            metric: self.metric,
            basepoint: self.basepoint.clone(),
        }
    }

    /// Maps embedded row `i` back onto the manifold.
    pub fn unembed_row(&self, i: usize) -> Result<EmbeddedPoint> {
        let v = TangentVector::new(self.z.row(i).transpose());
        match (&self.basepoint, self.metric) {
            (Basepoint::Identity { m }, Metric::LogEuclidean) => {
                Ok(EmbeddedPoint::Spd(spd_exp(&unvecs(&v, *m)?)))
            }
            (Basepoint::Identity { m }, Metric::LogCholesky) => {
                Ok(EmbeddedPoint::Spd(from_log_cholesky(&unvecl(&v, *m)?)))
            }
            (Basepoint::Sphere { mean, frame }, Metric::Sphere) => {
                let t = frame[0] * v.as_slice()[0] + frame[1] * v.as_slice()[1];
                Ok(EmbeddedPoint::Sphere(sphere_exp(mean, &t)?))
            }
            _ => Err(Error::Validation("basepoint does not match metric".into())),
        }
    }
}

/// A manifold point recovered from its embedding.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddedPoint {
    Spd(SpdMatrix),
    Sphere(SpherePoint),
}

/// Embeds responses as rows of an `n×q` matrix.
///
/// * log-Euclidean: `vecs(log Y_i)`;
/// * log-Cholesky: `vecl(chol(L_i))` with `L_i` the Cholesky factor;
/// * sphere: coordinates of `log_μ̂ Y_i` in a tangent frame at the Fréchet
///   mean `μ̂` (`q = 2`).
pub fn embed_responses(y: &Responses, metric: Metric) -> Result<(DMatrix<f64>, Basepoint)> {
    if y.is_empty() {
        return Err(Error::Validation("no responses".into()));
    }
    match (y, metric) {
        (Responses::Spd(ys), Metric::LogEuclidean | Metric::LogCholesky) => {
            let m = ys[0].dim();
            let q = tri_len(m);
            let mut z = DMatrix::zeros(ys.len(), q);
            for (i, s) in ys.iter().enumerate() {
                if s.dim() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: s.dim(),
                    });
                }
                let v = if metric == Metric::LogEuclidean {
                    vecs(&spd_log(s)?)
                } else {
                    vecl(&chol_map(&cholesky_factor(s)?)?)
                };
                z.row_mut(i).copy_from_slice(v.as_slice());
            }
            Ok((z, Basepoint::Identity { m }))
        }
        (Responses::Sphere(ys), Metric::Sphere) => {
            let mean = frechet_mean_sphere(ys)?;
            let (t1, t2) = tangent_frame(&mean);
            let mut z = DMatrix::zeros(ys.len(), 2);
            for (i, s) in ys.iter().enumerate() {
                let v = sphere_log(&mean, s)?;
                z[(i, 0)] = v.dot(&t1);
                z[(i, 1)] = v.dot(&t2);
            }
            Ok((
                z,
                Basepoint::Sphere {
                    mean,
                    frame: [t1, t2],
                },
            ))
        }
        (Responses::Spd(_), Metric::Sphere) => Err(Error::Validation(
            "sphere metric requires sphere-valued responses".into(),
        )),
        (Responses::Sphere(_), _) => Err(Error::Validation(
            "SPD metrics require SPD-valued responses".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn identity_responses_embed_to_zero() {
        let y = Responses::Spd(vec![SpdMatrix::identity(3), SpdMatrix::identity(3)]);
        for metric in [Metric::LogEuclidean, Metric::LogCholesky] {
            let (z, _) = embed_responses(&y, metric).unwrap();
            assert_eq!(z.shape(), (2, 6));
            assert!(z.amax() < 1e-15);
        }
    }

    #[test]
    fn spd_embeddings_round_trip() {
        let ys = vec![
            SpdMatrix::new(dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap(),
            SpdMatrix::new(dmatrix![0.5, -0.1; -0.1, 4.0]).unwrap(),
        ];
        let x = dmatrix![0.0; 1.0];
        for metric in [Metric::LogEuclidean, Metric::LogCholesky] {
            let s = EmbeddedSample::new(x.clone(), &Responses::Spd(ys.clone()), metric).unwrap();
            for (i, y) in ys.iter().enumerate() {
                match s.unembed_row(i).unwrap() {
                    EmbeddedPoint::Spd(back) => {
                        assert_relative_eq!(back.matrix(), y.matrix(), epsilon = 1e-12)
                    }
                    other => panic!("unexpected {other:?}"),
                }
            }
        }
    }

    #[test]
    fn sphere_at_mean_embeds_to_zero() {
        let p = SpherePoint::normalize(Vector3::new(0.2, 0.5, 0.8)).unwrap();
        let (z, base) = embed_responses(&Responses::Sphere(vec![p; 4]), Metric::Sphere).unwrap();
        assert_eq!(z.shape(), (4, 2));
        assert!(z.amax() < 1e-12);
        match base {
            Basepoint::Sphere { mean, .. } => {
                assert_relative_eq!(mean.coords(), p.coords(), epsilon = 1e-14)
            }
            _ => panic!("expected sphere basepoint"),
        }
    }

    #[test]
    fn metric_must_match_manifold() {
        let y = Responses::Spd(vec![SpdMatrix::identity(2)]);
        assert!(embed_responses(&y, Metric::Sphere).is_err());
        let y = Responses::Sphere(vec![SpherePoint::new(Vector3::z()).unwrap()]);
        assert!(embed_responses(&y, Metric::LogEuclidean).is_err());
    }
}
