//! Seeded generators for the simulation models with known ground truth.
//!
//! Every model draws predictors, noise and redraws from three independent
//! ChaCha streams of the same seed, one fixed-size block per sample, so
//! increasing `n` appends samples without disturbing earlier ones.

use nalgebra::{DMatrix, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::estimators::{FitOptions, Metric, Responses};
use crate::manifold::{spd_exp, spd_log, sphere_exp, tri_len, SpdMatrix, SpherePoint, SymMatrix};
use crate::smoothing::{BandwidthRule, KernelKind};

const STREAM_X: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_REDRAW: u64 = 2;
const MAX_REDRAWS: usize = 1000;

/// Simulation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    I1,
    I2,
    II1,
    II2,
    III,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [ModelId::I1, ModelId::I2, ModelId::II1, ModelId::II2, ModelId::III];

    pub fn name(self) -> &'static str {
        match self {
            ModelId::I1 => "I-1",
            ModelId::I2 => "I-2",
            ModelId::II1 => "II-1",
            ModelId::II2 => "II-2",
            ModelId::III => "III",
        }
    }

    /// Size `m` of the SPD response, `None` for the sphere model.
    pub fn response_dim(self) -> Option<usize> {
        match self {
            ModelId::I1 => Some(2),
            ModelId::I2 => Some(5),
            ModelId::II1 | ModelId::II2 => Some(3),
            ModelId::III => None,
        }
    }

    pub fn true_dim(self) -> usize {
        match self {
            ModelId::I1 | ModelId::II1 => 1,
            ModelId::I2 | ModelId::II2 | ModelId::III => 2,
        }
    }

    pub fn min_p(self) -> usize {
        match self {
            ModelId::I1 | ModelId::I2 => 4,
            _ => 2,
        }
    }

    /// Noise scale used when none is given.
    pub fn default_sigma(self) -> f64 {
        match self {
            ModelId::I1 | ModelId::I2 => 0.2,
            _ => 0.1,
        }
    }

    pub fn default_metric(self) -> Metric {
        match self {
            ModelId::III => Metric::Sphere,
            _ => Metric::LogEuclidean,
        }
    }

    /// Kernel and bandwidth used in the simulation studies: the quartic
    /// kernel with the shrinking schedule, except the Study II models which
    /// use a Gaussian kernel at the normal-reference bandwidth.
    pub fn default_fit_options(self) -> FitOptions {
        match self {
            ModelId::II1 | ModelId::II2 => FitOptions {
                kernel: KernelKind::Gaussian,
                bandwidth: BandwidthRule::NormalReference,
                ..FitOptions::default()
            },
            _ => FitOptions::default(),
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| *c != '-' && *c != '_').collect();
        match key.to_ascii_uppercase().as_str() {
            "I1" => Ok(ModelId::I1),
            "I2" => Ok(ModelId::I2),
            "II1" => Ok(ModelId::II1),
            "II2" => Ok(ModelId::II2),
            "III" => Ok(ModelId::III),
            _ => Err(Error::Validation(format!("unknown model '{s}'"))),
        }
    }
}

/// Model configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub id: ModelId,
    pub p: usize,
    pub n: usize,
    /// Noise scale: `σ` of the symmetric matrix normal for Study I, the
    /// standard deviation of the tangent coordinates for Study II and of the
    /// tangent perturbations for Study III.
    pub sigma: f64,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(id: ModelId, p: usize, n: usize) -> Self {
        Self {
            id,
            p,
            n,
            sigma: id.default_sigma(),
            seed: 0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.p < self.id.min_p() {
            return Err(Error::Validation(format!(
                "model {} needs p >= {}, got {}",
                self.id,
                self.id.min_p(),
                self.p
            )));
        }
        if self.n == 0 {
            return Err(Error::Validation("n must be positive".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Validation(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// A simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub x: DMatrix<f64>,
    pub y: Responses,
    pub b0: Basis,
    pub d_true: usize,
    /// Predictor rows redrawn because the mean matrix was not SPD.
    pub redraws: usize,
}

/// SplitMix64 step; used to derive replication seeds from a master seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep`: `splitmix64(master + rep · γ)` with `γ` the
/// SplitMix64 increment.
pub fn replication_seed(master: u64, rep: u64) -> u64 {
    splitmix64(master.wrapping_add(rep.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `M + σ Z` with `Z` standard symmetric matrix normal: independent `N(0,1)`
/// diagonal and `N(0,1/2)` off-diagonal entries.
pub fn sym_matrix_normal<R: Rng + ?Sized>(m: usize, mean: &SymMatrix, sigma: f64, rng: &mut R) -> Result<SymMatrix> {
    if mean.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: mean.dim(),
        });
    }
    if !(sigma >= 0.0) {
        return Err(Error::Validation(format!("sigma must be nonnegative, got {sigma}")));
    }
    let off_scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = mean.matrix().clone();
    for k in 0..m {
        for l in 0..=k {
            let g: f64 = rng.sample(StandardNormal);
            if k == l {
                out[(k, k)] += sigma * g;
            } else {
                let e = sigma * off_scale * g;
                out[(k, l)] += e;
                out[(l, k)] += e;
            }
        }
    }
    SymMatrix::new(out)
}

fn logistic_ratio(s: f64) -> f64 {
    (s.exp() - 1.0) / (s.exp() + 1.0)
}

fn pair_index(x: &[f64], first: usize, second: usize) -> f64 {
    (x[first] + x[second]) * std::f64::consts::FRAC_1_SQRT_2
}

/// Conditional mean matrix `M(X)` of the Study I models.
pub fn study_i_mean(id: ModelId, x: &[f64]) -> Result<DMatrix<f64>> {
    let p = x.len();
    if p < 4 {
        return Err(Error::Validation(format!("Study I needs p >= 4, got {p}")));
    }
    let b1 = pair_index(x, 0, 1);
    match id {
        ModelId::I1 => {
            let rho = logistic_ratio(b1);
            Ok(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))
        }
        ModelId::I2 => {
            let r1 = 0.2 * logistic_ratio(b1);
            let r2 = 0.2 * pair_index(x, p - 2, p - 1).sin();
            #[rustfmt::skip]
            let m = DMatrix::from_row_slice(5, 5, &[
                1.0, r1,  r1,  r2,  r2,
                r1,  1.0, r2,  r2,  r2,
                r1,  r2,  1.0, r2,  r1,
                r2,  r2,  r2,  1.0, r1,
                r2,  r2,  r1,  r1,  1.0,
            ]);
            Ok(m)
        }
        other => Err(Error::Validation(format!("{other} is not a Study I model"))),
    }
}

/// Link matrix `f(X)` of the Study II models; entry `(j,l)` (1-based) of each
/// component is `exp{−1/|j−l|} sin[2π(s − 1/(j+l))]`, with zero diagonal.
pub fn study_ii_link(id: ModelId, x: &[f64]) -> Result<DMatrix<f64>> {
    if x.len() < 2 {
        return Err(Error::Validation("Study II needs p >= 2".into()));
    }
    let component = |s: f64| {
        DMatrix::from_fn(3, 3, |r, c| {
            if r == c {
                return 0.0;
            }
            let (j, l) = ((r + 1) as f64, (c + 1) as f64);
            (-1.0 / (j - l).abs()).exp()
                * (2.0 * std::f64::consts::PI * (s - 1.0 / (j + l))).sin()
        })
    };
    match id {
        ModelId::II1 => Ok(component(x[0] + x[1])),
        ModelId::II2 => Ok(component(x[0]) + component(x[1])),
        other => Err(Error::Validation(format!("{other} is not a Study II model"))),
    }
}

/// Tangent vector at `(0,0,1)` of the Study III model.
pub fn study_iii_tangent(x: &[f64], eps: [f64; 2]) -> Vector3<f64> {
    Vector3::new(
        x[0].exp() * x[0].sin() + eps[0],
        logistic_ratio(x[0] + x[1]) + eps[1],
        0.0,
    )
}

fn uniform_row(rng: &mut ChaCha8Rng, p: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..p).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

fn true_basis(id: ModelId, p: usize) -> Result<Basis> {
    let mut b = DMatrix::zeros(p, id.true_dim());
    match id {
        ModelId::I1 | ModelId::II1 => {
            b[(0, 0)] = 1.0;
            b[(1, 0)] = 1.0;
        }
        ModelId::I2 => {
            b[(0, 0)] = 1.0;
            b[(1, 0)] = 1.0;
            b[(p - 2, 1)] = 1.0;
            b[(p - 1, 1)] = 1.0;
        }
        ModelId::II2 | ModelId::III => {
            b[(0, 0)] = 1.0;
            b[(1, 1)] = 1.0;
        }
    }
    Basis::orthonormalize(b)
}

fn gen_study_i(spec: &ModelSpec) -> Result<GeneratedData> {
    let m = spec.id.response_dim().expect("SPD model");
    let mut xs = stream(spec.seed, STREAM_X);
    let mut noise = stream(spec.seed, STREAM_NOISE);
    let mut redraw = stream(spec.seed, STREAM_REDRAW);
    let mut x = DMatrix::zeros(spec.n, spec.p);
    let mut ys = Vec::with_capacity(spec.n);
    let mut redraws = 0;
    for i in 0..spec.n {
        let mut row = uniform_row(&mut xs, spec.p, 0.0, 1.0);
        let mut attempts = 0;
        let mean = loop {
            match SpdMatrix::new(study_i_mean(spec.id, &row)?) {
                Ok(s) => break s,
                Err(_) if attempts < MAX_REDRAWS => {
                    attempts += 1;
                    redraws += 1;
                    row = uniform_row(&mut redraw, spec.p, 0.0, 1.0);
                }
                Err(_) => {
                    return Err(Error::Generation(format!(
                        "mean matrix not SPD after {MAX_REDRAWS} redraws at sample {i}"
                    )))
                }
            }
        };
        let log_y = sym_matrix_normal(m, &spd_log(&mean)?, spec.sigma, &mut noise)?;
        ys.push(spd_exp(&log_y));
        x.row_mut(i).copy_from_slice(&row);
    }
    Ok(GeneratedData {
        x,
        y: Responses::Spd(ys),
        b0: true_basis(spec.id, spec.p)?,
        d_true: spec.id.true_dim(),
        redraws,
    })
}

fn gen_study_ii(spec: &ModelSpec) -> Result<GeneratedData> {
    let m = 3;
    let mut xs = stream(spec.seed, STREAM_X);
    let mut noise = stream(spec.seed, STREAM_NOISE);
    let mut x = DMatrix::zeros(spec.n, spec.p);
    let mut ys = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let row = uniform_row(&mut xs, spec.p, 0.0, 1.0);
        // log ζ = Σ Z_k v_k over the vecs coordinate basis
        let mut log_zeta = DMatrix::zeros(m, m);
        for k in 0..m {
            for l in 0..=k {
                let g: f64 = noise.sample(StandardNormal);
                log_zeta[(k, l)] = spec.sigma * g;
                log_zeta[(l, k)] = spec.sigma * g;
            }
        }
        debug_assert_eq!(tri_len(m), 6);
        // μ = I, so μ ⊕ exp(f) ⊕ ζ = exp(f + log ζ)
        let log_y = study_ii_link(spec.id, &row)? + log_zeta;
        ys.push(spd_exp(&SymMatrix::new(log_y)?));
        x.row_mut(i).copy_from_slice(&row);
    }
    Ok(GeneratedData {
        x,
        y: Responses::Spd(ys),
        b0: true_basis(spec.id, spec.p)?,
        d_true: spec.id.true_dim(),
        redraws: 0,
    })
}

fn gen_study_iii(spec: &ModelSpec) -> Result<GeneratedData> {
    let pole = SpherePoint::new(Vector3::z())?;
    let mut xs = stream(spec.seed, STREAM_X);
    let mut noise = stream(spec.seed, STREAM_NOISE);
    let mut x = DMatrix::zeros(spec.n, spec.p);
    let mut ys = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let row = uniform_row(&mut xs, spec.p, -1.0, 1.0);
        let e0: f64 = noise.sample(StandardNormal);
        let e1: f64 = noise.sample(StandardNormal);
        let v = study_iii_tangent(&row, [spec.sigma * e0, spec.sigma * e1]);
        ys.push(sphere_exp(&pole, &v)?);
        x.row_mut(i).copy_from_slice(&row);
    }
    Ok(GeneratedData {
        x,
        y: Responses::Sphere(ys),
        b0: true_basis(spec.id, spec.p)?,
        d_true: spec.id.true_dim(),
        redraws: 0,
    })
}

/// Draws one dataset from `spec`.
pub fn generate(spec: &ModelSpec) -> Result<GeneratedData> {
    spec.validate()?;
    match spec.id {
        ModelId::I1 | ModelId::I2 => gen_study_i(spec),
        ModelId::II1 | ModelId::II2 => gen_study_ii(spec),
        ModelId::III => gen_study_iii(spec),
    }
}
