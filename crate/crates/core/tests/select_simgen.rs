use imave::evaluation::run_cv_study;
use imave::manifold::SymMatrix;
use imave::select::{cv_value, nw_loo_predict, select_dimension};
use imave::simgen::{generate, sym_matrix_normal, ModelId, ModelSpec};
use imave::smoothing::KernelKind;
use imave::{Basis, EmbeddedSample, Estimator, FitOptions, Method, Metric};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn data(n: usize, p: usize, q: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
    let z = DMatrix::from_fn(n, q, |_, _| rng.sample(StandardNormal));
    (x, z)
}

#[test]
fn held_out_response_never_affects_its_prediction() {
    let (x, mut z) = data(30, 4, 3, 1);
    let b = Basis::orthonormalize(DMatrix::from_fn(4, 2, |r, c| (r + 2 * c) as f64 + 0.5)).unwrap();
    for j in [0, 13, 29] {
        let before = nw_loo_predict(&z, &x, &b, 0.6, j, KernelKind::Quartic).unwrap();
        z.row_mut(j).fill(1e6);
        let after = nw_loo_predict(&z, &x, &b, 0.6, j, KernelKind::Quartic).unwrap();
        assert_eq!(before, after);
    }
}

#[test]
fn prediction_matches_brute_force() {
    let (x, z) = data(25, 3, 2, 2);
    let b = Basis::orthonormalize(DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 0.5])).unwrap();
    let h = 0.4;
    for j in 0..25 {
        let mut num = [0.0; 2];
        let mut den = 0.0;
        for i in (0..25).filter(|&i| i != j) {
            let u: f64 = (0..3).map(|r| (x[(i, r)] - x[(j, r)]) * b.matrix()[(r, 0)]).sum();
            let k = (-(u / h) * (u / h) / 2.0).exp();
            den += k;
            for l in 0..2 {
                num[l] += k * z[(i, l)];
            }
        }
        let pred = nw_loo_predict(&z, &x, &b, h, j, KernelKind::Gaussian).unwrap().unwrap();
        for l in 0..2 {
            assert!((pred[l] - num[l] / den).abs() < 1e-13);
        }
    }
}

#[test]
fn cv_is_rotation_invariant_within_span() {
    let (x, z) = data(40, 5, 3, 3);
    let b = Basis::orthonormalize(DMatrix::from_fn(5, 2, |r, c| ((r * 3 + c * 7) % 5) as f64 - 1.5)).unwrap();
    let t: f64 = 1.1;
    let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
    let br = Basis::new(b.matrix() * rot).unwrap();
    let (c0, s0) = cv_value(&z, &x, &b, 0.5, KernelKind::Quartic).unwrap();
    let (c1, s1) = cv_value(&z, &x, &br, 0.5, KernelKind::Quartic).unwrap();
    assert!((c0 - c1).abs() < 1e-12 * c0.max(1.0));
    assert_eq!(s0, s1);
    assert!(c0 >= 0.0);
}

#[test]
fn single_index_with_negligible_noise_selects_one() {
    let data = generate(&ModelSpec::new(ModelId::I1, 5, 150).with_sigma(1e-3).with_seed(4)).unwrap();
    let s = EmbeddedSample::new(data.x, &data.y, Metric::LogEuclidean).unwrap();
    let cv = select_dimension(&s, Method::Iopg, &FitOptions::default(), 5).unwrap();
    assert_eq!(cv.d_hat, 1);
    assert_eq!(cv.cv_values.len(), 5);
    assert!(cv.cv_values.iter().all(|v| v.is_some_and(f64::is_finite)));
}

#[test]
fn noiseless_model_is_always_selected_correctly() {
    let spec = ModelSpec::new(ModelId::I1, 4, 100).with_sigma(0.0).with_seed(5);
    let est: Estimator = "eu-iopg".parse().unwrap();
    let study = run_cv_study(&spec, est, &FitOptions::default(), 4, 10).unwrap();
    assert_eq!(study.correct, 10);
    assert_eq!(study.failures, 0);
}

fn sample_variances(sigma: f64, draws: usize) -> DMatrix<f64> {
    let m = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mean = SymMatrix::zeros(m);
    let mut sum = DMatrix::<f64>::zeros(m, m);
    let mut sq = DMatrix::<f64>::zeros(m, m);
    for _ in 0..draws {
        let y = sym_matrix_normal(m, &mean, sigma, &mut rng).unwrap();
        sum += y.matrix();
        sq += y.matrix().component_mul(y.matrix());
    }
    let n = draws as f64;
    DMatrix::from_fn(m, m, |a, b| (sq[(a, b)] - sum[(a, b)] * sum[(a, b)] / n) / (n - 1.0))
}

#[test]
fn symmetric_matrix_normal_moments() {
    let sigma = 0.3;
    let var = sample_variances(sigma, 100_000);
    for a in 0..3 {
        for b in 0..3 {
            let target = if a == b { sigma * sigma } else { sigma * sigma / 2.0 };
            assert!((var[(a, b)] / target - 1.0).abs() < 0.05, "({a},{b}): {}", var[(a, b)]);
        }
    }
}

#[test]
fn zero_sigma_returns_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mean = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])).unwrap();
    let y = sym_matrix_normal(2, &mean, 0.0, &mut rng).unwrap();
    assert_eq!(y, mean);
}
