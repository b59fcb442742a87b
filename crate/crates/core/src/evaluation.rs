//! Replicated simulation runs and their summaries.

use std::io::Write;

use rayon::prelude::*;

use crate::basis::subspace_error;
use crate::error::{Error, Result};
use crate::estimators::{fit, fit_both, EmbeddedSample, Estimator, FitOptions, FitReport, Method, Metric};
use crate::select::select_dimension;
use crate::simgen::{generate, replication_seed, ModelSpec};

/// Fraction of failed replications above which a result is flagged.
pub const FAILURE_FLAG_FRACTION: f64 = 0.1;

/// Outcome of a single replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    /// 1-based replication index.
    pub rep: usize,
    pub seed: u64,
    pub error: Option<f64>,
    pub failure: Option<String>,
    pub skipped_anchors: usize,
    pub wallclock_ms: f64,
}

/// Errors of one estimator over `R` replications of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub spec: ModelSpec,
    pub estimator: Estimator,
    pub replications: Vec<Replication>,
    /// Mean over successful replications; `None` if all failed.
    pub mean: Option<f64>,
    /// Sample standard deviation (divisor `R − 1`) over successful replications.
    pub sd: Option<f64>,
    pub failures: usize,
    /// Set when a single successful replication makes the sd 0 by convention.
    pub sd_by_convention: bool,
    /// Set when more than 10% of replications failed.
    pub failure_flag: bool,
}

impl ExperimentResult {
    fn from_replications(spec: ModelSpec, estimator: Estimator, replications: Vec<Replication>) -> Self {
        let errors: Vec<f64> = replications.iter().filter_map(|r| r.error).collect();
        let failures = replications.len() - errors.len();
        let (mean, sd) = mean_sd(&errors);
        ExperimentResult {
            spec,
            estimator,
            failures,
            mean,
            sd,
            sd_by_convention: errors.len() == 1,
            failure_flag: failures as f64 > FAILURE_FLAG_FRACTION * replications.len() as f64,
            replications,
        }
    }

    /// Per-replication errors, `None` for failed replications.
    pub fn errors(&self) -> Vec<Option<f64>> {
        self.replications.iter().map(|r| r.error).collect()
    }

    pub fn skipped_anchors(&self) -> usize {
        self.replications.iter().map(|r| r.skipped_anchors).sum()
    }
}

/// Sample mean and standard deviation with divisor `n − 1`; the sd of a
/// single value is 0.
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (Some(mean), Some(0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (Some(mean), Some((ss / (n - 1.0)).sqrt()))
}

fn check_compatible(spec: &ModelSpec, estimator: &Estimator) -> Result<()> {
    let sphere_model = spec.id.response_dim().is_none();
    if sphere_model != (estimator.metric == Metric::Sphere) {
        return Err(Error::Validation(format!(
            "method {estimator} does not apply to model {}",
            spec.id
        )));
    }
    Ok(())
}

/// Runs every estimator on `R` datasets drawn from `spec`, one dataset per
/// replication shared by all estimators. iOPG and iMAVE with the same metric
/// share the iOPG stage.
pub fn run_experiment(
    spec: &ModelSpec,
    estimators: &[Estimator],
    opts: &FitOptions,
    replications: usize,
) -> Result<Vec<ExperimentResult>> {
    if replications == 0 {
        return Err(Error::Validation("replications must be at least 1".into()));
    }
    for e in estimators {
        check_compatible(spec, e)?;
    }
    let per_rep: Vec<Vec<Replication>> = (1..=replications)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(spec.seed, rep as u64);
            replicate_once(&spec.with_seed(seed), estimators, opts, rep)
        })
        .collect();
    Ok(estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let reps = per_rep.iter().map(|r| r[k].clone()).collect();
            ExperimentResult::from_replications(*spec, *e, reps)
        })
        .collect())
}

fn replicate_once(spec: &ModelSpec, estimators: &[Estimator], opts: &FitOptions, rep: usize) -> Vec<Replication> {
    let failed = |msg: String| Replication {
        rep,
        seed: spec.seed,
        error: None,
        failure: Some(msg),
        skipped_anchors: 0,
        wallclock_ms: 0.0,
    };
    let data = match generate(spec) {
        Ok(d) => d,
        Err(e) => return estimators.iter().map(|_| failed(e.to_string())).collect(),
    };
    let record = |outcome: Result<FitReport>| match outcome.and_then(|r| Ok((subspace_error(r.estimate(), &data.b0)?, r))) {
        Ok((err, report)) => Replication {
            rep,
            seed: spec.seed,
            error: Some(err),
            failure: None,
            skipped_anchors: report.skipped_anchors,
            wallclock_ms: report.elapsed.as_secs_f64() * 1e3,
        },
        Err(e) => failed(e.to_string()),
    };

    let mut out: Vec<Option<Replication>> = vec![None; estimators.len()];
    for (k, est) in estimators.iter().enumerate() {
        if out[k].is_some() {
            continue;
        }
        let sample = match EmbeddedSample::new(data.x.clone(), &data.y, est.metric) {
            Ok(s) => s,
            Err(e) => {
                out[k] = Some(failed(e.to_string()));
                continue;
            }
        };
        let partner = estimators
            .iter()
            .enumerate()
            .skip(k + 1)
            .find(|(_, o)| o.metric == est.metric && o.method != est.method)
            .map(|(idx, _)| idx);
        match partner {
            Some(idx) => {
                let (iopg, imave) = match fit_both(&sample, data.d_true, opts) {
                    Ok((a, b)) => (Ok(a), Ok(b)),
                    Err(e) => (Err(e.clone()), Err(e)),
                };
                let (first, second) = match est.method {
                    Method::Iopg => (iopg, imave),
                    Method::Imave => (imave, iopg),
                };
                out[k] = Some(record(first));
                out[idx] = Some(record(second));
            }
            None => out[k] = Some(record(fit(&sample, est.method, data.d_true, opts))),
        }
    }
    out.into_iter().map(|r| r.expect("every estimator recorded")).collect()
}

/// [`run_experiment`] for a single estimator.
pub fn run_replications(
    spec: &ModelSpec,
    estimator: Estimator,
    opts: &FitOptions,
    replications: usize,
) -> Result<ExperimentResult> {
    Ok(run_experiment(spec, &[estimator], opts, replications)?.remove(0))
}

/// Tally of selected dimensions over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct CvStudy {
    pub spec: ModelSpec,
    pub estimator: Estimator,
    pub d_true: usize,
    pub seeds: Vec<u64>,
    /// Selected dimension per replication, `None` on failure.
    pub d_hats: Vec<Option<usize>>,
    pub under: usize,
    pub correct: usize,
    pub over: usize,
    pub failures: usize,
    pub failure_flag: bool,
}

/// Runs dimension selection over `1..=p_max` on `R` datasets and counts
/// under-, correctly and over-selected dimensions.
pub fn run_cv_study(
    spec: &ModelSpec,
    estimator: Estimator,
    opts: &FitOptions,
    p_max: usize,
    replications: usize,
) -> Result<CvStudy> {
    if replications == 0 {
        return Err(Error::Validation("replications must be at least 1".into()));
    }
    check_compatible(spec, &estimator)?;
    let results: Vec<(u64, Option<usize>)> = (1..=replications)
        .into_par_iter()
        .map(|rep| {
            let seed = replication_seed(spec.seed, rep as u64);
            let d_hat = generate(&spec.with_seed(seed))
                .and_then(|data| EmbeddedSample::new(data.x, &data.y, estimator.metric))
                .and_then(|s| select_dimension(&s, estimator.method, opts, p_max))
                .ok()
                .map(|cv| cv.d_hat);
            (seed, d_hat)
        })
        .collect();
    let d_true = spec.id.true_dim();
    let mut study = CvStudy {
        spec: *spec,
        estimator,
        d_true,
        seeds: results.iter().map(|r| r.0).collect(),
        d_hats: results.iter().map(|r| r.1).collect(),
        under: 0,
        correct: 0,
        over: 0,
        failures: 0,
        failure_flag: false,
    };
    for d in &study.d_hats {
        match d {
            None => study.failures += 1,
            Some(d) if *d < d_true => study.under += 1,
            Some(d) if *d == d_true => study.correct += 1,
            Some(_) => study.over += 1,
        }
    }
    study.failure_flag = study.failures as f64 > FAILURE_FLAG_FRACTION * replications as f64;
    Ok(study)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x}"))
}

/// Writes one row per replication:
/// `model,p,n,sigma,method,rep,seed,error,failed,wallclock_ms`.
pub fn write_results_csv<W: Write>(out: W, results: &[ExperimentResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Validation(format!("writing results: {e}"));
    w.write_record(["model", "p", "n", "sigma", "method", "rep", "seed", "error", "failed", "wallclock_ms"])
        .map_err(io)?;
    for r in results {
        for rep in &r.replications {
            w.write_record([
                r.spec.id.name().to_string(),
                r.spec.p.to_string(),
                r.spec.n.to_string(),
                r.spec.sigma.to_string(),
                r.estimator.name(),
                rep.rep.to_string(),
                rep.seed.to_string(),
                fmt_opt(rep.error),
                (rep.error.is_none() as u8).to_string(),
                format!("{:.3}", rep.wallclock_ms),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Validation(format!("writing results: {e}")))
}

/// Writes one row per result: `model,p,n,sigma,method,mean,sd,failures`.
pub fn write_summary_csv<W: Write>(out: W, results: &[ExperimentResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Validation(format!("writing summary: {e}"));
    w.write_record(["model", "p", "n", "sigma", "method", "mean", "sd", "failures"]).map_err(io)?;
    for r in results {
        w.write_record([
            r.spec.id.name().to_string(),
            r.spec.p.to_string(),
            r.spec.n.to_string(),
            r.spec.sigma.to_string(),
            r.estimator.name(),
            fmt_opt(r.mean),
            fmt_opt(r.sd),
            r.failures.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("writing summary: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::ModelId;
    use approx::assert_relative_eq;

    fn quick_opts() -> FitOptions {
        FitOptions { max_iters: 3, ..FitOptions::default() }
    }

    #[test]
    fn mean_sd_uses_sample_divisor() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert_relative_eq!(s.unwrap(), (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(mean_sd(&[0.3]), (Some(0.3), Some(0.0)));
        assert_eq!(mean_sd(&[]), (None, None));
    }

    #[test]
    fn single_replication_flags_sd() {
        let spec = ModelSpec::new(ModelId::I1, 4, 60).with_seed(3);
        let est: Estimator = "eu-iopg".parse().unwrap();
        let r = run_replications(&spec, est, &quick_opts(), 1).unwrap();
        assert_eq!(r.replications.len(), 1);
        assert_eq!(r.sd, Some(0.0));
        assert!(r.sd_by_convention);
    }

    #[test]
    fn summary_is_recomputable_and_reproducible() {
        let spec = ModelSpec::new(ModelId::I1, 4, 60).with_seed(8);
        let ests: Vec<Estimator> = ["eu-iopg", "eu-imave", "ch-imave"].iter().map(|s| s.parse().unwrap()).collect();
        let a = run_experiment(&spec, &ests, &quick_opts(), 4).unwrap();
        let b = run_experiment(&spec, &ests, &quick_opts(), 4).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.errors(), rb.errors());
            let errs: Vec<f64> = ra.errors().into_iter().flatten().collect();
            assert_eq!(ra.mean, mean_sd(&errs).0);
            assert_eq!(ra.replications.len(), 4);
        }
    }

    #[test]
    fn shared_stage_matches_separate_fits() {
        let spec = ModelSpec::new(ModelId::I1, 4, 60).with_seed(2);
        let both: Vec<Estimator> = ["eu-imave", "eu-iopg"].iter().map(|s| s.parse().unwrap()).collect();
        let joint = run_experiment(&spec, &both, &quick_opts(), 2).unwrap();
        for (k, e) in both.iter().enumerate() {
            let alone = run_replications(&spec, *e, &quick_opts(), 2).unwrap();
            assert_eq!(alone.errors(), joint[k].errors());
        }
    }

    #[test]
    fn rejects_mismatched_metric() {
        let spec = ModelSpec::new(ModelId::III, 4, 60);
        assert!(run_replications(&spec, "eu-imave".parse().unwrap(), &quick_opts(), 1).is_err());
        let spec = ModelSpec::new(ModelId::I1, 4, 60);
        assert!(run_replications(&spec, "sphere-iopg".parse().unwrap(), &quick_opts(), 1).is_err());
        assert!(run_replications(&spec, "eu-iopg".parse().unwrap(), &quick_opts(), 0).is_err());
    }

    #[test]
    fn csv_columns() {
        let spec = ModelSpec::new(ModelId::I1, 4, 60).with_seed(1);
        let r = run_replications(&spec, "eu-iopg".parse().unwrap(), &quick_opts(), 2).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "model,p,n,sigma,method,rep,seed,error,failed,wallclock_ms");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("I-1,4,60,0.2,eu-iopg,1,"));
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model,p,n,sigma,method,mean,sd,failures\n"));
    }
}
