//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use imave::evaluation::{run_experiment, write_results_csv, write_summary_csv};
use imave::{fit, generate, select_dimension, subspace_error, Basis, EmbeddedSample, GeneratedData, Metric, Responses};
use serde_json::{json, Value};

use crate::config::{metric_name, Command, DimChoice, RunConfig, Source};
use crate::dataset::{read_dataset, write_dataset, Dataset};
use crate::error::{CliError, CliResult};

/// Files written by a command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
    /// Exceeded failure threshold, reported after all outputs are written.
    pub flagged: Option<String>,
}

pub fn run(cfg: &RunConfig) -> CliResult<Outputs> {
    fs::create_dir_all(&cfg.output).map_err(|e| CliError::io(&cfg.output, e))?;
    match cfg.command {
        Command::Fit => cmd_fit(cfg),
        Command::Generate => cmd_generate(cfg),
        Command::Replicate => cmd_replicate(cfg),
        Command::SelectDim => cmd_select_dim(cfg),
    }
}

struct Loaded {
    x: nalgebra::DMatrix<f64>,
    y: Responses,
    truth: Option<Basis>,
}

fn load(cfg: &RunConfig) -> CliResult<Loaded> {
    match &cfg.source {
        Source::Dataset(path) => {
            let data = read_dataset(path)?;
            Ok(Loaded {
                x: data.x,
                y: data.y,
                truth: None,
            })
        }
        Source::Model(_) => {
            let spec = cfg.model_spec().expect("model runs carry a spec");
            let GeneratedData { x, y, b0, .. } = generate(&spec)?;
            Ok(Loaded { x, y, truth: Some(b0) })
        }
    }
}

/// Fills in the metric from the responses when it was left unset.
fn resolve_metric(cfg: &RunConfig, y: &Responses) -> CliResult<RunConfig> {
    let mut cfg = cfg.clone();
    let natural = match y {
        Responses::Spd(_) => Metric::LogEuclidean,
        Responses::Sphere(_) => Metric::Sphere,
    };
    match cfg.metric {
        None => cfg.metric = Some(natural),
        Some(m) if (m == Metric::Sphere) != (natural == Metric::Sphere) => {
            return Err(CliError::Usage(format!(
                "metric {} does not match the dataset's responses",
                metric_name(m)
            )))
        }
        Some(_) => {}
    }
    Ok(cfg)
}

fn write_text(path: PathBuf, text: &str, out: &mut Outputs) -> CliResult<()> {
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    out.files.push(path);
    Ok(())
}

fn write_basis(path: PathBuf, b: &Basis, out: &mut Outputs) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (1..=b.d()).map(|k| format!("b{k}")).collect();
    let err = |e: csv::Error| CliError::Data(format!("writing {}: {e}", path.display()));
    w.write_record(&header).map_err(err)?;
    for r in 0..b.p() {
        w.write_record(b.matrix().row(r).iter().map(|v| v.to_string())).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("utf-8 csv"), out)
}

fn config_json(cfg: &RunConfig) -> Value {
    let map: serde_json::Map<String, Value> = cfg
        .to_map()
        .into_iter()
        .map(|(k, v)| (k.to_string(), Value::String(v)))
        .collect();
    Value::Object(map)
}

fn write_effective_config(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    write_text(cfg.output.join("effective.conf"), &cfg.to_config_string(), out)
}

fn cmd_fit(cfg: &RunConfig) -> CliResult<Outputs> {
    let started = Instant::now();
    let data = load(cfg)?;
    let cfg = resolve_metric(cfg, &data.y)?;
    let metric = cfg.metric.expect("resolved");
    let sample = EmbeddedSample::new(data.x, &data.y, metric)?;
    let opts = cfg.fit_options();
    let method = cfg.method.methods()[0];

    let (d, cv_curve) = match cfg.d {
        DimChoice::Fixed(d) => (d, None),
        DimChoice::Auto => {
            let p_max = cfg.p_max.unwrap_or(sample.p()).min(sample.p());
            let cv = select_dimension(&sample, method, &opts, p_max)?;
            (cv.d_hat, Some(cv))
        }
    };
    let report = fit(&sample, method, d, &opts)?;

    let mut out = Outputs::default();
    write_basis(cfg.output.join("basis.csv"), &report.basis, &mut out)?;
    write_basis(cfg.output.join("basis_original.csv"), report.estimate(), &mut out)?;
    let error = data.truth.as_ref().map(|b0| subspace_error(report.estimate(), b0)).transpose()?;
    let json = json!({
        "command": "fit",
        "config": config_json(&cfg),
        "seed": cfg.seed,
        "estimator": imave::Estimator::new(metric, method).name(),
        "n": sample.n(),
        "p": sample.p(),
        "d": d,
        "d_selected_by_cv": cv_curve.is_some(),
        "cv_values": cv_curve.as_ref().map(|c| c.cv_values.clone()),
        "standardized": report.standardization.is_some(),
        "iterations": report.iterations,
        "final_bandwidth": report.final_bandwidth,
        "skipped_anchors": report.skipped_anchors,
        "fit_ms": report.elapsed.as_secs_f64() * 1e3,
        "total_ms": started.elapsed().as_secs_f64() * 1e3,
        "orthonormality_gap": report.estimate().orthonormality_gap(),
        "subspace_error": error,
    });
    write_text(
        cfg.output.join("report.json"),
        &serde_json::to_string_pretty(&json).expect("serializable report"),
        &mut out,
    )?;
    write_effective_config(&cfg, &mut out)?;
    Ok(out)
}

fn cmd_generate(cfg: &RunConfig) -> CliResult<Outputs> {
    let spec = cfg.model_spec().ok_or_else(|| CliError::Usage("generate requires key 'model'".into()))?;
    let data = generate(&spec)?;
    let mut out = Outputs::default();
    let dataset = Dataset {
        ids: (1..=data.x.nrows()).map(|i| i.to_string()).collect(),
        x: data.x,
        y: data.y,
    };
    let path = cfg.output.join("data.csv");
    write_dataset(&path, &dataset)?;
    out.files.push(path);
    write_basis(cfg.output.join("b0.csv"), &data.b0, &mut out)?;
    write_effective_config(cfg, &mut out)?;
    Ok(out)
}

fn cmd_replicate(cfg: &RunConfig) -> CliResult<Outputs> {
    let spec = cfg.model_spec().ok_or_else(|| CliError::Usage("replicate requires key 'model'".into()))?;
    let results = run_experiment(&spec, &cfg.estimators(), &cfg.fit_options(), cfg.replications)?;
    let mut out = Outputs::default();
    let csv_file = |name: &str| -> CliResult<(PathBuf, fs::File)> {
        let path = cfg.output.join(name);
        let f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        Ok((path, f))
    };
    let (path, f) = csv_file("results.csv")?;
    write_results_csv(f, &results)?;
    out.files.push(path);
    let (path, f) = csv_file("summary.csv")?;
    write_summary_csv(f, &results)?;
    out.files.push(path);
    write_effective_config(cfg, &mut out)?;
    let flagged: Vec<String> = results
        .iter()
        .filter(|r| r.failure_flag)
        .map(|r| format!("{} failed in {} of {} replications", r.estimator, r.failures, r.replications.len()))
        .collect();
    if !flagged.is_empty() {
        out.flagged = Some(flagged.join("; "));
    }
    Ok(out)
}

fn cmd_select_dim(cfg: &RunConfig) -> CliResult<Outputs> {
    let data = load(cfg)?;
    let cfg = resolve_metric(cfg, &data.y)?;
    let sample = EmbeddedSample::new(data.x, &data.y, cfg.metric.expect("resolved"))?;
    let p_max = cfg.p_max.unwrap_or(sample.p());
    let cv = select_dimension(&sample, cfg.method.methods()[0], &cfg.fit_options(), p_max)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("writing cv.csv: {e}"));
    w.write_record(["l", "cv", "bandwidth", "selected"]).map_err(err)?;
    for (k, (v, h)) in cv.cv_values.iter().zip(&cv.bandwidths).enumerate() {
        let l = k + 1;
        w.write_record([
            l.to_string(),
            v.map_or_else(String::new, |v| v.to_string()),
            h.to_string(),
            ((l == cv.d_hat) as u8).to_string(),
        ])
        .map_err(err)?;
    }
    let mut out = Outputs::default();
    let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
    write_text(cfg.output.join("cv.csv"), &String::from_utf8(bytes).expect("utf-8 csv"), &mut out)?;
    write_effective_config(&cfg, &mut out)?;
    Ok(out)
}

/// Reads a config file, or returns empty text when none is given.
pub fn read_config_text(path: Option<&Path>) -> CliResult<String> {
    match path {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(p, e)),
        None => Ok(String::new()),
    }
}
