//! Run configuration: flat `key = value` files merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use imave::local_fit::Ridge;
use imave::{BandwidthRule, Estimator, FitOptions, KernelKind, Method, Metric, ModelId, ModelSpec};

use crate::error::{CliError, CliResult};

/// Every key accepted in a config file or as a `--key` flag.
pub const KEYS: &[&str] = &[
    "model",
    "dataset",
    "p",
    "n",
    "sigma",
    "metric",
    "method",
    "d",
    "kernel",
    "bandwidth",
    "c0",
    "max_iters",
    "ridge",
    "standardize",
    "replications",
    "seed",
    "threads",
    "p_max",
    "output",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Generate,
    Replicate,
    SelectDim,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Generate => "generate",
            Command::Replicate => "replicate",
            Command::SelectDim => "select-dim",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Model(ModelId),
    Dataset(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimChoice {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Iopg,
    Imave,
    Both,
}

impl MethodChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodChoice::Iopg => vec![Method::Iopg],
            MethodChoice::Imave => vec![Method::Imave],
            MethodChoice::Both => vec![Method::Iopg, Method::Imave],
        }
    }

    fn name(self) -> &'static str {
        match self {
            MethodChoice::Iopg => "iopg",
            MethodChoice::Imave => "imave",
            MethodChoice::Both => "both",
        }
    }
}

/// Bandwidth rule without the `c0` constant, which is a separate key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthChoice {
    Schedule,
    NormalReference,
    Fixed(f64),
}

/// Validated run configuration with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub source: Source,
    /// Simulation size and noise; `None` for dataset runs.
    pub p: Option<usize>,
    pub n: Option<usize>,
    pub sigma: Option<f64>,
    /// `None` until resolved from the dataset's manifold.
    pub metric: Option<Metric>,
    pub method: MethodChoice,
    pub d: DimChoice,
    pub kernel: KernelKind,
    pub bandwidth: BandwidthChoice,
    pub c0: f64,
    pub max_iters: usize,
    /// Relative ridge factor.
    pub ridge: f64,
    pub standardize: bool,
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; 0 means all available.
    pub threads: usize,
    pub p_max: Option<usize>,
    pub output: PathBuf,
}

/// One `key = value` setting and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// Line in the config file; `None` for command-line flags.
    pub line: Option<usize>,
}

impl Entry {
    fn place(&self) -> String {
        match self.line {
            Some(l) => format!("line {l}"),
            None => "command line".to_string(),
        }
    }

    fn error(&self, what: &str) -> CliError {
        CliError::Usage(format!("{}: key '{}' {what}, got '{}'", self.place(), self.key, self.value))
    }
}

/// Splits config text into entries. Blank lines and `#` comments are
/// skipped; unknown and repeated keys are errors.
pub fn parse_entries(text: &str) -> CliResult<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("line {line}: expected 'key = value', got '{content}'")))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Usage(format!("line {line}: unknown key '{key}'")));
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            return Err(CliError::Usage(format!(
                "line {line}: key '{key}' already set on {}",
                prev.place()
            )));
        }
        out.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: Some(line),
        });
    }
    Ok(out)
}

/// Merges file entries with flag overrides (flags win).
pub fn merge(file: Vec<Entry>, flags: Vec<(String, String)>) -> CliResult<Vec<Entry>> {
    let mut entries = file;
    for (key, value) in flags {
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("command line: unknown key '{key}'")));
        }
        entries.retain(|e| e.key != key);
        entries.push(Entry { key, value, line: None });
    }
    Ok(entries)
}

fn parse_usize(e: &Entry, min: usize) -> CliResult<usize> {
    match e.value.parse::<usize>() {
        Ok(v) if v >= min => Ok(v),
        _ => Err(e.error(&format!("expects an integer >= {min}"))),
    }
}

fn parse_f64(e: &Entry, positive: bool) -> CliResult<f64> {
    match e.value.parse::<f64>() {
        Ok(v) if v.is_finite() && (v > 0.0 || (!positive && v >= 0.0)) => Ok(v),
        _ => Err(e.error(if positive {
            "expects a positive number"
        } else {
            "expects a nonnegative number"
        })),
    }
}

fn parse_bool(e: &Entry) -> CliResult<bool> {
    match e.value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(e.error("expects true or false")),
    }
}

pub fn parse_metric(s: &str) -> Option<Metric> {
    match s.to_ascii_lowercase().as_str() {
        "eu" | "log-euclidean" | "logeuclidean" => Some(Metric::LogEuclidean),
        "ch" | "log-cholesky" | "logcholesky" => Some(Metric::LogCholesky),
        "sphere" => Some(Metric::Sphere),
        _ => None,
    }
}

pub fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::LogEuclidean => "log-euclidean",
        Metric::LogCholesky => "log-cholesky",
        Metric::Sphere => "sphere",
    }
}

impl RunConfig {
    /// Builds a validated configuration for `command` from merged entries.
    pub fn from_entries(command: Command, entries: &[Entry]) -> CliResult<Self> {
        let get = |k: &str| entries.iter().find(|e| e.key == k);

        let model = get("model")
            .map(|e| e.value.parse::<ModelId>().map_err(|_| e.error("expects one of I-1, I-2, II-1, II-2, III")))
            .transpose()?;
        let dataset = get("dataset").map(|e| PathBuf::from(&e.value));
        let source = match (model, dataset) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage("keys 'model' and 'dataset' are mutually exclusive".into()))
            }
            (Some(m), None) => Source::Model(m),
            (None, Some(path)) => Source::Dataset(path),
            (None, None) => return Err(CliError::Usage("missing required key 'model' or 'dataset'".into())),
        };
        if matches!(source, Source::Dataset(_)) && matches!(command, Command::Generate | Command::Replicate) {
            return Err(CliError::Usage(format!("{} requires key 'model'", command.name())));
        }

        let (p, n, sigma) = match source {
            Source::Model(m) => {
                let p = get("p").map(|e| parse_usize(e, 1)).transpose()?.unwrap_or(10);
                let n = get("n").map(|e| parse_usize(e, 2)).transpose()?.unwrap_or(200);
                let sigma = get("sigma").map(|e| parse_f64(e, false)).transpose()?.unwrap_or(m.default_sigma());
                if p < m.min_p() {
                    let e = get("p").expect("default p is large enough");
                    return Err(e.error(&format!("must be at least {} for model {m}", m.min_p())));
                }
                (Some(p), Some(n), Some(sigma))
            }
            Source::Dataset(_) => {
                for k in ["p", "n", "sigma"] {
                    if let Some(e) = get(k) {
                        return Err(CliError::Usage(format!(
                            "{}: key '{k}' only applies to simulated models",
                            e.place()
                        )));
                    }
                }
                (None, None, None)
            }
        };

        let metric = match get("metric") {
            Some(e) => Some(parse_metric(&e.value).ok_or_else(|| e.error("expects log-euclidean, log-cholesky or sphere"))?),
            None => match source {
                Source::Model(m) => Some(m.default_metric()),
                Source::Dataset(_) => None,
            },
        };
        if let (Source::Model(m), Some(metric)) = (&source, metric) {
            if (m.response_dim().is_none()) != (metric == Metric::Sphere) {
                let e = get("metric").expect("default metric matches model");
                return Err(e.error(&format!("does not apply to model {m}")));
            }
        }

        let method = match get("method") {
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "iopg" => MethodChoice::Iopg,
                "imave" => MethodChoice::Imave,
                "both" => MethodChoice::Both,
                _ => return Err(e.error("expects iopg, imave or both")),
            },
            None => MethodChoice::Imave,
        };
        if method == MethodChoice::Both && matches!(command, Command::Fit | Command::SelectDim) {
            return Err(CliError::Usage(format!("method 'both' is only valid for replicate, not {}", command.name())));
        }

        let d = match get("d") {
            Some(e) if e.value.eq_ignore_ascii_case("auto") => DimChoice::Auto,
            Some(e) => DimChoice::Fixed(parse_usize(e, 1).map_err(|_| e.error("expects a positive integer or 'auto'"))?),
            None => match source {
                Source::Model(m) => DimChoice::Fixed(m.true_dim()),
                Source::Dataset(_) => DimChoice::Auto,
            },
        };
        if let (Source::Model(m), DimChoice::Fixed(dv), Command::Replicate) = (&source, d, command) {
            if dv != m.true_dim() {
                return Err(CliError::Usage(format!(
                    "replicate fits the true dimension {} of model {m}, got d = {dv}",
                    m.true_dim()
                )));
            }
        }
        if let (Some(p), DimChoice::Fixed(dv)) = (p, d) {
            if dv > p {
                return Err(CliError::Usage(format!("d = {dv} exceeds p = {p}")));
            }
        }

        let model_defaults = match source {
            Source::Model(m) => m.default_fit_options(),
            Source::Dataset(_) => FitOptions::default(),
        };
        let kernel = match get("kernel") {
            Some(e) => e.value.parse::<KernelKind>().map_err(|_| e.error("expects quartic or gaussian"))?,
            None => model_defaults.kernel,
        };
        let bandwidth = match get("bandwidth") {
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "schedule" => BandwidthChoice::Schedule,
                "normal-reference" => BandwidthChoice::NormalReference,
                _ => BandwidthChoice::Fixed(
                    parse_f64(e, true).map_err(|_| e.error("expects schedule, normal-reference or a positive number"))?,
                ),
            },
            None => match model_defaults.bandwidth {
                BandwidthRule::NormalReference => BandwidthChoice::NormalReference,
                BandwidthRule::Fixed(h) => BandwidthChoice::Fixed(h),
                BandwidthRule::Schedule { .. } => BandwidthChoice::Schedule,
            },
        };

        Ok(RunConfig {
            command,
            source,
            p,
            n,
            sigma,
            metric,
            method,
            d,
            kernel,
            bandwidth,
            c0: get("c0").map(|e| parse_f64(e, true)).transpose()?.unwrap_or(imave::smoothing::DEFAULT_C0),
            max_iters: get("max_iters").map(|e| parse_usize(e, 1)).transpose()?.unwrap_or(30),
            ridge: get("ridge").map(|e| parse_f64(e, false)).transpose()?.unwrap_or(1e-8),
            standardize: get("standardize").map(parse_bool).transpose()?.unwrap_or(true),
            replications: get("replications").map(|e| parse_usize(e, 1)).transpose()?.unwrap_or(100),
            seed: get("seed")
                .map(|e| e.value.parse::<u64>().map_err(|_| e.error("expects a nonnegative integer")))
                .transpose()?
                .unwrap_or(0),
            threads: get("threads").map(|e| parse_usize(e, 0)).transpose()?.unwrap_or(0),
            p_max: get("p_max").map(|e| parse_usize(e, 1)).transpose()?,
            output: get("output").map(|e| PathBuf::from(&e.value)).unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    /// Parses config text plus flag overrides.
    pub fn parse(command: Command, text: &str, flags: Vec<(String, String)>) -> CliResult<Self> {
        Self::from_entries(command, &merge(parse_entries(text)?, flags)?)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_iters: self.max_iters,
            kernel: self.kernel,
            bandwidth: match self.bandwidth {
                BandwidthChoice::Schedule => BandwidthRule::Schedule { c0: self.c0 },
                BandwidthChoice::NormalReference => BandwidthRule::NormalReference,
                BandwidthChoice::Fixed(h) => BandwidthRule::Fixed(h),
            },
            ridge: Ridge::Relative(self.ridge),
            standardize: self.standardize,
            early_stop: None,
        }
    }

    pub fn model_spec(&self) -> Option<ModelSpec> {
        match self.source {
            Source::Model(id) => Some(ModelSpec {
                id,
                p: self.p?,
                n: self.n?,
                sigma: self.sigma?,
                seed: self.seed,
            }),
            Source::Dataset(_) => None,
        }
    }

    pub fn estimators(&self) -> Vec<Estimator> {
        let metric = self.metric.unwrap_or(Metric::LogEuclidean);
        self.method.methods().into_iter().map(|m| Estimator::new(metric, m)).collect()
    }

    /// Key/value pairs of the effective configuration.
    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        match &self.source {
            Source::Model(id) => {
                m.insert("model", id.name().to_string());
            }
            Source::Dataset(path) => {
                m.insert("dataset", path.display().to_string());
            }
        }
        if let Some(p) = self.p {
            m.insert("p", p.to_string());
        }
        if let Some(n) = self.n {
            m.insert("n", n.to_string());
        }
        if let Some(s) = self.sigma {
            m.insert("sigma", s.to_string());
        }
        if let Some(metric) = self.metric {
            m.insert("metric", metric_name(metric).to_string());
        }
        m.insert("method", self.method.name().to_string());
        m.insert(
            "d",
            match self.d {
                DimChoice::Auto => "auto".to_string(),
                DimChoice::Fixed(d) => d.to_string(),
            },
        );
        m.insert("kernel", self.kernel.name().to_string());
        m.insert(
            "bandwidth",
            match self.bandwidth {
                BandwidthChoice::Schedule => "schedule".to_string(),
                BandwidthChoice::NormalReference => "normal-reference".to_string(),
                BandwidthChoice::Fixed(h) => h.to_string(),
            },
        );
        m.insert("c0", self.c0.to_string());
        m.insert("max_iters", self.max_iters.to_string());
        m.insert("ridge", self.ridge.to_string());
        m.insert("standardize", self.standardize.to_string());
        m.insert("replications", self.replications.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("threads", self.threads.to_string());
        if let Some(pm) = self.p_max {
            m.insert("p_max", pm.to_string());
        }
        m.insert("output", self.output.display().to_string());
        m
    }

    /// Effective configuration in the `key = value` file format.
    pub fn to_config_string(&self) -> String {
        let mut s = format!("# effective configuration for '{}'\n", self.command.name());
        for (k, v) in self.to_map() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
