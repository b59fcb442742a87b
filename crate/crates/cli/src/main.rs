use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imave_cli::commands::read_config_text;
use imave_cli::{run, CliError, CliResult, Command, RunConfig};

#[derive(Parser)]
#[command(name = "imave", version, about = "Sufficient dimension reduction for manifold-valued responses")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Estimate a reduction basis for one dataset or one simulated draw.
    Fit(Opts),
    /// Write a simulated dataset and its true basis.
    Generate(Opts),
    /// Run Monte Carlo replications of a simulation model.
    Replicate(Opts),
    /// Choose the structural dimension by cross-validation.
    SelectDim(Opts),
}

/// Every key may also be set in the config file; flags win.
#[derive(Args)]
struct Opts {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    /// log-euclidean, log-cholesky or sphere.
    #[arg(long)]
    metric: Option<String>,
    /// iopg, imave or both.
    #[arg(long)]
    method: Option<String>,
    /// Dimension, or `auto`.
    #[arg(long)]
    d: Option<String>,
    /// quartic or gaussian.
    #[arg(long)]
    kernel: Option<String>,
    /// schedule, normal-reference or a fixed positive value.
    #[arg(long)]
    bandwidth: Option<String>,
    #[arg(long)]
    c0: Option<String>,
    #[arg(long = "max-iters")]
    max_iters: Option<String>,
    #[arg(long)]
    ridge: Option<String>,
    #[arg(long)]
    standardize: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long = "p-max")]
    p_max: Option<String>,
    /// Output directory.
    #[arg(long)]
    output: Option<String>,
}

impl Opts {
    fn flags(&self) -> Vec<(String, String)> {
        let pairs = [
            ("model", &self.model),
            ("dataset", &self.dataset),
            ("p", &self.p),
            ("n", &self.n),
            ("sigma", &self.sigma),
            ("metric", &self.metric),
            ("method", &self.method),
            ("d", &self.d),
            ("kernel", &self.kernel),
            ("bandwidth", &self.bandwidth),
            ("c0", &self.c0),
            ("max_iters", &self.max_iters),
            ("ridge", &self.ridge),
            ("standardize", &self.standardize),
            ("replications", &self.replications),
            ("seed", &self.seed),
            ("threads", &self.threads),
            ("p_max", &self.p_max),
            ("output", &self.output),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn execute(command: Command, opts: &Opts) -> CliResult<Option<String>> {
    let text = read_config_text(opts.config.as_deref())?;
    let cfg = RunConfig::parse(command, &text, opts.flags())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cfg.threads)))?;
    let out = pool.install(|| run(&cfg))?;
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(out.flagged)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (command, opts) = match &cli.command {
        Sub::Fit(o) => (Command::Fit, o),
        Sub::Generate(o) => (Command::Generate, o),
        Sub::Replicate(o) => (Command::Replicate, o),
        Sub::SelectDim(o) => (Command::SelectDim, o),
    };
    match execute(command, opts) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(flag)) => {
            eprintln!("warning: {flag}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("imave {}: {e}", command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
