use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isamp::designs::{ScenarioConfig, ScenarioKind};
use isamp::harness::WeightDistConfig;
use isamp::io::{run_command, Command, DatasetSpec, RunConfig, WeightKind};
use isamp::model::{Method, ModelKind};
use isamp::Result;

#[derive(Parser)]
#[command(name = "isamp", version, about = "Bayesian regression under informative sampling")]
struct Cli {
    /// JSON run configuration; flags given on the command line override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Default)]
struct ChainArgs {
    /// Warmup iterations per chain.
    #[arg(long)]
    warmup: Option<usize>,
    /// Post-warmup draws per chain.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    target_accept: Option<f64>,
    #[arg(long)]
    max_leapfrog: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: ISAMP_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long = "out")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo study of one simulation scenario.
    SimulateStudy {
        /// slr-skewed, slr-symmetric or nonlinear.
        #[arg(long)]
        scenario: Option<ScenarioKind>,
        #[arg(long = "b-pi")]
        b_pi: Option<f64>,
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long = "n")]
        n: Option<usize>,
        #[arg(long = "M")]
        reps: Option<usize>,
        /// Coefficient of the size variable in the response (0: non-informative).
        #[arg(long = "beta-pi")]
        beta_pi: Option<f64>,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Fit a model to a CSV dataset.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<ModelKind>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        response: Option<String>,
        #[arg(long)]
        weight: Option<String>,
        /// `weight` (proportional to 1/pi) or `inclusion-prob`.
        #[arg(long)]
        weight_kind: Option<WeightKind>,
        /// Comma-separated response-model covariates.
        #[arg(long, value_delimiter = ',')]
        y_cov: Option<Vec<String>>,
        /// Comma-separated inclusion-model covariates.
        #[arg(long, value_delimiter = ',')]
        pi_cov: Option<Vec<String>>,
        #[arg(long)]
        spline_col: Option<String>,
        #[arg(long, value_delimiter = ',')]
        categorical: Option<Vec<String>>,
        /// Comma-separated columns to log-transform.
        #[arg(long, value_delimiter = ',')]
        log: Option<Vec<String>>,
        #[arg(long)]
        bases: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Estimate the population distribution of inclusion probabilities from a PPS sample.
    WeightsDist {
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long = "n")]
        n: Option<usize>,
        /// Multiply every population size by this constant.
        #[arg(long)]
        scale: Option<f64>,
        #[command(flatten)]
        chain: ChainArgs,
    },
    /// Rewrite the CSV outputs of a previous run from its run.json.
    EmitPlotData {
        #[arg(long)]
        run: PathBuf,
        /// Output directory (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn base_config(path: Option<&PathBuf>, command: Command) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let cfg = RunConfig::from_json_file(p)?;
            if cfg.command != command {
                return Err(isamp::Error::Config(format!(
                    "config file is for `{}`, not `{}`",
                    cfg.command.as_str(),
                    command.as_str()
                )));
            }
            Ok(cfg)
        }
        None => Ok(RunConfig::new(command, ".")),
    }
}

fn apply_chain(cfg: &mut RunConfig, a: ChainArgs) {
    if let Some(v) = a.warmup {
        cfg.chain.n_warmup = v;
    }
    if let Some(v) = a.draws {
        cfg.chain.n_draws = v;
    }
    if let Some(v) = a.target_accept {
        cfg.chain.target_accept = v;
    }
    if let Some(v) = a.max_leapfrog {
        cfg.chain.max_leapfrog = v;
    }
    if let Some(v) = a.seed {
        cfg.chain.seed = v;
    }
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    if let Some(v) = a.out {
        cfg.output_dir = v;
    }
}

fn build(cli: Cli) -> Result<RunConfig> {
    let file = cli.config.as_ref();
    let cfg = match cli.command {
        Cmd::SimulateStudy {
            scenario,
            b_pi,
            big_n,
            n,
            reps,
            beta_pi,
            chain,
        } => {
            let mut cfg = base_config(file, Command::SimulateStudy)?;
            let mut s = match (cfg.scenario.take(), scenario) {
                (Some(mut s), Some(kind)) => {
                    s.kind = kind;
                    s
                }
                (Some(s), None) => s,
                (None, kind) => ScenarioConfig::desk(kind.unwrap_or(ScenarioKind::SlrSkewed)),
            };
            // The CLI seed is the study's base seed; chains derive theirs from it.
            if let Some(seed) = chain.seed {
                s.base_seed = seed;
            }
            s.b_pi = b_pi.unwrap_or(s.b_pi);
            s.big_n = big_n.unwrap_or(s.big_n);
            s.n = n.unwrap_or(s.n);
            s.reps = reps.unwrap_or(s.reps);
            s.beta_pi = beta_pi.unwrap_or(s.beta_pi);
            apply_chain(&mut cfg, chain);
            cfg.scenario = Some(s);
            cfg
        }
        Cmd::Fit {
            data,
            model,
            method,
            response,
            weight,
            weight_kind,
            y_cov,
            pi_cov,
            spline_col,
            categorical,
            log,
            bases,
            chains,
            chain,
        } => {
            let mut cfg = base_config(file, Command::Fit)?;
            let mut d = match cfg.dataset.take() {
                Some(d) => d,
                None => {
                    let path = data.clone().ok_or_else(|| isamp::Error::Config("fit needs --data".into()))?;
                    DatasetSpec::new(path, "y", "weight", WeightKind::Weight)
                }
            };
            if let Some(v) = data {
                d.path = v;
            }
            if let Some(v) = response {
                d.response_column = v;
            }
            if let Some(v) = weight {
                d.weight_column = v;
            }
            if let Some(v) = weight_kind {
                d.weight_kind = v;
            }
            if let Some(v) = y_cov {
                d.y_covariates = v;
            }
            if let Some(v) = pi_cov {
                d.pi_covariates = v;
            }
            if let Some(v) = spline_col {
                d.spline_column = Some(v);
            }
            if let Some(v) = categorical {
                d.categorical_columns = v;
            }
            if let Some(v) = log {
                d.log_columns = v;
            }
            if let Some(v) = bases {
                d.spline_bases = v;
            }
            cfg.model = model.unwrap_or(cfg.model);
            cfg.method = method.unwrap_or(cfg.method);
            cfg.chains = chains.unwrap_or(cfg.chains);
            apply_chain(&mut cfg, chain);
            cfg.dataset = Some(d);
            cfg
        }
        Cmd::WeightsDist { big_n, n, scale, chain } => {
            let mut cfg = base_config(file, Command::WeightsDist)?;
            let mut w = cfg
                .weights_dist
                .take()
                .unwrap_or_else(|| WeightDistConfig::new(100_000, 100, 1));
            w.big_n = big_n.unwrap_or(w.big_n);
            w.n = n.unwrap_or(w.n);
            w.scale = scale.unwrap_or(w.scale);
            if let Some(seed) = chain.seed {
                w.seed = seed;
            }
            apply_chain(&mut cfg, chain);
            cfg.weights_dist = Some(w);
            cfg
        }
        Cmd::EmitPlotData { run, out } => {
            let mut cfg = base_config(file, Command::EmitPlotData)?;
            cfg.output_dir = out.unwrap_or_else(|| run.clone());
            cfg.run_dir = Some(run);
            cfg
        }
    };
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = build(cli).and_then(|cfg| {
        std::fs::create_dir_all(&cfg.output_dir).map_err(|e| isamp::Error::Io {
            path: cfg.output_dir.clone(),
            source: e,
        })?;
        run_command(&cfg)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("isamp: {e}");
            ExitCode::FAILURE
        }
    }
}
