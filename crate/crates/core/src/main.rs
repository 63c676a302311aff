use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use coulomb_gas::calibration::{solve_lambda, ModelParams};
use coulomb_gas::harness::{emit_report, initial_configuration, run_experiment, ExperimentConfig, ReportFormat};
use coulomb_gas::oracle::conditional_moment_bruteforce;
use coulomb_gas::sampler::McmcChain;
use coulomb_gas::stats::SpacingAccumulator;
use coulomb_gas::theory::predict_spacing_auto;
use coulomb_gas::Result;

#[derive(Parser)]
#[command(name = "coulomb-gas", version, about = "One-dimensional Coulomb gas spacing statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Common {
    /// RNG seed; overrides the config file where there is one.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    format: ReportFormat,
}

#[derive(Args)]
struct Model {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// External force F.
    #[arg(long, conflicts_with = "f0")]
    force: Option<f64>,
    /// Force per particle, F = f0 * n.
    #[arg(long)]
    f0: Option<f64>,
}

impl Model {
    fn params(&self) -> Result<ModelParams> {
        let force = match (self.force, self.f0) {
            (Some(f), _) => f,
            (None, Some(f0)) => f0 * self.n as f64,
            (None, None) => 0.0,
        };
        ModelParams::new(self.n, self.beta, force)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the tilt so the tilted spacing means sum to one.
    SolveLambda {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form mean and variance of one spacing.
    Predict {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        k: usize,
        /// Exponent p in F ~ N^p.
        #[arg(long)]
        regime_hint: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the first chain of a config and stream running statistics.
    Sample {
        #[arg(long)]
        config: PathBuf,
        /// Progress lines to print.
        #[arg(long, default_value_t = 10)]
        updates: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Full experiment and report; exit status 0 only if every check passes.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Report path; overrides `output_path` in the config.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Brute-force conditional moment for two or three spacings.
    Oracle {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        power: u32,
        #[command(flatten)]
        common: Common,
    },
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn print<T: Serialize>(value: &T, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Json => println!("{}", serde_json::to_string_pretty(value)?),
        ReportFormat::Csv => {
            let mut cells = Vec::new();
            flatten("", &serde_json::to_value(value)?, &mut cells);
            let (keys, vals): (Vec<_>, Vec<_>) = cells.into_iter().unzip();
            println!("{}", keys.join(","));
            println!("{}", vals.join(","));
        }
    }
    Ok(())
}

fn load_config(path: &PathBuf, common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_file(path).map_err(|e| e.in_stage("config"))?;
    if let Some(seed) = common.seed {
        cfg.mcmc.seed = seed;
    }
    cfg.format = common.format;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::SolveLambda { model, common } => {
            let cal = solve_lambda(&model.params()?)?;
            print(&cal, common.format)?;
        }
        Command::Predict {
            model,
            k,
            regime_hint,
            common,
        } => {
            print(&predict_spacing_auto(&model.params()?, k, regime_hint)?, common.format)?;
        }
        Command::Sample { config, updates, common } => {
            let cfg = load_config(&config, &common)?;
            let cal = solve_lambda(&cfg.params).map_err(|e| e.in_stage("calibration"))?;
            let init = initial_configuration(&cfg.params, cfg.init, cal.lambda)?;
            let mut chain = McmcChain::new(cfg.params, cfg.mcmc, init)?;
            let mut acc = SpacingAccumulator::new(cfg.params.n, &cfg.k_probe)?;
            let kept = (cfg.mcmc.n_sweeps - cfg.mcmc.burn_in).div_ceil(cfg.mcmc.thinning);
            let every = (kept / updates.max(1)).max(1);
            println!("sweep,k,running_mean");
            while let Some(v) = chain.next() {
                acc.push(&v);
                if acc.count() % every == 0 {
                    let means = acc.means();
                    for &k in &cfg.k_probe {
                        println!("{},{},{}", chain.sweeps_done(), k, means[k - 1]);
                    }
                }
            }
            let stats = acc.summaries().map_err(|e| e.in_stage("statistics"))?;
            match common.format {
                ReportFormat::Json => println!("{}", serde_json::to_string_pretty(&stats)?),
                ReportFormat::Csv => {
                    println!("k,count,mean,variance,se,ess");
                    for s in &stats {
                        let m = &s.summary;
                        println!("{},{},{},{},{},{}", s.k, m.count, m.mean, m.variance, m.se, m.ess);
                    }
                }
            }
            eprintln!("acceptance rate {:.3}", chain.acceptance_rate());
        }
        Command::Verify { config, output, common } => {
            let cfg = load_config(&config, &common)?;
            let report = run_experiment(&cfg)?;
            match output.or(cfg.output_path.clone()) {
                Some(path) => emit_report(&report, &path, cfg.format)?,
                None => print!("{}", report.render(cfg.format)?),
            }
            let verdict = report.verdict();
            for f in &verdict.failures {
                eprintln!("FAIL {f}");
            }
            if !verdict.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Oracle {
            model,
            k,
            power,
            common,
        } => {
            let r = conditional_moment_bruteforce(&model.params()?, k, power)?;
            print(&r, common.format)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
