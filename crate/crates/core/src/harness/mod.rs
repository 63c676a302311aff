//! Experiment orchestration: calibrate, sample, compare with theory and the
//! small-`N` oracle, and write the report.

mod config;
mod report;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{ChainInit, ExperimentConfig, ReportFormat};
pub use report::{
    emit_report, CalibrationBlock, CltCheck, ExperimentReport, Provenance, RejectionRow, RejectionSummary, ReportRow,
    Verdict, RESIDUAL_LIMIT, Z_THRESHOLD,
};

use crate::calibration::{classify_regime, lambda_asymptotic, solve_lambda, spacing_means, ModelParams};
use crate::error::{Error, Result};
use crate::oracle::conditional_moment_bruteforce;
use crate::quadrature::QuadratureSettings;
use crate::sampler::{rejection_conditional_run, Configuration, McmcChain, RejectionSettings};
use crate::stats::{summarize, SeriesSummary, SpacingAccumulator};
use crate::theory::{gaussian_sum_density, predict_spacing};
use crate::tilted::TiltedSpacingDist;

/// Environment variable that fixes the number of chain worker threads.
pub const THREADS_ENV: &str = "COULOMB_CHAIN_THREADS";

const CLT_CHUNK: usize = 4096;

/// Seed of chain `c`; chain 0 uses the configured seed itself.
pub fn chain_seed(seed: u64, chain: usize) -> u64 {
    seed ^ (chain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Starting point of every chain under `init`.
pub fn initial_configuration(params: &ModelParams, init: ChainInit, lambda: f64) -> Result<Configuration> {
    match init {
        ChainInit::Equal => Configuration::equally_spaced(params.n),
        ChainInit::Tilted => {
            let m = spacing_means(lambda, params, &QuadratureSettings::default())?;
            let total: f64 = m.iter().sum();
            let x: Vec<f64> = m.iter().map(|v| v / total).collect();
            Configuration::from_spacings(&x)
        }
    }
}

/// Output of one chain.
#[derive(Clone, Debug)]
pub struct ChainSummary {
    pub seed: u64,
    pub acceptance_rate: f64,
    /// Per-probe summaries, in `k_probe` order.
    pub probes: Vec<SeriesSummary>,
    /// Mean of every spacing over the kept sweeps.
    pub means: Vec<f64>,
    pub max_sum_error: f64,
}

fn with_pool<T: Send>(work: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(threads) if threads > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        _ => Ok(work()),
    }
}

/// Runs `config.chains` independent chains in parallel. Results come back in
/// chain order whatever the scheduling.
pub fn run_chains(config: &ExperimentConfig, initial: &Configuration) -> Result<Vec<ChainSummary>> {
    config.validate()?;
    let run_one = |c: usize| -> Result<ChainSummary> {
        let mut settings = config.mcmc;
        settings.seed = chain_seed(config.mcmc.seed, c);
        let mut chain = McmcChain::new(config.params, settings, initial.clone())?;
        let mut acc = SpacingAccumulator::new(config.params.n, &config.k_probe)?;
        for v in chain.by_ref() {
            acc.push(&v);
        }
        let probes = acc.summaries()?.into_iter().map(|s| s.summary).collect();
        Ok(ChainSummary {
            seed: settings.seed,
            acceptance_rate: chain.acceptance_rate(),
            probes,
            means: acc.means(),
            max_sum_error: acc.max_sum_error(),
        })
    };
    with_pool(|| (0..config.chains).into_par_iter().map(run_one).collect::<Result<Vec<_>>>())?
}

/// Pool per-chain summaries of one spacing: average of means, standard error
/// from the per-chain errors, and the variance of all samples together.
pub fn merge_summaries(parts: &[SeriesSummary]) -> SeriesSummary {
    let c = parts.len() as f64;
    let count: usize = parts.iter().map(|p| p.count).sum();
    let mean = parts.iter().map(|p| p.mean * p.count as f64).sum::<f64>() / count as f64;
    let within: f64 = parts.iter().map(|p| (p.count as f64 - 1.0) * p.variance).sum();
    let between: f64 = parts.iter().map(|p| p.count as f64 * (p.mean - mean).powi(2)).sum();
    let variance = (within + between) / (count as f64 - 1.0);
    let se = parts.iter().map(|p| p.se * p.se).sum::<f64>().sqrt() / c;
    let ess = parts.iter().map(|p| p.ess).sum();
    SeriesSummary {
        count,
        mean,
        variance,
        se,
        ess,
    }
}

/// Sup-norm distance, relative to the Gaussian peak, between the histogram
/// of `samples` unconditioned sums `Σ_k X_{k,λ}` and the normal density
/// with variance `sigma2` centred at one. Bins span `1 ± 5σ`.
pub fn clt_gap(params: &ModelParams, lambda: f64, sigma2: f64, samples: usize, bins: usize, seed: u64) -> Result<CltCheck> {
    params.validate()?;
    if samples == 0 || bins < 2 {
        return Err(Error::Parameter("clt check needs samples > 0 and at least 2 bins".into()));
    }
    let laws: Vec<TiltedSpacingDist> = if params.force == 0.0 {
        vec![TiltedSpacingDist::new(params.beta, lambda)?]
    } else {
        (1..=params.n)
            .into_par_iter()
            .map(|k| TiltedSpacingDist::new(params.beta, params.theta(lambda, k)))
            .collect::<Result<_>>()?
    };
    laws.par_iter().for_each(|d| d.prepare_sampling());
    let sigma = sigma2.sqrt();
    let (lo, hi) = (1.0 - 5.0 * sigma, 1.0 + 5.0 * sigma);
    let width = (hi - lo) / bins as f64;
    let chunks = samples.div_ceil(CLT_CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(seed, c + 1));
            let mut local = vec![0u64; bins];
            let todo = CLT_CHUNK.min(samples - c * CLT_CHUNK);
            for _ in 0..todo {
                let s: f64 = (0..params.n).map(|k| laws[k.min(laws.len() - 1)].sample(&mut rng)).sum();
                let b = ((s - lo) / width).floor();
                if b >= 0.0 && b < bins as f64 {
                    local[b as usize] += 1;
                }
            }
            local
        })
        .reduce(
            || vec![0u64; bins],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let peak = gaussian_sum_density(1.0, sigma2, 0.0)?;
    let mut gap: f64 = 0.0;
    for (i, &count) in counts.iter().enumerate() {
        let a = lo + i as f64 * width;
        // Simpson average of the density over the bin
        let g = (gaussian_sum_density(a, sigma2, 0.0)?
            + 4.0 * gaussian_sum_density(a + 0.5 * width, sigma2, 0.0)?
            + gaussian_sum_density(a + width, sigma2, 0.0)?)
            / 6.0;
        let h = count as f64 / (samples as f64 * width);
        gap = gap.max((h - g).abs());
    }
    Ok(CltCheck {
        sup_norm_gap: gap / peak,
        n_bins: bins,
    })
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    config.validate().map_err(|e| e.in_stage("config"))?;
    let params = &config.params;
    let label = classify_regime(params, config.regime_hint);
    let cal = solve_lambda(params).map_err(|e| e.in_stage("calibration"))?;
    let lambda_seed = lambda_asymptotic(params, &label).map_err(|e| e.in_stage("calibration"))?;

    let initial = initial_configuration(params, config.init, cal.lambda).map_err(|e| e.in_stage("initialization"))?;
    let chains = run_chains(config, &initial).map_err(|e| e.in_stage("mcmc"))?;

    let lambda0 = if label.f0 > 4.0 * params.beta {
        crate::calibration::solve_lambda0(params.beta, label.f0).ok()
    } else {
        None
    };
    let mut rows = Vec::with_capacity(config.k_probe.len());
    for (i, &k) in config.k_probe.iter().enumerate() {
        let parts: Vec<SeriesSummary> = chains.iter().map(|c| c.probes[i]).collect();
        let s = merge_summaries(&parts);
        let pred = predict_spacing(params, k, &label, lambda0, Some(cal.lambda)).ok();
        let theory_mean = pred.map(|p| p.mean * config.theory_scale);
        let oracle_value = if params.n <= 3 {
            Some(
                conditional_moment_bruteforce(params, k, 1)
                    .map_err(|e| e.in_stage("oracle"))?
                    .value,
            )
        } else {
            None
        };
        let z_score = theory_mean.map(|t| {
            let d = s.mean - t;
            if s.se > 0.0 {
                d / s.se
            } else if d == 0.0 {
                0.0
            } else {
                d.signum() * f64::INFINITY
            }
        });
        rows.push(ReportRow {
            k,
            empirical_mean: s.mean,
            empirical_se: s.se,
            empirical_var: s.variance,
            theory_mean,
            theory_var_order: pred.map(|p| p.variance),
            oracle_value,
            z_score,
        });
    }

    let rejection = match config.rejection_epsilon {
        Some(epsilon) => {
            let run = rejection_conditional_run(
                params,
                cal.lambda,
                &RejectionSettings {
                    samples: config.rejection_samples,
                    epsilon,
                    seed: chain_seed(config.mcmc.seed, config.chains),
                },
            )
            .map_err(|e| e.in_stage("rejection"))?;
            let rows = config
                .k_probe
                .iter()
                .map(|&k| {
                    let series: Vec<f64> = run.samples.iter().map(|v| v.get(k)).collect();
                    let s = summarize(&series)?;
                    Ok(RejectionRow {
                        k,
                        mean: s.mean,
                        se: s.se,
                        var: s.variance,
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.in_stage("rejection"))?;
            Some(RejectionSummary {
                epsilon,
                acceptance_rate: run.acceptance_rate,
                rows,
            })
        }
        None => None,
    };

    let clt_check = if config.clt_samples > 0 {
        Some(
            clt_gap(
                params,
                cal.lambda,
                cal.sigma2_total,
                config.clt_samples,
                config.clt_bins,
                config.mcmc.seed,
            )
            .map_err(|e| e.in_stage("clt"))?,
        )
    } else {
        None
    };

    Ok(ExperimentReport {
        rows,
        calibration: CalibrationBlock {
            lambda: cal.lambda,
            lambda_asymptotic: lambda_seed,
            residual: cal.residual,
            sigma2_total: cal.sigma2_total,
            lyapunov: cal.lyapunov,
        },
        regime: label,
        clt_check,
        provenance: Provenance {
            seed: config.mcmc.seed,
            git_describe: git_describe(),
            wall_time: config.record_wall_time.then(|| start.elapsed().as_secs_f64()),
        },
        rejection,
    })
}
