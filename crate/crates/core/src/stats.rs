//! Per-spacing summary statistics of a sample stream: batch-means standard
//! errors and effective sample size from the integrated autocorrelation time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::SpacingVector;

pub const BATCHES: usize = 20;
pub const MIN_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Batch-means standard error of `mean`.
    pub se: f64,
    pub ess: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingStats {
    pub k: usize,
    pub summary: SeriesSummary,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v)
}

/// Effective sample size `n / τ` with `τ = -1 + 2 Σ Γ_m` over Geyer's
/// initial positive sequence `Γ_m = ρ_{2m} + ρ_{2m+1}`.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    let (m, _) = mean_var(x);
    let c0 = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return f64::NAN;
    }
    let autocov = |lag: usize| -> f64 {
        x[..n - lag]
            .iter()
            .zip(&x[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / n as f64
    };
    let mut tau = -1.0;
    let mut lag = 0;
    let mut prev_pair = f64::INFINITY;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        // monotone initial sequence
        let pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / n as f64);
    n as f64 / tau
}

pub fn summarize(x: &[f64]) -> Result<SeriesSummary> {
    if x.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            got: x.len(),
            need: MIN_SAMPLES,
        });
    }
    let (mean, variance) = mean_var(x);
    let size = x.len() / BATCHES;
    let batch_means: Vec<f64> = x
        .chunks_exact(size)
        .take(BATCHES)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let (_, bvar) = mean_var(&batch_means);
    let se = (bvar / BATCHES as f64).sqrt();
    let ess = if variance > 0.0 {
        effective_sample_size(x)
    } else {
        BATCHES as f64
    };
    Ok(SeriesSummary {
        count: x.len(),
        mean,
        variance,
        se,
        ess,
    })
}

/// Statistics of spacings `k_list` (1-based) over a stream of vectors.
pub fn spacing_statistics(stream: &[SpacingVector], k_list: &[usize]) -> Result<Vec<SpacingStats>> {
    if stream.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            got: stream.len(),
            need: MIN_SAMPLES,
        });
    }
    k_list
        .iter()
        .map(|&k| {
            if k == 0 || k > stream[0].n() {
                return Err(Error::Parameter(format!("spacing index {k} out of range")));
            }
            let series: Vec<f64> = stream.iter().map(|v| v.get(k)).collect();
            Ok(SpacingStats {
                k,
                summary: summarize(&series)?,
            })
        })
        .collect()
}

/// Streaming collector: full series for the probed spacings plus running
/// sums for every spacing.
#[derive(Clone, Debug)]
pub struct SpacingAccumulator {
    k_probe: Vec<usize>,
    series: Vec<Vec<f64>>,
    sums: Vec<f64>,
    count: usize,
    max_sum_error: f64,
}

impl SpacingAccumulator {
    pub fn new(n: usize, k_probe: &[usize]) -> Result<Self> {
        if let Some(&bad) = k_probe.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::Parameter(format!("probe index {bad} outside 1..={n}")));
        }
        Ok(Self {
            k_probe: k_probe.to_vec(),
            series: vec![Vec::new(); k_probe.len()],
            sums: vec![0.0; n],
            count: 0,
            max_sum_error: 0.0,
        })
    }

    pub fn push(&mut self, v: &SpacingVector) {
        for (s, &k) in self.series.iter_mut().zip(&self.k_probe) {
            s.push(v.get(k));
        }
        for (acc, x) in self.sums.iter_mut().zip(&v.x) {
            *acc += x;
        }
        self.count += 1;
        self.max_sum_error = self.max_sum_error.max((v.sum() - 1.0).abs());
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Largest `|Σ x_k - 1|` seen.
    pub fn max_sum_error(&self) -> f64 {
        self.max_sum_error
    }

    /// Running mean of every spacing, `k = 1..=N` in order.
    pub fn means(&self) -> Vec<f64> {
        self.sums.iter().map(|s| s / self.count as f64).collect()
    }

    pub fn series(&self, k: usize) -> Option<&[f64]> {
        self.k_probe.iter().position(|&p| p == k).map(|i| self.series[i].as_slice())
    }

    pub fn summaries(&self) -> Result<Vec<SpacingStats>> {
        self.k_probe
            .iter()
            .zip(&self.series)
            .map(|(&k, s)| Ok(SpacingStats { k, summary: summarize(s)? }))
            .collect()
    }
}
