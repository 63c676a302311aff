//! Sampling the Gibbs ensemble: a Metropolis–Hastings chain over particle
//! positions, and rejection conditioning of independent tilted spacings on
//! their sum.
//!
//! Spacings are indexed from the right wall: `x_k = y_{N-k+1} - y_{N-k}`, so
//! `x_1` is the gap next to the particle pinned at 1 and the potential reads
//! `β Σ 1/x_k + F Σ k x_k`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::ModelParams;
use crate::error::{Error, Result};
use crate::tilted::TiltedSpacingDist;

/// Ordered positions `0 = y_0 < y_1 < … < y_N = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    positions: Vec<f64>,
}

impl Configuration {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        if positions.len() < 3 {
            return Err(Error::Parameter("a configuration needs at least three particles".into()));
        }
        if positions[0] != 0.0 || *positions.last().expect("non-empty") != 1.0 {
            return Err(Error::Parameter("end particles must sit at 0 and 1".into()));
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("positions must be strictly increasing".into()));
        }
        Ok(Self { positions })
    }

    pub fn equally_spaced(n: usize) -> Result<Self> {
        let mut positions: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        if let Some(last) = positions.last_mut() {
            *last = 1.0;
        }
        Self::new(positions)
    }

    /// Configuration with the given right-indexed spacings, rescaled to sum
    /// to one.
    pub fn from_spacings(x: &[f64]) -> Result<Self> {
        let total: f64 = x.iter().sum();
        if x.iter().any(|&v| !(v > 0.0)) || !(total > 0.0) {
            return Err(Error::Parameter("spacings must be positive".into()));
        }
        let n = x.len();
        let mut positions = vec![0.0; n + 1];
        // y_{N-k} = y_{N-k+1} - x_k, accumulated from the left end so that
        // y_0 = 0 exactly
        let mut acc = 0.0;
        for j in 1..n {
            acc += x[n - j] / total;
            positions[j] = acc;
        }
        positions[n] = 1.0;
        Self::new(positions)
    }

    pub fn n(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn spacings(&self) -> SpacingVector {
        let n = self.n();
        let x = (1..=n)
            .map(|k| self.positions[n - k + 1] - self.positions[n - k])
            .collect();
        SpacingVector { x }
    }
}

/// Right-indexed spacings `x_1, …, x_N` (`x[0]` is `x_1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingVector {
    pub x: Vec<f64>,
}

impl SpacingVector {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Spacing `x_k`, `1 ≤ k ≤ N`.
    pub fn get(&self, k: usize) -> f64 {
        self.x[k - 1]
    }

    pub fn sum(&self) -> f64 {
        self.x.iter().sum()
    }
}

/// `U = β Σ 1/(y_k - y_{k-1}) + F Σ (N-k+1)(y_k - y_{k-1})`; infinite if two
/// particles coincide.
pub fn potential_u(config: &Configuration, params: &ModelParams) -> f64 {
    let y = config.positions();
    let n = y.len() - 1;
    let mut u = 0.0;
    for k in 1..=n {
        let gap = y[k] - y[k - 1];
        if !(gap > 0.0) {
            return f64::INFINITY;
        }
        u += params.beta / gap + params.force * (n - k + 1) as f64 * gap;
    }
    u
}

/// The same potential written in right-indexed spacings: `Σ (β/x_k + F k x_k)`.
pub fn potential_from_spacings(x: &SpacingVector, params: &ModelParams) -> f64 {
    x.x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                params.beta / v + params.force * (i + 1) as f64 * v
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub n_sweeps: usize,
    pub burn_in: usize,
    /// Proposal half-width as a fraction of the local scale (see
    /// [`McmcChain`]).
    pub proposal_width: f64,
    pub seed: u64,
    pub thinning: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            n_sweeps: 20_000,
            burn_in: 2_000,
            proposal_width: 0.5,
            seed: 1,
            thinning: 1,
        }
    }
}

impl McmcSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.proposal_width > 0.0 && self.proposal_width < 1.0) {
            return Err(Error::Parameter(format!(
                "proposal_width must lie in (0, 1), got {}",
                self.proposal_width
            )));
        }
        if self.burn_in >= self.n_sweeps {
            return Err(Error::Parameter(format!(
                "burn_in ({}) must be below n_sweeps ({})",
                self.burn_in, self.n_sweeps
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Parameter("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// Metropolis–Hastings chain over the interior particles.
///
/// A sweep visits every interior particle once in random order. Particle `k`
/// proposes a uniform move of half-width `w · min(ℓ, 3√(ℓ³/β))`, where `ℓ` is
/// the smaller of its two adjacent gaps and `w` the proposal width; the
/// second term tracks the thermal fluctuation scale `√(ℓ³/(4β))` of a
/// particle between fixed neighbours. The half-width depends on the current
/// position, so acceptance carries the Hastings factor `h/h'`.
///
/// Yields the thinned post-burn-in spacing vectors.
pub struct McmcChain {
    params: ModelParams,
    settings: McmcSettings,
    y: Vec<f64>,
    order: Vec<usize>,
    rng: ChaCha8Rng,
    sweep: usize,
    proposals: u64,
    accepted: u64,
}

impl McmcChain {
    pub fn new(params: ModelParams, settings: McmcSettings, initial: Configuration) -> Result<Self> {
        params.validate()?;
        settings.validate()?;
        if initial.n() != params.n {
            return Err(Error::Parameter(format!(
                "initial configuration has {} spacings, params expect {}",
                initial.n(),
                params.n
            )));
        }
        Ok(Self {
            params,
            settings,
            y: initial.positions,
            order: (1..params.n).collect(),
            rng: ChaCha8Rng::seed_from_u64(settings.seed),
            sweep: 0,
            proposals: 0,
            accepted: 0,
        })
    }

    fn half_width(&self, left: f64, right: f64) -> f64 {
        let l = left.min(right);
        self.settings.proposal_width * l.min(3.0 * (l * l * l / self.params.beta).sqrt())
    }

    /// One Metropolis–Hastings update of particle `k`, with the proposal
    /// offset `u ∈ [-1, 1)` and acceptance variate `a ∈ [0, 1)` supplied.
    /// Returns whether the move was accepted.
    fn update(&mut self, k: usize, u: f64, a: f64) -> bool {
        let (lo, hi, y) = (self.y[k - 1], self.y[k + 1], self.y[k]);
        let h = self.half_width(y - lo, hi - y);
        let y_new = y + h * u;
        if !(y_new > lo && y_new < hi) {
            return false;
        }
        let h_back = self.half_width(y_new - lo, hi - y_new);
        if (y - y_new).abs() >= h_back {
            return false;
        }
        let beta = self.params.beta;
        let du = beta * (1.0 / (y_new - lo) + 1.0 / (hi - y_new) - 1.0 / (y - lo) - 1.0 / (hi - y))
            + self.params.force * (y_new - y);
        let log_ratio = -du + (h / h_back).ln();
        if log_ratio >= 0.0 || a < log_ratio.exp() {
            self.y[k] = y_new;
            true
        } else {
            false
        }
    }

    pub fn run_sweep(&mut self) {
        let mut order = std::mem::take(&mut self.order);
        order.shuffle(&mut self.rng);
        for &k in &order {
            let u = 2.0 * self.rng.random::<f64>() - 1.0;
            let a = self.rng.random::<f64>();
            self.proposals += 1;
            if self.update(k, u, a) {
                self.accepted += 1;
            }
        }
        self.order = order;
        self.sweep += 1;
    }

    pub fn configuration(&self) -> Configuration {
        Configuration {
            positions: self.y.clone(),
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweep
    }
}

impl Iterator for McmcChain {
    type Item = SpacingVector;

    fn next(&mut self) -> Option<SpacingVector> {
        loop {
            if self.sweep >= self.settings.n_sweeps {
                return None;
            }
            self.run_sweep();
            let done = self.sweep;
            if done > self.settings.burn_in && (done - self.settings.burn_in - 1) % self.settings.thinning == 0 {
                return Some(self.configuration().spacings());
            }
        }
    }
}

/// Chain started from the equally spaced configuration.
pub fn mcmc_run(params: &ModelParams, settings: &McmcSettings) -> Result<McmcChain> {
    McmcChain::new(*params, *settings, Configuration::equally_spaced(params.n)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionSettings {
    /// Accepted vectors to produce.
    pub samples: usize,
    /// Accept when `|Σ X_k - 1| ≤ epsilon`.
    pub epsilon: f64,
    pub seed: u64,
}

/// Attempts after which a run without any acceptance is declared infeasible.
pub const INFEASIBLE_ATTEMPTS: u64 = 10_000_000;
const MIN_ACCEPTANCE: f64 = 1e-8;

/// Independent draws of the tilted spacings `X_{k,λ}`, kept when their sum
/// is within `epsilon` of one and then rescaled onto the simplex.
pub struct RejectionSampler {
    dists: Vec<TiltedSpacingDist>,
    epsilon: f64,
    rng: ChaCha8Rng,
    attempts: u64,
    accepted: u64,
    buf: Vec<f64>,
}

impl RejectionSampler {
    pub fn new(params: &ModelParams, lambda: f64, epsilon: f64, seed: u64) -> Result<Self> {
        params.validate()?;
        if !(epsilon > 0.0) {
            return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let dists: Vec<TiltedSpacingDist> = (1..=params.n)
            .into_par_iter()
            .map(|k| {
                let d = TiltedSpacingDist::new(params.beta, params.theta(lambda, k))?;
                d.prepare_sampling();
                Ok(d)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            dists,
            epsilon,
            rng: ChaCha8Rng::seed_from_u64(seed),
            attempts: 0,
            accepted: 0,
            buf: vec![0.0; params.n],
        })
    }

    /// Default tolerance `10⁻³ / N`.
    pub fn default_epsilon(n: usize) -> f64 {
        1e-3 / n as f64
    }

    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }

    pub fn next_accepted(&mut self) -> Result<SpacingVector> {
        let upper = 1.0 + self.epsilon;
        loop {
            self.attempts += 1;
            let mut total = 0.0;
            let mut overflow = false;
            for (slot, d) in self.buf.iter_mut().zip(&self.dists) {
                let v = d.sample(&mut self.rng);
                *slot = v;
                total += v;
                if total > upper {
                    overflow = true;
                    break;
                }
            }
            if !overflow && (total - 1.0).abs() <= self.epsilon {
                self.accepted += 1;
                let x = self.buf.iter().map(|v| v / total).collect();
                return Ok(SpacingVector { x });
            }
            if self.attempts >= INFEASIBLE_ATTEMPTS && self.acceptance_rate() < MIN_ACCEPTANCE {
                return Err(Error::Infeasible {
                    rate: self.acceptance_rate(),
                    attempts: self.attempts,
                });
            }
        }
    }
}

impl Iterator for RejectionSampler {
    type Item = Result<SpacingVector>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_accepted())
    }
}

#[derive(Clone, Debug)]
pub struct RejectionRun {
    pub samples: Vec<SpacingVector>,
    pub attempts: u64,
    pub acceptance_rate: f64,
}

pub fn rejection_conditional_run(
    params: &ModelParams,
    lambda: f64,
    settings: &RejectionSettings,
) -> Result<RejectionRun> {
    let mut sampler = RejectionSampler::new(params, lambda, settings.epsilon, settings.seed)?;
    let samples = (0..settings.samples)
        .map(|_| sampler.next_accepted())
        .collect::<Result<Vec<_>>>()?;
    Ok(RejectionRun {
        samples,
        attempts: sampler.attempts(),
        acceptance_rate: sampler.acceptance_rate(),
    })
}
