use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::ModelParams;
use crate::error::{Error, Result};
use crate::sampler::McmcSettings;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown format {other:?} (csv or json)"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

/// Starting configuration of each chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainInit {
    /// Equal spacings `1/N`.
    Equal,
    /// Calibrated tilted means, rescaled to sum to one.
    Tilted,
}

impl FromStr for ChainInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "equal" => Ok(Self::Equal),
            "tilted" => Ok(Self::Tilted),
            other => Err(Error::Config(format!("unknown init {other:?} (equal or tilted)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    /// Exponent `p` in `F ∝ N^p`, if known.
    pub regime_hint: Option<f64>,
    pub mcmc: McmcSettings,
    /// When set, the rejection sampler also runs with this tolerance.
    pub rejection_epsilon: Option<f64>,
    pub rejection_samples: usize,
    pub k_probe: Vec<usize>,
    pub chains: usize,
    pub output_path: Option<PathBuf>,
    pub format: ReportFormat,
    /// Unconditioned tilted sums drawn for the CLT check; 0 skips it.
    pub clt_samples: usize,
    pub clt_bins: usize,
    pub init: ChainInit,
    pub record_wall_time: bool,
    /// Multiplier on every theory mean. Only useful to check that `verify`
    /// notices a wrong prediction.
    pub theory_scale: f64,
}

impl ExperimentConfig {
    pub fn new(params: ModelParams) -> Self {
        let n = params.n;
        let mut k_probe = vec![1, n.div_ceil(4), n.div_ceil(2), (3 * n).div_ceil(4), n];
        k_probe.sort_unstable();
        k_probe.dedup();
        Self {
            params,
            regime_hint: None,
            mcmc: McmcSettings::default(),
            rejection_epsilon: None,
            rejection_samples: 2000,
            k_probe,
            chains: 4,
            output_path: None,
            format: ReportFormat::Json,
            clt_samples: 20_000,
            clt_bins: 60,
            init: ChainInit::Tilted,
            record_wall_time: false,
            theory_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.mcmc.validate()?;
        let n = self.params.n;
        if self.k_probe.is_empty() {
            return Err(Error::Config("k_probe is empty".into()));
        }
        if let Some(&k) = self.k_probe.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::Config(format!("k_probe entry {k} outside 1..={n}")));
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if let Some(e) = self.rejection_epsilon {
            if !(e > 0.0) {
                return Err(Error::Config(format!("rejection_epsilon must be positive, got {e}")));
            }
        }
        if self.clt_samples > 0 && self.clt_bins < 2 {
            return Err(Error::Config("clt_bins must be at least 2".into()));
        }
        if !self.theory_scale.is_finite() {
            return Err(Error::Config("theory_scale must be finite".into()));
        }
        Ok(())
    }

    /// Parse flat `key = value` text. `#` starts a comment. Either `force`
    /// or `f0` (with `force = f0 · n`) must be given.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut beta = None;
        let mut force = None;
        let mut f0 = None;
        let mut rest: Vec<(usize, String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "n" => n = Some(num::<usize>(key, value)?),
                "beta" => beta = Some(num::<f64>(key, value)?),
                "force" => force = Some(num::<f64>(key, value)?),
                "f0" => f0 = Some(num::<f64>(key, value)?),
                _ => rest.push((lineno + 1, key.to_string(), value.to_string())),
            }
        }
        let n = n.ok_or_else(|| Error::Config("missing key n".into()))?;
        let beta = beta.ok_or_else(|| Error::Config("missing key beta".into()))?;
        let force = match (force, f0) {
            (Some(_), Some(_)) => return Err(Error::Config("give force or f0, not both".into())),
            (Some(f), None) => f,
            (None, Some(f0)) => f0 * n as f64,
            (None, None) => return Err(Error::Config("missing key force (or f0)".into())),
        };
        let mut cfg = Self::new(ModelParams::new(n, beta, force)?);
        for (lineno, key, value) in rest {
            let v = value.as_str();
            match key.as_str() {
                "regime_hint" => cfg.regime_hint = optional(v, |s| num(&key, s))?,
                "n_sweeps" => cfg.mcmc.n_sweeps = num(&key, v)?,
                "burn_in" => cfg.mcmc.burn_in = num(&key, v)?,
                "proposal_width" => cfg.mcmc.proposal_width = num(&key, v)?,
                "seed" => cfg.mcmc.seed = num(&key, v)?,
                "thinning" => cfg.mcmc.thinning = num(&key, v)?,
                "rejection_epsilon" => cfg.rejection_epsilon = optional(v, |s| num(&key, s))?,
                "rejection_samples" => cfg.rejection_samples = num(&key, v)?,
                "k_probe" => {
                    cfg.k_probe = v
                        .split(',')
                        .map(|s| num::<usize>(&key, s.trim()))
                        .collect::<Result<_>>()?
                }
                "chains" => cfg.chains = num(&key, v)?,
                "output_path" => cfg.output_path = optional(v, |s| Ok(PathBuf::from(s)))?,
                "format" => cfg.format = v.parse()?,
                "clt_samples" => cfg.clt_samples = num(&key, v)?,
                "clt_bins" => cfg.clt_bins = num(&key, v)?,
                "init" => cfg.init = v.parse()?,
                "record_wall_time" => cfg.record_wall_time = num(&key, v)?,
                "theory_scale" => cfg.theory_scale = num(&key, v)?,
                _ => return Err(Error::Config(format!("line {lineno}: unknown key {key:?}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Inverse of [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("n", self.params.n.to_string());
        put("beta", self.params.beta.to_string());
        put("force", self.params.force.to_string());
        if let Some(h) = self.regime_hint {
            put("regime_hint", h.to_string());
        }
        put("n_sweeps", self.mcmc.n_sweeps.to_string());
        put("burn_in", self.mcmc.burn_in.to_string());
        put("proposal_width", self.mcmc.proposal_width.to_string());
        put("seed", self.mcmc.seed.to_string());
        put("thinning", self.mcmc.thinning.to_string());
        if let Some(e) = self.rejection_epsilon {
            put("rejection_epsilon", e.to_string());
        }
        put("rejection_samples", self.rejection_samples.to_string());
        put(
            "k_probe",
            self.k_probe.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","),
        );
        put("chains", self.chains.to_string());
        if let Some(p) = &self.output_path {
            put("output_path", p.display().to_string());
        }
        put("format", self.format.to_string());
        put("clt_samples", self.clt_samples.to_string());
        put("clt_bins", self.clt_bins.to_string());
        put(
            "init",
            match self.init {
                ChainInit::Equal => "equal",
                ChainInit::Tilted => "tilted",
            }
            .to_string(),
        );
        put("record_wall_time", self.record_wall_time.to_string());
        put("theory_scale", self.theory_scale.to_string());
        out
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn optional<T>(value: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(value).map(Some)
    }
}
