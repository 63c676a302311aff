use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ReportFormat;
use crate::calibration::{Regime, RegimeLabel};
use crate::error::{Error, Result};
use crate::theory::VARIANCE_ORDER_BOUND;

pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub k: usize,
    pub empirical_mean: f64,
    pub empirical_se: f64,
    pub empirical_var: f64,
    /// Absent where no closed form exists (regime (e), `k ≥ 2`).
    pub theory_mean: Option<f64>,
    pub theory_var_order: Option<f64>,
    pub oracle_value: Option<f64>,
    /// `(empirical - theory) / se`; absent with the theory column.
    pub z_score: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBlock {
    pub lambda: f64,
    pub lambda_asymptotic: f64,
    pub residual: f64,
    pub sigma2_total: f64,
    pub lyapunov: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltCheck {
    /// Largest `|histogram - Gaussian|` over the bins, in units of the
    /// Gaussian peak height.
    pub sup_norm_gap: f64,
    pub n_bins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub git_describe: String,
    /// Seconds; recorded only on request so reports stay reproducible.
    pub wall_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub k: usize,
    pub mean: f64,
    pub se: f64,
    pub var: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionSummary {
    pub epsilon: f64,
    pub acceptance_rate: f64,
    pub rows: Vec<RejectionRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub calibration: CalibrationBlock,
    pub regime: RegimeLabel,
    pub clt_check: Option<CltCheck>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<RejectionSummary>,
}

/// Calibration residuals above this fail the invariant suite.
pub const RESIDUAL_LIMIT: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub failures: Vec<String>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl ExperimentReport {
    /// `|z| < 4` on every row with a theory value, plus the invariant suite:
    /// calibration residual, finite statistics, and empirical variances within
    /// [`VARIANCE_ORDER_BOUND`] times their predicted order where only the order
    /// is known.
    pub fn verdict(&self) -> Verdict {
        let mut failures = Vec::new();
        if !(self.calibration.residual <= RESIDUAL_LIMIT) {
            failures.push(format!("calibration residual {:e} above {RESIDUAL_LIMIT:e}", self.calibration.residual));
        }
        let order_only = !matches!(self.regime.regime, Regime::SubLinear | Regime::LinearSub);
        for r in &self.rows {
            if !(r.empirical_mean.is_finite() && r.empirical_se.is_finite() && r.empirical_var.is_finite()) {
                failures.push(format!("k={}: non-finite statistics", r.k));
            }
            if let Some(z) = r.z_score {
                if !z.is_finite() {
                    failures.push(format!("k={}: z-score not finite", r.k));
                } else if z.abs() >= Z_THRESHOLD {
                    failures.push(format!("k={}: |z| = {:.2} >= {Z_THRESHOLD}", r.k, z.abs()));
                }
            }
            if let (true, Some(order)) = (order_only, r.theory_var_order) {
                if r.empirical_var > VARIANCE_ORDER_BOUND * order {
                    failures.push(format!(
                        "k={}: variance {:e} exceeds {VARIANCE_ORDER_BOUND} x order {:e}",
                        r.k, r.empirical_var, order
                    ));
                }
            }
        }
        Verdict { failures }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("k,emp_mean,emp_se,emp_var,theory_mean,theory_var_order,oracle,z\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.k,
                r.empirical_mean,
                r.empirical_se,
                r.empirical_var,
                opt(r.theory_mean),
                opt(r.theory_var_order),
                opt(r.oracle_value),
                opt(r.z_score)
            );
        }
        let c = &self.calibration;
        let _ = writeln!(out, "# lambda={}", c.lambda);
        let _ = writeln!(out, "# lambda_asymptotic={}", c.lambda_asymptotic);
        let _ = writeln!(out, "# residual={}", c.residual);
        let _ = writeln!(out, "# sigma2_total={}", c.sigma2_total);
        let _ = writeln!(out, "# lyapunov={}", c.lyapunov);
        let _ = writeln!(out, "# regime={}", self.regime.regime.letter());
        let _ = writeln!(out, "# f0={}", self.regime.f0);
        if let Some(clt) = &self.clt_check {
            let _ = writeln!(out, "# clt_sup_norm_gap={}", clt.sup_norm_gap);
            let _ = writeln!(out, "# clt_n_bins={}", clt.n_bins);
        }
        let _ = writeln!(out, "# seed={}", self.provenance.seed);
        let _ = writeln!(out, "# git_describe={}", self.provenance.git_describe);
        if let Some(t) = self.provenance.wall_time {
            let _ = writeln!(out, "# wall_time={t}");
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        match format {
            ReportFormat::Csv => Ok(self.to_csv()),
            ReportFormat::Json => self.to_json(),
        }
    }
}

pub fn emit_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = report.render(format)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
