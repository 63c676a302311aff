//! Closed-form large-`N` predictions for the conditional mean and variance
//! of each spacing, by force regime.

use serde::{Deserialize, Serialize};

use crate::calibration::{classify_regime, solve_lambda, solve_lambda0, ModelParams, Regime, RegimeLabel};
use crate::error::{Error, Result};

/// Constant applied to variance orders that come without a constant:
/// an empirical variance passes when it is at most this multiple of the order.
pub const VARIANCE_ORDER_BOUND: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorOrder {
    /// `O(F²/N²) + O(log N/√N)` relative
    WeakForce,
    /// `O(log N/√N)` relative
    LogOverRootN,
    /// `O(N^{-2/3})` absolute
    NMinusTwoThirds,
    /// `O(1/√N)` absolute
    OneOverRootN,
    /// `O(log N/(kN)^{3/4})` absolute
    LogOverKNThreeQuarters,
    /// `O(F^{-2/3})` absolute
    FMinusTwoThirds,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacingPrediction {
    pub k: usize,
    /// Predicted `E{X_k | ΣX = 1}`.
    pub mean: f64,
    /// Predicted variance: the asymptotic value in regimes (a) and (b), the
    /// order of magnitude (constant one) elsewhere.
    pub variance: f64,
    /// True when `variance` is only an order of magnitude.
    pub variance_is_order: bool,
    pub mean_error_order: ErrorOrder,
    pub regime: RegimeLabel,
}

/// Spatial modulation `a_k = √(1 + (k/N - 1/2)F₀/β + F₀²/(16β²))`, so the
/// mean spacing `1/(a_k N)` shrinks away from the wall and `Σ 1/(a_k N) → 1`.
pub fn a_coefficient(k: usize, n: usize, f0: f64, beta: f64) -> Result<f64> {
    if k < 1 || k > n {
        return Err(Error::Parameter(format!("spacing index {k} outside 1..={n}")));
    }
    if !(f0 >= 0.0) || f0 >= 4.0 * beta {
        return Err(Error::Regime(format!(
            "a_k needs 0 <= F0 < 4 beta (F0={f0}, beta={beta})"
        )));
    }
    let r = k as f64 / n as f64 - 0.5;
    Ok((1.0 + r * f0 / beta + f0 * f0 / (16.0 * beta * beta)).sqrt())
}

/// Closed-form prediction for spacing `k`.
///
/// `lambda0` is required in regime (d). In the critical regime `lambda`
/// must be the calibrated tilt: its ratio to `βN` stands in for the
/// unspecified `Θ(N)` term. Regime (e) has predictions for `k = 1` only.
pub fn predict_spacing(
    params: &ModelParams,
    k: usize,
    label: &RegimeLabel,
    lambda0: Option<f64>,
    lambda: Option<f64>,
) -> Result<SpacingPrediction> {
    params.validate()?;
    let n = params.n;
    if k < 1 || k > n {
        return Err(Error::Parameter(format!("spacing index {k} outside 1..={n}")));
    }
    let (nf, kf, beta, force) = (n as f64, k as f64, params.beta, params.force);
    let f0 = params.f0();
    let pred = |mean: f64, variance: f64, variance_is_order: bool, order: ErrorOrder| SpacingPrediction {
        k,
        mean,
        variance,
        variance_is_order,
        mean_error_order: order,
        regime: *label,
    };
    Ok(match label.regime {
        Regime::SubLinear => pred(
            (1.0 - force / (2.0 * beta * nf) * (kf / nf - 0.5)) / nf,
            1.0 / (2.0 * beta * nf.powi(3)),
            false,
            ErrorOrder::WeakForce,
        ),
        Regime::LinearSub => {
            let a = a_coefficient(k, n, f0, beta)?;
            pred(
                1.0 / (a * nf),
                1.0 / (2.0 * beta * a.powi(3) * nf.powi(3)),
                false,
                ErrorOrder::LogOverRootN,
            )
        }
        Regime::Critical => {
            let lambda = lambda.ok_or_else(|| {
                Error::Parameter("critical regime needs the calibrated lambda".into())
            })?;
            let c = lambda / (beta * nf);
            pred(
                (1.0 / (4.0 * kf * nf + c * nf)).sqrt(),
                nf.powf(-1.5),
                true,
                ErrorOrder::NMinusTwoThirds,
            )
        }
        Regime::LinearSuper => {
            if k == 1 {
                pred(
                    1.0 - (4.0 * beta / f0).sqrt(),
                    nf.powf(-0.75),
                    true,
                    ErrorOrder::OneOverRootN,
                )
            } else {
                let l0 = lambda0.ok_or_else(|| Error::Parameter("regime (d) needs lambda0".into()))?;
                pred(
                    (beta / ((kf - 1.0) * f0 * nf + l0)).sqrt(),
                    (kf * nf).powf(-1.5),
                    true,
                    ErrorOrder::LogOverKNThreeQuarters,
                )
            }
        }
        Regime::SuperLinear => {
            if k != 1 {
                return Err(Error::Regime(format!(
                    "no closed form for spacing {k} when F >> N (only k = 1)"
                )));
            }
            pred(
                1.0 - (4.0 * beta * nf / force).sqrt(),
                force.powf(-1.5),
                true,
                ErrorOrder::FMinusTwoThirds,
            )
        }
    })
}

/// [`predict_spacing`] with the regime classified from `growth_hint` and the
/// regime constants (`λ₀` in (d), the calibrated root in (c)) solved here.
pub fn predict_spacing_auto(params: &ModelParams, k: usize, growth_hint: Option<f64>) -> Result<SpacingPrediction> {
    let label = classify_regime(params, growth_hint);
    let lambda0 = match label.regime {
        Regime::LinearSuper if k >= 2 => Some(solve_lambda0(params.beta, label.f0)?),
        _ => None,
    };
    let lambda = match label.regime {
        Regime::Critical => Some(solve_lambda(params)?.lambda),
        _ => None,
    };
    predict_spacing(params, k, &label, lambda0, lambda)
}

/// Normal density `(2πσ²)^{-1/2} exp(-(x - 1 + shift)²/(2σ²))`, the local
/// limit approximation to the density of the tilted sum (`shift = 0`) or of
/// the sum with spacing `k` removed (`shift = E X_{k,λ}`).
pub fn gaussian_sum_density(x: f64, sigma2: f64, shift: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let d = x - 1.0 + shift;
    Ok((-d * d / (2.0 * sigma2)).exp() / (2.0 * std::f64::consts::PI * sigma2).sqrt())
}
