//! Calibration of the tilt `λ` so that the tilted spacing means sum to the
//! interval length, the supercritical constant `λ₀`, regime classification
//! and the variance and Lyapunov diagnostics of the tilted sum.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureSettings;
use crate::tilted::TiltedSpacingDist;

/// Ensemble of `n + 1` particles on `[0, 1]` (so `n` spacings) with
/// interaction strength `beta` and constant external force `force`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub beta: f64,
    pub force: f64,
}

impl ModelParams {
    pub fn new(n: usize, beta: f64, force: f64) -> Result<Self> {
        let p = Self { n, beta, force };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with force `f0 · n`.
    pub fn linear(n: usize, beta: f64, f0: f64) -> Result<Self> {
        Self::new(n, beta, f0 * n as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Parameter(format!("need at least two spacings, got n={}", self.n)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.force >= 0.0 && self.force.is_finite()) {
            return Err(Error::Parameter(format!("force must be non-negative, got {}", self.force)));
        }
        Ok(())
    }

    /// `F_cr = 4βN`.
    pub fn critical_force(&self) -> f64 {
        4.0 * self.beta * self.n as f64
    }

    /// `F / N`.
    pub fn f0(&self) -> f64 {
        self.force / self.n as f64
    }

    /// Tilt of spacing `k` at calibration parameter `lambda`.
    pub fn theta(&self, lambda: f64, k: usize) -> f64 {
        lambda + k as f64 * self.force
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// (a) `F = o(N)`
    SubLinear,
    /// (b) `F = F₀N` with `F₀ < 4β`
    LinearSub,
    /// (c) `F = 4βN`
    Critical,
    /// (d) `F = F₀N` with `F₀ > 4β`
    LinearSuper,
    /// (e) `F ≫ N`
    SuperLinear,
}

impl Regime {
    pub fn letter(&self) -> char {
        match self {
            Regime::SubLinear => 'a',
            Regime::LinearSub => 'b',
            Regime::Critical => 'c',
            Regime::LinearSuper => 'd',
            Regime::SuperLinear => 'e',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub regime: Regime,
    /// `F / N`.
    pub f0: f64,
}

/// Label the force regime from `F / (4βN)`.
///
/// The regimes are statements about how `F` grows with `N`, which a single
/// `N` cannot decide. `growth_hint` is the exponent `p` in `F ∝ N^p`; when
/// given it decides between sub-linear, linear and super-linear growth and
/// the ratio only splits the linear case.
pub fn classify_regime(params: &ModelParams, growth_hint: Option<f64>) -> RegimeLabel {
    let f0 = params.f0();
    let ratio = params.force / params.critical_force();
    let linear_split = |ratio: f64| {
        if (ratio - 1.0).abs() <= 1e-12 {
            Regime::Critical
        } else if ratio < 1.0 {
            Regime::LinearSub
        } else {
            Regime::LinearSuper
        }
    };
    let regime = match growth_hint {
        Some(p) if p < 1.0 => Regime::SubLinear,
        Some(p) if p > 1.0 => Regime::SuperLinear,
        Some(_) => linear_split(ratio),
        None => {
            if (ratio - 1.0).abs() <= 1e-12 {
                Regime::Critical
            } else if ratio < 0.1 {
                Regime::SubLinear
            } else if ratio < 1.0 {
                Regime::LinearSub
            } else if ratio <= 25.0 {
                Regime::LinearSuper
            } else {
                Regime::SuperLinear
            }
        }
    };
    RegimeLabel { regime, f0 }
}

/// Tilted spacing means at `lambda` for `k = 1..=n`, in index order.
pub fn spacing_means(lambda: f64, params: &ModelParams, settings: &QuadratureSettings) -> Result<Vec<f64>> {
    per_spacing(lambda, params, settings, |d| d.mean_exact())
}

fn per_spacing<G>(lambda: f64, params: &ModelParams, settings: &QuadratureSettings, g: G) -> Result<Vec<f64>>
where
    G: Fn(&TiltedSpacingDist) -> Result<f64> + Sync,
{
    params.validate()?;
    let eval = |k: usize| -> Result<f64> {
        let d = TiltedSpacingDist::with_settings(params.beta, params.theta(lambda, k), *settings)?;
        g(&d)
    };
    if params.force == 0.0 {
        // all spacings share one law
        let v = eval(1)?;
        return Ok(vec![v; params.n]);
    }
    // Collected in order and summed sequentially by callers so results do
    // not depend on thread scheduling.
    (1..=params.n).into_par_iter().map(eval).collect()
}

/// `Σ_k E X_{k,λ}`; strictly decreasing in `lambda`.
pub fn mean_sum(lambda: f64, params: &ModelParams) -> Result<f64> {
    mean_sum_with(lambda, params, &QuadratureSettings::default())
}

pub fn mean_sum_with(lambda: f64, params: &ModelParams, settings: &QuadratureSettings) -> Result<f64> {
    Ok(spacing_means(lambda, params, settings)?.iter().sum())
}

/// `σ_N² = Σ_k Var X_{k,λ}`.
pub fn sigma2_total(lambda: f64, params: &ModelParams) -> Result<f64> {
    sigma2_total_with(lambda, params, &QuadratureSettings::default())
}

pub fn sigma2_total_with(lambda: f64, params: &ModelParams, settings: &QuadratureSettings) -> Result<f64> {
    Ok(per_spacing(lambda, params, settings, |d| d.var_exact())?.iter().sum())
}

/// `L_N = Σ_k E|X_{k,λ} - m_{k,λ}|³ / σ_N³`.
pub fn lyapunov_ratio(lambda: f64, params: &ModelParams) -> Result<f64> {
    lyapunov_ratio_with(lambda, params, &QuadratureSettings::default())
}

pub fn lyapunov_ratio_with(lambda: f64, params: &ModelParams, settings: &QuadratureSettings) -> Result<f64> {
    let third: f64 = per_spacing(lambda, params, settings, |d| d.abs_central_third_exact())?
        .iter()
        .sum();
    let s2 = sigma2_total_with(lambda, params, settings)?;
    Ok(third / s2.powf(1.5))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub lambda: f64,
    /// `|Σ_k E X_{k,λ} - 1|` at the returned `lambda`.
    pub residual: f64,
    pub iterations: usize,
    pub sigma2_total: f64,
    pub lyapunov: f64,
}

const MAX_DOUBLINGS: usize = 200;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Root of a strictly decreasing `f`, bracketed by doubling outward from
/// `seed` and refined by Illinois false position with bisection steps.
pub(crate) fn decreasing_root<F>(f: F, seed: f64, step: f64, tol: f64) -> Result<Root>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut step = step.abs().max(1e-3);
    let (mut lo, mut hi) = (seed - step, seed + step);
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    let mut iterations = 2;
    let mut doublings = 0;
    while f_lo < 0.0 {
        if doublings >= MAX_DOUBLINGS {
            return Err(Error::Calibration(format!("no lower bracket after {MAX_DOUBLINGS} doublings")));
        }
        hi = lo;
        f_hi = f_lo;
        step *= 2.0;
        lo -= step;
        f_lo = f(lo)?;
        doublings += 1;
        iterations += 1;
    }
    while f_hi > 0.0 {
        if doublings >= MAX_DOUBLINGS {
            return Err(Error::Calibration(format!("no upper bracket after {MAX_DOUBLINGS} doublings")));
        }
        lo = hi;
        f_lo = f_hi;
        step *= 2.0;
        hi += step;
        f_hi = f(hi)?;
        doublings += 1;
        iterations += 1;
    }
    if f_lo.abs() <= tol {
        return Ok(Root { x: lo, residual: f_lo.abs(), iterations });
    }
    if f_hi.abs() <= tol {
        return Ok(Root { x: hi, residual: f_hi.abs(), iterations });
    }
    // f_lo > 0 > f_hi
    let mut side = 0i8;
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    for it in 0..400 {
        let mut x = if it % 8 == 7 {
            0.5 * (lo + hi)
        } else {
            (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        iterations += 1;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= tol {
            return Ok(Root { x, residual: fx.abs(), iterations });
        }
        if fx > 0.0 {
            lo = x;
            f_lo = fx;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            f_hi = fx;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            break;
        }
    }
    Ok(Root {
        x: best.0,
        residual: best.1.abs(),
        iterations,
    })
}

/// Residual target of the calibration root.
pub const CALIBRATION_TOL: f64 = 5e-10;

/// Unique `λ` with `Σ_k E X_{k,λ} = 1`, plus the variance and Lyapunov
/// diagnostics at that root.
pub fn solve_lambda(params: &ModelParams) -> Result<CalibrationResult> {
    solve_lambda_with(params, &QuadratureSettings::default())
}

pub fn solve_lambda_with(params: &ModelParams, settings: &QuadratureSettings) -> Result<CalibrationResult> {
    params.validate()?;
    let label = classify_regime(params, None);
    let seed = lambda_asymptotic(params, &label)?;
    let step = (0.05 * seed.abs()).max(params.beta * params.n as f64).max(1.0);
    let root = decreasing_root(|l| Ok(mean_sum_with(l, params, settings)? - 1.0), seed, step, CALIBRATION_TOL)?;
    if root.residual > 1e-9 {
        return Err(Error::Calibration(format!(
            "residual {:e} above 1e-9 at lambda={}",
            root.residual, root.x
        )));
    }
    let sigma2 = sigma2_total_with(root.x, params, settings)?;
    let lyapunov = lyapunov_ratio_with(root.x, params, settings)?;
    Ok(CalibrationResult {
        lambda: root.x,
        residual: root.residual,
        iterations: root.iterations,
        sigma2_total: sigma2,
        lyapunov,
    })
}

/// Principal-term approximation of the calibrated `λ` for the given regime.
/// Used to seed the root bracket and for reporting.
pub fn lambda_asymptotic(params: &ModelParams, label: &RegimeLabel) -> Result<f64> {
    params.validate()?;
    let (n, beta, force) = (params.n as f64, params.beta, params.force);
    let reduced = beta * n * n * (1.0 - force / (4.0 * beta * n)).powi(2);
    let f0 = params.f0();
    Ok(match label.regime {
        Regime::SubLinear => reduced * (1.0 + 1.0 / n),
        Regime::LinearSub => reduced,
        Regime::Critical => 0.5 * beta * n,
        Regime::LinearSuper | Regime::SuperLinear => {
            if f0 <= 4.0 * beta {
                reduced
            } else if f0 > 1e4 * beta {
                -force - (f0 / (4.0 * beta)).sqrt()
            } else {
                -force + solve_lambda0(beta, f0)?
            }
        }
    })
}

/// Supercritical constant `λ₀(β, F₀)`: the tilt at which the law of the
/// spacing next to the right wall has mean `1 - √(4β/F₀)`, i.e.
///
/// `∫₀¹ x e^{-λ₀x-β/x} dx / ∫₀¹ e^{-λ₀x-β/x} dx = 1 - √(4β/F₀)`.
///
/// With this sign the calibrated tilt satisfies `λ + F → λ₀`, and the
/// spacing means for `k ≥ 2` are `√(β/((k-1)F₀N + λ₀))`. `λ₀` is negative
/// once the target mean exceeds the untilted mean, and `λ₀ ≈ -√(F₀/(4β))`
/// as `F₀ → ∞`.
pub fn solve_lambda0(beta: f64, f0: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::domain(format!("beta must be positive, got {beta}")));
    }
    if !(f0 > 4.0 * beta) {
        return Err(Error::domain(format!(
            "critical or subcritical force has no lambda0 (F0={f0} <= 4 beta={})",
            4.0 * beta
        )));
    }
    let target = 1.0 - (4.0 * beta / f0).sqrt();
    let settings = QuadratureSettings::default();
    let root = decreasing_root(
        |theta| Ok(TiltedSpacingDist::with_settings(beta, theta, settings)?.mean_exact()? - target),
        0.0,
        1.0,
        1e-12,
    )?;
    if root.residual > 1e-10 {
        return Err(Error::Calibration(format!("lambda0 residual {:e} above 1e-10", root.residual)));
    }
    Ok(root.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1, 1.0, 0.0).is_err());
        assert!(ModelParams::new(5, 0.0, 0.0).is_err());
        assert!(ModelParams::new(5, 1.0, -1.0).is_err());
        assert!(ModelParams::new(2, 1.0, 0.0).is_ok());
    }

    #[test]
    fn classification() {
        let p = |f: f64| ModelParams::new(500, 1.0, f).unwrap();
        assert_eq!(classify_regime(&p(0.0), None).regime, Regime::SubLinear);
        let b = classify_regime(&p(1000.0), None);
        assert_eq!(b.regime, Regime::LinearSub);
        assert_eq!(b.f0, 2.0);
        assert_eq!(classify_regime(&p(2000.0), None).regime, Regime::Critical);
        assert_eq!(classify_regime(&p(4000.0), None).regime, Regime::LinearSuper);
        assert_eq!(classify_regime(&p(1e6), None).regime, Regime::SuperLinear);
        // a fixed force that grows like sqrt(N) is sub-linear whatever its size
        assert_eq!(classify_regime(&p(1000.0), Some(0.5)).regime, Regime::SubLinear);
        assert_eq!(classify_regime(&p(40.0), Some(1.0)).regime, Regime::LinearSub);
        assert_eq!(classify_regime(&p(4000.0), Some(2.0)).regime, Regime::SuperLinear);
    }

    #[test]
    fn mean_sum_limits() {
        let p = ModelParams::new(10, 1.0, 3.0).unwrap();
        assert!(mean_sum(1e9, &p).unwrap() < 1e-3);
        assert!(mean_sum(-1e9, &p).unwrap() > 10.0 * (1.0 - 1e-6));
        let a = mean_sum(10.0, &p).unwrap();
        let b = mean_sum(11.0, &p).unwrap();
        assert!(b < a);
    }

    #[test]
    fn two_identical_terms() {
        let p = ModelParams::new(2, 1.0, 0.0).unwrap();
        let m = TiltedSpacingDist::new(1.0, 0.0).unwrap().mean_exact().unwrap();
        assert!((mean_sum(0.0, &p).unwrap() - 2.0 * m).abs() < 1e-14);
        let v = TiltedSpacingDist::new(1.0, 3.0).unwrap().var_exact().unwrap();
        assert!((sigma2_total(3.0, &p).unwrap() - 2.0 * v).abs() < 1e-14);
    }

    #[test]
    fn lambda_asymptotic_principal_terms() {
        let p = ModelParams::new(100, 1.0, 0.0).unwrap();
        let l = lambda_asymptotic(&p, &classify_regime(&p, None)).unwrap();
        assert!((l - 10100.0).abs() < 1e-9);
        let p = ModelParams::new(500, 1.0, 1000.0).unwrap();
        let l = lambda_asymptotic(&p, &classify_regime(&p, None)).unwrap();
        assert!((l - 62500.0).abs() < 1e-9);
        let p = ModelParams::new(100, 1.0, 1e8).unwrap();
        let l = lambda_asymptotic(&p, &classify_regime(&p, None)).unwrap();
        assert!((l - (-1e8 - (1e6f64 / 4.0).sqrt())).abs() < 1e-6);
    }

    #[test]
    fn lambda0_domain_and_order() {
        assert!(solve_lambda0(1.0, 4.0).is_err());
        assert!(solve_lambda0(1.0, 3.0).is_err());
        let l16 = solve_lambda0(1.0, 16.0).unwrap();
        let m = TiltedSpacingDist::new(1.0, l16).unwrap().mean_exact().unwrap();
        assert!((m - 0.5).abs() < 1e-10);
        let l25 = solve_lambda0(1.0, 25.0).unwrap();
        // mean target grows with F0, so the tilt decreases
        assert!(l25 < l16);
    }

    #[test]
    fn small_system_root() {
        let p = ModelParams::new(2, 1.0, 0.0).unwrap();
        let r = solve_lambda(&p).unwrap();
        assert!(r.residual <= 1e-9);
        assert!(r.sigma2_total > 0.0);
        let m = TiltedSpacingDist::new(1.0, r.lambda).unwrap().mean_exact().unwrap();
        assert!((m - 0.5).abs() < 1e-9);
        let above = mean_sum(r.lambda + 1.0, &p).unwrap();
        let below = mean_sum(r.lambda - 1.0, &p).unwrap();
        assert!(above < 1.0 && below > 1.0);
    }
}
