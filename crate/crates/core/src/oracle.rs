//! Brute-force conditional spacing moments for two or three spacings.
//!
//! Two routes over the same integrand: nested adaptive quadrature over the
//! simplex, and a fixed tensor Gauss grid on the unit square. A third route
//! builds the conditional density of one spacing from tilted densities by
//! convolution, which must not depend on the tilt.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::calibration::ModelParams;
use crate::error::{Error, Result};
use crate::quadrature::{fixed_composite, integrate, QuadratureSettings};
use crate::tilted::TiltedSpacingDist;

/// Coordinates below this contribute nothing: `e^{-β/x}` has underflowed.
pub const BOUNDARY_CUTOFF: f64 = 1e-12;

const TENSOR_PANELS: usize = 48;
const TENSOR_ORDER: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub k: usize,
    pub power: u32,
    pub value: f64,
    pub error_estimate: f64,
}

fn oracle_settings() -> QuadratureSettings {
    QuadratureSettings {
        rel_tol: 1e-12,
        abs_tol: 1e-200,
        max_subdivisions: 4000,
    }
}

fn check(params: &ModelParams, k: usize, power: u32) -> Result<()> {
    params.validate()?;
    if !(2..=3).contains(&params.n) {
        return Err(Error::Parameter(format!("oracle needs n in {{2, 3}}, got {}", params.n)));
    }
    if k < 1 || k > params.n {
        return Err(Error::Parameter(format!("spacing index {k} outside 1..={}", params.n)));
    }
    if !(1..=2).contains(&power) {
        return Err(Error::Parameter(format!("moment power must be 1 or 2, got {power}")));
    }
    Ok(())
}

/// `-U` in spacing coordinates, `k`-th spacing weighted by `kF`.
fn neg_potential(x: &[f64], params: &ModelParams) -> f64 {
    if x.iter().any(|&v| v < BOUNDARY_CUTOFF) {
        return f64::NEG_INFINITY;
    }
    x.iter()
        .enumerate()
        .map(|(i, &v)| -params.beta / v - params.force * (i + 1) as f64 * v)
        .sum()
}

fn spacings_from_free(free: &[f64]) -> [f64; 3] {
    let mut x = [0.0; 3];
    x[..free.len()].copy_from_slice(free);
    x[free.len()] = 1.0 - free.iter().sum::<f64>();
    x
}

/// Grid estimate of `max(-U)`, used to keep the weights in range.
fn log_weight_peak(params: &ModelParams) -> f64 {
    const M: usize = 400;
    let mut best = f64::NEG_INFINITY;
    if params.n == 2 {
        for i in 1..M {
            let u = i as f64 / M as f64;
            best = best.max(neg_potential(&[u, 1.0 - u], params));
        }
    } else {
        for i in 1..M {
            for j in 1..M - i {
                let (u, v) = (i as f64 / M as f64, j as f64 / M as f64);
                best = best.max(neg_potential(&[u, v, 1.0 - u - v], params));
            }
        }
    }
    best
}

fn weight(free: &[f64], params: &ModelParams, peak: f64) -> (f64, [f64; 3]) {
    let x = spacings_from_free(free);
    let lw = neg_potential(&x[..params.n], params);
    (if lw.is_finite() { (lw - peak).exp() } else { 0.0 }, x)
}

fn split(a: f64, b: f64) -> Vec<f64> {
    (0..=8).map(|i| a + (b - a) * i as f64 / 8.0).collect()
}

/// `E[x_k^power | Σ x = 1]` by nested adaptive quadrature over the simplex.
pub fn conditional_moment_bruteforce(params: &ModelParams, k: usize, power: u32) -> Result<OracleResult> {
    check(params, k, power)?;
    let peak = log_weight_peak(params);
    let settings = oracle_settings();
    let p = power as i32;
    let mut total = [0.0; 2];
    let mut err = [0.0; 2];
    for (slot, moment) in [false, true].into_iter().enumerate() {
        let g = |x: &[f64; 3]| if moment { x[k - 1].powi(p) } else { 1.0 };
        let est = if params.n == 2 {
            integrate(
                |u| {
                    let (w, x) = weight(&[u], params, peak);
                    w * g(&x)
                },
                &split(0.0, 1.0),
                &settings,
            )?
        } else {
            let inner_err = Cell::new(0.0f64);
            let inner_fail = Cell::new(None);
            let outer = integrate(
                |u| {
                    if u >= 1.0 - BOUNDARY_CUTOFF {
                        return 0.0;
                    }
                    match integrate(
                        |v| {
                            let (w, x) = weight(&[u, v], params, peak);
                            w * g(&x)
                        },
                        &split(0.0, 1.0 - u),
                        &settings,
                    ) {
                        Ok(e) => {
                            inner_err.set(inner_err.get().max(e.error));
                            e.value
                        }
                        Err(e) => {
                            inner_fail.set(Some(e));
                            0.0
                        }
                    }
                },
                &split(0.0, 1.0),
                &settings,
            )?;
            if let Some(e) = inner_fail.take() {
                return Err(e);
            }
            let mut out = outer;
            // the outer interval has unit length
            out.error += inner_err.get();
            out
        };
        total[slot] = est.value;
        err[slot] = est.error;
    }
    let value = total[1] / total[0];
    let error_estimate = value.abs() * (err[0] / total[0] + err[1] / total[1].abs().max(f64::MIN_POSITIVE));
    Ok(OracleResult {
        k,
        power,
        value,
        error_estimate,
    })
}

/// Same moment on a fixed composite Gauss grid, the simplex mapped to the
/// unit square by `x₂ = (1 - x₁)s`.
pub fn conditional_moment_tensor(params: &ModelParams, k: usize, power: u32) -> Result<f64> {
    check(params, k, power)?;
    let peak = log_weight_peak(params);
    let p = power as i32;
    let pts = [0.0, 0.25, 0.5, 0.75, 1.0];
    let panels = TENSOR_PANELS / 4;
    let run = |moment: bool| -> f64 {
        let g = |x: &[f64; 3]| if moment { x[k - 1].powi(p) } else { 1.0 };
        if params.n == 2 {
            fixed_composite(
                |u| {
                    let (w, x) = weight(&[u], params, peak);
                    w * g(&x)
                },
                &pts,
                panels,
                TENSOR_ORDER,
            )
        } else {
            fixed_composite(
                |u| {
                    let r = 1.0 - u;
                    r * fixed_composite(
                        |s| {
                            let (w, x) = weight(&[u, r * s], params, peak);
                            w * g(&x)
                        },
                        &pts,
                        panels,
                        TENSOR_ORDER,
                    )
                },
                &pts,
                panels,
                TENSOR_ORDER,
            )
        }
    };
    Ok(run(true) / run(false))
}

fn density_or_zero(d: &TiltedSpacingDist, x: f64) -> f64 {
    if x <= 0.0 || x > 1.0 {
        0.0
    } else {
        d.pdf(x).unwrap_or(0.0)
    }
}

/// Conditional density of spacing `k` given `Σ x = 1`, built as
/// `f_k(x) · f_rest(1 - x)` from the tilted laws at `lambda` and normalized
/// on `(0, 1)`. `f_rest` is the density of the sum of the other spacings,
/// obtained by one convolution when `n = 3`.
pub fn conditional_density_convolution(
    params: &ModelParams,
    k: usize,
    x_grid: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let (unnorm, norm) = convolution_parts(params, k, lambda)?;
    x_grid
        .iter()
        .map(|&x| if x > 0.0 && x < 1.0 { unnorm(x).map(|v| v / norm) } else { Ok(0.0) })
        .collect()
}

/// `E[x_k^power | Σ x = 1]` from the convolution density.
pub fn conditional_moment_convolution(params: &ModelParams, k: usize, power: u32, lambda: f64) -> Result<f64> {
    check(params, k, power)?;
    let (unnorm, norm) = convolution_parts(params, k, lambda)?;
    let fail = Cell::new(None);
    let est = integrate(
        |x| match unnorm(x) {
            Ok(v) => v * x.powi(power as i32),
            Err(e) => {
                fail.set(Some(e));
                0.0
            }
        },
        &split(0.0, 1.0),
        &oracle_settings(),
    )?;
    if let Some(e) = fail.take() {
        return Err(e);
    }
    Ok(est.value / norm)
}

type Unnormalized<'a> = Box<dyn Fn(f64) -> Result<f64> + 'a>;

fn convolution_parts(params: &ModelParams, k: usize, lambda: f64) -> Result<(Unnormalized<'static>, f64)> {
    check(params, k, 1)?;
    let laws: Vec<TiltedSpacingDist> = (1..=params.n)
        .map(|j| TiltedSpacingDist::for_spacing(params.beta, lambda, params.force, j))
        .collect::<Result<_>>()?;
    let own = laws[k - 1].clone();
    let others: Vec<TiltedSpacingDist> = laws
        .into_iter()
        .enumerate()
        .filter(|&(j, _)| j != k - 1)
        .map(|(_, d)| d)
        .collect();
    let settings = oracle_settings();
    let rest = move |s: f64| -> Result<f64> {
        if s <= 0.0 {
            return Ok(0.0);
        }
        if others.len() == 1 {
            return Ok(density_or_zero(&others[0], s));
        }
        let (a, b) = (&others[0], &others[1]);
        let hi = s.min(1.0);
        let lo = (s - 1.0).max(0.0);
        Ok(integrate(
            |u| density_or_zero(a, u) * density_or_zero(b, s - u),
            &split(lo, hi),
            &settings,
        )?
        .value)
    };
    let unnorm: Unnormalized<'static> = Box::new(move |x: f64| Ok(density_or_zero(&own, x) * rest(1.0 - x)?));
    let fail = Cell::new(None);
    let norm = integrate(
        |x| match unnorm(x) {
            Ok(v) => v,
            Err(e) => {
                fail.set(Some(e));
                0.0
            }
        },
        &split(0.0, 1.0),
        &settings,
    )?
    .value;
    if let Some(e) = fail.take() {
        return Err(e);
    }
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::domain(format!("conditional density not normalizable at lambda={lambda}")));
    }
    Ok((unnorm, norm))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: usize, beta: f64, force: f64) -> ModelParams {
        ModelParams::new(n, beta, force).unwrap()
    }

    #[test]
    fn symmetric_pair() {
        let r = conditional_moment_bruteforce(&p(2, 1.0, 0.0), 1, 1).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        assert!(r.error_estimate <= 1e-8 * r.value.abs() + 1e-12);
    }

    #[test]
    fn three_spacings_sum_to_one() {
        let q = p(3, 1.0, 6.0);
        let s: f64 = (1..=3)
            .map(|k| conditional_moment_bruteforce(&q, k, 1).unwrap().value)
            .sum();
        assert!((s - 1.0).abs() < 1e-10, "{s}");
    }

    #[test]
    fn routes_agree() {
        for (n, beta, force) in [(2, 1.0, 4.0), (3, 1.0, 6.0), (3, 0.5, 12.0)] {
            let q = p(n, beta, force);
            for k in 1..=n {
                for power in [1, 2] {
                    let a = conditional_moment_bruteforce(&q, k, power).unwrap();
                    let b = conditional_moment_tensor(&q, k, power).unwrap();
                    assert!((a.value - b).abs() < 1e-8, "{n} {k} {power}: {} vs {b}", a.value);
                    assert!(a.error_estimate <= 1e-8 * a.value.abs() + 1e-12, "{a:?}");
                }
            }
        }
    }

    #[test]
    fn force_pushes_mass_to_first_spacing() {
        let r = conditional_moment_bruteforce(&p(2, 1.0, 4.0), 1, 1).unwrap();
        assert!(r.value > 0.5);
    }

    #[test]
    fn convolution_density_ignores_tilt() {
        let q = p(3, 1.0, 6.0);
        let grid: Vec<f64> = (1..40).map(|i| i as f64 / 40.0).collect();
        let a = conditional_density_convolution(&q, 2, &grid, 0.0).unwrap();
        let b = conditional_density_convolution(&q, 2, &grid, 9.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-7, "{x} vs {y}");
        }
    }

    #[test]
    fn convolution_moment_matches_bruteforce() {
        let q = p(2, 1.0, 4.0);
        let a = conditional_moment_bruteforce(&q, 1, 1).unwrap().value;
        let b = conditional_moment_convolution(&q, 1, 1, 0.0).unwrap();
        assert!((a - b).abs() < 1e-9);
        let q = p(3, 0.5, 12.0);
        let a = conditional_moment_bruteforce(&q, 3, 2).unwrap().value;
        let b = conditional_moment_convolution(&q, 3, 2, 4.5).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(conditional_moment_bruteforce(&p(4, 1.0, 0.0), 1, 1).is_err());
        assert!(conditional_moment_bruteforce(&p(2, 1.0, 0.0), 3, 1).is_err());
        assert!(conditional_moment_bruteforce(&p(2, 1.0, 0.0), 1, 3).is_err());
    }
}
