//! Reference routines shared by the integration tests. Deliberately built on
//! rules the library does not use, so agreement is evidence.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Tanh-sinh quadrature of `f(t, 1 - t)` over `(0, 1)`; the complement is
/// passed exactly so endpoint layers keep full precision.
pub fn tanh_sinh<F: Fn(f64, f64) -> f64>(f: F, rel_tol: f64) -> f64 {
    let node = |s: f64| -> (f64, f64, f64) {
        let u = FRAC_PI_2 * s.sinh();
        let t = 1.0 / (1.0 + (-2.0 * u).exp());
        let c = 1.0 / (1.0 + (2.0 * u).exp());
        let w = 0.5 * FRAC_PI_2 * s.cosh() / u.cosh().powi(2);
        (t, c, w)
    };
    let term = |s: f64| {
        let (t, c, w) = node(s);
        if t <= 0.0 || c <= 0.0 || w == 0.0 {
            0.0
        } else {
            w * f(t, c)
        }
    };
    let smax = 4.0;
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while k as f64 * h <= smax {
        let s = k as f64 * h;
        sum += term(s) + term(-s);
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= smax {
            let s = k as f64 * h;
            sum += term(s) + term(-s);
            k += 2;
        }
        let cur = sum * h;
        if (cur - prev).abs() <= rel_tol * cur.abs() {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// `∫₀^∞ x^{α-1} e^{-λx-β/x} dx · e^{2√(λβ)}` through `x = x₀ t/(1-t)`.
pub fn infinite_moment_scaled(alpha: i32, lambda: f64, beta: f64) -> f64 {
    let x0 = (beta / lambda).sqrt();
    let z = 2.0 * (lambda * beta).sqrt();
    tanh_sinh(
        |t, c| {
            let x = x0 * t / c;
            let e = z - lambda * x - beta / x;
            x.powi(alpha - 1) * e.exp() * x0 / (c * c)
        },
        1e-13,
    )
}

/// `∫₀¹ x^α e^{-θx-β/x} dx`.
pub fn truncated_moment_ref(alpha: i32, theta: f64, beta: f64) -> f64 {
    tanh_sinh(
        |x, _| {
            let e = -theta * x - beta / x;
            x.powi(alpha) * e.exp()
        },
        1e-13,
    )
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Mean and standard error of an i.i.d. sample.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
