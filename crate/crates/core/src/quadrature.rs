//! Gauss–Legendre quadrature: a globally adaptive bisection integrator and a
//! fixed composite rule used as an independent cross-check.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GL_POINTS: usize = 20;

/// Tolerances for the adaptive integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSettings {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let s = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) || self.max_subdivisions < 1 {
            return Err(Error::domain(format!(
                "quadrature settings need rel_tol > 0, abs_tol > 0, max_subdivisions >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// Same settings with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), p0 = P_{n-1}(x)
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_POINTS))
}

#[inline]
fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(&t, &w)| w * f(mid + half * t))
        .sum::<f64>()
        * half
}

/// One 20-point Gauss–Legendre panel over `[a, b]`.
pub fn gauss20<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    gl_panel(&f, a, b)
}

struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    error: f64,
}

impl Panel {
    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn make_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Panel {
    let m = 0.5 * (a + b);
    let left = gl_panel(f, a, m);
    let right = gl_panel(f, m, b);
    Panel {
        a,
        b,
        left,
        right,
        error: (whole - left - right).abs(),
    }
}

/// Globally adaptive integration of `f` over `[points[0], points[last]]`,
/// with the interior points used as initial break points. Points must be
/// sorted; duplicate points are skipped.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    settings: &QuadratureSettings,
) -> Result<Estimate> {
    settings.validate()?;
    if points.len() < 2 {
        return Err(Error::domain("integration needs at least two points"));
    }
    let mut heap = BinaryHeap::new();
    let mut finished: Vec<Panel> = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            if b < a {
                return Err(Error::domain("integration points must be sorted"));
            }
            continue;
        }
        let whole = gl_panel(&f, a, b);
        heap.push(make_panel(&f, a, b, whole));
    }
    let mut splits = 0usize;
    loop {
        let (value, error) = heap
            .iter()
            .chain(finished.iter())
            .fold((0.0, 0.0), |(v, e), p| (v + p.value(), e + p.error));
        if !value.is_finite() {
            return Err(Error::domain("integrand produced a non-finite value"));
        }
        let target = settings.abs_tol.max(settings.rel_tol * value.abs());
        if error <= target || heap.is_empty() {
            return Ok(Estimate {
                value,
                error,
                subdivisions: splits,
            });
        }
        if splits >= settings.max_subdivisions {
            return Err(Error::Convergence {
                error_estimate: error,
                subdivisions: splits,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let m = 0.5 * (worst.a + worst.b);
        // Panel below representable resolution: keep its estimate as final.
        if m <= worst.a || m >= worst.b || (worst.b - worst.a) < 1e-15 * worst.a.abs().max(worst.b.abs()) {
            finished.push(worst);
            continue;
        }
        heap.push(make_panel(&f, worst.a, m, worst.left));
        heap.push(make_panel(&f, m, worst.b, worst.right));
        splits += 1;
    }
}

/// Composite Gauss–Legendre rule with `panels` equal panels per break-point
/// interval and `order` nodes per panel. Non-adaptive.
pub fn fixed_composite<F: Fn(f64) -> f64>(f: F, points: &[f64], panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let mut total = 0.0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let s: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&t, &wt)| wt * f(mid + 0.5 * h * t))
                .sum();
            total += 0.5 * h * s;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(20);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // degree 38 monomial
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(38)).sum();
        assert!((v - 2.0 / 39.0).abs() < 1e-14);
        let (x5, w5) = gauss_legendre(5);
        assert!((x5[2]).abs() < 1e-15);
        assert!((w5[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_sharp_peak() {
        let s = QuadratureSettings::default();
        let eps = 1e-4_f64;
        let est = integrate(|x| eps / (x * x + eps * eps), &[-1.0, 1.0], &s).unwrap();
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((est.value - exact).abs() < 1e-9 * exact);
        assert!(est.subdivisions > 0);
    }

    #[test]
    fn convergence_error_reports_estimate() {
        let s = QuadratureSettings::new(1e-14, 1e-300, 3).unwrap();
        match integrate(|x: f64| x.abs().sqrt().recip(), &[1e-300, 1.0], &s) {
            Err(Error::Convergence { error_estimate, subdivisions }) => {
                assert!(error_estimate > 0.0);
                assert_eq!(subdivisions, 3);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_settings_rejected() {
        assert!(QuadratureSettings::new(0.0, 1e-14, 10).is_err());
        assert!(QuadratureSettings::new(1e-10, 1e-14, 0).is_err());
    }

    #[test]
    fn fixed_rule_matches_adaptive_on_smooth_integrand() {
        let f = |x: f64| (-x * x).exp() * x.cos();
        let a = integrate(f, &[0.0, 1.0, 3.0], &QuadratureSettings::default()).unwrap();
        let b = fixed_composite(f, &[0.0, 1.0, 3.0], 8, 16);
        assert!((a.value - b).abs() < 1e-12);
    }
}
