//! The tilted spacing law with density proportional to
//! `exp(-β/u - θu)` on `[0, 1]`, where `θ = λ + kF` is the total tilt of
//! spacing `k`.
//!
//! All integrals are taken against `exp(-(s(u) - s_min))` with
//! `s(u) = θu + β/u`, so nothing underflows even when the normalizer itself
//! is far below the smallest double. The excess `s(u) - s_min` has closed
//! forms free of cancellation:
//!
//! * interior mode `u₀ = √(β/θ) < 1`: `θ (u - u₀)² / u`
//! * mode pinned at 1 (`θ ≤ β`): `(1 - u)(β/u - θ)`

use std::sync::OnceLock;

use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::{gauss20, integrate, QuadratureSettings};

/// Integration is restricted to where `s - s_min` stays below this level.
const SUPPORT_LEVEL: f64 = 90.0;
const LEVEL_POINTS: [f64; 5] = [0.25, 1.0, 4.0, 16.0, 40.0];

/// Knots in the inverse-CDF tabulation.
pub const TABLE_KNOTS: usize = 4096;

/// Below this value of `θβ` the moment expansions are not trusted.
pub const ASYMPTOTIC_VALIDITY: f64 = 100.0;

/// `∫₀¹ x^α exp(-θx - β/x) dx`.
pub fn truncated_moment(alpha: u32, theta: f64, beta: f64, settings: &QuadratureSettings) -> Result<f64> {
    Ok(ln_truncated_moment(alpha, theta, beta, settings)?.exp())
}

/// Logarithm of [`truncated_moment`]; finite whenever the moment is positive.
pub fn ln_truncated_moment(alpha: u32, theta: f64, beta: f64, settings: &QuadratureSettings) -> Result<f64> {
    let shape = Shape::new(theta, beta)?;
    let a = alpha as i32;
    let scaled = shape.integrate(|x| x.powi(a), &[], settings)?;
    Ok(scaled.ln() - shape.s_min)
}

/// Geometry of `exp(-s)` on `[0, 1]`: its mode, minimum exponent, local width
/// and the effective support outside which the integrand is negligible.
#[derive(Clone, Debug)]
struct Shape {
    beta: f64,
    theta: f64,
    mode: f64,
    interior: bool,
    s_min: f64,
    width: f64,
    lo: f64,
    hi: f64,
    breaks: Vec<f64>,
}

impl Shape {
    fn new(theta: f64, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::domain(format!("beta must be non-negative and finite, got {beta}")));
        }
        if !theta.is_finite() {
            return Err(Error::domain(format!("theta must be finite, got {theta}")));
        }
        let interior = theta > beta;
        let (mode, s_min, width) = if interior {
            let mode = (beta / theta).sqrt();
            let s_min = 2.0 * (theta * beta).sqrt();
            let width = if beta > 0.0 {
                // 1/√s''(u₀) with s''(u₀) = 2 θ^{3/2} / √β
                (beta.sqrt() / (2.0 * theta.powf(1.5))).sqrt()
            } else {
                1.0 / theta
            };
            (mode, s_min, width.min(1.0))
        } else {
            let slope = beta - theta;
            let curv = (2.0 * beta).sqrt();
            let width = 1.0 / slope.max(curv).max(1.0);
            (1.0, theta + beta, width)
        };
        let mut shape = Self {
            beta,
            theta,
            mode,
            interior,
            s_min,
            width,
            lo: 0.0,
            hi: 1.0,
            breaks: Vec::new(),
        };
        shape.lo = shape.left_crossing(SUPPORT_LEVEL);
        shape.hi = shape.right_crossing(SUPPORT_LEVEL);
        let mut breaks = vec![shape.lo, shape.mode, shape.hi];
        for level in LEVEL_POINTS {
            breaks.push(shape.left_crossing(level));
            breaks.push(shape.right_crossing(level));
        }
        breaks.retain(|&x| x >= shape.lo && x <= shape.hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        shape.breaks = breaks;
        Ok(shape)
    }

    #[inline]
    fn excess(&self, x: f64) -> f64 {
        self.excess_offset(x, x - self.mode)
    }

    /// Excess at `x = mode + d`, with `d` supplied exactly so that narrow
    /// laws pinned at 1 do not lose resolution to rounding of `x`.
    #[inline]
    fn excess_offset(&self, x: f64, d: f64) -> f64 {
        if x <= 0.0 {
            return if self.beta > 0.0 { f64::INFINITY } else if self.interior { 0.0 } else { -self.theta };
        }
        if self.interior {
            self.theta * d * d / x
        } else {
            -d * (self.beta / x - self.theta)
        }
    }

    /// Point left of the mode where the excess equals `level` (0 if none).
    fn left_crossing(&self, level: f64) -> f64 {
        if self.excess(0.0) <= level {
            return 0.0;
        }
        let (mut a, mut b) = (0.0, self.mode);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.excess(m) > level {
                a = m;
            } else {
                b = m;
            }
        }
        b
    }

    /// Point right of the mode where the excess equals `level` (1 if none).
    fn right_crossing(&self, level: f64) -> f64 {
        if !self.interior || self.excess(1.0) <= level {
            return 1.0;
        }
        let (mut a, mut b) = (self.mode, 1.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.excess(m) > level {
                b = m;
            } else {
                a = m;
            }
        }
        a
    }

    /// `∫ g(x) exp(-excess(x)) dx` over the effective support, computed in
    /// the rescaled variable `t = (x - mode) / width`.
    fn integrate<G: Fn(f64) -> f64>(&self, g: G, extra: &[f64], settings: &QuadratureSettings) -> Result<f64> {
        if !(self.hi > self.lo) {
            // support narrower than one ulp: a point mass
            return Ok(g(self.mode) * self.width);
        }
        let mut pts: Vec<f64> = self
            .breaks
            .iter()
            .chain(extra.iter().filter(|&&x| x > self.lo && x < self.hi))
            .map(|&x| (x - self.mode) / self.width)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let (mode, w) = (self.mode, self.width);
        let est = integrate(
            |t| {
                let d = w * t;
                let x = mode + d;
                g(x) * (-self.excess_offset(x, d)).exp()
            },
            &pts,
            settings,
        )?;
        Ok(est.value * w)
    }
}

/// Piecewise cubic Hermite tabulation of the CDF on knots that cluster
/// around the mode.
#[derive(Clone, Debug)]
struct CdfTable {
    knots: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
    /// `guide[j]` is the cell holding `u = j / (guide.len() - 1)`.
    guide: Vec<u32>,
}

impl CdfTable {
    fn build(shape: &Shape, scaled_norm: f64) -> Self {
        let (m, w) = (shape.mode, shape.width);
        let t_lo = ((shape.lo - m) / w).asinh();
        let t_hi = ((shape.hi - m) / w).asinh();
        let n = TABLE_KNOTS;
        let mut knots: Vec<f64> = (0..n)
            .map(|i| {
                let t = t_lo + (t_hi - t_lo) * i as f64 / (n - 1) as f64;
                m + w * t.sinh()
            })
            .collect();
        knots[0] = shape.lo;
        knots[n - 1] = shape.hi;
        for i in 1..n {
            if knots[i] < knots[i - 1] {
                knots[i] = knots[i - 1];
            }
        }
        let density = |x: f64| (-shape.excess(x)).exp() / scaled_norm;
        let mut cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        cdf.push(0.0);
        for i in 1..n {
            acc += gauss20(density, knots[i - 1], knots[i]);
            cdf.push(acc);
        }
        let total = acc;
        for c in &mut cdf {
            *c /= total;
        }
        let pdf = knots.iter().map(|&x| density(x) / total).collect();
        let guide = (0..=n)
            .map(|j| Self::search(&cdf, j as f64 / n as f64) as u32)
            .collect();
        Self { knots, cdf, pdf, guide }
    }

    fn search(cdf: &[f64], u: f64) -> usize {
        cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1) - 1
    }

    fn cell(&self, i: usize, s: f64) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.pdf[i] * h, self.pdf[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * f0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * f1 + (s3 - s2) * d1
    }

    fn cell_slope(&self, i: usize, s: f64) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.pdf[i] * h, self.pdf[i + 1] * h);
        let s2 = s * s;
        (6.0 * s2 - 6.0 * s) * f0 + (3.0 * s2 - 4.0 * s + 1.0) * d0 + (-6.0 * s2 + 6.0 * s) * f1 + (3.0 * s2 - 2.0 * s) * d1
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= self.knots[0] {
            return 0.0;
        }
        if x >= self.knots[self.knots.len() - 1] {
            return 1.0;
        }
        let i = self.knots.partition_point(|&k| k <= x) - 1;
        let h = self.knots[i + 1] - self.knots[i];
        if h <= 0.0 {
            return self.cdf[i];
        }
        self.cell(i, (x - self.knots[i]) / h)
    }

    fn invert(&self, u: f64) -> f64 {
        let g = self.guide.len() - 1;
        let j = ((u * g as f64) as usize).min(g);
        let (a, b) = (self.guide[j] as usize, self.guide[(j + 1).min(g)] as usize);
        let i = a + Self::search(&self.cdf[a..=b + 1], u);
        let h = self.knots[i + 1] - self.knots[i];
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        if h <= 0.0 || c1 <= c0 {
            return self.knots[i];
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut s = ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
        for _ in 0..50 {
            let r = self.cell(i, s) - u;
            if r == 0.0 {
                break;
            }
            if r > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let d = self.cell_slope(i, s);
            let mut next = if d > 0.0 { s - r / d } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            // rounding in the residual near u = 1 keeps steps from shrinking further
            if (next - s).abs() < 1e-13 {
                s = next;
                break;
            }
            s = next;
        }
        self.knots[i] + s * h
    }
}

/// One tilted spacing law: density `exp(-β/u - θu) / c(θ, β)` on `[0, 1]`.
///
/// Immutable after construction; the sampling table is built once on first
/// use and shared between threads.
#[derive(Debug)]
pub struct TiltedSpacingDist {
    beta: f64,
    theta: f64,
    shape: Shape,
    /// `∫ exp(-(s - s_min))`; the normalizer is `scaled_norm · exp(-s_min)`.
    scaled_norm: f64,
    settings: QuadratureSettings,
    table: OnceLock<CdfTable>,
}

impl Clone for TiltedSpacingDist {
    fn clone(&self) -> Self {
        Self {
            beta: self.beta,
            theta: self.theta,
            shape: self.shape.clone(),
            scaled_norm: self.scaled_norm,
            settings: self.settings,
            table: self.table.clone(),
        }
    }
}

impl TiltedSpacingDist {
    pub fn new(beta: f64, theta: f64) -> Result<Self> {
        Self::with_settings(beta, theta, QuadratureSettings::default())
    }

    pub fn with_settings(beta: f64, theta: f64, settings: QuadratureSettings) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        settings.validate()?;
        let shape = Shape::new(theta, beta)?;
        let scaled_norm = shape.integrate(|_| 1.0, &[], &settings)?;
        if !(scaled_norm > 0.0 && scaled_norm.is_finite()) {
            return Err(Error::domain(format!("normalizer degenerate for theta={theta}, beta={beta}")));
        }
        Ok(Self {
            beta,
            theta,
            shape,
            scaled_norm,
            settings,
            table: OnceLock::new(),
        })
    }

    /// The law of spacing `k` at tilt `lambda` under force `force`.
    pub fn for_spacing(beta: f64, lambda: f64, force: f64, k: usize) -> Result<Self> {
        Self::new(beta, lambda + k as f64 * force)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Argmax of the density on `(0, 1]`: `√(β/θ)` when that lies inside the
    /// interval, otherwise the right end.
    pub fn mode(&self) -> f64 {
        self.shape.mode
    }

    pub fn ln_normalizer(&self) -> f64 {
        self.scaled_norm.ln() - self.shape.s_min
    }

    /// `c(θ, β)`; may underflow to zero for very large tilts.
    pub fn normalizer(&self) -> f64 {
        self.ln_normalizer().exp()
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::domain(format!("pdf argument must lie in (0, 1], got {x}")));
        }
        Ok((-self.shape.excess(x)).exp() / self.scaled_norm)
    }

    /// `E[g(X)]` by quadrature, with optional extra break points.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G, extra: &[f64]) -> Result<f64> {
        Ok(self.shape.integrate(g, extra, &self.settings)? / self.scaled_norm)
    }

    pub fn mean_exact(&self) -> Result<f64> {
        self.expect(|x| x, &[])
    }

    pub fn var_exact(&self) -> Result<f64> {
        let m = self.mean_exact()?;
        self.expect(|x| (x - m) * (x - m), &[m])
    }

    pub fn abs_central_third_exact(&self) -> Result<f64> {
        let m = self.mean_exact()?;
        self.expect(|x| (x - m).abs().powi(3), &[m])
    }

    /// Whether `θβ` is large enough for the moment expansions.
    pub fn asymptotics_trusted(&self) -> bool {
        self.theta * self.beta >= ASYMPTOTIC_VALIDITY
    }

    fn require_positive_tilt(&self) -> Result<()> {
        if self.theta > 0.0 {
            Ok(())
        } else {
            Err(Error::Regime(format!(
                "moment expansion needs theta > 0, got {}; use the exact moments",
                self.theta
            )))
        }
    }

    /// `√(β/θ) + 3/(4θ)`.
    pub fn mean_asymptotic(&self) -> Result<f64> {
        self.require_positive_tilt()?;
        Ok((self.beta / self.theta).sqrt() + 0.75 / self.theta)
    }

    /// `√β / (2 θ^{3/2})`.
    pub fn var_asymptotic(&self) -> Result<f64> {
        self.require_positive_tilt()?;
        Ok(self.beta.sqrt() / (2.0 * self.theta.powf(1.5)))
    }

    /// CDF by direct quadrature of the density.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if x <= self.shape.lo {
            return Ok(0.0);
        }
        if x >= 1.0 {
            return Ok(1.0);
        }
        let upper = x.min(self.shape.hi);
        let mut pts: Vec<f64> = self.shape.breaks.iter().copied().filter(|&p| p < upper).collect();
        pts.push(upper);
        let (mode, w) = (self.shape.mode, self.shape.width);
        let t_pts: Vec<f64> = pts.iter().map(|&p| (p - mode) / w).collect();
        let est = integrate(|t| (-self.shape.excess(mode + w * t)).exp(), &t_pts, &self.settings)?;
        Ok((est.value * w / self.scaled_norm).clamp(0.0, 1.0))
    }

    fn table(&self) -> &CdfTable {
        self.table.get_or_init(|| CdfTable::build(&self.shape, self.scaled_norm))
    }

    /// Forces construction of the sampling table.
    pub fn prepare_sampling(&self) {
        let _ = self.table();
    }

    /// CDF from the sampling table.
    pub fn tabulated_cdf(&self, x: f64) -> f64 {
        self.table().eval(x)
    }

    /// Inverse of [`Self::tabulated_cdf`].
    pub fn quantile(&self, u: f64) -> f64 {
        self.table().invert(u)
    }

    /// One draw by inverse-CDF on the tabulation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.sample(Open01);
        let x = self.quantile(u);
        x.clamp(f64::MIN_POSITIVE, 1.0)
    }
}
