//! Moments of truncated standard normals and the TrueSkill v/w corrections.
//!
//! For a performance difference `d ~ N(μ, σ²)` with `t = μ/σ` and `ε` the
//! margin in σ units:
//!
//! * win (`d > ε`): posterior mean `μ + σ·v_win(t, ε)`, variance
//!   `σ²·(1 − w_win(t, ε))`;
//! * draw (`|d| ≤ ε`): the same with `v_draw`, `w_draw`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::OnceLock;

use super::normal::{mills_ratio, std_normal_cdf, std_normal_pdf};
use super::GaussianError;

/// Below this value of `t − ε` the win correction switches from the direct
/// φ/Φ quotient to the Mills-ratio continued fraction.
pub const TAIL_CROSSOVER: f64 = -6.0;

/// Additive correction to the mean for a win outcome: φ(t−ε)/Φ(t−ε).
pub fn v_win(t: f64, eps: f64) -> f64 {
    let x = t - eps;
    if x < TAIL_CROSSOVER {
        1.0 / mills_ratio(-x)
    } else {
        std_normal_pdf(x) / std_normal_cdf(x)
    }
}

/// Multiplicative variance shrink for a win outcome: v·(v + t − ε).
pub fn w_win(t: f64, eps: f64) -> f64 {
    let v = v_win(t, eps);
    v * (v + t - eps)
}

/// Additive correction to the mean for a draw outcome.
pub fn v_draw(t: f64, eps: f64) -> Result<f64, GaussianError> {
    draw_moments(t, eps).map(|(mean, _)| mean)
}

/// Multiplicative variance shrink for a draw outcome.
pub fn w_draw(t: f64, eps: f64) -> Result<f64, GaussianError> {
    draw_moments(t, eps).map(|(_, var)| 1.0 - var)
}

fn draw_moments(t: f64, eps: f64) -> Result<(f64, f64), GaussianError> {
    if eps.is_nan() || eps < 0.0 {
        return Err(GaussianError::DomainError {
            func: "draw margin",
            value: eps,
        });
    }
    truncated_std_normal_moments(-eps - t, eps - t)
        .map_err(|_| GaussianError::DegenerateMargin { t, eps })
}

/// Mean and variance of a standard normal truncated to `[a, b]`.
///
/// Endpoints may be infinite. Evaluation never forms Φ(b) − Φ(a) directly
/// when both ends sit in the same tail: quantities are scaled by φ at the
/// endpoint nearest the mode and tail masses come from the Mills ratio, so
/// intervals as far out as |a| ~ 1e3 keep full relative accuracy.
pub fn truncated_std_normal_moments(a: f64, b: f64) -> Result<(f64, f64), GaussianError> {
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(GaussianError::DegenerateMargin { t: a, eps: b });
    }
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return Ok((0.0, 1.0));
    }
    // mirror so the interval leans left: |a| ≥ |b|
    if a + b > 0.0 {
        return truncated_std_normal_moments(-b, -a).map(|(m, v)| (-m, v));
    }

    let (mean, var) = if a.is_finite() && (b - a) * a.abs().max(b.abs()).max(1.0) < 1.0 {
        narrow_moments(a, b)
    } else if b <= 0.0 {
        left_tail_moments(a, b)
    } else {
        straddling_moments(a, b)
    };
    if !(mean.is_finite() && var.is_finite()) || var <= 0.0 {
        return Err(GaussianError::DegenerateMargin { t: a, eps: b });
    }
    Ok((mean, var.min(1.0)))
}

// b ≤ 0, a < b; everything divided by φ(b).
fn left_tail_moments(a: f64, b: f64) -> (f64, f64) {
    let r_b = mills_ratio(-b);
    let (ratio, r_a, a_term) = if a.is_finite() {
        let ratio = (0.5 * (b - a) * (b + a)).exp();
        (ratio, mills_ratio(-a), a * ratio)
    } else {
        (0.0, 0.0, 0.0)
    };
    let mass = r_b - ratio * r_a;
    let mean = (ratio - 1.0) / mass;
    let second = 1.0 + (a_term - b) / mass;
    (mean, second - mean * mean)
}

// a < 0 < b with |a| ≥ b.
fn straddling_moments(a: f64, b: f64) -> (f64, f64) {
    let mass = 0.5 * (libm::erf(b * FRAC_1_SQRT_2) - libm::erf(a * FRAC_1_SQRT_2));
    let (pdf_a, a_term) = if a.is_finite() {
        let p = std_normal_pdf(a);
        (p, a * p)
    } else {
        (0.0, 0.0)
    };
    let pdf_b = std_normal_pdf(b);
    let mean = (pdf_a - pdf_b) / mass;
    let second = 1.0 + (a_term - b * pdf_b) / mass;
    (mean, second - mean * mean)
}

// Gauss-Legendre on the local coordinate u ∈ [-1, 1]; the density varies by at
// most a factor e^2 across the interval.
fn narrow_moments(a: f64, b: f64) -> (f64, f64) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let anchor = if a <= 0.0 && b >= 0.0 { 0.0 } else { b };
    let rule = legendre_rule();
    let mut z = 0.0;
    let mut m1 = 0.0;
    for &(u, w) in rule {
        let x = mid + half * u;
        let f = w * (-0.5 * (x - anchor) * (x + anchor)).exp();
        z += f;
        m1 += u * f;
    }
    let mu = m1 / z;
    let mut m2 = 0.0;
    for &(u, w) in rule {
        let x = mid + half * u;
        let f = w * (-0.5 * (x - anchor) * (x + anchor)).exp();
        m2 += (u - mu) * (u - mu) * f;
    }
    (mid + half * mu, half * half * m2 / z)
}

const LEGENDRE_POINTS: usize = 24;

fn legendre_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = LEGENDRE_POINTS;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut deriv = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / deriv;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * deriv * deriv)));
        }
        rule
    })
}
