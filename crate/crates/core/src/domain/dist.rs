//! Normal and Student-t distribution functions.
//!
//! The normal CDF uses `libm`'s `erfc`; the quantile starts from `statrs`'
//! `erfc_inv` and is polished by Newton steps on that CDF. The Student-t CDF goes through a regularized incomplete beta
//! evaluated by a modified Lentz continued fraction.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

const CF_MAX_ITER: usize = 10_000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Φ(x)` without cancellation for large `x`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile. Fails outside the open interval (0, 1).
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!(
            "normal quantile requires q in (0, 1), got {q}"
        )));
    }
    let mut x = -SQRT_2 * erfc_inv(2.0 * q);
    // erfc_inv alone is only good to ~1e-11.
    for _ in 0..2 {
        let pdf = normal_pdf(x);
        if pdf > 0.0 {
            // Φ(x) - q, evaluated on the tail that keeps precision
            let resid = if x > 0.0 { (1.0 - q) - normal_sf(x) } else { normal_cdf(x) - q };
            x -= resid / pdf;
        }
    }
    Ok(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::domain(format!(
            "incomplete beta requires a, b > 0, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "incomplete beta requires x in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    // The continued fraction converges fastest below the mean.
    if x > (a + 1.0) / (a + b + 2.0) {
        return Ok(1.0 - incomplete_beta_cf(1.0 - x, b, a)?);
    }
    incomplete_beta_cf(x, a, b)
}

fn incomplete_beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let front = ln_front.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        // even step
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        // odd step
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;

        if (delta - 1.0).abs() < CF_EPS {
            return Ok(front * h);
        }
    }
    Err(Error::numerical(
        0,
        format!("incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})"),
    ))
}

/// Student-t CDF with `df` degrees of freedom (`df` may be fractional).
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) {
        return Err(Error::domain(format!("student t requires df > 0, got {df}")));
    }
    if t.is_nan() {
        return Err(Error::domain("student t cdf of NaN"));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    let x = df / (df + t * t);
    let tail = 0.5 * regularized_incomplete_beta(x, 0.5 * df, 0.5)?;
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Upper tail `P(T > t)`, computed directly so small p-values keep precision.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    student_t_cdf(-t, df)
}
