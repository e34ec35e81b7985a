//! Random-effects pooled estimate: `d_i ~ N(μ₀, τ² + σ²_i)`.
//!
//! Solved through the profile likelihood in `τ²`: for fixed `τ²` the MLE of
//! `μ₀` is the inverse-variance weighted mean, so only a one-dimensional
//! search remains. A log-spaced scan locates the global maximum, then the
//! profile score is bisected inside the winning cell.

use serde::{Deserialize, Serialize};

use super::{check_observations, effect_variance, Observation};
use crate::error::{Error, Result};

const VAR_FLOOR: f64 = 1e-10;
const SCAN_POINTS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledFit {
    pub mu0: f64,
    pub tau2: f64,
    pub loglik: f64,
}

fn weighted_mean(data: &[Observation], tau2: f64) -> f64 {
    let (num, den) = data.iter().fold((0.0, 0.0), |(n, d), o| {
        let w = 1.0 / (o.se2 + tau2);
        (n + w * o.d, d + w)
    });
    num / den
}

fn profile_loglik(data: &[Observation], tau2: f64) -> f64 {
    let mu = weighted_mean(data, tau2);
    data.iter()
        .map(|o| {
            let v = o.se2 + tau2;
            -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (o.d - mu).powi(2) / (2.0 * v)
        })
        .sum()
}

/// Derivative of the profile log-likelihood in `τ²` (envelope theorem).
fn profile_score(data: &[Observation], tau2: f64) -> f64 {
    let mu = weighted_mean(data, tau2);
    0.5 * data
        .iter()
        .map(|o| {
            let w = 1.0 / (o.se2 + tau2);
            (o.d - mu).powi(2) * w * w - w
        })
        .sum::<f64>()
}

/// Joint MLE of `(μ₀, τ²)`; `τ²` is floored at `1e-10` when the between-study
/// variance is fully explained by the sampling variances.
pub fn fit_pooled(data: &[Observation]) -> Result<PooledFit> {
    if data.len() < 2 {
        return Err(Error::data(format!(
            "pooled estimate needs at least 2 observations, got {}",
            data.len()
        )));
    }
    check_observations(data)?;
    let var_d = effect_variance(data);
    if var_d == 0.0 && data.iter().all(|o| o.se2 == 0.0) {
        return Err(Error::data("observed effects have zero variance"));
    }
    let hi = (10.0 * var_d).max(1e3 * VAR_FLOOR);

    let (lo_ln, hi_ln) = (VAR_FLOOR.ln(), hi.ln());
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| (lo_ln + (hi_ln - lo_ln) * i as f64 / (SCAN_POINTS - 1) as f64).exp())
        .collect();
    let best = (0..SCAN_POINTS)
        .max_by(|&a, &b| {
            profile_loglik(data, grid[a])
                .total_cmp(&profile_loglik(data, grid[b]))
                .then(b.cmp(&a))
        })
        .unwrap();

    let tau2 = if best == 0 && profile_score(data, VAR_FLOOR) <= 0.0 {
        VAR_FLOOR
    } else {
        // The maximum lies in the neighbouring cells; bisect the score there.
        let mut lo = grid[best.saturating_sub(1)];
        let mut hi = grid[(best + 1).min(SCAN_POINTS - 1)];
        if profile_score(data, lo) <= 0.0 || profile_score(data, hi) >= 0.0 {
            // Flat top or maximum at the scan's upper end.
            grid[best]
        } else {
            for _ in 0..200 {
                let mid = (lo * hi).sqrt();
                if profile_score(data, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi / lo - 1.0 < 1e-15 {
                    break;
                }
            }
            0.5 * (lo + hi)
        }
    };
    Ok(PooledFit {
        mu0: weighted_mean(data, tau2),
        tau2,
        loglik: profile_loglik(data, tau2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equal_variances_give_arithmetic_mean() {
        let data: Vec<_> = [0.3, 1.1, -0.4, 2.0, 0.9]
            .iter()
            .map(|&d| Observation::new(d, 0.2))
            .collect();
        let f = fit_pooled(&data).unwrap();
        assert_abs_diff_eq!(f.mu0, 0.78, epsilon = 1e-12);
    }

    #[test]
    fn symmetric_pair_with_zero_between_variance() {
        // Spread of 2 around the mean with σ² = 1 each: the score at τ² = 0
        // is ½ Σ (1 - 1) = 0, so τ² sits on the floor.
        let data = vec![Observation::new(1.0, 1.0), Observation::new(3.0, 1.0)];
        let f = fit_pooled(&data).unwrap();
        assert_abs_diff_eq!(f.mu0, 2.0, epsilon = 1e-12);
        assert!(f.tau2 < 1e-6);
    }

    #[test]
    fn matches_brute_force_grid() {
        let d = [
            0.82, -0.31, 1.54, 0.07, 2.41, 0.66, -0.92, 1.18, 0.35, 1.97, 0.12, -0.05, 0.74, 1.63, 0.29,
            2.88, -0.47, 0.95, 1.36, 0.51,
        ];
        let data: Vec<_> = d
            .iter()
            .enumerate()
            .map(|(i, &d)| Observation::new(d, 0.05 + 0.04 * (i % 7) as f64))
            .collect();
        let f = fit_pooled(&data).unwrap();

        let ll = |mu: f64, tau2: f64| -> f64 {
            data.iter()
                .map(|o| {
                    let v = o.se2 + tau2;
                    -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (o.d - mu).powi(2) / (2.0 * v)
                })
                .sum()
        };
        let (mut best, mut arg) = (f64::NEG_INFINITY, (0.0, 0.0));
        for a in 0..=1000 {
            let mu = -0.5 + 2.5 * a as f64 / 1000.0;
            for b in 0..=1000 {
                let tau2 = 2.0 * b as f64 / 1000.0;
                let v = ll(mu, tau2);
                if v > best {
                    best = v;
                    arg = (mu, tau2);
                }
            }
        }
        assert!(f.loglik >= best - 1e-12);
        assert!((f.mu0 - arg.0).abs() <= 2.5e-3);
        assert!((f.tau2 - arg.1).abs() <= 2e-3);
    }

    #[test]
    fn needs_two_points() {
        assert!(fit_pooled(&[Observation::new(1.0, 1.0)]).is_err());
    }
}
