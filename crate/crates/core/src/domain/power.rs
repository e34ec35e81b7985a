use serde::{Deserialize, Serialize};

use super::dist::{normal_cdf, normal_quantile};
use super::{ExperimentRecord, PowerPolicy};
use crate::error::{Error, Result};

/// One-sided normal-approximation power `Φ(z_α + δ/se)` with `z_α = Φ⁻¹(α)`,
/// so that `power(0, se, α) = α`.
pub fn power(delta: f64, se: f64, alpha: f64) -> Result<f64> {
    if !(se > 0.0) {
        return Err(Error::domain(format!("power requires se > 0, got {se}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("power requires alpha in (0, 1), got {alpha}")));
    }
    Ok(normal_cdf(normal_quantile(alpha)? + delta / se))
}

/// Recommended experiment length for a given assumed effect size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Duration {
    pub weeks: usize,
    /// False when no week up to `max_weeks` reaches the target power.
    pub attained: bool,
}

/// Smallest week whose power at `aes` reaches `policy.target_power`,
/// falling back to `(max_weeks, false)`.
pub fn recommend_duration(
    exp: &ExperimentRecord,
    aes: f64,
    policy: &PowerPolicy,
) -> Result<Duration> {
    if !(aes > 0.0 && aes.is_finite()) {
        return Err(Error::domain(format!(
            "assumed effect size must be positive, got {aes}"
        )));
    }
    for week in 1..=policy.max_weeks {
        let se2 = exp.se2_at(week)?;
        if power(aes, se2.sqrt(), policy.alpha)? >= policy.target_power {
            return Ok(Duration {
                weeks: week,
                attained: true,
            });
        }
    }
    Ok(Duration {
        weeks: policy.max_weeks,
        attained: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Arm, ArmWeekly};
    use approx::assert_abs_diff_eq;

    fn with_se(se: &[f64]) -> ExperimentRecord {
        let weeks = se.len();
        ExperimentRecord {
            id: "x".into(),
            weeks,
            treatment: ArmWeekly::empty(Arm::Treatment, weeks),
            control: ArmWeekly::empty(Arm::Control, weeks),
            observed_effect: vec![0.0; weeks],
            effect_se2: se.iter().map(|s| s * s).collect(),
            weekly_cost: 0.0,
            latent_label: None,
        }
    }

    #[test]
    fn null_power_equals_alpha() {
        for se in [0.01, 1.0, 30.0] {
            assert_abs_diff_eq!(power(0.0, se, 0.05).unwrap(), 0.05, epsilon = 1e-12);
        }
    }

    #[test]
    fn eighty_percent_point() {
        // z_0.95 + z_0.80 = 2.4865 (scipy: Φ(2.4865 - 1.64485) = 0.800007)
        assert_abs_diff_eq!(power(2.4865, 1.0, 0.05).unwrap(), 0.80, epsilon = 1e-3);
    }

    #[test]
    fn thousand_per_arm() {
        // scipy: 0.9562975209020741
        let p = power(0.15, (2.0f64 / 1000.0).sqrt(), 0.05).unwrap();
        assert_abs_diff_eq!(p, 0.956297520902074, epsilon = 1e-9);
    }

    #[test]
    fn rejects_nonpositive_se() {
        assert!(power(1.0, 0.0, 0.05).is_err());
        assert!(power(1.0, -1.0, 0.05).is_err());
    }

    #[test]
    fn first_week_qualifies() {
        let d = recommend_duration(&with_se(&[0.01, 0.005]), 1.0, &PowerPolicy::default()).unwrap();
        assert_eq!(d, Duration { weeks: 1, attained: true });
    }

    #[test]
    fn third_week_from_trajectory() {
        // scipy power at se = 0.9, 0.55, 0.38, 0.30: 0.297, 0.569, 0.838, 0.954
        let d = recommend_duration(&with_se(&[0.9, 0.55, 0.38, 0.30]), 1.0, &PowerPolicy::default())
            .unwrap();
        assert_eq!(d, Duration { weeks: 3, attained: true });
    }

    #[test]
    fn unreachable_target_falls_back() {
        let d = recommend_duration(&with_se(&[0.9, 0.55, 0.38, 0.30]), 0.01, &PowerPolicy::default())
            .unwrap();
        assert_eq!(d, Duration { weeks: 4, attained: false });
    }

    #[test]
    fn missing_week_is_named() {
        let err = recommend_duration(&with_se(&[0.9, 0.8]), 0.01, &PowerPolicy::default()).unwrap_err();
        assert!(err.to_string().contains("week 3"), "{err}");
    }

    #[test]
    fn rejects_nonpositive_aes() {
        assert!(recommend_duration(&with_se(&[0.1]), 0.0, &PowerPolicy::default()).is_err());
    }
}
