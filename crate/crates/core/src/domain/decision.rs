//! One-sided launch rules: Welch's t-test on arm summaries and a z-test on
//! the observed effect with known variance. Both launch only when
//! `p < alpha` and the observed effect is positive.

use serde::{Deserialize, Serialize};

use super::dist::{normal_sf, student_t_sf};
use super::{DecisionRule, ExperimentRecord, PowerPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchOutcome {
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    pub launch: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZOutcome {
    pub z: f64,
    pub p_value: f64,
    pub launch: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn welch_test(
    mean_t: f64,
    var_t: f64,
    n_t: u64,
    mean_c: f64,
    var_c: f64,
    n_c: u64,
    alpha: f64,
) -> Result<WelchOutcome> {
    if n_t < 2 || n_c < 2 {
        return Err(Error::domain(format!(
            "welch test needs at least 2 observations per arm, got {n_t} and {n_c}"
        )));
    }
    if !(var_t >= 0.0 && var_c >= 0.0) || (var_t == 0.0 && var_c == 0.0) {
        return Err(Error::domain(format!(
            "welch test needs non-negative variances, not both zero (got {var_t}, {var_c})"
        )));
    }
    let a = var_t / n_t as f64;
    let c = var_c / n_c as f64;
    let se2 = a + c;
    let t_stat = (mean_t - mean_c) / se2.sqrt();
    // Welch–Satterthwaite
    let df = se2 * se2 / (a * a / (n_t - 1) as f64 + c * c / (n_c - 1) as f64);
    let p_value = student_t_sf(t_stat, df)?;
    Ok(WelchOutcome {
        t_stat,
        df,
        p_value,
        launch: p_value < alpha && mean_t > mean_c,
    })
}

pub fn z_decision(d: f64, se2: f64, alpha: f64) -> Result<ZOutcome> {
    if !(se2 > 0.0) {
        return Err(Error::domain(format!("z decision requires se2 > 0, got {se2}")));
    }
    let z = d / se2.sqrt();
    let p_value = normal_sf(z);
    Ok(ZOutcome {
        z,
        p_value,
        launch: p_value < alpha && d > 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchDecision {
    pub week: usize,
    pub p_value: f64,
    pub launch: bool,
}

/// Applies the policy's decision rule to the data available at `week`.
pub fn decide_at_week(
    exp: &ExperimentRecord,
    week: usize,
    policy: &PowerPolicy,
) -> Result<LaunchDecision> {
    let (p_value, launch) = match policy.decision_rule {
        DecisionRule::ZTestOneSided => {
            let z = z_decision(exp.effect_at(week)?, exp.se2_at(week)?, policy.alpha)?;
            (z.p_value, z.launch)
        }
        DecisionRule::WelchOneSided => {
            let missing = |what: &str| {
                Error::data(format!(
                    "experiment {}: welch rule needs {what} at week {week}",
                    exp.id
                ))
            };
            let t = &exp.treatment;
            let c = &exp.control;
            let w = welch_test(
                t.mean_at(week).ok_or_else(|| missing("treatment mean"))?,
                t.var_at(week).ok_or_else(|| missing("treatment variance"))?,
                t.n_at(week).ok_or_else(|| missing("treatment count"))?,
                c.mean_at(week).ok_or_else(|| missing("control mean"))?,
                c.var_at(week).ok_or_else(|| missing("control variance"))?,
                c.n_at(week).ok_or_else(|| missing("control count"))?,
                policy.alpha,
            )?;
            (w.p_value, w.launch)
        }
    };
    Ok(LaunchDecision {
        week,
        p_value,
        launch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::dist::normal_quantile;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identical_arms_are_null() {
        let w = welch_test(1.0, 2.0, 30, 1.0, 3.0, 40, 0.05).unwrap();
        assert_eq!(w.t_stat, 0.0);
        assert_eq!(w.p_value, 0.5);
        assert!(!w.launch);
    }

    #[test]
    fn welch_matches_reference() {
        // scipy.stats.ttest_ind_from_stats(equal_var=False, alternative="greater")
        let w = welch_test(1.2, 4.0, 50, 0.5, 3.0, 60, 0.05).unwrap();
        assert_abs_diff_eq!(w.t_stat, 1.9414506867883017, epsilon = 1e-12);
        assert_abs_diff_eq!(w.df, 97.69626074785043, epsilon = 1e-9);
        assert_abs_diff_eq!(w.p_value, 0.02754237732680562, epsilon = 1e-6);
        assert!(w.launch);
    }

    #[test]
    fn negative_effect_never_launches() {
        let w = welch_test(-5.0, 1.0, 100, 0.0, 1.0, 100, 0.05).unwrap();
        assert!(w.p_value > 0.99);
        assert!(!w.launch);
        // even with a permissive alpha
        let w = welch_test(-5.0, 1.0, 100, 0.0, 1.0, 100, 0.9999999).unwrap();
        assert!(!w.launch);
    }

    #[test]
    fn welch_rejects_degenerate_inputs() {
        assert!(welch_test(1.0, 0.0, 10, 0.0, 0.0, 10, 0.05).is_err());
        assert!(welch_test(1.0, 1.0, 1, 0.0, 1.0, 10, 0.05).is_err());
        assert!(welch_test(1.0, -1.0, 10, 0.0, 1.0, 10, 0.05).is_err());
    }

    #[test]
    fn z_null() {
        let z = z_decision(0.0, 2.0, 0.05).unwrap();
        assert_eq!(z.p_value, 0.5);
        assert!(!z.launch);
    }

    #[test]
    fn z_boundary_is_strict() {
        let crit = normal_quantile(0.95).unwrap();
        let at = z_decision(crit, 1.0, 0.05).unwrap();
        assert_abs_diff_eq!(at.p_value, 0.05, epsilon = 1e-12);
        assert!(!z_decision(1.6448, 1.0, 0.05).unwrap().launch);
        // 1.6449 sits just above z_0.95 = 1.64485, so p = 0.049998
        assert!(z_decision(1.6449, 1.0, 0.05).unwrap().launch);
    }

    #[test]
    fn z_clear_launch() {
        let z = z_decision(3.0, 1.0, 0.05).unwrap();
        assert_abs_diff_eq!(z.p_value, 0.0013498980316301, epsilon = 1e-12);
        assert!(z.launch);
    }

    #[test]
    fn z_rejects_nonpositive_variance() {
        assert!(z_decision(1.0, 0.0, 0.05).is_err());
    }
}
