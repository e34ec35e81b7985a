//! Experiment records and the statistical primitives shared by every
//! estimator: distribution functions, power, duration and launch rules.

pub mod decision;
pub mod dist;
pub mod power;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use decision::{decide_at_week, welch_test, z_decision, LaunchDecision, WelchOutcome, ZOutcome};
pub use dist::{normal_cdf, normal_quantile, student_t_cdf};
pub use power::{power, recommend_duration, Duration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Treatment,
    Control,
}

/// Ground-truth cluster of a simulated experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Positive,
    Flat,
    Negative,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Flat => "flat",
            Label::Negative => "negative",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(Label::Positive),
            "flat" => Some(Label::Flat),
            "negative" => Some(Label::Negative),
            _ => None,
        }
    }
}

/// Cumulative per-week summaries for one arm. Index `t - 1` holds week `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmWeekly {
    pub arm: Arm,
    pub cumulative_n: Vec<Option<u64>>,
    pub cumulative_mean: Vec<Option<f64>>,
    pub cumulative_var: Vec<Option<f64>>,
}

impl ArmWeekly {
    pub fn empty(arm: Arm, weeks: usize) -> Self {
        ArmWeekly {
            arm,
            cumulative_n: vec![None; weeks],
            cumulative_mean: vec![None; weeks],
            cumulative_var: vec![None; weeks],
        }
    }

    pub fn with_counts(arm: Arm, counts: Vec<u64>) -> Self {
        let weeks = counts.len();
        ArmWeekly {
            arm,
            cumulative_n: counts.into_iter().map(Some).collect(),
            cumulative_mean: vec![None; weeks],
            cumulative_var: vec![None; weeks],
        }
    }

    pub fn n_at(&self, week: usize) -> Option<u64> {
        week.checked_sub(1)
            .and_then(|i| self.cumulative_n.get(i).copied().flatten())
    }

    pub fn mean_at(&self, week: usize) -> Option<f64> {
        week.checked_sub(1)
            .and_then(|i| self.cumulative_mean.get(i).copied().flatten())
    }

    pub fn var_at(&self, week: usize) -> Option<f64> {
        week.checked_sub(1)
            .and_then(|i| self.cumulative_var.get(i).copied().flatten())
    }
}

/// One historical (or simulated) experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: String,
    pub weeks: usize,
    pub treatment: ArmWeekly,
    pub control: ArmWeekly,
    /// Observed effect size `d_{i,t}` per week.
    pub observed_effect: Vec<f64>,
    /// Known sampling variance of `observed_effect` per week.
    pub effect_se2: Vec<f64>,
    pub weekly_cost: f64,
    pub latent_label: Option<Label>,
}

impl ExperimentRecord {
    pub fn final_effect(&self) -> Result<f64> {
        self.observed_effect
            .last()
            .copied()
            .ok_or_else(|| Error::data(format!("experiment {} has no weekly effects", self.id)))
    }

    pub fn final_se2(&self) -> Result<f64> {
        self.effect_se2
            .last()
            .copied()
            .ok_or_else(|| Error::data(format!("experiment {} has no weekly variances", self.id)))
    }

    pub fn se2_at(&self, week: usize) -> Result<f64> {
        week.checked_sub(1)
            .and_then(|i| self.effect_se2.get(i).copied())
            .ok_or_else(|| {
                Error::data(format!(
                    "experiment {}: missing effect variance for week {week}",
                    self.id
                ))
            })
    }

    pub fn effect_at(&self, week: usize) -> Result<f64> {
        week.checked_sub(1)
            .and_then(|i| self.observed_effect.get(i).copied())
            .ok_or_else(|| {
                Error::data(format!(
                    "experiment {}: missing observed effect for week {week}",
                    self.id
                ))
            })
    }

    /// Treatment plus control triggered customers up to `week`.
    pub fn total_n_at(&self, week: usize) -> Result<u64> {
        let t = self.treatment_n_at(week)?;
        let c = self.control.n_at(week).ok_or_else(|| {
            Error::data(format!(
                "experiment {}: missing control count for week {week}",
                self.id
            ))
        })?;
        Ok(t + c)
    }

    pub fn treatment_n_at(&self, week: usize) -> Result<u64> {
        self.treatment.n_at(week).ok_or_else(|| {
            Error::data(format!(
                "experiment {}: missing treatment count for week {week}",
                self.id
            ))
        })
    }

    /// Checks the structural invariants of a record.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::data(format!("experiment {}: {msg}", self.id)));
        if self.weeks == 0 {
            return fail("weeks must be positive".into());
        }
        if self.observed_effect.len() != self.weeks || self.effect_se2.len() != self.weeks {
            return fail(format!(
                "expected {} weekly effects and variances, got {} and {}",
                self.weeks,
                self.observed_effect.len(),
                self.effect_se2.len()
            ));
        }
        if self.treatment.arm != Arm::Treatment || self.control.arm != Arm::Control {
            return fail("arms must be (treatment, control)".into());
        }
        if !(self.weekly_cost >= 0.0 && self.weekly_cost.is_finite()) {
            return fail(format!("weekly cost must be non-negative, got {}", self.weekly_cost));
        }
        for (t, (&d, &s2)) in self.observed_effect.iter().zip(&self.effect_se2).enumerate() {
            let week = t + 1;
            if !d.is_finite() {
                return fail(format!("non-finite effect at week {week}"));
            }
            if !(s2 > 0.0 && s2.is_finite()) {
                return fail(format!("effect variance must be positive at week {week}, got {s2}"));
            }
        }
        for arm in [&self.treatment, &self.control] {
            if arm.cumulative_n.len() != self.weeks
                || arm.cumulative_mean.len() != self.weeks
                || arm.cumulative_var.len() != self.weeks
            {
                return fail(format!("{:?} arm does not cover {} weeks", arm.arm, self.weeks));
            }
            let mut prev = 0u64;
            for (t, n) in arm.cumulative_n.iter().enumerate() {
                if let Some(n) = *n {
                    if n == 0 {
                        return fail(format!("{:?} count must be positive at week {}", arm.arm, t + 1));
                    }
                    if n < prev {
                        return fail(format!("{:?} counts decrease at week {}", arm.arm, t + 1));
                    }
                    prev = n;
                }
            }
            for (t, v) in arm.cumulative_var.iter().enumerate() {
                if let Some(v) = *v {
                    if !(v >= 0.0) {
                        return fail(format!("{:?} variance negative at week {}", arm.arm, t + 1));
                    }
                }
            }
        }
        for week in 1..=self.weeks {
            let parts = (
                self.treatment.var_at(week),
                self.treatment.n_at(week),
                self.control.var_at(week),
                self.control.n_at(week),
            );
            if let (Some(vt), Some(nt), Some(vc), Some(nc)) = parts {
                let implied = vt / nt as f64 + vc / nc as f64;
                let s2 = self.effect_se2[week - 1];
                if (implied - s2).abs() > 1e-9 * s2.abs().max(implied.abs()) {
                    return fail(format!(
                        "effect variance {s2} at week {week} disagrees with arm summaries ({implied})"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Launch decision rule used at the recommended stopping week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// One-sided Welch test on the arms' cumulative means and variances.
    WelchOneSided,
    /// One-sided z-test on `(d, σ²)` alone.
    ZTestOneSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerPolicy {
    pub alpha: f64,
    pub target_power: f64,
    pub max_weeks: usize,
    pub decision_rule: DecisionRule,
}

impl Default for PowerPolicy {
    fn default() -> Self {
        PowerPolicy {
            alpha: 0.05,
            target_power: 0.80,
            max_weeks: 4,
            decision_rule: DecisionRule::ZTestOneSided,
        }
    }
}

impl PowerPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.alpha && self.alpha < self.target_power && self.target_power < 1.0) {
            return Err(Error::config(format!(
                "policy requires 0 < alpha < target_power < 1, got alpha={}, target_power={}",
                self.alpha, self.target_power
            )));
        }
        if self.max_weeks == 0 {
            return Err(Error::config("max_weeks must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> ExperimentRecord {
        let mut treatment = ArmWeekly::with_counts(Arm::Treatment, vec![100, 200]);
        let mut control = ArmWeekly::with_counts(Arm::Control, vec![50, 150]);
        treatment.cumulative_var = vec![Some(4.0), Some(4.0)];
        control.cumulative_var = vec![Some(2.0), Some(3.0)];
        ExperimentRecord {
            id: "e1".into(),
            weeks: 2,
            treatment,
            control,
            observed_effect: vec![0.1, 0.2],
            effect_se2: vec![4.0 / 100.0 + 2.0 / 50.0, 4.0 / 200.0 + 3.0 / 150.0],
            weekly_cost: 1.0,
            latent_label: None,
        }
    }

    #[test]
    fn consistent_record_validates() {
        record().validate().unwrap();
    }

    #[test]
    fn inconsistent_variance_is_rejected() {
        let mut r = record();
        r.effect_se2[1] *= 1.0 + 1e-6;
        assert!(matches!(r.validate(), Err(Error::Data(_))));
    }

    #[test]
    fn decreasing_counts_are_rejected() {
        let mut r = record();
        r.control.cumulative_n[1] = Some(10);
        assert!(r.validate().is_err());
    }

    #[test]
    fn nonpositive_se2_is_rejected() {
        let mut r = record();
        r.treatment.cumulative_var = vec![None, None];
        r.effect_se2[0] = 0.0;
        assert!(r.validate().is_err());
    }

    #[test]
    fn policy_ordering() {
        PowerPolicy::default().validate().unwrap();
        let bad = PowerPolicy {
            alpha: 0.9,
            ..PowerPolicy::default()
        };
        assert!(bad.validate().is_err());
    }
}
