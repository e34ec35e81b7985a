//! Utility-maximizing choice of the assumed effect size.
//!
//! For a candidate AES `μ`, each past experiment is replayed as if it had
//! stopped at its recommended week `T(μ)`. Its reward is
//!
//! ```text
//! -c · (T - 1)  +  d' · N_T(T)  +  1[launch at T] · d' · (H - T) · (N_T(T) + N_C(T))
//! ```
//!
//! where `d'` is the end-of-experiment effect estimate. The expectation over
//! the true effect collapses onto `d'` because every term is linear in it.
//! The AES maximizing the corpus-average reward is found by grid search.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{decide_at_week, recommend_duration, ExperimentRecord, PowerPolicy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorEffectSource {
    /// Observed effect at the last recorded week (flat-prior posterior mean).
    FinalWeekObserved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilityConfig {
    pub horizon_weeks: usize,
    pub grid: Vec<f64>,
    pub policy: PowerPolicy,
    pub posterior_effect_source: PosteriorEffectSource,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        UtilityConfig {
            horizon_weeks: 52,
            grid: default_grid(),
            policy: PowerPolicy::default(),
            posterior_effect_source: PosteriorEffectSource::FinalWeekObserved,
        }
    }
}

/// `{0.1, 0.2, ..., 5.0}`.
pub fn default_grid() -> Vec<f64> {
    (1..=50).map(|i| i as f64 / 10.0).collect()
}

impl UtilityConfig {
    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if self.horizon_weeks == 0 {
            return Err(Error::config("horizon_weeks must be positive"));
        }
        if self.grid.is_empty() {
            return Err(Error::config("AES grid is empty"));
        }
        if self.grid.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::config(format!(
                "AES grid values must be strictly positive: {:?}",
                self.grid
            )));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("AES grid must be strictly increasing"));
        }
        Ok(())
    }
}

/// One experiment's reward under a given AES.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub experiment_id: String,
    pub duration: usize,
    pub launched: bool,
    pub opportunity_cost: f64,
    pub in_experiment_impact: f64,
    pub launch_impact: f64,
    pub total: f64,
}

/// Impact of launching at week `t` over the remaining horizon:
/// `d' · (H - t) · n_total`.
pub fn launch_impact_u2(d_prime: f64, horizon: usize, t: usize, n_total: u64) -> Result<f64> {
    if t == 0 || t > horizon {
        return Err(Error::domain(format!(
            "launch week must lie in 1..={horizon}, got {t}"
        )));
    }
    Ok(d_prime * (horizon - t) as f64 * n_total as f64)
}

fn posterior_effect(exp: &ExperimentRecord, cfg: &UtilityConfig) -> Result<f64> {
    match cfg.posterior_effect_source {
        PosteriorEffectSource::FinalWeekObserved => exp.final_effect(),
    }
}

pub fn evaluate_reward(exp: &ExperimentRecord, aes: f64, cfg: &UtilityConfig) -> Result<RewardBreakdown> {
    let d_prime = posterior_effect(exp, cfg)?;
    let duration = recommend_duration(exp, aes, &cfg.policy)?.weeks;
    let decision = decide_at_week(exp, duration, &cfg.policy)?;

    let opportunity_cost = -exp.weekly_cost * (duration - 1) as f64;
    let in_experiment_impact = d_prime * exp.treatment_n_at(duration)? as f64;
    let launch_impact = if decision.launch {
        launch_impact_u2(d_prime, cfg.horizon_weeks, duration, exp.total_n_at(duration)?)?
    } else {
        0.0
    };
    Ok(RewardBreakdown {
        experiment_id: exp.id.clone(),
        duration,
        launched: decision.launch,
        opportunity_cost,
        in_experiment_impact,
        launch_impact,
        total: opportunity_cost + in_experiment_impact + launch_impact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub aes: f64,
    pub mean_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityOptimum {
    pub best_aes: f64,
    pub best_mean_reward: f64,
    pub profile: Vec<ProfilePoint>,
}

/// Mean reward over the corpus, summed in corpus order.
pub fn mean_reward(corpus: &[ExperimentRecord], aes: f64, cfg: &UtilityConfig) -> Result<f64> {
    let mut total = 0.0;
    for exp in corpus {
        total += evaluate_reward(exp, aes, cfg)?.total;
    }
    Ok(total / corpus.len() as f64)
}

/// Grid search for the AES with the highest mean reward. Ties go to the
/// smallest AES.
pub fn optimize_aes(corpus: &[ExperimentRecord], cfg: &UtilityConfig) -> Result<UtilityOptimum> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::config("cannot optimize over an empty corpus"));
    }
    let profile: Vec<ProfilePoint> = cfg
        .grid
        .par_iter()
        .map(|&aes| {
            Ok(ProfilePoint {
                aes,
                mean_reward: mean_reward(corpus, aes, cfg)?,
            })
        })
        .collect::<Result<_>>()?;
    let best = profile
        .iter()
        .fold(None::<ProfilePoint>, |best, p| match best {
            Some(b) if b.mean_reward >= p.mean_reward => Some(b),
            _ => Some(*p),
        })
        .expect("non-empty grid");
    Ok(UtilityOptimum {
        best_aes: best.aes,
        best_mean_reward: best.mean_reward,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Arm, ArmWeekly};
    use approx::assert_abs_diff_eq;

    fn record(effects: &[f64], se: &[f64], counts: &[u64], cost: f64) -> ExperimentRecord {
        let weeks = effects.len();
        ExperimentRecord {
            id: "r".into(),
            weeks,
            treatment: ArmWeekly::with_counts(Arm::Treatment, counts.to_vec()),
            control: ArmWeekly::with_counts(Arm::Control, counts.to_vec()),
            observed_effect: effects.to_vec(),
            effect_se2: se.iter().map(|s| s * s).collect(),
            weekly_cost: cost,
            latent_label: None,
        }
    }

    #[test]
    fn u2_cases() {
        assert_eq!(launch_impact_u2(0.0, 52, 3, 100).unwrap(), 0.0);
        assert_eq!(launch_impact_u2(1.3, 52, 52, 100).unwrap(), 0.0);
        assert_eq!(launch_impact_u2(0.5, 52, 4, 10_000).unwrap(), 240_000.0);
        assert!(launch_impact_u2(0.5, 52, 53, 10).is_err());
        assert!(launch_impact_u2(0.5, 52, 0, 10).is_err());
    }

    #[test]
    fn one_week_has_no_opportunity_cost() {
        let r = record(&[2.0, 2.0], &[0.1, 0.05], &[100, 200], 50.0);
        let b = evaluate_reward(&r, 1.0, &UtilityConfig::default()).unwrap();
        assert_eq!(b.duration, 1);
        assert_eq!(b.opportunity_cost, 0.0);
    }

    #[test]
    fn flat_experiment_only_pays_cost() {
        // power(0.4, se) stays below 0.8 until se = 0.15 in week 3
        let r = record(&[0.0, 0.0, 0.0, 0.0], &[1.0, 0.5, 0.15, 0.1], &[10, 20, 30, 40], 10.0);
        let b = evaluate_reward(&r, 0.4, &UtilityConfig::default()).unwrap();
        assert_eq!(b.duration, 3);
        assert!(!b.launched);
        assert_eq!(b.total, -20.0);
    }

    #[test]
    fn positive_experiment_launching_at_week_two() {
        // Week-2 z = 0.8 / 0.2 = 4, launch. Power at week 1: Φ(-1.645 + 0.8) < 0.8.
        let r = record(&[0.3, 0.8, 0.9], &[1.0, 0.2, 0.1], &[100, 250, 400], 7.0);
        let cfg = UtilityConfig::default();
        let b = evaluate_reward(&r, 0.8, &cfg).unwrap();
        assert_eq!(b.duration, 2);
        assert!(b.launched);
        let d = 0.9;
        let want = -7.0 + d * 250.0 + d * 50.0 * 500.0;
        assert_abs_diff_eq!(b.total, want, epsilon = 1e-9);
        assert_abs_diff_eq!(b.total, b.opportunity_cost + b.in_experiment_impact + b.launch_impact, epsilon = 1e-9);
    }

    #[test]
    fn constant_profile_returns_smallest_grid_value() {
        let r = record(&[5.0], &[0.001], &[10], 3.0);
        let cfg = UtilityConfig {
            policy: PowerPolicy {
                max_weeks: 1,
                ..PowerPolicy::default()
            },
            ..UtilityConfig::default()
        };
        let opt = optimize_aes(&[r], &cfg).unwrap();
        assert_eq!(opt.best_aes, 0.1);
        assert!(opt.profile.windows(2).all(|w| w[0].mean_reward == w[1].mean_reward));
        assert_eq!(opt.profile.len(), 50);
    }

    #[test]
    fn invalid_grids_are_config_errors() {
        let r = record(&[1.0], &[0.1], &[10], 0.0);
        for grid in [vec![], vec![0.0, 1.0], vec![1.0, 0.5], vec![-1.0]] {
            let cfg = UtilityConfig {
                grid,
                ..UtilityConfig::default()
            };
            assert!(matches!(optimize_aes(&[r.clone()], &cfg), Err(Error::Config(_))));
        }
        assert!(matches!(optimize_aes(&[], &UtilityConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn singleton_grid() {
        let r = record(&[1.0, 1.0, 1.0, 1.0], &[0.5, 0.3, 0.2, 0.1], &[10, 20, 30, 40], 1.0);
        let cfg = UtilityConfig {
            grid: vec![0.7],
            ..UtilityConfig::default()
        };
        assert_eq!(optimize_aes(&[r], &cfg).unwrap().best_aes, 0.7);
    }
}
