//! Seeded corpus generators.
//!
//! Two protocols are provided: an accuracy corpus of single observed effects
//! drawn from a three-layer mixture with inverse-gamma sampling variances,
//! and a trajectory corpus of weekly cumulative experiments whose triggered
//! sample sizes follow a beta-geometric curve.
//!
//! Every experiment of a trajectory corpus draws from its own stream seeded
//! with `split_seed(cfg.seed, index)`, so corpora are identical regardless
//! of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Arm, ArmWeekly, ExperimentRecord, Label};
use crate::error::{Error, Result};
use crate::meta_models::Observation;
use crate::seed::split_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracySimConfig {
    pub m: usize,
    pub means: [f64; 3],
    pub comp_vars: [f64; 3],
    pub weights: [f64; 3],
    pub se2_shape: f64,
    pub se2_scale: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for AccuracySimConfig {
    fn default() -> Self {
        AccuracySimConfig {
            m: 200,
            means: [2.0, 0.0, -2.0],
            comp_vars: [0.25, 0.25, 0.25],
            weights: [0.2, 0.6, 0.2],
            se2_shape: 3.0,
            se2_scale: 0.7,
            replications: 50,
            seed: 0,
        }
    }
}

impl AccuracySimConfig {
    pub fn validate(&self) -> Result<()> {
        check_weights(&self.weights)?;
        if self.m == 0 || self.replications == 0 {
            return Err(Error::config("m and replications must be positive"));
        }
        if self.comp_vars.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("component variances must be non-negative"));
        }
        if !(self.se2_shape > 1.0 && self.se2_scale > 0.0) {
            return Err(Error::config(
                "inverse-gamma shape must exceed 1 and scale must be positive",
            ));
        }
        Ok(())
    }

    /// The mean of the positive cluster, i.e. the estimand.
    pub fn true_aes(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySimConfig {
    pub m: usize,
    pub weeks: usize,
    pub customers_per_arm: u64,
    pub beta_a_range: (f64, f64),
    pub beta_b_range: (f64, f64),
    pub means: [f64; 3],
    pub comp_sds: [f64; 3],
    pub weights: [f64; 3],
    /// Per-customer outcome variance in each arm.
    pub outcome_var: f64,
    pub total_weekly_cost: f64,
    pub seed: u64,
}

impl Default for TrajectorySimConfig {
    fn default() -> Self {
        TrajectorySimConfig {
            m: 3000,
            weeks: 4,
            customers_per_arm: 10_000,
            beta_a_range: (0.1, 1.0),
            beta_b_range: (4.0, 60.0),
            means: [-1.0, 0.0, 1.0],
            comp_sds: [0.3, 0.5, 0.3],
            weights: [0.2, 0.6, 0.2],
            outcome_var: 500.0,
            total_weekly_cost: 4e6,
            seed: 0,
        }
    }
}

impl TrajectorySimConfig {
    pub fn validate(&self) -> Result<()> {
        check_weights(&self.weights)?;
        if self.m == 0 || self.weeks == 0 || self.customers_per_arm == 0 {
            return Err(Error::config("m, weeks and customers_per_arm must be positive"));
        }
        for (name, (lo, hi)) in [("beta_a_range", self.beta_a_range), ("beta_b_range", self.beta_b_range)] {
            if !(0.0 < lo && lo <= hi) {
                return Err(Error::config(format!("{name} must satisfy 0 < lo <= hi")));
            }
        }
        if self.comp_sds.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::config("component sds must be non-negative"));
        }
        if !(self.outcome_var > 0.0 && self.total_weekly_cost >= 0.0) {
            return Err(Error::config("outcome_var must be positive and cost non-negative"));
        }
        Ok(())
    }

    pub fn true_aes(&self) -> f64 {
        self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_weights(w: &[f64; 3]) -> Result<()> {
    if w.iter().any(|x| !(*x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("weights must be non-negative and sum to 1: {w:?}")));
    }
    Ok(())
}

fn label_for(mean: f64) -> Label {
    if mean > 0.0 {
        Label::Positive
    } else if mean < 0.0 {
        Label::Negative
    } else {
        Label::Flat
    }
}

fn draw_component<R: Rng + ?Sized>(weights: &[f64; 3], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return j;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(2)
}

fn draw_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).expect("finite normal parameters").sample(rng)
}

/// Inverse-gamma draw with shape `α` and scale `β` (mean `β/(α-1)`), as the
/// reciprocal of a `Gamma(α, rate = β)` draw.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
        return Err(Error::domain(format!(
            "inverse gamma needs positive shape and scale, got ({shape}, {scale})"
        )));
    }
    let gamma = Gamma::new(shape, 1.0 / scale).map_err(|e| Error::domain(e.to_string()))?;
    Ok(1.0 / gamma.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedObservation {
    pub d: f64,
    pub se2: f64,
    pub label: Label,
}

impl SimulatedObservation {
    pub fn observation(&self) -> Observation {
        Observation::new(self.d, self.se2)
    }
}

/// `m` draws of `z ~ Cat(π)`, `δ ~ N(μ_z, τ²_z)`, `σ² ~ InvGamma`,
/// `d ~ N(δ, σ²)`.
pub fn simulate_accuracy_corpus<R: Rng + ?Sized>(
    cfg: &AccuracySimConfig,
    rng: &mut R,
) -> Result<Vec<SimulatedObservation>> {
    cfg.validate()?;
    (0..cfg.m)
        .map(|_| {
            let z = draw_component(&cfg.weights, rng);
            let delta = draw_normal(cfg.means[z], cfg.comp_vars[z].sqrt(), rng);
            let se2 = sample_inverse_gamma(cfg.se2_shape, cfg.se2_scale, rng)?;
            Ok(SimulatedObservation {
                d: draw_normal(delta, se2.sqrt(), rng),
                se2,
                label: label_for(cfg.means[z]),
            })
        })
        .collect()
}

/// Corpus for replication `r` of the accuracy study.
pub fn accuracy_replication(cfg: &AccuracySimConfig, r: usize) -> Result<Vec<SimulatedObservation>> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, r as u64));
    simulate_accuracy_corpus(cfg, &mut rng)
}

/// Accuracy-study observations as single-week records, for file output.
pub fn accuracy_records(obs: &[SimulatedObservation]) -> Vec<ExperimentRecord> {
    obs.iter()
        .enumerate()
        .map(|(i, o)| ExperimentRecord {
            id: format!("acc-{i:05}"),
            weeks: 1,
            treatment: ArmWeekly::empty(Arm::Treatment, 1),
            control: ArmWeekly::empty(Arm::Control, 1),
            observed_effect: vec![o.d],
            effect_se2: vec![o.se2],
            weekly_cost: 0.0,
            latent_label: Some(o.label),
        })
        .collect()
}

/// Fraction of customers triggered by week `t` when each customer's
/// per-week trigger probability is `Beta(a, b)`:
/// `1 - Π_{k=1..t} (b + k - 1) / (a + b + k - 1)`.
pub fn beta_geometric_cumfrac(a: f64, b: f64, t: usize) -> Result<f64> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!(
            "beta-geometric needs a, b > 0, got ({a}, {b})"
        )));
    }
    let survival: f64 = (1..=t)
        .map(|k| {
            let k = k as f64;
            (b + k - 1.0) / (a + b + k - 1.0)
        })
        .product();
    Ok(1.0 - survival)
}

fn simulate_experiment(cfg: &TrajectorySimConfig, index: usize) -> ExperimentRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, index as u64));
    let a = uniform(cfg.beta_a_range, &mut rng);
    let b = uniform(cfg.beta_b_range, &mut rng);

    let counts: Vec<u64> = (1..=cfg.weeks)
        .map(|t| {
            let frac = beta_geometric_cumfrac(a, b, t).expect("validated beta parameters");
            ((cfg.customers_per_arm as f64 * frac).round() as u64).max(1)
        })
        .collect();
    let effect_se2: Vec<f64> = counts
        .iter()
        .map(|&n| cfg.outcome_var / n as f64 + cfg.outcome_var / n as f64)
        .collect();

    let z = draw_component(&cfg.weights, &mut rng);
    let delta = draw_normal(cfg.means[z], cfg.comp_sds[z], &mut rng);
    let observed_effect = effect_se2
        .iter()
        .map(|s2| draw_normal(delta, s2.sqrt(), &mut rng))
        .collect();

    ExperimentRecord {
        id: format!("exp-{index:05}"),
        weeks: cfg.weeks,
        treatment: ArmWeekly::with_counts(Arm::Treatment, counts.clone()),
        control: ArmWeekly::with_counts(Arm::Control, counts),
        observed_effect,
        effect_se2,
        weekly_cost: 0.0,
        latent_label: Some(label_for(cfg.means[z])),
    }
}

fn uniform<R: Rng + ?Sized>((lo, hi): (f64, f64), rng: &mut R) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Weekly trajectories with the total weekly cost split across experiments
/// in proportion to their final-week sample sizes.
pub fn simulate_trajectory_corpus(cfg: &TrajectorySimConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let mut corpus: Vec<ExperimentRecord> = (0..cfg.m)
        .into_par_iter()
        .map(|i| simulate_experiment(cfg, i))
        .collect();
    let final_n = |r: &ExperimentRecord| -> f64 {
        r.total_n_at(r.weeks).expect("simulated counts are complete") as f64
    };
    let total: f64 = corpus.iter().map(final_n).sum();
    for r in &mut corpus {
        r.weekly_cost = cfg.total_weekly_cost * final_n(r) / total;
    }
    Ok(corpus)
}
