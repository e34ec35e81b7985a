//! Method comparison: accuracy of the AES estimators across simulated
//! replications, and decision/utility metrics on a trajectory corpus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{decide_at_week, student_t_cdf, ExperimentRecord, Label};
use crate::error::{Error, Result};
use crate::meta_models::{extract_aes, fit, fit_pooled, FitConfig, Observation};
use crate::seed::split_seed;
use crate::simulation::{accuracy_replication, AccuracySimConfig};
use crate::utility::{evaluate_reward, optimize_aes, ProfilePoint, UtilityConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PooledMle,
    TwoLayerGmm,
    ThreeLayerGmm,
    UtilityMax,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::PooledMle,
        Method::TwoLayerGmm,
        Method::ThreeLayerGmm,
        Method::UtilityMax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::PooledMle => "pooled_mle",
            Method::TwoLayerGmm => "two_layer_gmm",
            Method::ThreeLayerGmm => "three_layer_gmm",
            Method::UtilityMax => "utility_max",
        }
    }

    /// Accepts the canonical names plus the short CLI aliases.
    pub fn parse(s: &str) -> Option<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pooled_mle" | "pooled" => Some(Method::PooledMle),
            "two_layer_gmm" | "gmm2" => Some(Method::TwoLayerGmm),
            "three_layer_gmm" | "gmm3" => Some(Method::ThreeLayerGmm),
            "utility_max" | "utility" => Some(Method::UtilityMax),
            _ => None,
        }
    }
}

/// Which observations the pooled estimate is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PooledFilter {
    All,
    /// Only experiments with a positive observed effect.
    PositiveObserved,
}

impl PooledFilter {
    pub fn apply(self, data: &[Observation]) -> Vec<Observation> {
        match self {
            PooledFilter::All => data.to_vec(),
            PooledFilter::PositiveObserved => data.iter().copied().filter(|o| o.d > 0.0).collect(),
        }
    }
}

/// Where the truth labels for FP/FN counting come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    /// Latent labels when every record has one, otherwise `EmpiricalDecision`.
    Auto,
    Latent,
    /// Positive iff the launch rule fires on the final week.
    EmpiricalDecision,
    /// Sign of the final-week observed effect.
    EmpiricalSign,
}

// ---------------------------------------------------------------------------
// accuracy

pub fn accuracy_metrics(estimates: &[f64], truth: f64) -> Result<(f64, f64)> {
    if estimates.is_empty() {
        return Err(Error::config("accuracy metrics need at least one estimate"));
    }
    let n = estimates.len() as f64;
    let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / n;
    let mae = estimates.iter().map(|e| (e - truth).abs()).sum::<f64>() / n;
    Ok((mse, mae))
}

/// Two-sided two-sample t-test with pooled variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
}

pub fn two_sample_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::config("t-test needs at least two values per sample"));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ss = |x: &[f64], m: f64| x.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let (ma, mb) = (mean(a), mean(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = (ss(a, ma) + ss(b, mb)) / df;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    if !(se > 0.0) {
        return Err(Error::numerical(0, "t-test samples have zero variance"));
    }
    let t_stat = (ma - mb) / se;
    let p_value = 2.0 * student_t_cdf(-t_stat.abs(), df)?;
    Ok(TTest { t_stat, df, p_value })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccuracyStudyConfig {
    pub sim: AccuracySimConfig,
    pub two_layer: FitConfig,
    pub three_layer: FitConfig,
    pub pooled_filter: PooledFilter,
}

impl Default for AccuracyStudyConfig {
    fn default() -> Self {
        AccuracyStudyConfig {
            sim: AccuracySimConfig::default(),
            two_layer: FitConfig::two_layer(),
            three_layer: FitConfig::three_layer(),
            pooled_filter: PooledFilter::PositiveObserved,
        }
    }
}

impl AccuracyStudyConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self.two_layer.seed = seed;
        self.three_layer.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.two_layer.validate()?;
        self.three_layer.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodAccuracy {
    pub method: Method,
    /// `None` when every replication failed.
    pub mse: Option<f64>,
    pub mae: Option<f64>,
    pub estimates: Vec<f64>,
    /// Per-replication squared errors, aligned with `estimates`.
    pub squared_errors: Vec<f64>,
    pub failures: Vec<ReplicationFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub truth: f64,
    pub replications: usize,
    pub methods: Vec<MethodAccuracy>,
    /// Three-layer versus two-layer squared errors.
    pub three_vs_two: Option<TTest>,
}

impl AccuracyReport {
    pub fn method(&self, m: Method) -> Option<&MethodAccuracy> {
        self.methods.iter().find(|r| r.method == m)
    }
}

fn replication_fit(data: &[Observation], cfg: &FitConfig, r: usize) -> Result<f64> {
    let cfg = cfg.clone().with_seed(split_seed(cfg.seed, r as u64));
    extract_aes(&fit(data, &cfg)?.params)
}

fn pooled_aes(data: &[Observation], filter: PooledFilter) -> Result<f64> {
    let mu0 = fit_pooled(&filter.apply(data))?.mu0;
    if !(mu0 > 0.0) {
        return Err(Error::estimation(format!(
            "pooled mean {mu0} is not a usable effect size"
        )));
    }
    Ok(mu0)
}

const ACCURACY_METHODS: [Method; 3] = [Method::PooledMle, Method::TwoLayerGmm, Method::ThreeLayerGmm];

/// Simulates `cfg.sim.replications` corpora and fits every estimator to
/// each. Replication `r` fits its mixtures with seed `split_seed(seed, r)`.
pub fn run_accuracy_study(cfg: &AccuracyStudyConfig) -> Result<AccuracyReport> {
    cfg.validate()?;
    let truth = cfg.sim.true_aes();
    let per_rep: Vec<[Result<f64>; 3]> = (0..cfg.sim.replications)
        .into_par_iter()
        .map(|r| {
            let data: Vec<Observation> = match accuracy_replication(&cfg.sim, r) {
                Ok(obs) => obs.iter().map(|o| o.observation()).collect(),
                Err(e) => return [Err(e.clone()), Err(e.clone()), Err(e)],
            };
            [
                pooled_aes(&data, cfg.pooled_filter),
                replication_fit(&data, &cfg.two_layer, r),
                replication_fit(&data, &cfg.three_layer, r),
            ]
        })
        .collect();

    let methods: Vec<MethodAccuracy> = ACCURACY_METHODS
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let mut estimates = Vec::new();
            let mut failures = Vec::new();
            for (r, res) in per_rep.iter().enumerate() {
                match &res[j] {
                    Ok(a) => estimates.push(*a),
                    Err(e) => failures.push(ReplicationFailure {
                        replication: r,
                        error: e.to_string(),
                    }),
                }
            }
            let metrics = accuracy_metrics(&estimates, truth).ok();
            MethodAccuracy {
                method,
                mse: metrics.map(|m| m.0),
                mae: metrics.map(|m| m.1),
                squared_errors: estimates.iter().map(|e| (e - truth).powi(2)).collect(),
                estimates,
                failures,
            }
        })
        .collect();

    let three_vs_two = two_sample_t_test(&methods[2].squared_errors, &methods[1].squared_errors).ok();
    Ok(AccuracyReport {
        truth,
        replications: cfg.sim.replications,
        methods,
        three_vs_two,
    })
}

// ---------------------------------------------------------------------------
// decisions and rewards

/// `(fp, fn)` over all `m` experiments: a false positive launches a flat or
/// negative experiment, a false negative holds back a positive one.
pub fn decision_errors(truth: &[Option<Label>], launched: &[bool]) -> Result<(f64, f64)> {
    if truth.len() != launched.len() {
        return Err(Error::data(format!(
            "{} truth labels for {} decisions",
            truth.len(),
            launched.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::data("no decisions to score"));
    }
    let (mut fp, mut fneg) = (0usize, 0usize);
    for (i, (label, &launch)) in truth.iter().zip(launched).enumerate() {
        let label = label.ok_or_else(|| Error::data(format!("experiment {i} has no truth label")))?;
        match (label, launch) {
            (Label::Positive, false) => fneg += 1,
            (Label::Flat | Label::Negative, true) => fp += 1,
            _ => {}
        }
    }
    let m = truth.len() as f64;
    Ok((fp as f64 / m, fneg as f64 / m))
}

/// Truth labels under `source`, together with the source actually used.
pub fn truth_labels(
    corpus: &[ExperimentRecord],
    source: TruthSource,
    ucfg: &UtilityConfig,
) -> Result<(Vec<Label>, TruthSource)> {
    let source = match source {
        TruthSource::Auto if corpus.iter().all(|r| r.latent_label.is_some()) => TruthSource::Latent,
        TruthSource::Auto => TruthSource::EmpiricalDecision,
        s => s,
    };
    let labels = corpus
        .iter()
        .map(|r| match source {
            TruthSource::Latent => r
                .latent_label
                .ok_or_else(|| Error::data(format!("experiment {} has no latent label", r.id))),
            TruthSource::EmpiricalDecision => Ok(if decide_at_week(r, r.weeks, &ucfg.policy)?.launch {
                Label::Positive
            } else {
                Label::Flat
            }),
            TruthSource::EmpiricalSign => {
                let d = r.final_effect()?;
                Ok(if d > 0.0 {
                    Label::Positive
                } else if d < 0.0 {
                    Label::Negative
                } else {
                    Label::Flat
                })
            }
            TruthSource::Auto => unreachable!(),
        })
        .collect::<Result<_>>()?;
    Ok((labels, source))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub estimated_aes: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub avg_weeks: f64,
    pub avg_opportunity_cost: f64,
    pub avg_launch_impact: f64,
    pub avg_in_experiment_impact: f64,
    pub avg_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFailure {
    pub method: Method,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub unit_label: String,
    pub truth_source: TruthSource,
    pub rows: Vec<MethodRow>,
    pub failures: Vec<MethodFailure>,
    /// Reward profile of the utility search, when that method ran.
    pub utility_profile: Option<Vec<ProfilePoint>>,
}

impl EvaluationReport {
    pub fn row(&self, m: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparisonConfig {
    pub methods: Vec<Method>,
    pub utility: UtilityConfig,
    pub two_layer: FitConfig,
    pub three_layer: FitConfig,
    pub pooled_filter: PooledFilter,
    pub truth_source: TruthSource,
    /// Echoed into the report; values are never rescaled.
    pub unit_label: String,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            methods: Method::ALL.to_vec(),
            utility: UtilityConfig::default(),
            two_layer: FitConfig::two_layer(),
            three_layer: FitConfig::three_layer(),
            pooled_filter: PooledFilter::PositiveObserved,
            truth_source: TruthSource::Auto,
            unit_label: String::new(),
        }
    }
}

impl ComparisonConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.two_layer.seed = seed;
        self.three_layer.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::config("method set is empty"));
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return Err(Error::config("method set lists a method twice"));
        }
        self.utility.validate()?;
        self.two_layer.validate()?;
        self.three_layer.validate()
    }
}

/// Final-week observed effects and their variances.
pub fn final_week_observations(corpus: &[ExperimentRecord]) -> Result<Vec<Observation>> {
    corpus
        .iter()
        .map(|r| Ok(Observation::new(r.final_effect()?, r.final_se2()?)))
        .collect()
}

/// Replays every experiment at the duration recommended for `aes` and
/// aggregates decisions and rewards.
pub fn evaluate_fixed_aes(
    corpus: &[ExperimentRecord],
    method: Method,
    aes: f64,
    truth: &[Label],
    ucfg: &UtilityConfig,
) -> Result<MethodRow> {
    if corpus.is_empty() {
        return Err(Error::data("corpus is empty"));
    }
    let rewards = corpus
        .par_iter()
        .map(|r| evaluate_reward(r, aes, ucfg))
        .collect::<Result<Vec<_>>>()?;
    let m = corpus.len() as f64;
    let launched: Vec<bool> = rewards.iter().map(|b| b.launched).collect();
    let truth: Vec<Option<Label>> = truth.iter().copied().map(Some).collect();
    let (fp_rate, fn_rate) = decision_errors(&truth, &launched)?;
    let mean = |f: &dyn Fn(&crate::utility::RewardBreakdown) -> f64| rewards.iter().map(f).sum::<f64>() / m;
    Ok(MethodRow {
        method,
        estimated_aes: aes,
        fp_rate,
        fn_rate,
        avg_weeks: mean(&|b| b.duration as f64),
        avg_opportunity_cost: mean(&|b| b.opportunity_cost),
        avg_launch_impact: mean(&|b| b.launch_impact),
        avg_in_experiment_impact: mean(&|b| b.in_experiment_impact),
        avg_reward: mean(&|b| b.total),
    })
}

enum Estimate {
    Aes(f64),
    Utility(f64, Vec<ProfilePoint>),
}

fn estimate(method: Method, corpus: &[ExperimentRecord], data: &[Observation], cfg: &ComparisonConfig) -> Result<Estimate> {
    Ok(match method {
        Method::PooledMle => Estimate::Aes(pooled_aes(data, cfg.pooled_filter)?),
        Method::TwoLayerGmm => Estimate::Aes(extract_aes(&fit(data, &cfg.two_layer)?.params)?),
        Method::ThreeLayerGmm => Estimate::Aes(extract_aes(&fit(data, &cfg.three_layer)?.params)?),
        Method::UtilityMax => {
            let opt = optimize_aes(corpus, &cfg.utility)?;
            Estimate::Utility(opt.best_aes, opt.profile)
        }
    })
}

/// Fits each requested estimator on the final-week effects, replays the
/// corpus at each estimate and reports one row per method. A method that
/// fails is listed under `failures` and the others still report.
pub fn run_comparison(corpus: &[ExperimentRecord], cfg: &ComparisonConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::data("corpus is empty"));
    }
    for r in corpus {
        r.validate()?;
    }
    let data = final_week_observations(corpus)?;
    let (truth, truth_source) = truth_labels(corpus, cfg.truth_source, &cfg.utility)?;

    let results: Vec<Result<(MethodRow, Option<Vec<ProfilePoint>>)>> = cfg
        .methods
        .par_iter()
        .map(|&method| {
            let run = || -> Result<_> {
                let (aes, profile) = match estimate(method, corpus, &data, cfg)? {
                    Estimate::Aes(a) => (a, None),
                    Estimate::Utility(a, p) => (a, Some(p)),
                };
                Ok((evaluate_fixed_aes(corpus, method, aes, &truth, &cfg.utility)?, profile))
            };
            run().map_err(|e| e.for_method(method.as_str()))
        })
        .collect();

    let mut report = EvaluationReport {
        unit_label: cfg.unit_label.clone(),
        truth_source,
        rows: Vec::new(),
        failures: Vec::new(),
        utility_profile: None,
    };
    for (&method, res) in cfg.methods.iter().zip(results) {
        match res {
            Ok((row, profile)) => {
                report.rows.push(row);
                if profile.is_some() {
                    report.utility_profile = profile;
                }
            }
            Err(e) => report.failures.push(MethodFailure {
                method,
                error: e.to_string(),
            }),
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// histogram

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

pub const DEFAULT_BINS: usize = 60;

pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if values.is_empty() {
        return Err(Error::data("histogram of an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("histogram values must be finite"));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Arm, ArmWeekly};
    use approx::assert_abs_diff_eq;

    #[test]
    fn accuracy_metric_cases() {
        assert_eq!(accuracy_metrics(&[2.0, 2.0], 2.0).unwrap(), (0.0, 0.0));
        assert_eq!(accuracy_metrics(&[1.0, 3.0], 2.0).unwrap(), (1.0, 1.0));
        let (mse, mae) = accuracy_metrics(&[2.7], 2.0).unwrap();
        assert_abs_diff_eq!(mse, 0.49, epsilon = 1e-12);
        assert_abs_diff_eq!(mae, 0.7, epsilon = 1e-12);
        assert!(matches!(accuracy_metrics(&[], 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn t_test_reference() {
        // scipy.stats.ttest_ind([1,2,3,4,5],[2,4,6,8,10,12])
        let t = two_sample_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]).unwrap();
        assert_abs_diff_eq!(t.t_stat, -2.215646837627989, epsilon = 1e-12);
        assert_eq!(t.df, 9.0);
        assert_abs_diff_eq!(t.p_value, 0.05394592050940708, epsilon = 1e-10);
    }

    #[test]
    fn decision_error_counts() {
        use Label::*;
        let truth = [Some(Positive), Some(Positive), Some(Flat), Some(Flat), Some(Negative)];
        assert_eq!(decision_errors(&truth, &[true, true, false, false, false]).unwrap(), (0.0, 0.0));
        // all-launch on 60% flat+negative
        assert_eq!(decision_errors(&truth, &[true; 5]).unwrap(), (0.6, 0.0));
        assert_eq!(decision_errors(&truth, &[false; 5]).unwrap(), (0.0, 0.4));
        assert!(decision_errors(&[Some(Flat), None], &[true, true]).is_err());
        assert!(decision_errors(&truth, &[true]).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.as_str()), Some(m));
        }
        assert_eq!(Method::parse("gmm3"), Some(Method::ThreeLayerGmm));
        assert_eq!(Method::parse("ols"), None);
    }

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0, 0.25], 4).unwrap();
        assert_eq!(h.edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(h.counts, vec![1, 1, 1, 2]);
        let flat = histogram(&[3.0; 4], 2).unwrap();
        assert_eq!(flat.counts.iter().sum::<u64>(), 4);
        assert!(histogram(&[1.0], 0).is_err());
        assert!(histogram(&[], 3).is_err());
    }

    fn fixture() -> Vec<ExperimentRecord> {
        let make = |id: &str, effects: [f64; 4], se: [f64; 4], n: [u64; 4], cost: f64, label| ExperimentRecord {
            id: id.into(),
            weeks: 4,
            treatment: ArmWeekly::with_counts(Arm::Treatment, n.to_vec()),
            control: ArmWeekly::with_counts(Arm::Control, n.to_vec()),
            observed_effect: effects.to_vec(),
            effect_se2: se.iter().map(|s| s * s).collect(),
            weekly_cost: cost,
            latent_label: Some(label),
        };
        vec![
            make("a", [0.9, 1.1, 1.0, 1.05], [0.8, 0.5, 0.3, 0.25], [100, 200, 300, 400], 10.0, Label::Positive),
            make("b", [0.4, -0.1, 0.05, 0.0], [0.9, 0.6, 0.4, 0.3], [90, 180, 270, 330], 8.0, Label::Flat),
            make("c", [1.5, 0.6, 0.2, 0.3], [1.0, 0.7, 0.5, 0.4], [50, 90, 120, 150], 3.0, Label::Positive),
        ]
    }

    #[test]
    fn fixed_aes_row_matches_hand_sums() {
        let corpus = fixture();
        let ucfg = UtilityConfig::default();
        let labels: Vec<Label> = corpus.iter().map(|r| r.latent_label.unwrap()).collect();
        let row = evaluate_fixed_aes(&corpus, Method::ThreeLayerGmm, 1.0, &labels, &ucfg).unwrap();

        // AES 1, z_α = -1.6449: power ≥ 0.8 needs se ≤ 1 / 2.4865 = 0.4022.
        // a: week 3 (se 0.3), z = 1.0/0.3 launches, d' = 1.05
        // b: week 3 (se 0.4), z = 0.05/0.4 holds
        // c: week 4 (se 0.4), z = 0.3/0.4 holds
        let ra = -20.0 + 1.05 * 300.0 + 1.05 * 49.0 * 600.0;
        let rb = -16.0 + 0.0;
        let rc = -9.0 + 0.3 * 150.0;
        assert_abs_diff_eq!(row.avg_weeks, 10.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(row.avg_reward, (ra + rb + rc) / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(
            row.avg_reward,
            row.avg_opportunity_cost + row.avg_launch_impact + row.avg_in_experiment_impact,
            epsilon = 1e-9
        );
        assert_eq!(row.fp_rate, 0.0);
        assert_abs_diff_eq!(row.fn_rate, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn failing_method_does_not_hide_others() {
        // Pooled on positive effects only has a single observation and fails.
        let mut corpus = fixture();
        corpus[2].observed_effect[3] = -0.3;
        let cfg = ComparisonConfig {
            methods: vec![Method::PooledMle, Method::UtilityMax],
            ..ComparisonConfig::default()
        };
        let report = run_comparison(&corpus, &cfg).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].method, Method::UtilityMax);
        assert_eq!(report.failures.len(), 1);
        assert!(report.failures[0].error.contains("pooled_mle"));
        assert_eq!(report.utility_profile.as_ref().unwrap().len(), 50);
        assert_eq!(report.truth_source, TruthSource::Latent);
    }

    #[test]
    fn empty_method_set_is_config_error() {
        let cfg = ComparisonConfig {
            methods: vec![],
            ..ComparisonConfig::default()
        };
        assert!(matches!(run_comparison(&fixture(), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn empirical_truth_uses_final_week_rule() {
        let corpus = fixture();
        let (labels, src) = truth_labels(&corpus, TruthSource::EmpiricalDecision, &UtilityConfig::default()).unwrap();
        assert_eq!(src, TruthSource::EmpiricalDecision);
        assert_eq!(labels, vec![Label::Positive, Label::Flat, Label::Flat]);
    }
}
