//! Multi-start EM driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::em::{e_step, m_step, penalized_loglik};
use super::{
    check_observations, effect_variance, FitConfig, MixtureParams, Observation, Responsibilities,
    FLAT_INDEX,
};
use crate::error::{Error, Result};
use crate::seed::split_seed;

const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Kmeans,
    Random,
    /// k-means was requested but produced a degenerate clustering.
    RandomFallback,
}

/// Diagnostics for one EM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub start: usize,
    pub init: InitKind,
    pub final_loglik: Option<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    /// Penalized log-likelihood after initialization and after every M-step.
    pub trace: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub params: MixtureParams,
    pub responsibilities: Responsibilities,
    pub best_start: usize,
    pub runs: Vec<RunSummary>,
}

/// Fits the mixture by EM from `cfg.n_starts` starting points and keeps the
/// run with the highest final penalized log-likelihood (ties go to the
/// lowest start index). Components come back in decreasing-mean order,
/// with the pinned flat component, if any, kept at index 1.
pub fn fit(data: &[Observation], cfg: &FitConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    check_observations(data)?;
    let m = data.len();
    if m < 2 * cfg.k {
        return Err(Error::data(format!(
            "need at least {} observations for K={}, got {m}",
            2 * cfg.k,
            cfg.k
        )));
    }
    let effective: Vec<Observation> = if cfg.heteroscedastic {
        data.to_vec()
    } else {
        data.iter().map(|o| Observation::new(o.d, 0.0)).collect()
    };
    if !(effect_variance(&effective) > 0.0) {
        return Err(Error::data("observed effects have zero variance"));
    }
    let mut sorted: Vec<f64> = effective.iter().map(|o| o.d).collect();
    sorted.sort_by(f64::total_cmp);

    let runs: Vec<(RunSummary, Option<MixtureParams>)> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|start| run_from_start(&effective, &sorted, cfg, start))
        .collect();

    let mut best: Option<(usize, MixtureParams)> = None;
    for (summary, params) in &runs {
        if let (Some(p), Some(ll)) = (params, summary.final_loglik) {
            let better = match &best {
                None => true,
                Some((_, b)) => ll > b.penalized_loglik,
            };
            if better {
                best = Some((summary.start, p.clone()));
            }
        }
    }
    let (best_start, mut params) = best.ok_or_else(|| {
        let first = runs
            .iter()
            .find_map(|(s, _)| s.error.clone())
            .unwrap_or_else(|| "no finite log-likelihood".into());
        Error::numerical(0, format!("all {} EM starts failed; first error: {first}", cfg.n_starts))
    })?;

    let perm = relabel_order(&params.means, cfg.fix_flat_mean);
    params.permute(&perm);
    let responsibilities = e_step(&effective, &params)?;

    Ok(FitOutcome {
        params,
        responsibilities,
        best_start,
        runs: runs.into_iter().map(|(s, _)| s).collect(),
    })
}

/// `perm[new] = old` sorting means in decreasing order; a pinned flat
/// component keeps its slot and the others are sorted around it.
fn relabel_order(means: &[f64], fix_flat: bool) -> Vec<usize> {
    let mut free: Vec<usize> = (0..means.len())
        .filter(|&j| !(fix_flat && j == FLAT_INDEX))
        .collect();
    free.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    if fix_flat {
        free.insert(FLAT_INDEX, FLAT_INDEX);
    }
    free
}

fn run_from_start(
    data: &[Observation],
    sorted: &[f64],
    cfg: &FitConfig,
    start: usize,
) -> (RunSummary, Option<MixtureParams>) {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(cfg.seed, start as u64));
    let (init_kind, init) = if start == 0 && cfg.kmeans_start {
        match kmeans_init(data, sorted, cfg) {
            Some(p) => (InitKind::Kmeans, p),
            None => (InitKind::RandomFallback, random_init(data, sorted, cfg, &mut rng)),
        }
    } else {
        (InitKind::Random, random_init(data, sorted, cfg, &mut rng))
    };

    let mut summary = RunSummary {
        start,
        init: init_kind,
        final_loglik: None,
        n_iterations: 0,
        converged: false,
        trace: Vec::new(),
        error: None,
    };
    match run_em(data, init, cfg, &mut summary.trace) {
        Ok(params) => {
            summary.final_loglik = Some(params.penalized_loglik);
            summary.n_iterations = params.n_iterations;
            summary.converged = params.converged;
            (summary, Some(params))
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            summary.n_iterations = summary.trace.len().saturating_sub(1);
            (summary, None)
        }
    }
}

fn run_em(
    data: &[Observation],
    mut params: MixtureParams,
    cfg: &FitConfig,
    trace: &mut Vec<f64>,
) -> Result<MixtureParams> {
    let m = data.len() as f64;
    let mut ll = penalized_loglik(data, &params, cfg.penalized);
    trace.push(ll);
    params.n_iterations = 0;
    for _ in 0..cfg.max_iterations {
        let resp = e_step(data, &params)?;
        params = m_step(data, &resp, &params, cfg)?;
        let next = penalized_loglik(data, &params, cfg.penalized);
        if !next.is_finite() {
            return Err(Error::numerical(0, "log-likelihood became non-finite"));
        }
        trace.push(next);
        let change = (next - ll).abs() / m;
        ll = next;
        if change < cfg.tolerance {
            params.converged = true;
            break;
        }
    }
    params.penalized_loglik = ll;
    Ok(params)
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn random_init(data: &[Observation], sorted: &[f64], cfg: &FitConfig, rng: &mut ChaCha8Rng) -> MixtureParams {
    let k = cfg.k;
    let var_d = effect_variance(data);
    let mut means: Vec<f64> = (0..k).map(|_| quantile(sorted, rng.random::<f64>())).collect();
    means.sort_by(|a, b| b.total_cmp(a));
    if cfg.fix_flat_mean {
        means[FLAT_INDEX] = 0.0;
    }
    let comp_vars: Vec<f64> = (0..k)
        .map(|_| (var_d * rng.random_range(0.5..2.0)).max(cfg.var_floor))
        .collect();
    // Dirichlet(1, ..., 1) via normalized exponentials.
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    MixtureParams {
        k,
        weights,
        means,
        comp_vars,
        penalized_loglik: f64::NAN,
        n_iterations: 0,
        converged: false,
    }
}

/// One-dimensional Lloyd's k-means on `d`, seeded at evenly spaced
/// quantiles. Returns `None` when a cluster ends up empty or two centroids
/// coincide.
fn kmeans_init(data: &[Observation], sorted: &[f64], cfg: &FitConfig) -> Option<MixtureParams> {
    let k = cfg.k;
    let m = data.len();
    let mut centroids: Vec<f64> = (0..k)
        .map(|j| quantile(sorted, 1.0 - (j as f64 + 0.5) / k as f64))
        .collect();
    let mut assign = vec![usize::MAX; m];

    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (a, o) in assign.iter_mut().zip(data) {
            let nearest = (0..k)
                .min_by(|&x, &y| {
                    (o.d - centroids[x]).abs().total_cmp(&(o.d - centroids[y]).abs())
                })
                .unwrap();
            if *a != nearest {
                *a = nearest;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for (&a, o) in assign.iter().zip(data) {
            sums[a] += o.d;
            counts[a] += 1;
        }
        if counts.contains(&0) {
            return None;
        }
        for j in 0..k {
            centroids[j] = sums[j] / counts[j] as f64;
        }
        if !changed {
            break;
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centroids[b].total_cmp(&centroids[a]));
    if order.windows(2).any(|w| centroids[w[0]] == centroids[w[1]]) {
        return None;
    }

    let var_d = effect_variance(data);
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut comp_vars = Vec::with_capacity(k);
    for &j in &order {
        let members: Vec<&Observation> = assign
            .iter()
            .zip(data)
            .filter(|(&a, _)| a == j)
            .map(|(_, o)| o)
            .collect();
        let n = members.len() as f64;
        let mean = centroids[j];
        let within = members.iter().map(|o| (o.d - mean).powi(2)).sum::<f64>() / n;
        let noise = members.iter().map(|o| o.se2).sum::<f64>() / n;
        weights.push(n / m as f64);
        means.push(mean);
        comp_vars.push((within - noise).max(0.05 * var_d).max(cfg.var_floor));
    }
    if cfg.fix_flat_mean {
        means[FLAT_INDEX] = 0.0;
    }
    Some(MixtureParams {
        k,
        weights,
        means,
        comp_vars,
        penalized_loglik: f64::NAN,
        n_iterations: 0,
        converged: false,
    })
}
