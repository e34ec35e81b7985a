//! E-step, M-step and the penalized marginal log-likelihood.
//!
//! All functions use each observation's `se2` exactly as supplied; the
//! two-layer model is obtained by passing observations with `se2 = 0`.

use std::f64::consts::PI;

use super::{effect_variance, FitConfig, MixtureParams, Observation, Responsibilities, FLAT_INDEX};
use crate::error::{Error, Result};

const INNER_MAX_ROUNDS: usize = 100;
const ROOT_MAX_ITER: usize = 200;
const BRACKET_EXPANSIONS: usize = 3;

fn log_density(d: f64, se2: f64, mu: f64, tau2: f64) -> f64 {
    let v = tau2 + se2;
    -0.5 * (2.0 * PI * v).ln() - (d - mu) * (d - mu) / (2.0 * v)
}

/// Density of `d` under `N(mu, tau2 + se2)`.
pub fn component_density(d: f64, se2: f64, mu: f64, tau2: f64) -> Result<f64> {
    let v = tau2 + se2;
    if !(v > 0.0) {
        return Err(Error::domain(format!(
            "component variance tau2 + se2 must be positive, got {v}"
        )));
    }
    Ok(log_density(d, se2, mu, tau2).exp())
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Posterior component probabilities, normalized in log space.
pub fn e_step(data: &[Observation], params: &MixtureParams) -> Result<Responsibilities> {
    if data.is_empty() {
        return Err(Error::data("e-step on an empty data set"));
    }
    let k = params.k;
    let log_w: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let mut values = Vec::with_capacity(data.len() * k);
    let mut terms = vec![0.0; k];
    for (i, o) in data.iter().enumerate() {
        if o.d.is_nan() || o.se2.is_nan() {
            return Err(Error::data(format!("observation {i} is NaN")));
        }
        for j in 0..k {
            terms[j] = log_w[j] + log_density(o.d, o.se2, params.means[j], params.comp_vars[j]);
        }
        let norm = log_sum_exp(&terms);
        if !norm.is_finite() {
            return Err(Error::numerical(0, format!("observation {i} has zero likelihood")));
        }
        let start = values.len();
        values.extend(terms.iter().map(|t| (t - norm).exp()));
        let row = &mut values[start..];
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|w| *w /= total);
    }
    Ok(Responsibilities::from_rows(k, values))
}

/// Log-penalty `-(1/m) Σ_k (1/τ²_k + ln τ²_k)`, an inverse-gamma prior on
/// each component variance that vanishes as `m` grows.
fn log_penalty(comp_vars: &[f64], m: usize) -> f64 {
    -comp_vars.iter().map(|v| 1.0 / v + v.ln()).sum::<f64>() / m as f64
}

/// `Σ_i ln Σ_k π_k f_k(d_i)`, minus the variance penalty when `penalized`.
pub fn penalized_loglik(data: &[Observation], params: &MixtureParams, penalized: bool) -> f64 {
    let k = params.k;
    let log_w: Vec<f64> = params.weights.iter().map(|w| w.ln()).collect();
    let mut terms = vec![0.0; k];
    let mut total = 0.0;
    for o in data {
        for j in 0..k {
            terms[j] = log_w[j] + log_density(o.d, o.se2, params.means[j], params.comp_vars[j]);
        }
        total += log_sum_exp(&terms);
    }
    if penalized {
        total += log_penalty(&params.comp_vars, data.len());
    }
    total
}

/// Expected complete-data log-likelihood of one component, as a function of
/// its `(μ, τ²)`, with the component's share of the penalty.
struct ComponentObjective<'a> {
    data: &'a [Observation],
    resp: Vec<f64>,
    penalty_scale: f64,
}

impl ComponentObjective<'_> {
    fn value(&self, mu: f64, tau2: f64) -> f64 {
        let mut q = 0.0;
        for (o, &w) in self.data.iter().zip(&self.resp) {
            if w == 0.0 {
                continue;
            }
            let v = o.se2 + tau2;
            q += w * (-0.5 * v.ln() - (o.d - mu) * (o.d - mu) / (2.0 * v));
        }
        q - self.penalty_scale * (1.0 / tau2 + tau2.ln())
    }

    /// First and second derivative in `τ²`.
    ///
    /// Setting the first to zero gives the penalized variance equation
    ///
    /// ```text
    /// Σ_i ω_i / v_i = Σ_i ω_i (d_i - μ)² / v_i² + (2/m) (1 - τ²) / τ⁴,   v_i = σ²_i + τ²
    /// ```
    ///
    /// whose last term is the derivative of the log-penalty and disappears
    /// as `m → ∞`.
    fn tau2_derivatives(&self, mu: f64, tau2: f64) -> (f64, f64) {
        let mut g = 0.0;
        let mut h = 0.0;
        for (o, &w) in self.data.iter().zip(&self.resp) {
            if w == 0.0 {
                continue;
            }
            let v = o.se2 + tau2;
            let r2 = (o.d - mu) * (o.d - mu);
            let inv = 1.0 / v;
            g += w * (r2 * inv * inv - inv);
            h += w * (inv * inv - 2.0 * r2 * inv * inv * inv);
        }
        g *= 0.5;
        h *= 0.5;
        if self.penalty_scale > 0.0 {
            let inv = 1.0 / tau2;
            g += self.penalty_scale * (inv * inv - inv);
            h += self.penalty_scale * (inv * inv - 2.0 * inv * inv * inv);
        }
        (g, h)
    }

    /// Precision-weighted mean at fixed `τ²`; `None` for an empty component.
    fn weighted_mean(&self, tau2: f64) -> Option<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for (o, &w) in self.data.iter().zip(&self.resp) {
            let p = w / (o.se2 + tau2);
            num += p * o.d;
            den += p;
        }
        (den > 0.0 && den.is_finite()).then(|| num / den)
    }
}

/// Root of the `τ²` stationarity condition on `[lo, hi]`, where the
/// derivative is positive at `lo` and negative at `hi`. Newton steps with a
/// log-scale bisection fallback.
fn bracketed_root(obj: &ComponentObjective, mu: f64, mut lo: f64, mut hi: f64, start: f64) -> f64 {
    let mut x = start.clamp(lo, hi);
    if x <= lo || x >= hi {
        x = (lo * hi).sqrt();
    }
    for _ in 0..ROOT_MAX_ITER {
        let (g, h) = obj.tau2_derivatives(mu, x);
        if g == 0.0 {
            return x;
        }
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - g / h;
        let next = if h < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            (lo * hi).sqrt()
        };
        if (next - x).abs() <= 1e-14 * x || hi / lo - 1.0 <= 1e-14 {
            return next;
        }
        x = next;
    }
    x
}

/// One M-step: closed-form weights, then for each component an
/// alternating solve of the coupled mean / variance conditions.
pub fn m_step(
    data: &[Observation],
    resp: &Responsibilities,
    prev: &MixtureParams,
    cfg: &FitConfig,
) -> Result<MixtureParams> {
    let m = data.len();
    if resp.n_obs() != m || resp.k() != prev.k {
        return Err(Error::data(format!(
            "responsibilities are {}x{}, expected {m}x{}",
            resp.n_obs(),
            resp.k(),
            prev.k
        )));
    }
    let k = prev.k;
    let var_d = effect_variance(data);
    let upper = 10.0 * var_d;

    let mut weights: Vec<f64> = (0..k).map(|j| resp.column(j).sum::<f64>() / m as f64).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let mut means = prev.means.clone();
    let mut comp_vars = prev.comp_vars.clone();
    let penalty_scale = if cfg.penalized { 1.0 / m as f64 } else { 0.0 };

    for j in 0..k {
        let pinned = cfg.fix_flat_mean && j == FLAT_INDEX;
        let obj = ComponentObjective {
            data,
            resp: resp.column(j).collect(),
            penalty_scale,
        };
        let mut mu = if pinned { 0.0 } else { means[j] };
        let mut tau2 = comp_vars[j].max(cfg.var_floor);

        for _ in 0..INNER_MAX_ROUNDS {
            let mu_next = if pinned {
                0.0
            } else {
                obj.weighted_mean(tau2).unwrap_or(mu)
            };
            let tau2_next = update_tau2(&obj, j, mu_next, tau2, cfg.var_floor, upper)?;
            let change = (mu_next - mu).abs().max((tau2_next - tau2).abs());
            mu = mu_next;
            tau2 = tau2_next;
            if change < cfg.inner_tolerance {
                break;
            }
        }
        means[j] = mu;
        comp_vars[j] = tau2;
    }

    Ok(MixtureParams {
        k,
        weights,
        means,
        comp_vars,
        penalized_loglik: f64::NAN,
        n_iterations: prev.n_iterations + 1,
        converged: false,
    })
}

/// Maximizes the component objective over `τ²` at fixed `μ`, never
/// returning a value that lowers it.
fn update_tau2(
    obj: &ComponentObjective,
    component: usize,
    mu: f64,
    current: f64,
    floor: f64,
    upper: f64,
) -> Result<f64> {
    let (g_lo, _) = obj.tau2_derivatives(mu, floor);
    let candidate = if g_lo <= 0.0 {
        floor
    } else {
        let mut hi = upper;
        let mut bracketed = false;
        for _ in 0..=BRACKET_EXPANSIONS {
            if hi > floor && obj.tau2_derivatives(mu, hi).0 < 0.0 {
                bracketed = true;
                break;
            }
            hi *= 10.0;
        }
        if !bracketed {
            return Err(Error::numerical(
                component,
                format!("variance root not bracketed in [{floor:e}, {:e}]", hi / 10.0),
            ));
        }
        bracketed_root(obj, mu, floor, hi, current)
    };
    // Near the optimum Q is flat to within rounding, so a strict comparison
    // would keep a stale τ² depending on summation order. Accept the root
    // unless it is worse by more than rounding noise.
    let (new, old) = (obj.value(mu, candidate), obj.value(mu, current));
    if new >= old - 64.0 * f64::EPSILON * old.abs().max(1.0) {
        Ok(candidate)
    } else {
        Ok(current)
    }
}
