//! Lifetime samples, survival function and the exponential escape-rate fit.
//!
//! Lifetimes of a map are integers, and for a transient with constant
//! escape rate `kappa` the survival function decays as `exp(-kappa t)` at
//! integer times past some minimum lifetime `t0`. The fit therefore uses the
//! shifted geometric likelihood: with `d` observed decays and exposure
//! `S = sum(t_i - t0)` (censored runs contribute their exposure but no
//! decay), the per-step survival probability is `q = S / (S + d)` and the
//! rate is `kappa = -ln q = ln(1 + d / S)`. The reported mean lifetime is
//! `1 / kappa`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::simulation::TrajectoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifetimeSample {
    pub lifetime: u64,
    /// True when the run was stopped before it decayed.
    pub censored: bool,
}

impl From<&TrajectoryRecord> for LifetimeSample {
    fn from(r: &TrajectoryRecord) -> Self {
        Self {
            lifetime: r.lifetime,
            censored: r.is_censored(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub t: u64,
    /// Probability of surviving past `t`.
    pub survival: f64,
}

/// Kaplan-Meier estimate, one point per distinct decay time.
pub fn survival_function(samples: &[LifetimeSample]) -> Vec<SurvivalPoint> {
    let mut sorted: Vec<LifetimeSample> = samples.to_vec();
    // at equal times decays come before censorings
    sorted.sort_by_key(|s| (s.lifetime, s.censored));
    let mut at_risk = sorted.len() as f64;
    let mut s = 1.0;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].lifetime;
        let mut deaths = 0.0;
        let mut leaving = 0.0;
        while i < sorted.len() && sorted[i].lifetime == t {
            if !sorted[i].censored {
                deaths += 1.0;
            }
            leaving += 1.0;
            i += 1;
        }
        if deaths > 0.0 {
            s *= 1.0 - deaths / at_risk;
            out.push(SurvivalPoint { t, survival: s });
        }
        at_risk -= leaving;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LifetimeOffset {
    /// Minimum observed lifetime (falls back to 0 when that leaves no
    /// exposure, e.g. a single sample).
    SampleMinimum,
    Fixed(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Escape rate per step.
    pub rate: f64,
    pub rate_ci: (f64, f64),
    /// `1 / rate`.
    pub mean_lifetime: f64,
    pub mean_ci: (f64, f64),
    pub offset: u64,
    pub events: usize,
    pub censored: usize,
    /// Arithmetic mean of all lifetimes, censored ones at their cutoff.
    pub sample_mean: f64,
    /// Sup distance between the Kaplan-Meier curve and the fitted law.
    pub ks_statistic: f64,
    /// Asymptotic Kolmogorov p-value for `ks_statistic` at the effective
    /// sample size (the number of decays).
    pub ks_p_value: f64,
}

impl ExponentialFit {
    /// Probability under the fitted law that the lifetime exceeds `t`.
    /// The offset is the smallest possible lifetime.
    pub fn survival(&self, t: u64) -> f64 {
        if t < self.offset {
            1.0
        } else {
            (-self.rate * (t - self.offset + 1) as f64).exp()
        }
    }
}

/// Confidence level of the reported intervals.
pub const CONFIDENCE: f64 = 0.95;

pub fn fit_exponential_lifetimes(samples: &[LifetimeSample]) -> Result<ExponentialFit> {
    fit_exponential_lifetimes_with(samples, LifetimeOffset::SampleMinimum)
}

pub fn fit_exponential_lifetimes_with(
    samples: &[LifetimeSample],
    offset: LifetimeOffset,
) -> Result<ExponentialFit> {
    let events = samples.iter().filter(|s| !s.censored).count();
    if events == 0 {
        return Err(Error::InsufficientData("no uncensored lifetimes to fit".into()));
    }
    let exposure_from =
        |t0: u64| -> f64 { samples.iter().map(|s| s.lifetime.saturating_sub(t0) as f64).sum() };
    let t0 = match offset {
        LifetimeOffset::Fixed(t0) => t0,
        LifetimeOffset::SampleMinimum => {
            let min = samples.iter().map(|s| s.lifetime).min().unwrap_or(0);
            if exposure_from(min) > 0.0 {
                min
            } else {
                0
            }
        }
    };
    let exposure = exposure_from(t0);
    if exposure <= 0.0 {
        return Err(Error::InsufficientData(
            "lifetimes carry no exposure past the offset".into(),
        ));
    }
    let d = events as f64;
    let to_rate = |lambda: f64| (1.0 + lambda).ln();
    let rate = to_rate(d / exposure);
    let tail = (1.0 - CONFIDENCE) / 2.0;
    // exact Poisson interval for the per-exposure decay intensity
    let lo = ChiSquared::new(2.0 * d)
        .map(|c| c.inverse_cdf(tail) / (2.0 * exposure))
        .unwrap_or(0.0);
    let hi = ChiSquared::new(2.0 * d + 2.0)
        .map(|c| c.inverse_cdf(1.0 - tail) / (2.0 * exposure))
        .unwrap_or(f64::INFINITY);
    let rate_ci = (to_rate(lo), to_rate(hi));
    let sample_mean = samples.iter().map(|s| s.lifetime as f64).sum::<f64>() / samples.len() as f64;

    let mut fit = ExponentialFit {
        rate,
        rate_ci,
        mean_lifetime: 1.0 / rate,
        mean_ci: (1.0 / rate_ci.1, 1.0 / rate_ci.0),
        offset: t0,
        events,
        censored: samples.len() - events,
        sample_mean,
        ks_statistic: 0.0,
        ks_p_value: 1.0,
    };
    let ks = ks_against_fit(samples, &fit);
    fit.ks_statistic = ks;
    fit.ks_p_value = kolmogorov_p_value(ks, events);
    Ok(fit)
}

/// Fit of the lifetimes that reached `t0`, measured from `t0`. Runs that
/// ended earlier are dropped (left truncation), so an initial formation
/// transient with its own decay law does not enter the escape rate or the
/// KS distance.
pub fn fit_exponential_tail(samples: &[LifetimeSample], t0: u64) -> Result<ExponentialFit> {
    let tail: Vec<LifetimeSample> = samples.iter().filter(|s| s.lifetime >= t0).copied().collect();
    fit_exponential_lifetimes_with(&tail, LifetimeOffset::Fixed(t0))
}

/// Time after which a kicked single site has escaped with probability
/// `1 - residual`, given its mean escape time `tau_s`.
pub fn formation_transient(tau_s: f64, residual: f64) -> u64 {
    (tau_s * (1.0 / residual).ln()).ceil() as u64
}

/// Sup distance between the Kaplan-Meier survival and the fitted survival.
/// Both are step functions at integer times, so comparing at the decay
/// times and just before them covers the supremum.
fn ks_against_fit(samples: &[LifetimeSample], fit: &ExponentialFit) -> f64 {
    let km = survival_function(samples);
    let mut prev = 1.0;
    let mut d: f64 = 0.0;
    for p in &km {
        let model_after = fit.survival(p.t);
        let model_before = if p.t == 0 { 1.0 } else { fit.survival(p.t - 1) };
        d = d.max((p.survival - model_after).abs());
        d = d.max((prev - model_before).abs());
        prev = p.survival;
    }
    d
}

/// Asymptotic Kolmogorov tail probability with the Stephens small-sample
/// correction.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
