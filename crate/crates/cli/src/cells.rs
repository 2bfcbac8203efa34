//! One grid point of a sweep: an ensemble at fixed `(alpha, h)` reduced to
//! lifetime and classification statistics.

use anyhow::Result;
use serde::{Deserialize, Serialize};
use ucml_core::bifurcation::alpha_puff_threshold;
use ucml_core::dynamics::single_site_lifetime_theory;
use ucml_core::simulation::{
    classify, derive_seed, ensemble_map, EnsembleSpec, InitialCondition, InitialKind, Label, RunOptions,
};
use ucml_core::stats::{
    fit_exponential_lifetimes, fit_exponential_tail, formation_transient, ExponentialFit, LifetimeSample,
};
use ucml_core::ModelParams;

use crate::config::{LifetimeOptions, SweepConfig};

/// Seed of a sub-task identified by a path of indices under `master`.
pub fn sub_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |s, &k| derive_seed(s, k))
}

/// Start of the puff lifetime fit: the formation transient of the kicked
/// site. There is none below the puff threshold (no puff can form) or
/// without a finite single-site lifetime.
pub fn formation_cutoff(params: &ModelParams, options: &LifetimeOptions) -> Option<u64> {
    let residual = options.formation_residual?;
    let tau_s = single_site_lifetime_theory(params).ok()?;
    let above_threshold = alpha_puff_threshold(params).map_or(true, |ap| params.alpha() > ap);
    above_threshold.then(|| formation_transient(tau_s, residual))
}

pub fn estimate_lifetime(samples: &[LifetimeSample], cutoff: Option<u64>) -> Option<ExponentialFit> {
    match cutoff {
        Some(t0) => fit_exponential_tail(samples, t0).ok(),
        None => fit_exponential_lifetimes(samples).ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub alpha: f64,
    pub h: f64,
    /// `None` for `h <= 2`, where a single site never escapes on average.
    pub tau_s: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub censored: usize,
    pub tau_mean: Option<f64>,
    pub tau_ci_lo: Option<f64>,
    pub tau_ci_hi: Option<f64>,
    pub ks_p_value: Option<f64>,
    pub frac_decay: f64,
    pub frac_puff: f64,
    pub frac_slug: f64,
    /// Mean lifetime above `long_lived_multiple * tau_s`, or every run
    /// censored.
    pub long_lived: bool,
    /// Majority of runs labelled slug.
    pub slug: bool,
}

struct RunSummary {
    sample: LifetimeSample,
    label: Label,
}

/// Runs the ensemble of one grid point. Its trajectories use seeds derived
/// from `seed`, so the result depends only on the configuration.
pub fn run_cell(cfg: &SweepConfig, alpha: f64, h: f64, seed: u64) -> Result<CellStats> {
    let params = ModelParams::new(alpha, h, cfg.delta)?;
    let tau_s = single_site_lifetime_theory(&params).ok();
    let spec = EnsembleSpec {
        params,
        n: cfg.n,
        initial: InitialCondition {
            kind: InitialKind::SingleSite,
            amplitude: cfg.initial,
            seed: 0,
        },
        options: RunOptions {
            max_time: cfg.max_time,
            record_edges: true,
            width_limit: cfg.width_limit,
            ..RunOptions::default()
        },
        master_seed: seed,
    };
    let thresholds = cfg.thresholds;
    let runs = ensemble_map(&spec, None, |record| RunSummary {
        sample: LifetimeSample::from(&record),
        label: classify(&record, &params, &thresholds).label,
    })?;
    let samples: Vec<LifetimeSample> = runs.iter().map(|r| r.sample).collect();
    let fit = estimate_lifetime(&samples, formation_cutoff(&params, &cfg.lifetime));
    let frac = |l: Label| runs.iter().filter(|r| r.label == l).count() as f64 / runs.len() as f64;
    let censored = samples.iter().filter(|s| s.censored).count();
    let tau_mean = fit.map(|f| f.mean_lifetime);
    let long_lived = censored == samples.len()
        || match (tau_mean, tau_s) {
            (Some(t), Some(ts)) => t > thresholds.long_lived_multiple * ts,
            _ => false,
        };
    let frac_slug = frac(Label::Slug);
    Ok(CellStats {
        alpha,
        h,
        tau_s,
        n: cfg.n,
        seed,
        censored,
        tau_mean,
        tau_ci_lo: fit.map(|f| f.mean_ci.0),
        tau_ci_hi: fit.map(|f| f.mean_ci.1),
        ks_p_value: fit.map(|f| f.ks_p_value),
        frac_decay: frac(Label::Decay),
        frac_puff: frac(Label::Puff),
        frac_slug,
        long_lived,
        slug: frac_slug > 0.5,
    })
}
