//! Statistics over ensembles of trajectories.

pub mod lifetimes;
pub mod lm;

use serde::{Deserialize, Serialize};

use crate::bifurcation::{trailing_velocity_theory, IntermittencyFit};
use crate::dynamics::single_site_lifetime_for_slope;
use crate::error::{Error, Result};
use crate::simulation::{measure_edge_velocities, TrajectoryRecord};

pub use lifetimes::{
    fit_exponential_lifetimes, fit_exponential_lifetimes_with, fit_exponential_tail, formation_transient,
    kolmogorov_p_value, survival_function, ExponentialFit, LifetimeOffset, LifetimeSample, SurvivalPoint,
};
pub use lm::{levenberg_marquardt, LmOptions, LmResult};

/// Lifetime and velocity summary of one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub samples: Vec<LifetimeSample>,
    pub survival: Vec<SurvivalPoint>,
    /// `None` when every run was censored.
    pub fit: Option<ExponentialFit>,
    pub velocities: Option<VelocitySummary>,
}

impl EnsembleStats {
    pub fn from_samples(samples: Vec<LifetimeSample>) -> Self {
        let survival = survival_function(&samples);
        let fit = fit_exponential_lifetimes(&samples).ok();
        Self {
            samples,
            survival,
            fit,
            velocities: None,
        }
    }

    pub fn from_records(records: &[TrajectoryRecord]) -> Self {
        Self::from_samples(records.iter().map(LifetimeSample::from).collect())
    }

    /// Mean lifetime from the escape-rate fit. Heavily censored ensembles
    /// would bias a plain average downwards, so this is the one to report.
    pub fn mean_lifetime(&self) -> Option<f64> {
        self.fit.map(|f| f.mean_lifetime)
    }
}

/// Mean and spread of one velocity over the trajectories of a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl VelocitySummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            n,
        })
    }
}

/// Edge velocities of one trajectory over `[start, end)`, or `None` if the
/// trajectory was not active for the whole window.
pub fn trajectory_velocities(record: &TrajectoryRecord, start: u64, end: u64) -> Option<(f64, f64)> {
    measure_edge_velocities(record, start..end)
        .ok()
        .map(|v| (v.leading, v.trailing))
}

/// One row of a velocity table: control parameter and velocity statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityRow {
    pub param: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityTable {
    pub rows: Vec<VelocityRow>,
}

impl VelocityTable {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rows.iter().map(|r| (r.param, r.mean))
    }
}

/// Per-grid-point velocity samples, reduced to mean and standard deviation.
/// Grid points without samples are dropped.
pub fn aggregate_velocities(per_point: &[(f64, Vec<f64>)]) -> VelocityTable {
    VelocityTable {
        rows: per_point
            .iter()
            .filter_map(|(param, values)| {
                VelocitySummary::from_values(values).map(|s| VelocityRow {
                    param: *param,
                    mean: s.mean,
                    std: s.std,
                    n: s.n,
                })
            })
            .collect(),
    }
}

/// Leading-edge table over `alpha` and trailing-edge table over `h`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCurves {
    pub leading: VelocityTable,
    pub trailing: VelocityTable,
}

pub fn aggregate_velocity_curves(
    leading_by_alpha: &[(f64, Vec<f64>)],
    trailing_by_h: &[(f64, Vec<f64>)],
) -> VelocityCurves {
    VelocityCurves {
        leading: aggregate_velocities(leading_by_alpha),
        trailing: aggregate_velocities(trailing_by_h),
    }
}

/// Rows whose mean trailing velocity falls below `ln(h/2)`.
pub fn trailing_bound_violations(trailing: &VelocityTable) -> Vec<VelocityRow> {
    trailing
        .rows
        .iter()
        .filter(|r| match trailing_velocity_theory(r.param) {
            Ok(bound) => r.mean < bound,
            Err(_) => false,
        })
        .copied()
        .collect()
}

/// Straight-line fit `ln tau = ln B + C tau_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "R2")]
    pub r_squared: f64,
    /// `ln tau - (ln B + C tau_s)` per input point.
    pub residuals: Vec<f64>,
}

/// Regresses `ln tau` on `tau_s = 1 / ln(h/2)` for `(h, tau)` pairs.
pub fn fit_superexponential(tau_by_h: &[(f64, f64)]) -> Result<ScalingFit> {
    if tau_by_h.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} points; the scaling fit needs at least 3",
            tau_by_h.len()
        )));
    }
    let mut xs = Vec::with_capacity(tau_by_h.len());
    let mut ys = Vec::with_capacity(tau_by_h.len());
    for &(h, tau) in tau_by_h {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "tau",
                value: tau,
                reason: "lifetimes must be positive",
            });
        }
        xs.push(single_site_lifetime_for_slope(h)?);
        ys.push(tau.ln());
    }
    let (intercept, slope, r_squared) = linear_regression(&xs, &ys);
    let residuals = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(ScalingFit {
        b: intercept.exp(),
        c: slope,
        r_squared,
        residuals,
    })
}

/// Ordinary least squares `y = a + b x`; returns `(a, b, R^2)`.
pub fn linear_regression(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (intercept, slope, r2)
}

/// Result of refitting the leading-edge law to measured velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermittencyRefit {
    pub fit: IntermittencyFit,
    /// Root mean square of the velocity residuals.
    pub residual: f64,
    pub max_abs_deviation: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Least-squares fit of the leading-edge law to `(d_alpha, v_l)` pairs.
///
/// The law depends on `a`, `nu_c` and `A` only through `a * nu_c` and
/// `a * A`, so `a` is held at its value in `initial` and the fit moves
/// `(nu_c, A, xi)`, each in log space so it stays positive.
pub fn refit_intermittency_constants(
    measurements: &[(f64, f64)],
    initial: &IntermittencyFit,
) -> Result<IntermittencyRefit> {
    if measurements.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} velocity points; need at least 3 to fit 3 constants",
            measurements.len()
        )));
    }
    if let Some(&(d, _)) = measurements.iter().find(|(d, _)| !(*d >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "d_alpha",
            value: d,
            reason: "distance to the saddle node must be >= 0",
        });
    }
    let a = initial.a;
    let model = |theta: &[f64]| IntermittencyFit {
        a,
        nu_c: theta[0].exp(),
        amplitude: theta[1].exp(),
        xi: theta[2].exp(),
    };
    let residuals = |theta: &[f64]| -> Vec<f64> {
        let fit = model(theta);
        measurements
            .iter()
            .map(|&(d, v)| fit.velocity_at(d) - v)
            .collect()
    };
    let x0 = [initial.nu_c.ln(), initial.amplitude.ln(), initial.xi.ln()];
    let res = levenberg_marquardt(residuals, &x0, &LmOptions::default())?;
    let fit = model(&res.params);
    let n = res.residuals.len() as f64;
    Ok(IntermittencyRefit {
        fit,
        residual: (res.residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt(),
        max_abs_deviation: res.residuals.iter().map(|r| r.abs()).fold(0.0, f64::max),
        iterations: res.iterations,
        trace: res.trace,
    })
}
