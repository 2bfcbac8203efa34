//! Subcommands. Each returns its results and writes them under the output
//! path together with the configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ucml_core::bifurcation::{
    alpha_puff_threshold_for, saddle_node_for_delta, solve_leading_for_velocity, transition_line_puff_slug,
    SampledCurve, TheoreticalLeadingCurve, TheoreticalTrailingCurve,
};
use ucml_core::simulation::{
    classify, ensemble_map, with_threads, write_space_time, ClassificationThresholds, EnsembleSpec,
    InitialCondition, InitialKind, Label, Outcome, RunOptions,
};
use ucml_core::stats::{
    aggregate_velocities, fit_superexponential, refit_intermittency_constants, trajectory_velocities,
    VelocityTable,
};
use ucml_core::{IntermittencyFit, ModelParams, ScalingFit};

use crate::cells::{run_cell, sub_seed, CellStats};
use crate::config::{Embedded, FitConfig, RunConfig, SimulateConfig, SweepConfig, ThresholdConfig};
use crate::output::{cell, read_table, write_json, write_report, write_table, Progress};

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "UCML_THREADS";

/// Worker count: the explicit value, else the environment default, else
/// rayon's choice. Never affects results.
pub fn resolve_threads(explicit: Option<usize>) -> Option<usize> {
    explicit.or_else(|| std::env::var(THREADS_ENV).ok()?.parse().ok())
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub columns: usize,
    pub rows: u64,
    pub lifetime: u64,
    pub outcome: Outcome,
    pub label: Label,
    pub width_slope: Option<f64>,
    pub sidecar: PathBuf,
}

/// Path of the config sidecar next to a single-file output.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

pub fn cmd_simulate(cfg: &SimulateConfig, out: &Path) -> Result<SimulateReport> {
    let params = ModelParams::new(cfg.alpha, cfg.h, cfg.delta)?;
    let ic = InitialCondition {
        kind: cfg.kind.clone(),
        amplitude: cfg.amplitude,
        seed: cfg.seed,
    };
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut file = std::io::BufWriter::new(
        fs::File::create(out).with_context(|| format!("cannot write {}", out.display()))?,
    );
    let summary = write_space_time(&mut file, &params, &ic, cfg.max_time)?;
    std::io::Write::flush(&mut file)?;
    let sidecar = sidecar_path(out);
    write_json(&sidecar, &Embedded::new(RunConfig::Simulate(cfg.clone())))?;
    let c = classify(&summary.record, &params, &ClassificationThresholds::default());
    Ok(SimulateReport {
        columns: summary.columns,
        rows: summary.rows,
        lifetime: summary.record.lifetime,
        outcome: summary.record.outcome,
        label: c.label,
        width_slope: c.width_slope.is_finite().then_some(c.width_slope),
        sidecar,
    })
}

// ---------------------------------------------------------------- ensemble

const CELL_HEADER: [&str; 14] = [
    "alpha",
    "h",
    "tau_s",
    "n",
    "censored",
    "tau_mean",
    "tau_ci_lo",
    "tau_ci_hi",
    "ks_p_value",
    "frac_decay",
    "frac_puff",
    "frac_slug",
    "long_lived",
    "slug",
];

fn cell_row(c: &CellStats) -> Vec<String> {
    vec![
        c.alpha.to_string(),
        c.h.to_string(),
        cell(c.tau_s),
        c.n.to_string(),
        c.censored.to_string(),
        cell(c.tau_mean),
        cell(c.tau_ci_lo),
        cell(c.tau_ci_hi),
        cell(c.ks_p_value),
        c.frac_decay.to_string(),
        c.frac_puff.to_string(),
        c.frac_slug.to_string(),
        flag(c.long_lived),
        flag(c.slug),
    ]
}

/// Lifetime and classification statistics at every `(alpha, h)` pair.
pub fn cmd_ensemble(cfg: &SweepConfig, threads: Option<usize>, progress: Progress) -> Result<Vec<CellStats>> {
    cfg.validate()?;
    let embedded = Embedded::new(RunConfig::Ensemble(cfg.clone()));
    let hs = cfg.h.values();
    let alphas = cfg.alpha.values();
    let jobs: Vec<(usize, usize)> = (0..hs.len())
        .flat_map(|ih| (0..alphas.len()).map(move |ia| (ih, ia)))
        .collect();
    let total = jobs.len();
    let cells = with_threads(threads, || {
        jobs.par_iter()
            .map(|&(ih, ia)| {
                let (alpha, h) = (alphas[ia], hs[ih]);
                let c = run_cell(cfg, alpha, h, sub_seed(cfg.master_seed, &[ih as u64, ia as u64]))
                    .with_context(|| format!("cell alpha={alpha}, h={h}"))?;
                progress.note(format!("ensemble: alpha={alpha} h={h} done ({total} cells)"));
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    write_table(
        &cfg.out.join("ensemble.csv"),
        &embedded,
        &CELL_HEADER,
        cells.iter().map(cell_row),
    )?;
    write_json(&cfg.out.join("config.json"), &embedded)?;
    Ok(cells)
}

// -------------------------------------------------------------- thresholds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub delta: f64,
    pub alpha_sn: f64,
    pub x_fixed: f64,
    /// `alpha_sn g(x) - x` and `alpha_sn g'(x) - 1` at the fixed point.
    pub residuals: (f64, f64),
    /// `(h, alpha_P)`; slopes without a threshold are left out.
    pub alpha_p: Vec<(f64, f64)>,
}

pub fn cmd_thresholds(cfg: &ThresholdConfig, out: Option<&Path>) -> Result<ThresholdReport> {
    cfg.h.validate()?;
    let sn = saddle_node_for_delta(cfg.delta)?;
    let alpha_p = cfg
        .h
        .values()
        .into_iter()
        .filter_map(|h| alpha_puff_threshold_for(h, cfg.delta).ok().map(|a| (h, a)))
        .collect();
    let report = ThresholdReport {
        delta: cfg.delta,
        alpha_sn: sn.alpha_sn,
        x_fixed: sn.x_fixed,
        residuals: sn.residuals(),
        alpha_p,
    };
    if let Some(dir) = out {
        let embedded = Embedded::new(RunConfig::Thresholds(cfg.clone()));
        write_report(&dir.join("thresholds.json"), &embedded, &report)?;
        write_table(
            &dir.join("puff_threshold.csv"),
            &embedded,
            &["h", "alpha_P"],
            report
                .alpha_p
                .iter()
                .map(|(h, a)| vec![h.to_string(), a.to_string()]),
        )?;
    }
    Ok(report)
}

// -------------------------------------------------------------- velocities

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityReport {
    pub alpha_sn: f64,
    pub leading_h: f64,
    pub trailing_alpha: f64,
    /// `v_l` over the alpha grid.
    pub leading: VelocityTable,
    /// `v_t` over the h grid.
    pub trailing: VelocityTable,
    /// `(h, alpha_PS)` solved on the measured curves.
    pub transition: Vec<(f64, f64)>,
    /// Slopes whose trailing velocity the leading curve never reaches.
    pub truncated_h: Vec<f64>,
}

/// Per-trajectory `(v_l, v_t)` of the runs still active at `max_time`.
fn edge_velocity_samples(cfg: &SweepConfig, params: ModelParams, seed: u64) -> Result<Vec<(f64, f64)>> {
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
            ..RunOptions::default()
        },
        master_seed: seed,
    };
    let start = (cfg.max_time as f64 * cfg.velocity.transient_fraction).floor() as u64;
    let end = cfg.max_time;
    Ok(
        ensemble_map(&spec, None, |r| trajectory_velocities(&r, start, end))?
            .into_iter()
            .flatten()
            .collect(),
    )
}

/// Leading-edge velocities over the alpha grid at `velocity.leading_h`,
/// trailing-edge velocities over the h grid at the trailing coupling, and
/// the puff/slug line solved on the two measured curves.
pub fn cmd_velocities(
    cfg: &SweepConfig,
    threads: Option<usize>,
    progress: Progress,
) -> Result<VelocityReport> {
    cfg.validate()?;
    let sn = saddle_node_for_delta(cfg.delta)?;
    let trailing_alpha = cfg
        .velocity
        .trailing_alpha
        .unwrap_or(sn.alpha_sn + cfg.velocity.trailing_alpha_offset);
    let alphas = cfg.alpha.values();
    let hs = cfg.h.values();
    let jobs: Vec<(bool, usize, f64, f64)> = alphas
        .iter()
        .enumerate()
        .map(|(k, &a)| (true, k, a, cfg.velocity.leading_h))
        .chain(hs.iter().enumerate().map(|(k, &h)| (false, k, trailing_alpha, h)))
        .collect();
    let samples = with_threads(threads, || {
        jobs.par_iter()
            .map(|&(leading, k, alpha, h)| {
                let params = ModelParams::new(alpha, h, cfg.delta)?;
                let seed = sub_seed(cfg.master_seed, &[u64::from(!leading), k as u64]);
                let v = edge_velocity_samples(cfg, params, seed)
                    .with_context(|| format!("velocities at alpha={alpha}, h={h}"))?;
                progress.note(format!(
                    "velocities: alpha={alpha} h={h}: {} of {} runs active",
                    v.len(),
                    cfg.n
                ));
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let (lead_samples, trail_samples) = samples.split_at(alphas.len());
    let leading = aggregate_velocities(
        &alphas
            .iter()
            .zip(lead_samples)
            .map(|(&a, v)| (a, v.iter().map(|p| p.0).collect()))
            .collect::<Vec<_>>(),
    );
    let trailing = aggregate_velocities(
        &hs.iter()
            .zip(trail_samples)
            .map(|(&h, v)| (h, v.iter().map(|p| p.1).collect()))
            .collect::<Vec<_>>(),
    );
    let mut transition = Vec::new();
    let mut truncated_h = Vec::new();
    let curve = SampledCurve::new(leading.points()).ok();
    for row in &trailing.rows {
        match curve
            .as_ref()
            .and_then(|c| solve_leading_for_velocity(c, row.mean))
        {
            Some(a) => transition.push((row.param, a)),
            None => truncated_h.push(row.param),
        }
    }
    let report = VelocityReport {
        alpha_sn: sn.alpha_sn,
        leading_h: cfg.velocity.leading_h,
        trailing_alpha,
        leading,
        trailing,
        transition,
        truncated_h,
    };
    let embedded = Embedded::new(RunConfig::Velocities(cfg.clone()));
    let table = |t: &VelocityTable| -> Vec<Vec<String>> {
        t.rows
            .iter()
            .map(|r| vec![r.param.to_string(), r.mean.to_string(), r.std.to_string()])
            .collect()
    };
    write_table(
        &cfg.out.join("leading_velocities.csv"),
        &embedded,
        &["alpha", "v_l", "std"],
        table(&report.leading),
    )?;
    write_table(
        &cfg.out.join("trailing_velocities.csv"),
        &embedded,
        &["h", "v_t", "std"],
        table(&report.trailing),
    )?;
    write_table(
        &cfg.out.join("transition_line.csv"),
        &embedded,
        &["h", "alpha_PS"],
        report
            .transition
            .iter()
            .map(|(h, a)| vec![h.to_string(), a.to_string()]),
    )?;
    write_report(&cfg.out.join("velocities.json"), &embedded, &report)?;
    Ok(report)
}

// ----------------------------------------------------------- phase diagram

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CellOutcome {
    Computed(CellStats),
    Skipped { alpha: f64, h: f64, reason: String },
}

impl CellOutcome {
    pub fn alpha_h(&self) -> (f64, f64) {
        match self {
            CellOutcome::Computed(c) => (c.alpha, c.h),
            CellOutcome::Skipped { alpha, h, .. } => (*alpha, *h),
        }
    }

    pub fn stats(&self) -> Option<&CellStats> {
        match self {
            CellOutcome::Computed(c) => Some(c),
            CellOutcome::Skipped { .. } => None,
        }
    }
}

/// File contents of one completed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellFile {
    alpha: f64,
    h: f64,
    n: usize,
    seed: u64,
    outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayRow {
    pub h: f64,
    pub alpha_p: Option<f64>,
    /// Analytic puff/slug line: leading-edge law with the published
    /// constants against the trailing bound `ln(h/2)`.
    pub alpha_ps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    /// Row-major over `h`, then `alpha`.
    pub cells: Vec<CellOutcome>,
    /// Lifetime slice at `inset_h` over the alpha grid.
    pub inset: Vec<CellOutcome>,
    pub overlay: Vec<OverlayRow>,
    /// Cells taken from an earlier run.
    pub reused: usize,
}

fn load_or_run_cell(
    cfg: &SweepConfig,
    path: &Path,
    alpha: f64,
    h: f64,
    seed: u64,
    resume: bool,
) -> Result<(CellOutcome, bool)> {
    if resume && path.exists() {
        let done: CellFile = serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("corrupt cell file {}", path.display()))?;
        ensure!(
            done.alpha == alpha && done.h == h && done.n == cfg.n && done.seed == seed,
            "{} belongs to a different sweep",
            path.display()
        );
        return Ok((done.outcome, true));
    }
    let outcome = match run_cell(cfg, alpha, h, seed) {
        Ok(c) => CellOutcome::Computed(c),
        Err(e) => CellOutcome::Skipped {
            alpha,
            h,
            reason: format!("{e:#}"),
        },
    };
    write_json(
        path,
        &CellFile {
            alpha,
            h,
            n: cfg.n,
            seed,
            outcome: outcome.clone(),
        },
    )?;
    Ok((outcome, false))
}

/// Lifetime and classification over the `(alpha, h)` grid with the
/// threshold overlays and the fixed-h lifetime slice. Completed cells are
/// stored one file each under `cells/`; with `resume` they are read back
/// instead of recomputed.
pub fn cmd_phase_diagram(
    cfg: &SweepConfig,
    threads: Option<usize>,
    resume: bool,
    progress: Progress,
) -> Result<PhaseDiagram> {
    cfg.validate()?;
    let embedded = Embedded::new(RunConfig::PhaseDiagram(cfg.clone()));
    let config_path = cfg.out.join("config.json");
    if resume && config_path.exists() {
        // compared as serialized, which leaves out the output directory
        let previous = Embedded::read(&config_path)?;
        if previous.to_json() != embedded.to_json() {
            bail!(
                "{} holds a different configuration; resume needs the same config",
                config_path.display()
            );
        }
    }
    write_json(&config_path, &embedded)?;
    let cells_dir = cfg.out.join("cells");
    let alphas = cfg.alpha.values();
    let hs = cfg.h.values();
    // (path, alpha, h, seed): the grid, then the inset slice
    let mut jobs: Vec<(PathBuf, f64, f64, u64)> = Vec::new();
    for (ih, &h) in hs.iter().enumerate() {
        for (ia, &alpha) in alphas.iter().enumerate() {
            jobs.push((
                cells_dir.join(format!("h{ih:03}_a{ia:03}.json")),
                alpha,
                h,
                sub_seed(cfg.master_seed, &[0, ih as u64, ia as u64]),
            ));
        }
    }
    let grid_len = jobs.len();
    if let Some(h) = cfg.inset_h {
        for (ia, &alpha) in alphas.iter().enumerate() {
            jobs.push((
                cells_dir.join(format!("inset_a{ia:03}.json")),
                alpha,
                h,
                sub_seed(cfg.master_seed, &[1, ia as u64]),
            ));
        }
    }
    let total = jobs.len();
    let results = with_threads(threads, || {
        jobs.par_iter()
            .map(|(path, alpha, h, seed)| {
                let r = load_or_run_cell(cfg, path, *alpha, *h, *seed, resume)
                    .with_context(|| format!("cell alpha={alpha}, h={h}"))?;
                if !r.1 {
                    progress.note(format!("phase diagram: alpha={alpha} h={h} done ({total} cells)"));
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let reused = results.iter().filter(|r| r.1).count();
    let mut outcomes: Vec<CellOutcome> = results.into_iter().map(|r| r.0).collect();
    let inset = outcomes.split_off(grid_len);

    let sn = saddle_node_for_delta(cfg.delta)?;
    let leading = TheoreticalLeadingCurve {
        sn,
        fit: IntermittencyFit::default(),
        alpha_min: 0.0,
    };
    let trailing = TheoreticalTrailingCurve {
        h_max: hs.iter().copied().fold(f64::MIN, f64::max),
    };
    let lines = transition_line_puff_slug(&hs, &sn, &leading, &trailing);
    let overlay: Vec<OverlayRow> = hs
        .iter()
        .map(|&h| OverlayRow {
            h,
            alpha_p: lines.alpha_p.iter().find(|p| p.h == h).map(|p| p.alpha),
            alpha_ps: lines.alpha_ps.iter().find(|p| p.h == h).map(|p| p.alpha),
        })
        .collect();

    let header = [
        "alpha",
        "h",
        "status",
        "tau_s",
        "tau_mean",
        "tau_ci_lo",
        "tau_ci_hi",
        "frac_decay",
        "frac_puff",
        "frac_slug",
        "long_lived",
        "slug",
        "reason",
    ];
    let row = |o: &CellOutcome| -> Vec<String> {
        match o {
            CellOutcome::Computed(c) => vec![
                c.alpha.to_string(),
                c.h.to_string(),
                "computed".into(),
                cell(c.tau_s),
                cell(c.tau_mean),
                cell(c.tau_ci_lo),
                cell(c.tau_ci_hi),
                c.frac_decay.to_string(),
                c.frac_puff.to_string(),
                c.frac_slug.to_string(),
                flag(c.long_lived),
                flag(c.slug),
                String::new(),
            ],
            CellOutcome::Skipped { alpha, h, reason } => {
                let mut r = vec![alpha.to_string(), h.to_string(), "skipped".into()];
                r.extend(std::iter::repeat_n(String::new(), 9));
                r.push(reason.clone());
                r
            }
        }
    };
    write_table(
        &cfg.out.join("phase_diagram.csv"),
        &embedded,
        &header,
        outcomes.iter().map(row),
    )?;
    write_table(
        &cfg.out.join("overlay.csv"),
        &embedded,
        &["h", "alpha_P", "alpha_PS"],
        overlay
            .iter()
            .map(|o| vec![o.h.to_string(), cell(o.alpha_p), cell(o.alpha_ps)]),
    )?;
    if cfg.inset_h.is_some() {
        write_table(
            &cfg.out.join("inset.csv"),
            &embedded,
            &["alpha", "tau_mean", "tau_ci_lo", "tau_ci_hi"],
            inset.iter().map(|o| {
                let (alpha, _) = o.alpha_h();
                let s = o.stats();
                vec![
                    alpha.to_string(),
                    cell(s.and_then(|c| c.tau_mean)),
                    cell(s.and_then(|c| c.tau_ci_lo)),
                    cell(s.and_then(|c| c.tau_ci_hi)),
                ]
            }),
        )?;
    }
    Ok(PhaseDiagram {
        cells: outcomes,
        inset,
        overlay,
        reused,
    })
}

// --------------------------------------------------------- lifetime scaling

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub alpha: f64,
    pub cells: Vec<CellStats>,
    /// `None` when fewer than three slopes produced a lifetime.
    pub fit: Option<ScalingFit>,
}

fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}")
}

/// Mean lifetime over the h grid for each alpha, and the fit of
/// `ln tau = ln B + C tau_s` per alpha.
pub fn cmd_lifetime_scaling(
    cfg: &SweepConfig,
    threads: Option<usize>,
    progress: Progress,
) -> Result<Vec<ScalingReport>> {
    cfg.validate()?;
    let embedded = Embedded::new(RunConfig::LifetimeScaling(cfg.clone()));
    let alphas = cfg.alpha.values();
    let hs = cfg.h.values();
    let jobs: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|ia| (0..hs.len()).map(move |ih| (ia, ih)))
        .collect();
    let cells = with_threads(threads, || {
        jobs.par_iter()
            .map(|&(ia, ih)| {
                let (alpha, h) = (alphas[ia], hs[ih]);
                let c = run_cell(cfg, alpha, h, sub_seed(cfg.master_seed, &[ia as u64, ih as u64]))
                    .with_context(|| format!("lifetimes at alpha={alpha}, h={h}"))?;
                progress.note(format!(
                    "lifetime scaling: alpha={alpha} h={h} tau={}",
                    cell(c.tau_mean)
                ));
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut reports = Vec::new();
    for (ia, &alpha) in alphas.iter().enumerate() {
        let rows: Vec<CellStats> = cells[ia * hs.len()..(ia + 1) * hs.len()].to_vec();
        let points: Vec<(f64, f64)> = rows.iter().filter_map(|c| c.tau_mean.map(|t| (c.h, t))).collect();
        let fit = fit_superexponential(&points).ok();
        let tag = alpha_tag(alpha);
        write_table(
            &cfg.out.join(format!("lifetime_scaling_alpha_{tag}.csv")),
            &embedded,
            &["h", "tau_mean", "tau_ci_lo", "tau_ci_hi"],
            rows.iter().map(|c| {
                vec![
                    c.h.to_string(),
                    cell(c.tau_mean),
                    cell(c.tau_ci_lo),
                    cell(c.tau_ci_hi),
                ]
            }),
        )?;
        #[derive(Serialize)]
        struct FitBody<'a> {
            alpha: f64,
            #[serde(flatten)]
            fit: &'a Option<ScalingFit>,
        }
        write_report(
            &cfg.out.join(format!("scaling_fit_alpha_{tag}.json")),
            &embedded,
            &FitBody { alpha, fit: &fit },
        )?;
        reports.push(ScalingReport {
            alpha,
            cells: rows,
            fit,
        });
    }
    write_json(&cfg.out.join("config.json"), &embedded)?;
    Ok(reports)
}

// -------------------------------------------------------- fit-intermittency

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub a: f64,
    pub nu_c: f64,
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub xi: f64,
    /// Root mean square velocity residual.
    pub residual: f64,
    pub max_abs_deviation: f64,
    pub alpha_sn: f64,
    /// `(d_alpha, v_l)` used in the fit.
    pub points: Vec<(f64, f64)>,
}

/// `(alpha, v_l)` rows of a leading-velocity table.
pub fn read_leading_points(path: &Path) -> Result<Vec<(f64, f64)>> {
    let (_, rows) = read_table(path)?;
    let mut it = rows.into_iter();
    let header = it.next().context("empty velocity table")?;
    ensure!(
        header.get(0) == Some("alpha") && header.get(1) == Some("v_l"),
        "{} is not a leading-velocity table",
        path.display()
    );
    it.map(|r| -> Result<(f64, f64)> {
        Ok((
            r.get(0).context("missing alpha")?.parse()?,
            r.get(1).context("missing v_l")?.parse()?,
        ))
    })
    .collect()
}

/// Refits the leading-edge law to the points whose distance to the saddle
/// node lies in `[d_alpha_min, d_alpha_max]`.
pub fn cmd_fit_intermittency(cfg: &FitConfig, out: Option<&Path>) -> Result<FitReport> {
    let sn = saddle_node_for_delta(cfg.delta)?;
    let points: Vec<(f64, f64)> = cfg
        .points
        .iter()
        .map(|&(a, v)| (sn.alpha_sn - a, v))
        .filter(|&(d, _)| d >= cfg.d_alpha_min - 1e-12 && d <= cfg.d_alpha_max + 1e-12)
        .collect();
    let refit = refit_intermittency_constants(&points, &cfg.initial)?;
    let report = FitReport {
        a: refit.fit.a,
        nu_c: refit.fit.nu_c,
        amplitude: refit.fit.amplitude,
        xi: refit.fit.xi,
        residual: refit.residual,
        max_abs_deviation: refit.max_abs_deviation,
        alpha_sn: sn.alpha_sn,
        points,
    };
    if let Some(dir) = out {
        let embedded = Embedded::new(RunConfig::FitIntermittency(cfg.clone()));
        write_report(&dir.join("intermittency_fit.json"), &embedded, &report)?;
    }
    Ok(report)
}

// ------------------------------------------------------------------- rerun

/// Runs the configuration embedded in `from` (an output table or a config
/// file) again, writing into `out`.
pub fn rerun(from: &Path, out: &Path, threads: Option<usize>, progress: Progress) -> Result<()> {
    let embedded = Embedded::read(from)?;
    let with_out = |c: &SweepConfig| SweepConfig {
        out: out.to_path_buf(),
        ..c.clone()
    };
    match &embedded.run {
        RunConfig::Simulate(c) => {
            // the sidecar of `x.csv` is `x.csv.config.json`
            let name = from.file_name().context("no file name")?.to_string_lossy();
            let name = name.strip_suffix(".config.json").unwrap_or("space_time.csv");
            cmd_simulate(c, &out.join(name)).map(drop)
        }
        RunConfig::Ensemble(c) => cmd_ensemble(&with_out(c), threads, progress).map(drop),
        RunConfig::Velocities(c) => cmd_velocities(&with_out(c), threads, progress).map(drop),
        RunConfig::Thresholds(c) => cmd_thresholds(c, Some(out)).map(drop),
        RunConfig::PhaseDiagram(c) => cmd_phase_diagram(&with_out(c), threads, false, progress).map(drop),
        RunConfig::LifetimeScaling(c) => cmd_lifetime_scaling(&with_out(c), threads, progress).map(drop),
        RunConfig::FitIntermittency(c) => cmd_fit_intermittency(c, Some(out)).map(drop),
    }
}
