use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ucml_core::simulation::{AmplitudeLaw, InitialKind};
use ucml_core::IntermittencyFit;
use ucml_sweep::commands::{self, resolve_threads, THREADS_ENV};
use ucml_sweep::config::{
    Embedded, FitConfig, Grid, RunConfig, SimulateConfig, SweepConfig, ThresholdConfig,
};
use ucml_sweep::output::Progress;
use ucml_sweep::presets;

#[derive(Parser)]
#[command(
    name = "ucml-sweep",
    version,
    about = "Sweeps over the unidirectionally coupled map lattice"
)]
struct Cli {
    /// No progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Space-time field of one trajectory.
    Simulate(SimulateArgs),
    /// Lifetime statistics at each (alpha, h) pair.
    Ensemble(SweepArgs),
    /// Leading and trailing edge velocities and the puff/slug line.
    Velocities(SweepArgs),
    /// Saddle-node coupling and the puff threshold curve (JSON on stdout).
    Thresholds(ThresholdArgs),
    /// Lifetime and regime over an (alpha, h) grid.
    PhaseDiagram(SweepArgs),
    /// Mean lifetime against the single-site lifetime, with the scaling fit.
    LifetimeScaling(SweepArgs),
    /// Refit the leading-edge law to a measured velocity table (JSON on stdout).
    FitIntermittency(FitArgs),
    /// Regenerate an output from the configuration embedded in it.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Amplitude {
    /// Uniform on the spreading window (1 + delta, 2 + delta).
    Uniform,
    /// Upper fixed point of the on-site map.
    UpperFixedPoint,
    /// Upper fixed point with a 1e-9 seeded offset.
    NearUpperFixedPoint,
}

impl From<Amplitude> for AmplitudeLaw {
    fn from(a: Amplitude) -> Self {
        match a {
            Amplitude::Uniform => AmplitudeLaw::UniformWindow,
            Amplitude::UpperFixedPoint => AmplitudeLaw::UpperFixedPoint,
            Amplitude::NearUpperFixedPoint => AmplitudeLaw::NearUpperFixedPoint { jitter: 1e-9 },
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of time steps.
    #[arg(long, default_value_t = 5000)]
    max_time: u64,
    /// Seed this many adjacent sites instead of one.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long, value_enum, default_value = "uniform")]
    amplitude: Amplitude,
    /// Output CSV; the config goes to `<out>.config.json`.
    #[arg(long, default_value = "space_time.csv")]
    out: PathBuf,
}

/// Flags shared by the grid sweeps. Unset flags keep the subcommand's
/// defaults, or the values of `--config` when given.
#[derive(Args)]
struct SweepArgs {
    /// Start from the configuration in this file (config JSON or output table).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Coupling values: `x`, `a,b,c` or `start:stop:step`.
    #[arg(long)]
    alpha: Option<Grid>,
    /// Slope values: `x`, `a,b,c` or `start:stop:step`.
    #[arg(long)]
    h: Option<Grid>,
    #[arg(long)]
    delta: Option<f64>,
    /// Trajectories per grid point.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    max_time: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop runs wider than this many sites (0 disables the limit).
    #[arg(long)]
    width_limit: Option<usize>,
    #[arg(long, value_enum)]
    amplitude: Option<Amplitude>,
    /// Fit lifetimes of all runs instead of skipping the formation transient.
    #[arg(long)]
    full_fit: bool,
    /// Slope of the fixed-h lifetime slice (phase diagram).
    #[arg(long)]
    inset_h: Option<f64>,
    /// Slope at which the leading-edge curve is measured (velocities).
    #[arg(long)]
    leading_h: Option<f64>,
    /// Coupling at which the trailing-edge curve is measured (velocities).
    #[arg(long)]
    trailing_alpha: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Keep completed cells of an interrupted run (phase diagram).
    #[arg(long)]
    resume: bool,
}

impl SweepArgs {
    fn build(&self, preset: SweepConfig, command: &str) -> Result<SweepConfig> {
        let mut c = match &self.config {
            Some(path) => match Embedded::read(path)?.run {
                RunConfig::Ensemble(c)
                | RunConfig::Velocities(c)
                | RunConfig::PhaseDiagram(c)
                | RunConfig::LifetimeScaling(c) => c,
                other => bail!(
                    "{} holds a {other:?} config, not a {command} sweep",
                    path.display()
                ),
            },
            None => preset,
        };
        if let Some(v) = &self.alpha {
            c.alpha = v.clone();
        }
        if let Some(v) = &self.h {
            c.h = v.clone();
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.max_time {
            c.max_time = v;
        }
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        if let Some(v) = self.width_limit {
            c.width_limit = (v > 0).then_some(v);
        }
        if let Some(v) = self.amplitude {
            c.initial = v.into();
        }
        if self.full_fit {
            c.lifetime.formation_residual = None;
        }
        if let Some(v) = self.inset_h {
            c.inset_h = Some(v);
        }
        if let Some(v) = self.leading_h {
            c.velocity.leading_h = v;
        }
        if let Some(v) = self.trailing_alpha {
            c.velocity.trailing_alpha = Some(v);
        }
        c.out = self.out.clone();
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value = "2.0:3.0:0.05")]
    h: Grid,
    /// Also write thresholds.json and puff_threshold.csv here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Leading-velocity table written by `velocities`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.02)]
    d_alpha_min: f64,
    #[arg(long, default_value_t = 0.15)]
    d_alpha_max: f64,
    /// Also write intermittency_fit.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RerunArgs {
    /// Output table or config file carrying the configuration.
    #[arg(long)]
    from: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let progress = Progress { quiet: cli.quiet };
    match cli.command {
        Command::Simulate(a) => {
            let cfg = SimulateConfig {
                alpha: a.alpha,
                h: a.h,
                delta: a.delta,
                seed: a.seed,
                max_time: a.max_time,
                kind: match a.width {
                    Some(width) => InitialKind::MultiSite { width },
                    None => InitialKind::SingleSite,
                },
                amplitude: a.amplitude.into(),
            };
            let r = commands::cmd_simulate(&cfg, &a.out)?;
            progress.note(format!(
                "wrote {} ({} rows x {} sites), {:?} after {} steps, label {:?}",
                a.out.display(),
                r.rows,
                r.columns,
                r.outcome,
                r.lifetime,
                r.label
            ));
        }
        Command::Ensemble(a) => {
            let cfg = a.build(presets::ensemble(), "ensemble")?;
            commands::cmd_ensemble(&cfg, resolve_threads(a.threads), progress)?;
            progress.note(format!("wrote {}", cfg.out.join("ensemble.csv").display()));
        }
        Command::Velocities(a) => {
            let cfg = a.build(presets::velocities(), "velocities")?;
            let r = commands::cmd_velocities(&cfg, resolve_threads(a.threads), progress)?;
            progress.note(format!(
                "wrote velocity tables to {}; {} transition points",
                cfg.out.display(),
                r.transition.len()
            ));
        }
        Command::Thresholds(a) => {
            let cfg = ThresholdConfig {
                delta: a.delta,
                h: a.h,
            };
            print_json(&commands::cmd_thresholds(&cfg, a.out.as_deref())?)?;
        }
        Command::PhaseDiagram(a) => {
            let cfg = a.build(presets::phase_diagram(), "phase-diagram")?;
            let r = commands::cmd_phase_diagram(&cfg, resolve_threads(a.threads), a.resume, progress)?;
            progress.note(format!(
                "wrote {} cells ({} reused) to {}",
                r.cells.len(),
                r.reused,
                cfg.out.display()
            ));
        }
        Command::LifetimeScaling(a) => {
            let cfg = a.build(presets::lifetime_scaling(), "lifetime-scaling")?;
            for r in commands::cmd_lifetime_scaling(&cfg, resolve_threads(a.threads), progress)? {
                match &r.fit {
                    Some(f) => progress.note(format!(
                        "alpha={}: B={} C={} R2={}",
                        r.alpha, f.b, f.c, f.r_squared
                    )),
                    None => progress.note(format!("alpha={}: too few lifetimes to fit", r.alpha)),
                }
            }
        }
        Command::FitIntermittency(a) => {
            let points = commands::read_leading_points(&a.input)
                .with_context(|| format!("reading {}", a.input.display()))?;
            let cfg = FitConfig {
                delta: a.delta,
                d_alpha_min: a.d_alpha_min,
                d_alpha_max: a.d_alpha_max,
                initial: IntermittencyFit::default(),
                points,
            };
            print_json(&commands::cmd_fit_intermittency(&cfg, a.out.as_deref())?)?;
        }
        Command::Rerun(a) => {
            commands::rerun(&a.from, &a.out, resolve_threads(a.threads), progress)?;
            progress.note(format!("wrote {}", a.out.display()));
        }
    }
    Ok(())
}
