//! Run configurations. Every output file carries the configuration that
//! produced it, so any table can be regenerated from the table alone.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use ucml_core::simulation::{AmplitudeLaw, ClassificationThresholds, InitialKind};
use ucml_core::IntermittencyFit;

/// Tag written into every embedded configuration.
pub const FORMAT: &str = "ucml-sweep/1";

/// Values of one control parameter: an inclusive range or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        let g = Grid::Range { start, stop, step };
        g.validate()?;
        Ok(g)
    }

    pub fn single(x: f64) -> Self {
        Grid::List(vec![x])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Grid::Range { start, stop, step } => {
                ensure!(
                    start.is_finite() && stop.is_finite() && step.is_finite(),
                    "grid bounds must be finite"
                );
                ensure!(*step > 0.0, "grid step must be > 0, got {step}");
                ensure!(start <= stop, "empty grid: start {start} > stop {stop}");
            }
            Grid::List(v) => {
                ensure!(!v.is_empty(), "grid list is empty");
                ensure!(v.iter().all(|x| x.is_finite()), "grid values must be finite");
            }
        }
        Ok(())
    }

    /// Grid values. Range points are `start + k * step` rounded to 12
    /// decimals, so `2.0:2.3:0.1` yields `2.1` and not `2.1000000000000001`.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Range { start, stop, step } => {
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n)
                    .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
            Grid::List(v) => v.clone(),
        }
    }
}

/// `x`, `a,b,c` or `start:stop:step`.
impl FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("not a number: {t:?}"))
        };
        let g = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            ensure!(parts.len() == 3, "range must be start:stop:step, got {s:?}");
            Grid::Range {
                start: parse(parts[0])?,
                stop: parse(parts[1])?,
                step: parse(parts[2])?,
            }
        } else {
            Grid::List(s.split(',').map(parse).collect::<Result<_>>()?)
        };
        g.validate()?;
        Ok(g)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Range { start, stop, step } => write!(f, "{start}:{stop}:{step}"),
            Grid::List(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", s.join(","))
            }
        }
    }
}

/// Edge-velocity measurement protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VelocityOptions {
    /// Slope at which the leading-edge curve `v_l(alpha)` is measured.
    pub leading_h: f64,
    /// Coupling for the trailing-edge curve `v_t(h)`; `None` means
    /// `alpha_sn + trailing_alpha_offset`.
    pub trailing_alpha: Option<f64>,
    pub trailing_alpha_offset: f64,
    /// Fraction of `max_time` skipped before the regression window.
    pub transient_fraction: f64,
}

impl Default for VelocityOptions {
    fn default() -> Self {
        Self {
            leading_h: 2.05,
            trailing_alpha: None,
            trailing_alpha_offset: 0.05,
            transient_fraction: 0.2,
        }
    }
}

/// How mean lifetimes are estimated from an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifetimeOptions {
    /// Fit only runs that outlive the formation transient, the time after
    /// which the kicked site has escaped with probability
    /// `1 - formation_residual`. `None` fits every run.
    pub formation_residual: Option<f64>,
}

impl Default for LifetimeOptions {
    fn default() -> Self {
        Self {
            formation_residual: Some(0.01),
        }
    }
}

/// Configuration of the grid sweeps (ensemble, velocities, phase diagram,
/// lifetime scaling).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub alpha: Grid,
    pub h: Grid,
    pub delta: f64,
    /// Trajectories per grid point.
    pub n: usize,
    pub max_time: u64,
    pub master_seed: u64,
    pub initial: AmplitudeLaw,
    /// Runs wider than this many sites stop as censored slugs.
    pub width_limit: Option<usize>,
    pub thresholds: ClassificationThresholds,
    pub lifetime: LifetimeOptions,
    pub velocity: VelocityOptions,
    /// Slope of the fixed-h lifetime slice written next to the phase diagram.
    pub inset_h: Option<f64>,
    /// Not embedded: outputs are identical wherever they are written.
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            alpha: Grid::Range {
                start: 0.0,
                stop: 3.0,
                step: 0.1,
            },
            h: Grid::Range {
                start: 2.0,
                stop: 3.0,
                step: 0.05,
            },
            delta: ucml_core::dynamics::DEFAULT_DELTA,
            n: 100,
            max_time: 100_000,
            master_seed: 0,
            initial: AmplitudeLaw::UniformWindow,
            width_limit: Some(2000),
            thresholds: ClassificationThresholds::default(),
            lifetime: LifetimeOptions::default(),
            velocity: VelocityOptions::default(),
            inset_h: Some(2.1),
            out: PathBuf::from("out"),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.alpha.validate().context("alpha grid")?;
        self.h.validate().context("h grid")?;
        ensure!(self.n > 0, "ensemble size must be > 0");
        ensure!(self.max_time > 0, "max_time must be > 0");
        ensure!(
            self.delta.is_finite() && self.delta >= 0.0,
            "delta must be >= 0, got {}",
            self.delta
        );
        if let Some(r) = self.lifetime.formation_residual {
            ensure!(
                r > 0.0 && r < 1.0,
                "formation residual must be in (0, 1), got {r}"
            );
        }
        let f = self.velocity.transient_fraction;
        ensure!(
            (0.0..1.0).contains(&f),
            "transient fraction must be in [0, 1), got {f}"
        );
        Ok(())
    }
}

/// One space-time run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub alpha: f64,
    pub h: f64,
    pub delta: f64,
    pub seed: u64,
    pub max_time: u64,
    pub kind: InitialKind,
    pub amplitude: AmplitudeLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub delta: f64,
    pub h: Grid,
}

/// Refit of the leading-edge law. The measured points are part of the
/// configuration, so the fit can be rerun without the input table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub delta: f64,
    /// Window of `alpha_sn - alpha` used for the fit.
    pub d_alpha_min: f64,
    pub d_alpha_max: f64,
    pub initial: IntermittencyFit,
    /// Measured `(alpha, v_l)`.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Simulate(SimulateConfig),
    Ensemble(SweepConfig),
    Velocities(SweepConfig),
    Thresholds(ThresholdConfig),
    PhaseDiagram(SweepConfig),
    LifetimeScaling(SweepConfig),
    FitIntermittency(FitConfig),
}

/// Configuration as embedded in outputs: the run configuration tagged with
/// the format version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedded {
    pub format: String,
    #[serde(flatten)]
    pub run: RunConfig,
}

impl Embedded {
    pub fn new(run: RunConfig) -> Self {
        Self {
            format: FORMAT.to_string(),
            run,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("configs serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: Embedded = serde_json::from_str(s).context("malformed embedded config")?;
        if e.format != FORMAT {
            bail!("unsupported config format {:?} (expected {FORMAT:?})", e.format);
        }
        Ok(e)
    }

    /// Reads a config from a JSON file or from the `# ` line at the top of
    /// an output table.
    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let mut first = String::new();
        BufReader::new(file).read_line(&mut first)?;
        if let Some(json) = first.trim_end().strip_prefix("# ") {
            return Self::from_json(json);
        }
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_and_values() {
        let g: Grid = "2.0:2.3:0.1".parse().unwrap();
        assert_eq!(g.values(), vec![2.0, 2.1, 2.2, 2.3]);
        let g: Grid = "0.5,0.8".parse().unwrap();
        assert_eq!(g.values(), vec![0.5, 0.8]);
        let g: Grid = "2.16".parse().unwrap();
        assert_eq!(g.values(), vec![2.16]);
        assert!("1:0:0.1".parse::<Grid>().is_err());
        assert!("0:1:0".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
        assert!("".parse::<Grid>().is_err());
    }

    #[test]
    fn range_endpoints_survive_rounding() {
        let g = Grid::range(0.0, 3.0, 0.1).unwrap();
        let v = g.values();
        assert_eq!(v.len(), 31);
        assert_eq!(v[21], 2.1);
        assert_eq!(*v.last().unwrap(), 3.0);
    }

    #[test]
    fn embedded_round_trip_omits_output_dir() {
        let cfg = SweepConfig {
            out: PathBuf::from("/somewhere"),
            ..SweepConfig::default()
        };
        let e = Embedded::new(RunConfig::PhaseDiagram(cfg.clone()));
        let json = e.to_json();
        assert!(json.starts_with("{\"format\":\"ucml-sweep/1\",\"command\":\"phase-diagram\""));
        assert!(!json.contains("somewhere"));
        let back = Embedded::from_json(&json).unwrap();
        match back.run {
            RunConfig::PhaseDiagram(c) => {
                assert_eq!(c.out, SweepConfig::default().out);
                assert_eq!(
                    SweepConfig {
                        out: cfg.out.clone(),
                        ..c
                    },
                    cfg
                );
            }
            other => panic!("wrong command {other:?}"),
        }
    }

    #[test]
    fn partial_config_takes_defaults() {
        let e = Embedded::from_json(
            r#"{"format":"ucml-sweep/1","command":"ensemble","alpha":[0.1],"h":[2.5],"n":10}"#,
        )
        .unwrap();
        let RunConfig::Ensemble(c) = e.run else { panic!() };
        assert_eq!(c.n, 10);
        assert_eq!(c.max_time, SweepConfig::default().max_time);
        assert!(Embedded::from_json(r#"{"format":"other/2","command":"ensemble"}"#).is_err());
    }

    #[test]
    fn validation_rejects_bad_sweeps() {
        let ok = SweepConfig::default();
        assert!(ok.validate().is_ok());
        assert!(SweepConfig { n: 0, ..ok.clone() }.validate().is_err());
        assert!(SweepConfig {
            alpha: Grid::List(vec![]),
            ..ok.clone()
        }
        .validate()
        .is_err());
        let mut bad = ok;
        bad.lifetime.formation_residual = Some(1.5);
        assert!(bad.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn embedded_floats_round_trip_exactly(
            alpha in proptest::collection::vec(0.0f64..3.0, 1..5),
            delta in 1e-3f64..0.9,
        ) {
            let cfg = SweepConfig { alpha: Grid::List(alpha), delta, ..SweepConfig::default() };
            let e = Embedded::new(RunConfig::Ensemble(cfg));
            proptest::prop_assert_eq!(Embedded::from_json(&e.to_json()).unwrap(), e);
        }
    }
}
