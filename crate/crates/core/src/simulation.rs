//! Trajectories on a semi-infinite lattice.
//!
//! The lattice is open on the left (site 0 sees a laminar neighbour) and
//! grows on the right whenever the leading edge comes within
//! [`GUARD_BAND`] sites of the allocated end. The laminar prefix behind the
//! trailing edge is dropped periodically and replaced by an index offset, so
//! memory follows the width of the turbulent patch rather than the distance
//! it travelled.

use std::io::{self, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    onsite_fixed_points, single_site_lifetime_theory, site_update, site_update_unclamped, LatticeState,
    ModelParams,
};
use crate::error::{Error, Result};

pub const GUARD_BAND: usize = 64;
const TRIM_THRESHOLD: usize = 4096;

/// Amplitude distribution for seeded sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeLaw {
    /// Uniform on the open spreading window `(1 + delta, 2 + delta)`.
    UniformWindow,
    /// Every seeded site starts on the upper fixed point of the on-site map.
    UpperFixedPoint,
    /// Upper fixed point plus a uniform offset in `(-jitter, jitter)`. The
    /// exact fixed point can be invariant in floating point, which pins the
    /// site on the unstable orbit forever.
    NearUpperFixedPoint {
        jitter: f64,
    },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    SingleSite,
    /// `width` adjacent sites starting at site 0.
    MultiSite {
        width: usize,
    },
    /// Explicit profile starting at site 0; the amplitude law is ignored.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub kind: InitialKind,
    pub amplitude: AmplitudeLaw,
    pub seed: u64,
}

impl InitialCondition {
    /// One site drawn uniformly from the spreading window.
    pub fn single_site(seed: u64) -> Self {
        Self {
            kind: InitialKind::SingleSite,
            amplitude: AmplitudeLaw::UniformWindow,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// Site values of the initial profile, starting at site 0.
    pub fn profile(&self, params: &ModelParams) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = params.spreading_window();
        let draw = |rng: &mut ChaCha8Rng| -> Result<f64> {
            Ok(match self.amplitude {
                AmplitudeLaw::UniformWindow => loop {
                    let x = rng.random_range(lo..hi);
                    if x > lo {
                        break x;
                    }
                },
                AmplitudeLaw::UpperFixedPoint => onsite_fixed_points(params)?.x2,
                AmplitudeLaw::NearUpperFixedPoint { jitter } => {
                    onsite_fixed_points(params)?.x2 + jitter * rng.random_range(-1.0..1.0)
                }
                AmplitudeLaw::Fixed(x) => x,
            })
        };
        let sites = match &self.kind {
            InitialKind::SingleSite => vec![draw(&mut rng)?],
            InitialKind::MultiSite { width } => (0..*width).map(|_| draw(&mut rng)).collect::<Result<_>>()?,
            InitialKind::Explicit(v) => v.clone(),
        };
        if let Some(bad) = sites.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "initial site",
                value: *bad,
                reason: "initial values must be finite and >= 0",
            });
        }
        Ok(sites)
    }
}

/// Edges of the turbulent region at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSample {
    /// Rightmost site with `x > 0`.
    pub leading: i64,
    /// Leftmost site with `x > 0`.
    pub trailing: i64,
    pub active: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Decayed,
    MaxTimeReached,
    /// The patch grew wider than the configured width limit (a slug); the
    /// lifetime is censored like a max-time truncation.
    WidthLimitReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub max_time: u64,
    /// Keep the per-step edge history.
    pub record_edges: bool,
    /// Stop once `leading - trailing + 1` exceeds this many sites.
    pub width_limit: Option<usize>,
    /// Sites allocated up front; the lattice grows past this on demand.
    pub initial_capacity: usize,
    /// Clamp negative sums to zero (the model default). Without it negative
    /// values are kept and only exact zeros count as laminar.
    pub clamp_negative: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            max_time: 1_000_000,
            record_edges: true,
            width_limit: None,
            initial_capacity: 256,
            clamp_negative: true,
        }
    }
}

/// Result of one trajectory.
///
/// When edges are recorded, `edges[t]` describes time `t` for every
/// `t < lifetime` (time 0 is the initial profile).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    /// First time at which every site is zero, or the stopping time for
    /// censored runs.
    pub lifetime: u64,
    pub outcome: Outcome,
    pub edges: Vec<EdgeSample>,
}

impl TrajectoryRecord {
    pub fn is_censored(&self) -> bool {
        self.outcome != Outcome::Decayed
    }

    pub fn active_steps(&self) -> u64 {
        self.edges.len() as u64
    }
}

/// Semi-infinite lattice with an active window.
#[derive(Debug, Clone)]
pub struct Lattice {
    buf: Vec<f64>,
    offset: i64,
    lo: usize,
    hi: usize,
    active: u32,
    time: u64,
}

impl Lattice {
    pub fn new(profile: &[f64], capacity: usize) -> Self {
        let len = capacity.max(profile.len() + GUARD_BAND + 1);
        let mut buf = vec![0.0; len];
        buf[..profile.len()].copy_from_slice(profile);
        let mut lattice = Self {
            buf,
            offset: 0,
            lo: 0,
            hi: 0,
            active: 0,
            time: 0,
        };
        lattice.rescan();
        lattice
    }

    fn rescan(&mut self) {
        let nz: Vec<usize> = (0..self.buf.len()).filter(|&i| self.buf[i] != 0.0).collect();
        self.active = self.buf.iter().filter(|&&x| x > 0.0).count() as u32;
        match (nz.first(), nz.last()) {
            (Some(&a), Some(&b)) => {
                self.lo = a;
                self.hi = b;
            }
            _ => {
                self.lo = 0;
                self.hi = 0;
            }
        }
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn is_laminar(&self) -> bool {
        self.active == 0 && self.buf[self.lo] == 0.0 && self.buf[self.hi] == 0.0
    }

    /// Leading and trailing edge, or `None` when no site is positive.
    pub fn edges(&self) -> Option<EdgeSample> {
        if self.active == 0 {
            return None;
        }
        let trailing = (self.lo..=self.hi).find(|&i| self.buf[i] > 0.0)?;
        let leading = (self.lo..=self.hi).rev().find(|&i| self.buf[i] > 0.0)?;
        Some(EdgeSample {
            leading: leading as i64 + self.offset,
            trailing: trailing as i64 + self.offset,
            active: self.active,
        })
    }

    /// Value at global site `i`.
    pub fn value(&self, i: i64) -> f64 {
        let k = i - self.offset;
        if k < 0 || k as usize >= self.buf.len() {
            0.0
        } else {
            self.buf[k as usize]
        }
    }

    pub fn step(&mut self, params: &ModelParams, clamp: bool) {
        if self.hi + GUARD_BAND >= self.buf.len() {
            let grow = self.buf.len().max(1024);
            self.buf.resize(self.buf.len() + grow, 0.0);
        }
        let (alpha, h, delta) = (params.alpha(), params.h(), params.delta());
        let start = self.lo;
        let end = self.hi + 1;
        let mut new_lo = usize::MAX;
        let mut new_hi = 0;
        let mut active = 0u32;
        // right to left so the left neighbour is still the old value
        for i in (start..=end).rev() {
            let left = if i == 0 { 0.0 } else { self.buf[i - 1] };
            let v = if clamp {
                site_update(left, self.buf[i], alpha, h, delta)
            } else {
                site_update_unclamped(left, self.buf[i], alpha, h, delta)
            };
            self.buf[i] = v;
            if v != 0.0 {
                if new_lo == usize::MAX {
                    new_hi = i;
                }
                new_lo = i;
                if v > 0.0 {
                    active += 1;
                }
            }
        }
        self.time += 1;
        self.active = active;
        if new_lo == usize::MAX {
            self.lo = start;
            self.hi = start;
            return;
        }
        self.lo = new_lo;
        self.hi = new_hi;
        if self.lo > TRIM_THRESHOLD && self.lo > self.buf.len() / 2 {
            let cut = self.lo;
            self.buf.drain(..cut);
            self.buf.resize(self.buf.len() + cut, 0.0);
            self.offset += cut as i64;
            self.lo -= cut;
            self.hi -= cut;
        }
    }

    /// Copy of global sites `range` as a plain state.
    pub fn window(&self, range: Range<i64>) -> LatticeState {
        LatticeState {
            sites: range.map(|i| self.value(i)).collect(),
            time: self.time,
        }
    }
}

/// Runs one trajectory until it relaminarizes or a stopping rule fires.
pub fn run_trajectory(
    params: &ModelParams,
    ic: &InitialCondition,
    options: &RunOptions,
) -> Result<TrajectoryRecord> {
    let profile = ic.profile(params)?;
    Ok(run_profile(params, &profile, ic.seed, options))
}

pub fn run_profile(
    params: &ModelParams,
    profile: &[f64],
    seed: u64,
    options: &RunOptions,
) -> TrajectoryRecord {
    let mut lattice = Lattice::new(profile, options.initial_capacity);
    let mut edges = Vec::new();
    let finish = |lifetime, outcome, edges| TrajectoryRecord {
        seed,
        lifetime,
        outcome,
        edges,
    };
    loop {
        let t = lattice.time();
        if lattice.is_laminar() {
            return finish(t, Outcome::Decayed, edges);
        }
        if t >= options.max_time {
            return finish(t, Outcome::MaxTimeReached, edges);
        }
        let e = lattice.edges();
        if let Some(e) = e {
            if options.record_edges {
                edges.push(e);
            }
            if let Some(limit) = options.width_limit {
                if (e.leading - e.trailing + 1) as usize > limit {
                    return finish(t, Outcome::WidthLimitReached, edges);
                }
            }
        } else if options.record_edges {
            // only negative values left in an unclamped run
            edges.push(edges.last().copied().map_or(
                EdgeSample {
                    leading: 0,
                    trailing: 0,
                    active: 0,
                },
                |last| EdgeSample { active: 0, ..last },
            ));
        }
        lattice.step(params, options.clamp_negative);
    }
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn regression_slope(ys: impl ExactSizeIterator<Item = f64> + Clone) -> f64 {
    let n = ys.len() as f64;
    let mean_t = (n - 1.0) / 2.0;
    let mean_y = ys.clone().sum::<f64>() / n;
    let (mut sty, mut stt) = (0.0, 0.0);
    for (t, y) in ys.enumerate() {
        let dt = t as f64 - mean_t;
        sty += dt * (y - mean_y);
        stt += dt * dt;
    }
    sty / stt
}

/// Leading and trailing edge velocities over a window of time steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeVelocities {
    pub leading: f64,
    pub trailing: f64,
}

pub const MIN_VELOCITY_WINDOW: u64 = 10;

/// Regression slopes of the edge positions over `window`. The trailing edge
/// may jump several sites at once; the regression averages over the jumps.
pub fn measure_edge_velocities(record: &TrajectoryRecord, window: Range<u64>) -> Result<EdgeVelocities> {
    let len = window.end.saturating_sub(window.start);
    if len < MIN_VELOCITY_WINDOW {
        return Err(Error::InsufficientData(format!(
            "velocity window of {len} steps is shorter than {MIN_VELOCITY_WINDOW}"
        )));
    }
    if window.end > record.edges.len() as u64 {
        return Err(Error::InsufficientData(format!(
            "record is active for {} steps, window ends at {}",
            record.edges.len(),
            window.end
        )));
    }
    let slice = &record.edges[window.start as usize..window.end as usize];
    Ok(EdgeVelocities {
        leading: regression_slope(slice.iter().map(|e| e.leading as f64)),
        trailing: regression_slope(slice.iter().map(|e| e.trailing as f64)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Decay,
    Puff,
    Slug,
}

/// Thresholds of [`classify`]; lifetimes are in units of the single-site
/// escape time `tau_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationThresholds {
    pub decay_multiple: f64,
    pub long_lived_multiple: f64,
    pub slug_margin: f64,
    pub slug_min_window: u64,
    /// Fraction of the active history skipped as the initial transient
    /// before velocities are measured.
    pub transient_fraction: f64,
}

impl Default for ClassificationThresholds {
    fn default() -> Self {
        Self {
            decay_multiple: 10.0,
            long_lived_multiple: 1000.0,
            slug_margin: 0.01,
            slug_min_window: 500,
            transient_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Label,
    /// `lifetime > long_lived_multiple * tau_s`.
    pub long_lived: bool,
    /// NaN when no measurement window was available.
    pub v_leading: f64,
    pub v_trailing: f64,
    pub width_slope: f64,
}

/// Measurement window used by [`classify`]: the active history minus the
/// initial transient.
pub fn measurement_window(record: &TrajectoryRecord, transient_fraction: f64) -> Range<u64> {
    let n = record.edges.len() as u64;
    let skip = (n as f64 * transient_fraction).floor() as u64;
    skip..n
}

/// Decay / puff / slug label of a finished trajectory. `tau_s` is infinite
/// for `h <= 2`, so nothing is labelled decay or long-lived there by the
/// lifetime rules.
pub fn classify(
    record: &TrajectoryRecord,
    params: &ModelParams,
    thresholds: &ClassificationThresholds,
) -> Classification {
    let tau_s = single_site_lifetime_theory(params).unwrap_or(f64::INFINITY);
    let lifetime = record.lifetime as f64;
    let window = measurement_window(record, thresholds.transient_fraction);
    let velocities = if window.end - window.start >= thresholds.slug_min_window {
        measure_edge_velocities(record, window).ok()
    } else {
        None
    };
    let (v_leading, v_trailing) = velocities.map_or((f64::NAN, f64::NAN), |v| (v.leading, v.trailing));
    let width_slope = v_leading - v_trailing;
    let long_lived = lifetime > thresholds.long_lived_multiple * tau_s;
    let label = if record.outcome == Outcome::Decayed && lifetime <= thresholds.decay_multiple * tau_s {
        Label::Decay
    } else if record.outcome == Outcome::WidthLimitReached || width_slope > thresholds.slug_margin {
        Label::Slug
    } else {
        Label::Puff
    };
    Classification {
        label,
        long_lived,
        v_leading,
        v_trailing,
        width_slope,
    }
}

/// SplitMix64 finalizer: seed of trajectory `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// An ensemble of independent trajectories. Trajectory `k` uses the seed
/// `derive_seed(master_seed, k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub params: ModelParams,
    pub n: usize,
    /// Template; its seed is replaced per trajectory.
    pub initial: InitialCondition,
    pub options: RunOptions,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn seed_of(&self, index: usize) -> u64 {
        derive_seed(self.master_seed, index as u64)
    }
}

/// Runs `f` on a pool of `threads` workers (the global pool when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InsufficientData(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Maps every trajectory of the ensemble through `reduce` in parallel. The
/// output is ordered by trajectory index, so it does not depend on the number
/// of workers.
pub fn ensemble_map<T, F>(spec: &EnsembleSpec, threads: Option<usize>, reduce: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(TrajectoryRecord) -> T + Sync + Send,
{
    // surface initial-condition errors once instead of per trajectory
    spec.initial.profile(&spec.params)?;
    with_threads(threads, || {
        (0..spec.n)
            .into_par_iter()
            .map(|k| {
                let ic = spec.initial.with_seed(spec.seed_of(k));
                let record = run_trajectory(&spec.params, &ic, &spec.options)
                    .expect("initial condition validated above");
                reduce(record)
            })
            .collect()
    })
}

pub fn run_ensemble(spec: &EnsembleSpec, threads: Option<usize>) -> Result<Vec<TrajectoryRecord>> {
    ensemble_map(spec, threads, |r| r)
}

/// Outcome of the propagation scan around the puff threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationBracket {
    /// Largest scanned coupling for which the kicked neighbour stayed laminar.
    pub confined: f64,
    /// Smallest scanned coupling for which it became turbulent.
    pub propagating: f64,
}

/// Holds site 0 on the upper fixed point of the on-site map (repeated kicks
/// of the same size) and reports whether site 1 is driven into the spreading
/// window within `steps` updates.
pub fn kicks_propagate(params: &ModelParams, steps: u64) -> Result<bool> {
    let x2 = onsite_fixed_points(params)?.x2;
    let mut state = LatticeState::new(vec![x2, 0.0, 0.0]);
    let (threshold, _) = params.spreading_window();
    for _ in 0..steps {
        crate::dynamics::step_in_place(&mut state, params);
        state.sites[0] = x2;
        if state.sites[1..].iter().any(|&x| x >= threshold) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Brute-force scan of the coupling grid `alpha_lo + k * step` for the onset
/// of propagation.
pub fn propagation_onset_scan(
    h: f64,
    delta: f64,
    alpha_lo: f64,
    alpha_hi: f64,
    step: f64,
    steps: u64,
) -> Result<PropagationBracket> {
    if !(step > 0.0 && alpha_hi > alpha_lo) {
        return Err(Error::InvalidParameter {
            name: "step",
            value: step,
            reason: "scan needs step > 0 and a nonempty range",
        });
    }
    let n = ((alpha_hi - alpha_lo) / step).ceil() as u64;
    let mut confined = None;
    for k in 0..=n {
        let alpha = alpha_lo + k as f64 * step;
        let params = ModelParams::new(alpha, h, delta)?;
        if kicks_propagate(&params, steps)? {
            return match confined {
                Some(c) => Ok(PropagationBracket {
                    confined: c,
                    propagating: alpha,
                }),
                None => Err(Error::NoRootInBracket {
                    lo: alpha_lo,
                    hi: alpha_hi,
                }),
            };
        }
        confined = Some(alpha);
    }
    Err(Error::NoRootInBracket {
        lo: alpha_lo,
        hi: alpha_hi,
    })
}

/// Writes the space-time field of one trajectory: a `#` line with the
/// parameters and seed as JSON, a header row `site_0,...`, then one row of
/// site values per time step for `t = 0..=steps` (or until relaminarization,
/// whose all-zero row is included). Columns cover sites `0..=max leading edge`.
pub fn write_space_time<W: Write>(
    out: &mut W,
    params: &ModelParams,
    ic: &InitialCondition,
    steps: u64,
) -> Result<SpaceTimeSummary> {
    let profile = ic.profile(params)?;
    let opts = RunOptions {
        max_time: steps,
        record_edges: true,
        ..RunOptions::default()
    };
    // first pass fixes the column count
    let record = run_profile(params, &profile, ic.seed, &opts);
    let width = record
        .edges
        .iter()
        .map(|e| e.leading)
        .max()
        .unwrap_or(0)
        .max(profile.len() as i64 - 1)
        + 1;
    let header = serde_json_header(params, ic, steps);
    let io = |e: io::Error| Error::InsufficientData(format!("write failed: {e}"));
    writeln!(out, "# {header}").map_err(io)?;
    let names: Vec<String> = (0..width).map(|i| format!("site_{i}")).collect();
    writeln!(out, "{}", names.join(",")).map_err(io)?;
    let mut lattice = Lattice::new(&profile, opts.initial_capacity);
    let mut line = String::new();
    loop {
        line.clear();
        for i in 0..width {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", lattice.value(i)));
        }
        writeln!(out, "{line}").map_err(io)?;
        if lattice.is_laminar() || lattice.time() >= steps {
            break;
        }
        lattice.step(params, true);
    }
    Ok(SpaceTimeSummary {
        columns: width as usize,
        rows: lattice.time() + 1,
        record,
    })
}

#[derive(Debug, Clone)]
pub struct SpaceTimeSummary {
    pub columns: usize,
    pub rows: u64,
    pub record: TrajectoryRecord,
}

#[derive(Serialize)]
struct SpaceTimeHeader<'a> {
    alpha: f64,
    h: f64,
    delta: f64,
    seed: u64,
    kind: &'a InitialKind,
    amplitude: &'a AmplitudeLaw,
    steps: u64,
}

fn serde_json_header(params: &ModelParams, ic: &InitialCondition, steps: u64) -> String {
    serde_json::to_string(&SpaceTimeHeader {
        alpha: params.alpha(),
        h: params.h(),
        delta: params.delta(),
        seed: ic.seed,
        kind: &ic.kind,
        amplitude: &ic.amplitude,
        steps,
    })
    .expect("header fields serialize")
}
