//! On-site map, coupling map and the synchronous lattice update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slope at which the cut-off tent map stops being transiently chaotic.
pub const CRITICAL_SLOPE: f64 = 2.0;

/// Offset of the cut-off used throughout the model studies.
pub const DEFAULT_DELTA: f64 = 0.1;

/// Control parameters of the lattice.
///
/// `alpha` is the coupling strength, `h` the tent-map slope and `delta` the
/// width of the flat piece next to the laminar state. The critical slope is
/// [`CRITICAL_SLOPE`] and is not a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    h: f64,
    delta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    h: f64,
    delta: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.alpha, raw.h, raw.delta)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            alpha: p.alpha,
            h: p.h,
            delta: p.delta,
        }
    }
}

impl ModelParams {
    pub fn new(alpha: f64, h: f64, delta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "must be finite and >= 0",
            });
        }
        if !(h.is_finite() && h > 1.0) {
            return Err(Error::InvalidParameter {
                name: "h",
                value: h,
                reason: "must be finite and > 1",
            });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(Self { alpha, h, delta })
    }

    /// Parameters with the default cut-off offset.
    pub fn with_default_delta(alpha: f64, h: f64) -> Result<Self> {
        Self::new(alpha, h, DEFAULT_DELTA)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn critical_slope(&self) -> f64 {
        CRITICAL_SLOPE
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.h, self.delta)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::new(self.alpha, h, self.delta)
    }

    /// Open interval of amplitudes for which the coupling is positive, so that
    /// a single excited site can push its downstream neighbour.
    pub fn spreading_window(&self) -> (f64, f64) {
        (1.0 + self.delta, 2.0 + self.delta)
    }
}

/// Cut-off tent map acting on a single site.
#[inline]
pub fn onsite_map_raw(x: f64, h: f64, delta: f64) -> f64 {
    if x >= delta && x < 1.0 + delta {
        h * (x - delta)
    } else if x >= 1.0 + delta {
        -h * (x - 2.0 - delta)
    } else {
        0.0
    }
}

/// Cubic forward coupling, zero outside `[delta, 2 + delta)`.
#[inline]
pub fn coupling_map_raw(x: f64, delta: f64) -> f64 {
    if x >= delta && x < 2.0 + delta {
        -1.5 * (x - delta) * (x - 1.0 - delta) * (x - 2.0 - delta)
    } else {
        0.0
    }
}

/// Derivative of the coupling on the interior of its support.
#[inline]
pub fn coupling_map_derivative_raw(x: f64, delta: f64) -> f64 {
    if x >= delta && x < 2.0 + delta {
        let u = x - delta;
        // d/du of -1.5 u (u-1)(u-2) = -1.5 (3u^2 - 6u + 2)
        -1.5 * (3.0 * u * u - 6.0 * u + 2.0)
    } else {
        0.0
    }
}

pub fn onsite_map(x: f64, params: &ModelParams) -> f64 {
    onsite_map_raw(x, params.h, params.delta)
}

pub fn coupling_map(x: f64, params: &ModelParams) -> f64 {
    coupling_map_raw(x, params.delta)
}

pub fn coupling_map_derivative(x: f64, params: &ModelParams) -> f64 {
    coupling_map_derivative_raw(x, params.delta)
}

/// New value of a site given its old value and the old value of its left
/// neighbour. Negative sums are clamped to the laminar value 0.
#[inline]
pub fn site_update(left: f64, own: f64, alpha: f64, h: f64, delta: f64) -> f64 {
    let v = alpha * coupling_map_raw(left, delta) + onsite_map_raw(own, h, delta);
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Same as [`site_update`] but without the clamp; only used to compare the
/// clamped dynamics against the raw sum.
#[inline]
pub fn site_update_unclamped(left: f64, own: f64, alpha: f64, h: f64, delta: f64) -> f64 {
    alpha * coupling_map_raw(left, delta) + onsite_map_raw(own, h, delta)
}

/// Field over a finite window of the lattice plus the step counter.
///
/// Site 0 has a virtual laminar neighbour on its left; whatever the last site
/// would push to its right is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub sites: Vec<f64>,
    pub time: u64,
}

impl LatticeState {
    pub fn new(sites: Vec<f64>) -> Self {
        Self { sites, time: 0 }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![0.0; len])
    }

    pub fn is_laminar(&self) -> bool {
        self.sites.iter().all(|&x| x == 0.0)
    }

    pub fn active_count(&self) -> usize {
        self.sites.iter().filter(|&&x| x > 0.0).count()
    }
}

/// One synchronous update of every site.
pub fn step(state: &LatticeState, params: &ModelParams) -> LatticeState {
    let (alpha, h, delta) = (params.alpha, params.h, params.delta);
    let sites = state
        .sites
        .iter()
        .enumerate()
        .map(|(i, &own)| {
            let left = if i == 0 { 0.0 } else { state.sites[i - 1] };
            site_update(left, own, alpha, h, delta)
        })
        .collect();
    LatticeState {
        sites,
        time: state.time + 1,
    }
}

/// In-place variant of [`step`]. Walking from right to left means the left
/// neighbour is still the old value when a site is overwritten.
pub fn step_in_place(state: &mut LatticeState, params: &ModelParams) {
    let (alpha, h, delta) = (params.alpha, params.h, params.delta);
    let sites = &mut state.sites;
    for i in (0..sites.len()).rev() {
        let left = if i == 0 { 0.0 } else { sites[i - 1] };
        sites[i] = site_update(left, sites[i], alpha, h, delta);
    }
    state.time += 1;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
}

/// The three fixed points of the on-site map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoints {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
    pub stability: [Stability; 3],
}

impl FixedPoints {
    /// Closed forms for slope `h` and offset `delta`. Accepts `delta = 0`,
    /// where the lower unstable point merges into the laminar one.
    pub fn for_slope(h: f64, delta: f64) -> Result<Self> {
        if !(h.is_finite() && h > 1.0) {
            return Err(Error::InvalidParameter {
                name: "h",
                value: h,
                reason: "fixed points need h > 1",
            });
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: delta,
                reason: "must lie in [0, 1)",
            });
        }
        Ok(Self {
            x0: 0.0,
            x1: h * delta / (h - 1.0),
            x2: h * (2.0 + delta) / (1.0 + h),
            stability: [Stability::Stable, Stability::Unstable, Stability::Unstable],
        })
    }
}

pub fn onsite_fixed_points(params: &ModelParams) -> Result<FixedPoints> {
    FixedPoints::for_slope(params.h, params.delta)
}

/// Mean escape time `1 / ln(h / 2)` of the uncoupled on-site map.
pub fn single_site_lifetime_theory(params: &ModelParams) -> Result<f64> {
    single_site_lifetime_for_slope(params.h)
}

pub fn single_site_lifetime_for_slope(h: f64) -> Result<f64> {
    if !(h > CRITICAL_SLOPE) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "escape time is defined only for h > 2",
        });
    }
    Ok(1.0 / (h / CRITICAL_SLOPE).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(alpha: f64, h: f64) -> ModelParams {
        ModelParams::new(alpha, h, 0.1).unwrap()
    }

    #[test]
    fn onsite_map_examples() {
        let params = p(0.0, 2.1);
        assert_eq!(onsite_map(0.05, &params), 0.0);
        assert_abs_diff_eq!(onsite_map(0.6, &params), 1.05, epsilon = 1e-12);
        assert_abs_diff_eq!(onsite_map(1.5, &params), 1.26, epsilon = 1e-12);
        assert_eq!(onsite_map(0.1, &params), 0.0);
    }

    #[test]
    fn coupling_map_examples() {
        let params = p(0.0, 2.1);
        assert_eq!(coupling_map(0.05, &params), 0.0);
        assert_abs_diff_eq!(coupling_map(1.1, &params), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(coupling_map(1.6, &params), 0.5625, epsilon = 1e-12);
        // x = 2 + delta belongs to the zero branch
        assert_eq!(coupling_map(2.1, &params), 0.0);
    }

    #[test]
    fn coupling_maximum_on_rising_lobe() {
        // dense scan instead of calculus
        let params = p(0.0, 2.1);
        let n = 2_000_000;
        let (mut best_x, mut best_g) = (0.0, f64::MIN);
        for k in 0..=n {
            let x = 1.1 + k as f64 / n as f64;
            let g = coupling_map(x, &params);
            if g > best_g {
                best_g = g;
                best_x = x;
            }
        }
        assert_abs_diff_eq!(best_x, 1.1 + 1.0 / 3f64.sqrt(), epsilon = 1e-5);
        assert_abs_diff_eq!(best_g, 1.0 / 3f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(best_x, 1.677350, epsilon = 1e-5);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let params = p(0.0, 2.1);
        for k in 1..200 {
            let x = 0.1 + 2.0 * k as f64 / 200.0;
            let eps = 1e-6;
            let fd = (coupling_map(x + eps, &params) - coupling_map(x - eps, &params)) / (2.0 * eps);
            assert_abs_diff_eq!(coupling_map_derivative(x, &params), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn step_examples() {
        let params = p(0.5, 2.1);
        let s = LatticeState::new(vec![0.0, 1.6, 0.0]);
        let next = step(&s, &params);
        assert_eq!(next.time, 1);
        assert_eq!(next.sites[0], 0.0);
        assert_abs_diff_eq!(next.sites[1], 1.05, epsilon = 1e-12);
        assert_abs_diff_eq!(next.sites[2], 0.28125, epsilon = 1e-12);

        let below = LatticeState::new(vec![0.0, 0.07, 0.0]);
        assert!(step(&below, &params).is_laminar());
    }

    #[test]
    fn negative_sum_is_clamped() {
        // left neighbour on the negative lobe of g, own value in the flat piece
        let params = p(1.0, 2.1);
        let s = LatticeState::new(vec![0.6, 0.05]);
        assert!(site_update_unclamped(0.6, 0.05, 1.0, 2.1, 0.1) < 0.0);
        assert_eq!(step(&s, &params).sites[1], 0.0);
    }

    #[test]
    fn in_place_matches_copying_step() {
        let params = p(1.3, 2.2);
        let mut s = LatticeState::new(vec![1.5, 0.3, 1.9, 0.0, 1.2, 2.05, 0.11]);
        let copy = step(&s, &params);
        step_in_place(&mut s, &params);
        assert_eq!(s, copy);
    }

    #[test]
    fn fixed_point_examples() {
        let fp = onsite_fixed_points(&p(0.0, 2.1)).unwrap();
        assert_eq!(fp.x0, 0.0);
        assert_abs_diff_eq!(fp.x1, 0.1909091, epsilon = 1e-7);
        assert_abs_diff_eq!(fp.x2, 1.4225806, epsilon = 1e-7);
        assert!(fp.x1 < fp.x2);

        let degenerate = FixedPoints::for_slope(2.0, 0.0).unwrap();
        assert_eq!(degenerate.x1, 0.0);
        assert_abs_diff_eq!(degenerate.x2, 4.0 / 3.0, epsilon = 1e-15);

        assert!(FixedPoints::for_slope(1.0, 0.1).is_err());
    }

    #[test]
    fn fixed_points_agree_with_bisection() {
        // independent route: bisect f(x) - x on each unstable branch
        let params = p(0.0, 2.1);
        let fp = onsite_fixed_points(&params).unwrap();
        let r = |x: f64| onsite_map(x, &params) - x;
        let x1 = crate::roots::bisect(r, 0.1, 1.1, 1e-14).unwrap();
        let x2 = crate::roots::bisect(r, 1.1, 2.1, 1e-14).unwrap();
        assert_abs_diff_eq!(x1, fp.x1, epsilon = 1e-12);
        assert_abs_diff_eq!(x2, fp.x2, epsilon = 1e-12);
    }

    #[test]
    fn fixed_point_property_on_grid() {
        for i in 0..40 {
            for j in 1..20 {
                let h = 1.05 + 0.1 * i as f64;
                let delta = 0.045 * j as f64;
                if h <= 1.0 + delta {
                    // both unstable points need the slope to exceed 1 + delta
                    continue;
                }
                let params = ModelParams::new(0.0, h, delta).unwrap();
                let fp = onsite_fixed_points(&params).unwrap();
                assert!((onsite_map(fp.x1, &params) - fp.x1).abs() < 1e-12);
                assert!((onsite_map(fp.x2, &params) - fp.x2).abs() < 1e-12);
            }
        }
    }

    #[test]
    // 1/ln 2 at h = 4 coincides with log2(e)
    #[allow(clippy::approx_constant)]
    fn single_site_lifetime_examples() {
        assert_abs_diff_eq!(
            single_site_lifetime_for_slope(2.05).unwrap(),
            40.49794,
            epsilon = 1e-5
        );
        assert_abs_diff_eq!(
            single_site_lifetime_for_slope(2.1).unwrap(),
            20.49593,
            epsilon = 1e-5
        );
        assert_abs_diff_eq!(
            single_site_lifetime_for_slope(4.0).unwrap(),
            1.442695,
            epsilon = 1e-6
        );
        assert!(single_site_lifetime_for_slope(2.0).is_err());
        assert!(single_site_lifetime_for_slope(1.5).is_err());
    }

    #[test]
    fn params_are_validated() {
        assert!(ModelParams::new(-0.1, 2.1, 0.1).is_err());
        assert!(ModelParams::new(0.1, 1.0, 0.1).is_err());
        assert!(ModelParams::new(0.1, 2.1, 0.0).is_err());
        assert!(ModelParams::new(0.1, 2.1, 1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 2.1, 0.1).is_err());
        let raw = RawParams {
            alpha: 0.5,
            h: 0.5,
            delta: 0.1,
        };
        assert!(ModelParams::try_from(raw).is_err());
    }

    proptest! {
        #[test]
        fn laminar_state_is_invariant(alpha in 0.0f64..5.0, h in 1.01f64..4.0, delta in 0.01f64..0.99, len in 1usize..50) {
            let params = ModelParams::new(alpha, h, delta).unwrap();
            let s = LatticeState::zeros(len);
            prop_assert!(step(&s, &params).is_laminar());
        }

        #[test]
        fn supports(delta in 0.01f64..0.99, x in -5.0f64..5.0) {
            let params = ModelParams::new(1.0, 2.5, delta).unwrap();
            if x < delta {
                prop_assert_eq!(onsite_map(x, &params), 0.0);
                prop_assert_eq!(coupling_map(x, &params), 0.0);
            }
            if x >= 2.0 + delta {
                prop_assert_eq!(coupling_map(x, &params), 0.0);
            }
        }

        #[test]
        fn coupling_roots_only_at_lattice_offsets(delta in 0.01f64..0.99, t in 0.0f64..1.0) {
            let params = ModelParams::new(1.0, 2.5, delta).unwrap();
            for r in [delta, 1.0 + delta] {
                prop_assert!(coupling_map(r, &params).abs() < 1e-12);
            }
            // strictly nonzero away from the roots inside the support
            let x = delta + 2.0 * t;
            let dist = [delta, 1.0 + delta, 2.0 + delta].iter().map(|r| (x - r).abs()).fold(f64::MAX, f64::min);
            if dist > 1e-6 && x < 2.0 + delta {
                prop_assert!(coupling_map(x, &params) != 0.0);
            }
        }

        #[test]
        fn update_is_order_independent(sites in proptest::collection::vec(0.0f64..2.3, 1..40), alpha in 0.0f64..3.0, h in 1.5f64..3.0) {
            let params = ModelParams::new(alpha, h, 0.1).unwrap();
            let s = LatticeState::new(sites.clone());
            let forward = step(&s, &params);
            // reverse traversal reading only old values
            let mut out = vec![0.0; sites.len()];
            for i in (0..sites.len()).rev() {
                let left = if i == 0 { 0.0 } else { sites[i - 1] };
                out[i] = site_update(left, sites[i], alpha, h, 0.1);
            }
            prop_assert_eq!(forward.sites, out);
        }

        #[test]
        fn values_stay_finite_and_nonnegative(sites in proptest::collection::vec(0.0f64..2.1, 1..30), alpha in 0.0f64..3.0, h in 1.5f64..3.0) {
            let params = ModelParams::new(alpha, h, 0.1).unwrap();
            let mut s = LatticeState::new(sites);
            for _ in 0..50 {
                step_in_place(&mut s, &params);
                prop_assert!(s.sites.iter().all(|x| x.is_finite() && *x >= 0.0));
            }
        }
    }
}
