//! Analytic thresholds of the lattice and the velocity laws of the
//! turbulent edges.
//!
//! * [`find_saddle_node`]: coupling at which `alpha * g` becomes tangent to
//!   the diagonal; beyond it the leading edge moves one site per step.
//! * [`alpha_puff_threshold`]: weakest coupling at which a site sitting on
//!   the upper fixed point of the on-site map can lift its neighbour out of
//!   the flat piece.
//! * [`leading_velocity_theory`] / [`trailing_velocity_theory`]: edge
//!   velocities below the saddle node and for `h > 2`.
//! * [`transition_line_puff_slug`]: the puff/slug border, found where the two
//!   edge velocities coincide.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    coupling_map_derivative_raw, coupling_map_raw, FixedPoints, ModelParams, CRITICAL_SLOPE,
};
use crate::error::{Error, Result};
use crate::roots::{bisect, newton_polish};

/// Tangency of `alpha * g` with the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleNode {
    pub alpha_sn: f64,
    pub x_fixed: f64,
    pub delta: f64,
}

impl SaddleNode {
    /// `(alpha g(x) - x, alpha g'(x) - 1)` at the tangency point.
    pub fn residuals(&self) -> (f64, f64) {
        let g = coupling_map_raw(self.x_fixed, self.delta);
        let dg = coupling_map_derivative_raw(self.x_fixed, self.delta);
        (self.alpha_sn * g - self.x_fixed, self.alpha_sn * dg - 1.0)
    }
}

/// Solves `g(x) = x g'(x)` on the rising lobe `(1 + delta, 1 + delta + 1/sqrt 3)`
/// and returns `alpha_sn = 1 / g'(x)`.
pub fn find_saddle_node(params: &ModelParams) -> Result<SaddleNode> {
    saddle_node_for_delta(params.delta())
}

pub fn saddle_node_for_delta(delta: f64) -> Result<SaddleNode> {
    let lo = 1.0 + delta;
    let hi = 1.0 + delta + 1.0 / 3f64.sqrt();
    let tangency = |x: f64| coupling_map_raw(x, delta) - x * coupling_map_derivative_raw(x, delta);
    // g''(x) enters the Newton step through d/dx [g - x g'] = -x g''
    let tangency_slope = |x: f64| {
        let u = x - delta;
        -x * (-1.5 * (6.0 * u - 6.0))
    };
    let coarse = bisect(tangency, lo, hi, 1e-15)?;
    let x_fixed = newton_polish(tangency, tangency_slope, coarse, lo, hi);
    let dg = coupling_map_derivative_raw(x_fixed, delta);
    if !(dg > 0.0) {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    Ok(SaddleNode {
        alpha_sn: 1.0 / dg,
        x_fixed,
        delta,
    })
}

/// `alpha_P = delta / g(x2)` with `x2` the upper fixed point of the on-site map.
pub fn alpha_puff_threshold(params: &ModelParams) -> Result<f64> {
    alpha_puff_threshold_for(params.h(), params.delta())
}

pub fn alpha_puff_threshold_for(h: f64, delta: f64) -> Result<f64> {
    let x2 = FixedPoints::for_slope(h, delta)?.x2;
    if !(x2 > 1.0 + delta && x2 < 2.0 + delta) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "upper fixed point lies outside the spreading window",
        });
    }
    Ok(delta / coupling_map_raw(x2, delta))
}

/// `ln(h / 2)`, a lower bound for the measured trailing-edge velocity.
/// Zero at `h = 2`; slopes below 2 are rejected.
pub fn trailing_velocity_theory(h: f64) -> Result<f64> {
    if !(h >= CRITICAL_SLOPE) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            reason: "trailing edge velocity needs h >= 2",
        });
    }
    Ok((h / CRITICAL_SLOPE).ln())
}

/// Constants of the intermittency description of the leading edge:
/// residence time `T = a / sqrt(d_alpha)` near the ghost fixed point and
/// injection rate `nu = nu_c + A exp(-d_alpha / xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntermittencyFit {
    pub a: f64,
    pub nu_c: f64,
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub xi: f64,
}

impl Default for IntermittencyFit {
    fn default() -> Self {
        Self {
            a: 1.55,
            nu_c: 0.039,
            amplitude: 0.034,
            xi: 0.023,
        }
    }
}

impl IntermittencyFit {
    pub fn new(a: f64, nu_c: f64, amplitude: f64, xi: f64) -> Result<Self> {
        for (name, value) in [("a", a), ("nu_c", nu_c), ("A", amplitude), ("xi", xi)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "intermittency constants must be positive",
                });
            }
        }
        Ok(Self {
            a,
            nu_c,
            amplitude,
            xi,
        })
    }

    pub fn residence_time(&self, d_alpha: f64) -> f64 {
        self.a / d_alpha.sqrt()
    }

    pub fn injection_rate(&self, d_alpha: f64) -> f64 {
        self.nu_c + self.amplitude * (-d_alpha / self.xi).exp()
    }

    /// Propagation probability as a function of the distance `d_alpha >= 0`
    /// below the saddle node. Written without `T` so that `d_alpha = 0`
    /// gives exactly 1.
    pub fn velocity_at(&self, d_alpha: f64) -> f64 {
        1.0 / (1.0 + d_alpha.sqrt() / (self.a * self.injection_rate(d_alpha)))
    }
}

/// Two-state steady state: fraction of time spent propagating when entering
/// at rate `injection_rate` and staying for `residence_time` on average.
pub fn propagation_probability(injection_rate: f64, residence_time: f64) -> f64 {
    1.0 / (1.0 + 1.0 / (injection_rate * residence_time))
}

/// Leading-edge velocity below the saddle node.
pub fn leading_velocity_theory(alpha: f64, sn: &SaddleNode, fit: &IntermittencyFit) -> Result<f64> {
    let d_alpha = sn.alpha_sn - alpha;
    if d_alpha < 0.0 {
        return Err(Error::BallisticRegime {
            alpha,
            alpha_sn: sn.alpha_sn,
        });
    }
    Ok(fit.velocity_at(d_alpha))
}

/// Like [`leading_velocity_theory`], returning 1 past the saddle node.
pub fn leading_velocity(alpha: f64, sn: &SaddleNode, fit: &IntermittencyFit) -> f64 {
    leading_velocity_theory(alpha, sn, fit).unwrap_or(1.0)
}

/// A velocity as a function of one control parameter.
pub trait VelocityCurve {
    fn velocity(&self, x: f64) -> f64;
    fn domain(&self) -> (f64, f64);
    /// Scan points used to bracket crossings, ascending.
    fn knots(&self) -> Vec<f64> {
        let (lo, hi) = self.domain();
        let n = 2000;
        (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
    }
}

/// Tabulated curve with linear interpolation between knots, clamped to the
/// end values outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledCurve {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl SampledCurve {
    pub fn new(points: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.into_iter().filter(|p| p.1.is_finite()).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        if pts.len() < 2 {
            return Err(Error::InsufficientData(
                "a sampled curve needs at least two points".into(),
            ));
        }
        Ok(Self {
            x: pts.iter().map(|p| p.0).collect(),
            v: pts.iter().map(|p| p.1).collect(),
        })
    }
}

impl VelocityCurve for SampledCurve {
    fn velocity(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.v[0];
        }
        if x >= self.x[n - 1] {
            return self.v[n - 1];
        }
        let k = self.x.partition_point(|&xi| xi <= x) - 1;
        let t = (x - self.x[k]) / (self.x[k + 1] - self.x[k]);
        self.v[k] + t * (self.v[k + 1] - self.v[k])
    }

    fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn knots(&self) -> Vec<f64> {
        self.x.clone()
    }
}

/// Leading-edge law as a curve in `alpha` over `[alpha_min, alpha_sn]`.
#[derive(Debug, Clone, Copy)]
pub struct TheoreticalLeadingCurve {
    pub sn: SaddleNode,
    pub fit: IntermittencyFit,
    pub alpha_min: f64,
}

impl VelocityCurve for TheoreticalLeadingCurve {
    fn velocity(&self, alpha: f64) -> f64 {
        leading_velocity(alpha, &self.sn, &self.fit)
    }
    fn domain(&self) -> (f64, f64) {
        (self.alpha_min, self.sn.alpha_sn)
    }
}

/// Trailing-edge bound `ln(h/2)` as a curve in `h`.
#[derive(Debug, Clone, Copy)]
pub struct TheoreticalTrailingCurve {
    pub h_max: f64,
}

impl VelocityCurve for TheoreticalTrailingCurve {
    fn velocity(&self, h: f64) -> f64 {
        trailing_velocity_theory(h).unwrap_or(0.0)
    }
    fn domain(&self) -> (f64, f64) {
        (CRITICAL_SLOPE, self.h_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub h: f64,
    pub alpha: f64,
    /// Common edge velocity at the crossing (NaN for the puff threshold).
    pub velocity: f64,
}

/// Sampled threshold curves in the `(alpha, h)` plane. Between samples the
/// curves are interpolated linearly in `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCurves {
    pub alpha_p: Vec<CurvePoint>,
    pub alpha_ps: Vec<CurvePoint>,
    /// Slopes for which the trailing velocity is out of reach of the sampled
    /// leading-edge curve; the puff/slug line is truncated there.
    pub truncated_h: Vec<f64>,
    pub alpha_sn: f64,
}

impl TransitionCurves {
    /// Whether `alpha_ps` is monotone in `h` over the sampled range.
    pub fn alpha_ps_is_monotone(&self) -> bool {
        let a: Vec<f64> = self.alpha_ps.iter().map(|p| p.alpha).collect();
        a.windows(2).all(|w| w[1] >= w[0]) || a.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn alpha_ps_at(&self, h: f64) -> Option<f64> {
        let curve = SampledCurve::new(self.alpha_ps.iter().map(|p| (p.h, p.alpha))).ok()?;
        let (lo, hi) = curve.domain();
        (lo..=hi).contains(&h).then(|| curve.velocity(h))
    }
}

/// `alpha_P(h)` on a grid of slopes; slopes without a threshold are skipped.
pub fn puff_threshold_curve(h_grid: &[f64], delta: f64) -> Vec<CurvePoint> {
    h_grid
        .iter()
        .filter_map(|&h| {
            alpha_puff_threshold_for(h, delta).ok().map(|alpha| CurvePoint {
                h,
                alpha,
                velocity: f64::NAN,
            })
        })
        .collect()
}

/// Coupling at which the leading-edge curve reaches `target`.
///
/// Scans the knots from the top of the domain downwards and bisects inside
/// the first segment where the curve drops to `target`. This is the weakest
/// coupling above which the leading edge stays faster than `target`, which
/// keeps isolated noise dips in measured curves from producing spurious
/// crossings far below the border.
pub fn solve_leading_for_velocity<C: VelocityCurve + ?Sized>(curve: &C, target: f64) -> Option<f64> {
    let knots = curve.knots();
    let excess = |a: f64| curve.velocity(a) - target;
    let top = *knots.last()?;
    if excess(top) < 0.0 {
        return None;
    }
    for w in knots.windows(2).rev() {
        let (lo, hi) = (w[0], w[1]);
        if excess(lo) <= 0.0 {
            return bisect(excess, lo, hi, 1e-12).ok();
        }
    }
    None
}

/// Puff/slug border from the leading-edge curve in `alpha` and the
/// trailing-edge curve in `h`.
pub fn transition_line_puff_slug<L, T>(
    h_grid: &[f64],
    sn: &SaddleNode,
    leading: &L,
    trailing: &T,
) -> TransitionCurves
where
    L: VelocityCurve + ?Sized,
    T: VelocityCurve + ?Sized,
{
    let mut alpha_ps = Vec::new();
    let mut truncated_h = Vec::new();
    for &h in h_grid {
        let v = trailing.velocity(h);
        match solve_leading_for_velocity(leading, v) {
            Some(alpha) => alpha_ps.push(CurvePoint {
                h,
                alpha,
                velocity: v,
            }),
            None => truncated_h.push(h),
        }
    }
    TransitionCurves {
        alpha_p: puff_threshold_curve(h_grid, sn.delta),
        alpha_ps,
        truncated_h,
        alpha_sn: sn.alpha_sn,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(h: f64) -> ModelParams {
        ModelParams::new(0.0, h, 0.1).unwrap()
    }

    #[test]
    fn saddle_node_constant_and_residuals() {
        let sn = find_saddle_node(&params(2.1)).unwrap();
        assert_abs_diff_eq!(sn.alpha_sn, 2.844137, epsilon = 1e-6);
        assert_abs_diff_eq!(sn.x_fixed, 1.605, epsilon = 1e-3);
        let (r1, r2) = sn.residuals();
        assert!(r1.abs() < 1e-10 && r2.abs() < 1e-10, "{r1} {r2}");
        assert!(sn.x_fixed > 1.1 && sn.x_fixed < 2.1);
    }

    #[test]
    fn saddle_node_matches_direct_tangency_scan() {
        // independent route: alpha_sn is the smallest alpha for which
        // alpha g(x) touches the diagonal, i.e. max_x x / g(x) reciprocal
        let delta = 0.1;
        let n = 400_000;
        let mut best = f64::MAX;
        for k in 1..n {
            let x = 1.1 + 1.0 * k as f64 / n as f64;
            let g = coupling_map_raw(x, delta);
            if g > 0.0 {
                best = best.min(x / g);
            }
        }
        let sn = saddle_node_for_delta(delta).unwrap();
        assert_abs_diff_eq!(sn.alpha_sn, best, epsilon = 1e-8);
    }

    #[test]
    fn newton_polish_agrees_with_plain_bisection() {
        let delta = 0.1;
        let plain = bisect(
            |x| coupling_map_raw(x, delta) - x * coupling_map_derivative_raw(x, delta),
            1.1,
            1.1 + 1.0 / 3f64.sqrt(),
            0.0,
        )
        .unwrap();
        let sn = saddle_node_for_delta(delta).unwrap();
        assert!((plain - sn.x_fixed).abs() < 1e-10);
    }

    #[test]
    fn puff_threshold_examples() {
        let a = alpha_puff_threshold(&params(2.1)).unwrap();
        assert_abs_diff_eq!(a, 0.23067, epsilon = 1e-5);
        for h in [1.2, 1.5, 2.0, 2.1, 2.5, 3.0, 10.0] {
            let a = alpha_puff_threshold(&params(h)).unwrap();
            let x2 = FixedPoints::for_slope(h, 0.1).unwrap().x2;
            assert!((a * coupling_map_raw(x2, 0.1) - 0.1).abs() < 1e-14);
        }
        // threshold grows without bound as x2 approaches 2 + delta
        let big = alpha_puff_threshold(&params(1e6)).unwrap();
        assert!(big > 1e4);
        // x2 below 1 + delta: g(x2) < 0
        assert!(alpha_puff_threshold(&params(1.05)).is_err());
    }

    #[test]
    fn trailing_velocity_examples() {
        assert_abs_diff_eq!(trailing_velocity_theory(2.1).unwrap(), 0.048790, epsilon = 1e-6);
        assert_abs_diff_eq!(trailing_velocity_theory(2.05).unwrap(), 0.024693, epsilon = 1e-6);
        assert_eq!(trailing_velocity_theory(2.0).unwrap(), 0.0);
        assert!(trailing_velocity_theory(1.9).is_err());
    }

    #[test]
    fn leading_velocity_examples() {
        let sn = saddle_node_for_delta(0.1).unwrap();
        let fit = IntermittencyFit::default();
        assert_eq!(leading_velocity_theory(sn.alpha_sn, &sn, &fit).unwrap(), 1.0);
        let v = leading_velocity_theory(sn.alpha_sn - 0.1, &sn, &fit).unwrap();
        // 1 / (1 + sqrt(0.1) / (1.55 (0.039 + 0.034 e^{-0.1/0.023})))
        let expected = 1.0 / (1.0 + 0.1f64.sqrt() / (1.55 * (0.039 + 0.034 * (-0.1f64 / 0.023).exp())));
        assert_abs_diff_eq!(v, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.162, epsilon = 1e-3);
        assert!(matches!(
            leading_velocity_theory(sn.alpha_sn + 0.01, &sn, &fit),
            Err(Error::BallisticRegime { .. })
        ));
        assert_eq!(leading_velocity(sn.alpha_sn + 0.01, &sn, &fit), 1.0);
    }

    #[test]
    fn littles_lemma_midpoint() {
        assert_abs_diff_eq!(propagation_probability(0.04, 25.0), 0.5, epsilon = 1e-15);
        let fit = IntermittencyFit::default();
        let d = 0.05;
        assert_abs_diff_eq!(
            propagation_probability(fit.injection_rate(d), fit.residence_time(d)),
            fit.velocity_at(d),
            epsilon = 1e-14
        );
    }

    #[test]
    fn leading_velocity_decreases_with_distance() {
        let fit = IntermittencyFit::default();
        let mut prev = fit.velocity_at(0.0);
        for k in 1..=3000 {
            let v = fit.velocity_at(0.3 * k as f64 / 3000.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn intermittency_constants_must_be_positive() {
        assert!(IntermittencyFit::new(1.55, 0.039, 0.034, 0.023).is_ok());
        assert!(IntermittencyFit::new(0.0, 0.039, 0.034, 0.023).is_err());
        assert!(IntermittencyFit::new(1.55, 0.039, -0.1, 0.023).is_err());
    }

    #[test]
    fn sampled_curve_interpolates_linearly() {
        let c = SampledCurve::new([(2.0, 0.0), (1.0, 1.0), (3.0, 4.0)]).unwrap();
        assert_eq!(c.velocity(1.5), 0.5);
        assert_eq!(c.velocity(2.5), 2.0);
        assert_eq!(c.velocity(0.0), 1.0);
        assert_eq!(c.domain(), (1.0, 3.0));
        assert!(SampledCurve::new([(1.0, 1.0)]).is_err());
    }

    #[test]
    fn transition_line_residuals_with_theoretical_curves() {
        let sn = saddle_node_for_delta(0.1).unwrap();
        let leading = TheoreticalLeadingCurve {
            sn,
            fit: IntermittencyFit::default(),
            alpha_min: 2.0,
        };
        let trailing = TheoreticalTrailingCurve { h_max: 3.0 };
        let grid: Vec<f64> = (1..=40).map(|k| 2.0 + 0.02 * k as f64).collect();
        let curves = transition_line_puff_slug(&grid, &sn, &leading, &trailing);
        assert!(!curves.alpha_ps.is_empty());
        for p in &curves.alpha_ps {
            let r = leading.velocity(p.alpha) - trailing.velocity(p.h);
            assert!(r.abs() < 1e-3, "residual {r} at h={}", p.h);
        }
        assert!(curves.alpha_ps_is_monotone());
        assert_eq!(curves.alpha_p.len(), grid.len());
        // the border approaches the saddle node as the trailing edge speeds up
        let last = curves.alpha_ps.last().unwrap();
        assert!(last.alpha < sn.alpha_sn);
    }

    #[test]
    fn transition_line_near_h_two_sits_at_domain_floor() {
        // vanishing trailing velocity: the leading curve reaches it only at
        // the bottom of its sampled domain
        let sn = saddle_node_for_delta(0.1).unwrap();
        let leading = TheoreticalLeadingCurve {
            sn,
            fit: IntermittencyFit::default(),
            alpha_min: 2.0,
        };
        let trailing = TheoreticalTrailingCurve { h_max: 3.0 };
        let curves = transition_line_puff_slug(&[2.0 + 1e-9], &sn, &leading, &trailing);
        assert_eq!(curves.alpha_ps.len(), 0);
        assert_eq!(curves.truncated_h.len(), 1);
    }

    #[test]
    fn transition_line_truncates_unreachable_velocities() {
        let sn = saddle_node_for_delta(0.1).unwrap();
        let leading = SampledCurve::new([(2.5, 0.1), (2.7, 0.2), (2.8, 0.3)]).unwrap();
        let trailing = SampledCurve::new([(2.0, 0.05), (3.0, 0.5)]).unwrap();
        let curves = transition_line_puff_slug(&[2.1, 2.5, 2.9], &sn, &leading, &trailing);
        assert_eq!(curves.alpha_ps.len(), 1);
        assert_eq!(curves.truncated_h, vec![2.1, 2.9]);
    }

    #[test]
    fn worked_example_on_synthetic_tables() {
        // tables crossing 0.18 at alpha = 2.61 and h = 2.16
        let sn = saddle_node_for_delta(0.1).unwrap();
        let leading = SampledCurve::new([(2.5, 0.1), (2.61, 0.18), (2.8, 0.4)]).unwrap();
        let trailing = SampledCurve::new([(2.0, 0.0), (2.16, 0.18), (2.5, 0.5)]).unwrap();
        let curves = transition_line_puff_slug(&[2.16], &sn, &leading, &trailing);
        assert_abs_diff_eq!(curves.alpha_ps[0].alpha, 2.61, epsilon = 1e-9);
    }
}
