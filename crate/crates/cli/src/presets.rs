//! Default configurations of the sweep subcommands.

use ucml_core::bifurcation::saddle_node_for_delta;
use ucml_core::dynamics::DEFAULT_DELTA;

use crate::config::{Grid, SweepConfig};

/// One ensemble in the puff regime.
pub fn ensemble() -> SweepConfig {
    SweepConfig {
        alpha: Grid::single(0.5),
        h: Grid::single(2.2),
        n: 10_000,
        max_time: 1_000_000,
        ..SweepConfig::default()
    }
}

/// Leading edge on a grid that thickens towards the saddle node; trailing
/// edge over `(2, 3]`.
pub fn velocities() -> SweepConfig {
    let sn = saddle_node_for_delta(DEFAULT_DELTA).expect("default delta has a saddle node");
    let mut alpha: Vec<f64> = vec![2.4, 2.45, 2.5, 2.55, 2.6, 2.65];
    alpha.extend(
        [0.15, 0.13, 0.11, 0.09, 0.07, 0.05, 0.04, 0.03, 0.02, 0.01]
            .map(|d| ((sn.alpha_sn - d) * 1e6).round() / 1e6),
    );
    SweepConfig {
        alpha: Grid::List(alpha),
        h: Grid::List(vec![
            2.05, 2.08, 2.1, 2.12, 2.14, 2.16, 2.18, 2.2, 2.25, 2.3, 2.5, 3.0,
        ]),
        n: 40,
        max_time: 5000,
        width_limit: None,
        ..SweepConfig::default()
    }
}

pub fn phase_diagram() -> SweepConfig {
    SweepConfig::default()
}

/// Puff lifetimes approaching the critical slope.
pub fn lifetime_scaling() -> SweepConfig {
    SweepConfig {
        alpha: Grid::List(vec![0.5, 0.8]),
        h: Grid::List(vec![2.1, 2.11, 2.12, 2.14, 2.17, 2.2, 2.25, 2.3]),
        n: 4000,
        max_time: 1_000_000,
        width_limit: Some(5000),
        ..SweepConfig::default()
    }
}
