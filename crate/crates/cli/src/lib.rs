//! Sweep orchestration for the coupled map lattice toolkit: space-time
//! runs, lifetime ensembles, edge velocities, thresholds, the phase diagram
//! and the lifetime-scaling and leading-edge fits.
//!
//! Every table is a CSV file whose first line is `# ` followed by the JSON
//! configuration that produced it; [`commands::rerun`] regenerates the
//! table from that line alone. Worker counts never change results.

pub mod cells;
pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

pub use commands::{
    cmd_ensemble, cmd_fit_intermittency, cmd_lifetime_scaling, cmd_phase_diagram, cmd_simulate,
    cmd_thresholds, cmd_velocities, rerun,
};
pub use config::{Embedded, Grid, RunConfig, SweepConfig};
