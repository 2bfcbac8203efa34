//! Unidirectionally coupled map lattice (UCML) toolkit.
//!
//! Each lattice site carries a nonnegative "turbulent energy" `x`. A site is
//! updated from its own value through a cut-off tent map and from its left
//! neighbour through a cubic coupling, so disturbances can only travel
//! downstream. The crate covers the exact dynamics ([`dynamics`]), the
//! analytic thresholds and velocity laws ([`bifurcation`]), trajectory and
//! ensemble simulation with edge tracking ([`simulation`]) and the lifetime
//! and velocity statistics built on top of it ([`stats`]).

// negated float comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod dynamics;
pub mod error;
pub mod roots;
pub mod simulation;
pub mod stats;

pub use bifurcation::{IntermittencyFit, SaddleNode, TransitionCurves};
pub use dynamics::{FixedPoints, LatticeState, ModelParams};
pub use error::{Error, Result};
pub use simulation::{Classification, InitialCondition, Outcome, RunOptions, TrajectoryRecord};
pub use stats::{EnsembleStats, ExponentialFit, ScalingFit};
