//! Physics, control, and analysis core for a one-legged hopper whose
//! parallel spring is a twist-tunable auxetic element that doubles as a
//! mechanical brake.
//!
//! Layout: `kinematics` (crank-slider leg), `actuator` (gearmotor
//! electrical model), `hsa` (spring stiffness surface, force element,
//! jamming), `controller` (flight PD + stance push-off, optional virtual
//! compliance), `sim` (hybrid stance/flight integration), `energetics`
//! (ledgers, COT, spring efficiency), `sizing` (design-point math),
//! `spear` (published comparison platform), `braking` (holding-power
//! models), `stats` (bootstrap CIs), `telemetry`/`config` (I/O schemas).

// Validation tests are written as `!(v > 0.0)` on purpose: the negated
// form rejects NaN, which the "simplified" `v <= 0.0` would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuator;
pub mod braking;
pub mod config;
pub mod controller;
pub mod energetics;
pub mod error;
pub mod hsa;
pub mod kinematics;
pub mod sim;
pub mod sizing;
pub mod spear;
pub mod stats;
pub mod telemetry;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
