//! Crank-slider leg kinematics.
//!
//! The thigh is a crank of length `a` on the motor axis; the shank couples
//! the crank pin to a foot constrained to the vertical line through the
//! axis. Leg length (hip-to-foot distance):
//!
//! ```text
//! x(theta) = a cos(theta) + sqrt(s^2 - a^2 sin^2(theta))
//! ```
//!
//! The working branch is theta in [0, pi]: x runs from a+s (straight,
//! theta = 0) down to s-a (folded, theta = pi). dx/dtheta <= 0 on the
//! branch and vanishes at both ends, so force mapping is singular there.

use crate::config::RobotParams;
use crate::error::{Error, Result};

/// Leg length for a crank angle, m.
pub fn leg_length(theta: f64, robot: &RobotParams) -> Result<f64> {
    let (a, s) = (robot.thigh_length, robot.shank_length);
    let rad = s * s - (a * theta.sin()).powi(2);
    if rad <= 0.0 {
        return Err(Error::Singularity { theta, jacobian: 0.0 });
    }
    Ok(a * theta.cos() + rad.sqrt())
}

/// dx/dtheta, m/rad. Zero at theta = 0 and theta = pi.
pub fn jacobian(theta: f64, robot: &RobotParams) -> Result<f64> {
    let (a, s) = (robot.thigh_length, robot.shank_length);
    let rad = s * s - (a * theta.sin()).powi(2);
    if rad <= 0.0 {
        return Err(Error::Singularity { theta, jacobian: 0.0 });
    }
    Ok(-a * theta.sin() - a * a * theta.sin() * theta.cos() / rad.sqrt())
}

/// Shortest and longest reachable leg length, m.
pub fn leg_range(robot: &RobotParams) -> (f64, f64) {
    (
        robot.shank_length - robot.thigh_length,
        robot.shank_length + robot.thigh_length,
    )
}

/// Crank angle for a leg length, the branch in [0, pi].
///
/// Law of cosines on the (thigh, leg, shank) triangle:
/// cos(theta) = (x^2 + a^2 - s^2) / (2 a x).
pub fn inverse_kinematics(x: f64, robot: &RobotParams) -> Result<f64> {
    let (lo, hi) = leg_range(robot);
    if !(x >= lo && x <= hi) {
        return Err(Error::Domain { what: "leg length", value: x, min: lo, max: hi });
    }
    let (a, s) = (robot.thigh_length, robot.shank_length);
    let c = (x * x + a * a - s * s) / (2.0 * a * x);
    // c is in [-1, 1] by construction for in-range x; clamp shields the
    // boundary values from rounding just past +-1.
    Ok(c.clamp(-1.0, 1.0).acos())
}
