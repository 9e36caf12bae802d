//! Leg-motor electrical model: torque/current mapping, torque/power
//! saturation, and the thermal + mechanical power split.
//!
//! Joint torque is output-side; current is tau / (gear_ratio * k_t).
//! Electrical power = thermal (R I^2, always >= 0) + mechanical (tau *
//! thetadot, signed). Negative mechanical power counts as regenerated;
//! the credit fraction is applied when ledgers are integrated, not here.

use crate::config::MotorParams;
use crate::error::{Error, Result};

/// Instantaneous power split, W.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    pub thermal: f64,
    pub mechanical: f64,
    pub electrical: f64,
}

/// Winding current for an output-side joint torque, A.
pub fn torque_to_current(joint_torque: f64, motor: &MotorParams) -> Result<f64> {
    if joint_torque.abs() > motor.peak_torque {
        return Err(Error::Saturation {
            requested: joint_torque,
            limit: motor.peak_torque,
            clamped: joint_torque.signum() * motor.peak_torque,
        });
    }
    Ok(joint_torque / (motor.gear_ratio * motor.torque_constant))
}

/// Thermal / mechanical / electrical power for a joint operating point.
/// electrical = thermal + mechanical holds exactly.
pub fn electrical_power(joint_torque: f64, joint_rate: f64, motor: &MotorParams) -> Result<PowerSplit> {
    let i = torque_to_current(joint_torque, motor)?;
    let thermal = motor.winding_resistance * i * i;
    let mechanical = joint_torque * joint_rate;
    Ok(PowerSplit { thermal, mechanical, electrical: thermal + mechanical })
}

/// Clamp a torque request to the peak-torque and peak-power envelope.
/// Sign-preserving; at high speed the power limit dominates.
pub fn clamp_command(requested_torque: f64, joint_rate: f64, motor: &MotorParams) -> f64 {
    let mut limit = motor.peak_torque;
    if joint_rate != 0.0 {
        limit = limit.min(motor.peak_power / joint_rate.abs());
    }
    requested_torque.clamp(-limit, limit)
}
