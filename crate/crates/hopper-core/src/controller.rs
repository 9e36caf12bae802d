//! Hybrid two-mode controller: flight PD repositioning toward the
//! touchdown angle, passive-then-push-off stance, and the
//! virtual-compliance variant used for the no-spring baseline.
//!
//! Stance is split by a typed phase: Compression applies light joint
//! damping only (the spring carries the load); Pushoff applies the fixed
//! extension torque. Near the push-off cutoff length the command blends
//! into the flight PD law over a short window so torque is continuous
//! through liftoff instead of stepping at the mode switch.
//!
//! In VirtualCompliance mode the motor also emulates the spring with a
//! proportional law whose joint gain is matched in task space:
//! kp_virtual = K_virtual * (dx/dtheta)^2 at the neutral pose.

use crate::config::{ComplianceSource, ControllerSection, RobotParams};
use crate::error::{Error, Result};
use crate::hsa::HsaGeometry;
use crate::kinematics::{inverse_kinematics, jacobian};

/// Which half of stance the controller is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StancePhase {
    /// Touchdown until peak compression (first leg-rate zero crossing).
    Compression,
    /// Extension until liftoff.
    Pushoff,
}

/// Restoring-force source during stance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Compliance {
    PhysicalHsa,
    /// Motor-emulated spring toward the neutral crank angle.
    VirtualCompliance { kp_virtual: f64, theta_neutral: f64 },
}

/// Resolved controller gains and setpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    pub flight_kp: f64,
    pub flight_kd: f64,
    /// Flight setpoint, rad.
    pub touchdown_angle: f64,
    pub pushoff_torque: f64,
    pub stance_kd: f64,
    pub compliance: Compliance,
    /// Leg length where push-off hands over to the flight law, m.
    pub pushoff_cutoff: f64,
    /// Handover window width, m.
    pub pushoff_blend: f64,
}

impl ControllerParams {
    /// Resolve a config section: optional setpoints default to the
    /// spring-neutral pose, and the virtual gain is matched in task space.
    pub fn from_config(
        section: &ControllerSection,
        robot: &RobotParams,
        geometry: &HsaGeometry,
    ) -> Result<Self> {
        let theta_neutral = inverse_kinematics(geometry.neutral_leg_length, robot)?;
        let touchdown_angle = match section.touchdown_angle {
            Some(a) => a,
            None => theta_neutral,
        };
        let compliance = match section.compliance_source {
            ComplianceSource::PhysicalHsa => Compliance::PhysicalHsa,
            ComplianceSource::VirtualCompliance => {
                if !(section.virtual_stiffness > 0.0) {
                    return Err(Error::Config(format!(
                        "virtual_stiffness must be > 0 in virtual-compliance mode, got {}",
                        section.virtual_stiffness
                    )));
                }
                let s = jacobian(theta_neutral, robot)?;
                Compliance::VirtualCompliance {
                    kp_virtual: section.virtual_stiffness * s * s,
                    theta_neutral,
                }
            }
        };
        let params = ControllerParams {
            flight_kp: section.flight_kp,
            flight_kd: section.flight_kd,
            touchdown_angle,
            pushoff_torque: section.pushoff_torque,
            stance_kd: section.stance_kd,
            compliance,
            pushoff_cutoff: section.pushoff_cutoff.unwrap_or(geometry.neutral_leg_length),
            pushoff_blend: section.pushoff_blend,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("flight_kp", self.flight_kp),
            ("flight_kd", self.flight_kd),
            ("pushoff_torque", self.pushoff_torque),
            ("stance_kd", self.stance_kd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("controller {what} must be >= 0, got {v}")));
            }
        }
        if !(self.pushoff_blend > 0.0) {
            return Err(Error::Config(format!(
                "pushoff_blend must be > 0, got {}",
                self.pushoff_blend
            )));
        }
        Ok(())
    }

    pub fn with_pushoff_torque(&self, pushoff_torque: f64) -> Self {
        ControllerParams { pushoff_torque, ..*self }
    }
}

/// Flight repositioning law (unclamped; actuator saturation is applied
/// where commands meet the motor).
pub fn flight_torque(theta: f64, thetadot: f64, params: &ControllerParams) -> f64 {
    params.flight_kp * (params.touchdown_angle - theta) - params.flight_kd * thetadot
}

/// Stance law for the given phase (unclamped).
pub fn stance_torque(
    theta: f64,
    thetadot: f64,
    x: f64,
    phase: StancePhase,
    params: &ControllerParams,
) -> f64 {
    let mut tau = match phase {
        StancePhase::Compression => -params.stance_kd * thetadot,
        StancePhase::Pushoff => {
            // dx/dtheta < 0 on the working branch, so extending the leg
            // takes negative torque
            let extend = -params.pushoff_torque;
            let w = ((x - (params.pushoff_cutoff - params.pushoff_blend)) / params.pushoff_blend)
                .clamp(0.0, 1.0);
            (1.0 - w) * extend + w * flight_torque(theta, thetadot, params)
        }
    };
    if let Compliance::VirtualCompliance { kp_virtual, theta_neutral } = params.compliance {
        tau += kp_virtual * (theta_neutral - theta);
    }
    tau
}

/// Default apex tolerance for push-off calibration, m.
pub const APEX_TOLERANCE: f64 = 0.002;

/// Bisect the push-off torque until the steady-state mean apex reported
/// by `sim_oracle` lands within `tolerance` of `target_apex`. The oracle
/// maps a torque to an apex height; apex must be nondecreasing in torque
/// over [0, peak_torque], which is checked at the bracket ends first.
pub fn calibrate_pushoff<F>(
    target_apex: f64,
    tolerance: f64,
    peak_torque: f64,
    mut sim_oracle: F,
) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    const MAX_ITERS: u32 = 40;
    if !(target_apex >= 0.0) {
        return Err(Error::Domain { what: "target apex", value: target_apex, min: 0.0, max: f64::INFINITY });
    }
    if !(tolerance > 0.0) {
        return Err(Error::Domain { what: "apex tolerance", value: tolerance, min: 0.0, max: f64::INFINITY });
    }
    let apex_lo = sim_oracle(0.0)?;
    if (apex_lo - target_apex).abs() <= tolerance {
        return Ok(0.0);
    }
    let apex_hi = sim_oracle(peak_torque)?;
    if apex_hi < apex_lo {
        return Err(Error::Calibration(format!(
            "apex is not nondecreasing in push-off torque: apex(0) = {apex_lo:.4} m > apex({peak_torque}) = {apex_hi:.4} m"
        )));
    }
    if target_apex > apex_hi || target_apex < apex_lo {
        return Err(Error::Calibration(format!(
            "target apex {target_apex:.4} m outside achievable [{apex_lo:.4}, {apex_hi:.4}] m for torque in [0, {peak_torque}] N*m"
        )));
    }
    let (mut lo, mut hi) = (0.0f64, peak_torque);
    let mut best = (f64::NAN, f64::INFINITY);
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let apex = sim_oracle(mid)?;
        let err = (apex - target_apex).abs();
        if err < best.1 {
            best = (mid, err);
        }
        if err <= tolerance {
            return Ok(mid);
        }
        if apex < target_apex {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!(
        "push-off bisection did not reach apex {target_apex:.4} m within {MAX_ITERS} iterations; best |error| = {:.4} m at tau = {:.4} N*m",
        best.1, best.0
    )))
}
