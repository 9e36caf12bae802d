//! Static braking comparison: holding a blocked leg force with the leg
//! motor (winding heat grows quadratically in force) versus parking the
//! jammed spring-brake with the twist servo (empirically linear trend).
//!
//! The twist trend's coefficient is a calibration input normalized to the
//! stock 1:4 twist gearing; other ratios scale the power inversely, and a
//! self-locking (worm) drive holds for free.

use crate::actuator::torque_to_current;
use crate::config::{BrakingSection, MotorParams, RobotParams};
use crate::error::{Error, Result};
use crate::hsa::{is_jammed, HsaGeometry};
use crate::kinematics::{inverse_kinematics, jacobian};
use std::io::{self, Write};

/// Twist gear ratio the linear coefficient is normalized to.
pub const REFERENCE_TWIST_RATIO: f64 = 4.0;

/// Resolved braking-model parameters.
#[derive(Debug, Clone, Copy)]
pub struct BrakingModel {
    /// Twist servo gearing; power scales as 4/ratio.
    pub twist_gear_ratio: f64,
    /// Twist holding power per newton of blocked force at 1:4, W/N.
    pub twist_linear_coefficient: f64,
    /// |dx/dtheta| at the holding pose, m/rad.
    pub leg_moment_arm: f64,
    /// Worm-gear twist drive: holds at zero electrical power.
    pub self_locking: bool,
    /// Braking twist while holding, deg.
    pub engaged_twist: f64,
}

impl BrakingModel {
    /// Resolve the config section; a missing moment arm defaults to the
    /// leg's |dx/dtheta| at the spring-neutral pose.
    pub fn from_config(
        section: &BrakingSection,
        robot: &RobotParams,
        geometry: &HsaGeometry,
    ) -> Result<Self> {
        let leg_moment_arm = match section.leg_moment_arm {
            Some(arm) => arm,
            None => {
                let theta = inverse_kinematics(geometry.neutral_leg_length, robot)?;
                jacobian(theta, robot)?.abs()
            }
        };
        let model = BrakingModel {
            twist_gear_ratio: section.twist_gear_ratio,
            twist_linear_coefficient: section.twist_linear_coefficient,
            leg_moment_arm,
            self_locking: section.self_locking,
            engaged_twist: section.engaged_twist,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("twist_gear_ratio", self.twist_gear_ratio),
            ("twist_linear_coefficient", self.twist_linear_coefficient),
            ("leg_moment_arm", self.leg_moment_arm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("braking {what} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_ratio(&self, twist_gear_ratio: f64) -> Self {
        BrakingModel { twist_gear_ratio, ..*self }
    }
}

/// Winding heat to hold `force` with the leg motor, W.
/// tau = force * arm; P = R * (tau / (gear * kt))^2.
pub fn leg_motor_holding_power(force: f64, model: &BrakingModel, motor: &MotorParams) -> Result<f64> {
    if !(force >= 0.0) {
        return Err(Error::Domain { what: "blocked force", value: force, min: 0.0, max: f64::INFINITY });
    }
    let tau = force * model.leg_moment_arm;
    let current = torque_to_current(tau, motor)?;
    Ok(motor.winding_resistance * current * current)
}

/// Twist-servo power to park the jammed brake against `force`, W.
/// Linear in force, inverse in gearing; zero if self-locking.
pub fn twist_motor_holding_power(force: f64, model: &BrakingModel, geometry: &HsaGeometry) -> Result<f64> {
    if !(force >= 0.0) {
        return Err(Error::Domain { what: "blocked force", value: force, min: 0.0, max: f64::INFINITY });
    }
    if !is_jammed(model.engaged_twist, geometry) {
        return Err(Error::BrakeNotEngaged {
            twist: model.engaged_twist,
            jam_twist: geometry.jam_twist,
        });
    }
    if self_locking_holds(model) {
        return Ok(0.0);
    }
    Ok(model.twist_linear_coefficient * force * (REFERENCE_TWIST_RATIO / model.twist_gear_ratio))
}

fn self_locking_holds(model: &BrakingModel) -> bool {
    model.self_locking
}

/// One sweep grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakingSample {
    pub blocked_force: f64,
    pub leg_motor_power: f64,
    pub twist_motor_power: f64,
}

/// Sweep results plus through-origin fits.
#[derive(Debug, Clone)]
pub struct BrakingSweep {
    pub samples: Vec<BrakingSample>,
    /// Leg model P = c F^2, W/N^2.
    pub quadratic_coefficient: f64,
    /// Twist model P = c F at the configured ratio, W/N.
    pub linear_coefficient: f64,
    pub leg_r_squared: f64,
    pub twist_r_squared: f64,
    /// Force above which the twist brake wins: c_lin / c_quad, N.
    pub crossover_force: f64,
}

/// Evaluate both holding powers over a force grid and fit the two trend
/// models (quadratic and linear, both through the origin).
pub fn braking_sweep(
    forces: &[f64],
    model: &BrakingModel,
    motor: &MotorParams,
    geometry: &HsaGeometry,
) -> Result<BrakingSweep> {
    let mut distinct: Vec<f64> = forces.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite forces"));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Input(format!(
            "braking sweep needs at least 3 distinct forces, got {}",
            distinct.len()
        )));
    }
    let mut samples = Vec::with_capacity(forces.len());
    for &f in forces {
        let wrap = |e: Error| Error::SweepFailed { force: f, source: Box::new(e) };
        let leg = leg_motor_holding_power(f, model, motor).map_err(wrap)?;
        let twist = twist_motor_holding_power(f, model, geometry).map_err(wrap)?;
        samples.push(BrakingSample { blocked_force: f, leg_motor_power: leg, twist_motor_power: twist });
    }
    // through-origin least squares: c_q = sum(P F^2) / sum(F^4),
    // c_l = sum(P F) / sum(F^2)
    let sum = |f: &dyn Fn(&BrakingSample) -> f64| samples.iter().map(f).sum::<f64>();
    let sf4 = sum(&|s| s.blocked_force.powi(4));
    let sf2 = sum(&|s| s.blocked_force.powi(2));
    let quadratic_coefficient = sum(&|s| s.leg_motor_power * s.blocked_force.powi(2)) / sf4;
    let linear_coefficient = sum(&|s| s.twist_motor_power * s.blocked_force) / sf2;
    let leg_r_squared = r_squared(&samples, |s| s.leg_motor_power, |s| {
        quadratic_coefficient * s.blocked_force * s.blocked_force
    });
    let twist_r_squared = r_squared(&samples, |s| s.twist_motor_power, |s| {
        linear_coefficient * s.blocked_force
    });
    let crossover_force = if quadratic_coefficient > 0.0 {
        linear_coefficient / quadratic_coefficient
    } else {
        f64::INFINITY
    };
    Ok(BrakingSweep {
        samples,
        quadratic_coefficient,
        linear_coefficient,
        leg_r_squared,
        twist_r_squared,
        crossover_force,
    })
}

fn r_squared<F, G>(samples: &[BrakingSample], observed: F, predicted: G) -> f64
where
    F: Fn(&BrakingSample) -> f64,
    G: Fn(&BrakingSample) -> f64,
{
    let n = samples.len() as f64;
    let mean = samples.iter().map(&observed).sum::<f64>() / n;
    let ss_tot: f64 = samples.iter().map(|s| (observed(s) - mean).powi(2)).sum();
    let ss_res: f64 = samples.iter().map(|s| (observed(s) - predicted(s)).powi(2)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res.abs() < 1e-18 {
        1.0
    } else {
        0.0
    }
}

/// Uniform force grid [0, max] inclusive.
pub fn force_grid(force_max: f64, force_step: f64) -> Result<Vec<f64>> {
    if !(force_step > 0.0) || !(force_max >= 2.0 * force_step) {
        return Err(Error::Config(format!(
            "force grid needs step > 0 and max >= 2 steps, got max {force_max}, step {force_step}"
        )));
    }
    let n = (force_max / force_step).round() as usize;
    Ok((0..=n).map(|i| i as f64 * force_step).collect())
}

/// Sweep row extended with the 1:8 gear projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakingRow {
    pub force: f64,
    pub leg_motor_power: f64,
    pub twist_motor_power: f64,
    pub twist_motor_power_1to8: f64,
}

/// Evaluate the sweep and the 1:8 projection on the same grid.
pub fn braking_rows(
    forces: &[f64],
    model: &BrakingModel,
    motor: &MotorParams,
    geometry: &HsaGeometry,
) -> Result<Vec<BrakingRow>> {
    let base = braking_sweep(forces, model, motor, geometry)?;
    let model8 = model.with_ratio(8.0);
    base.samples
        .iter()
        .map(|s| {
            let p8 = twist_motor_holding_power(s.blocked_force, &model8, geometry)
                .map_err(|e| Error::SweepFailed { force: s.blocked_force, source: Box::new(e) })?;
            Ok(BrakingRow {
                force: s.blocked_force,
                leg_motor_power: s.leg_motor_power,
                twist_motor_power: s.twist_motor_power,
                twist_motor_power_1to8: p8,
            })
        })
        .collect()
}

pub const BRAKING_COLUMNS: [(&str, &str); 4] = [
    ("force_N", "blocked leg force [N]"),
    ("leg_motor_W", "leg-motor holding power [W]"),
    ("twist_motor_W", "twist-servo holding power at the configured ratio [W]"),
    ("twist_motor_1to8_W", "twist-servo holding power projected to 1:8 gearing [W]"),
];

pub fn write_braking_csv<W: Write>(w: &mut W, rows: &[BrakingRow]) -> io::Result<()> {
    for (name, unit) in BRAKING_COLUMNS {
        writeln!(w, "# {name}: {unit}")?;
    }
    let names: Vec<&str> = BRAKING_COLUMNS.iter().map(|(n, _)| *n).collect();
    writeln!(w, "{}", names.join(","))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.force, r.leg_motor_power, r.twist_motor_power, r.twist_motor_power_1to8
        )?;
    }
    Ok(())
}
