//! Energy bookkeeping: ledger integration, cost of transport, and the
//! spring-efficiency metric.
//!
//! Electrical energy splits exactly as P_elec = P_thermal + P_mech, so the
//! ledger integrates thermal power and the positive/negative parts of
//! mechanical power separately; recuperated negative work is credited at
//! a configurable regeneration efficiency.

use crate::error::{Error, Result};
use crate::telemetry::TelemetrySample;

/// Integrated stance/flight energy flows for one hop (or a whole run), J.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLedger {
    /// Winding heat, >= 0.
    pub thermal_energy: f64,
    /// Integral of max(0, tau * thetadot), >= 0.
    pub positive_motor_work: f64,
    /// Integral of min(0, tau * thetadot), <= 0.
    pub negative_motor_work: f64,
    /// Kinetic energy destroyed by touchdown impacts, >= 0.
    pub impact_losses: f64,
    /// thermal + positive + regen * negative.
    pub net_electrical: f64,
    /// Regeneration credit applied to negative work, in [0, 1].
    pub regen_efficiency: f64,
}

impl EnergyLedger {
    pub fn new(
        thermal_energy: f64,
        positive_motor_work: f64,
        negative_motor_work: f64,
        impact_losses: f64,
        regen_efficiency: f64,
    ) -> Result<Self> {
        if thermal_energy < 0.0 {
            return Err(Error::Input(format!("thermal energy must be >= 0, got {thermal_energy}")));
        }
        if negative_motor_work > 0.0 {
            return Err(Error::Input(format!(
                "negative motor work must be <= 0, got {negative_motor_work}"
            )));
        }
        if impact_losses < 0.0 {
            return Err(Error::Input(format!("impact losses must be >= 0, got {impact_losses}")));
        }
        if !(0.0..=1.0).contains(&regen_efficiency) {
            return Err(Error::Input(format!(
                "regen efficiency must lie in [0, 1], got {regen_efficiency}"
            )));
        }
        let net_electrical =
            thermal_energy + positive_motor_work + regen_efficiency * negative_motor_work;
        Ok(EnergyLedger {
            thermal_energy,
            positive_motor_work,
            negative_motor_work,
            impact_losses,
            net_electrical,
            regen_efficiency,
        })
    }

    pub fn zero() -> Self {
        EnergyLedger {
            thermal_energy: 0.0,
            positive_motor_work: 0.0,
            negative_motor_work: 0.0,
            impact_losses: 0.0,
            net_electrical: 0.0,
            regen_efficiency: 1.0,
        }
    }
}

/// Trapezoidal integration of a telemetry slice into an energy ledger.
/// Positive and negative mechanical power are clipped per sample and
/// integrated as separate signals.
pub fn integrate_ledger(
    samples: &[TelemetrySample],
    impact_losses: f64,
    regen_efficiency: f64,
) -> Result<EnergyLedger> {
    let mut thermal = 0.0;
    let mut pos = 0.0;
    let mut neg = 0.0;
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.time - a.time;
        if dt < 0.0 {
            return Err(Error::Input(format!(
                "telemetry timestamps must be non-decreasing: {} then {}",
                a.time, b.time
            )));
        }
        thermal += 0.5 * (a.p_thermal + b.p_thermal) * dt;
        pos += 0.5 * (a.p_mech.max(0.0) + b.p_mech.max(0.0)) * dt;
        neg += 0.5 * (a.p_mech.min(0.0) + b.p_mech.min(0.0)) * dt;
    }
    EnergyLedger::new(thermal.max(0.0), pos, neg, impact_losses, regen_efficiency)
}

/// COT = E / (m g h).
pub fn cost_of_transport(electrical_energy: f64, mass: f64, height: f64, gravity: f64) -> Result<f64> {
    if !(mass > 0.0) {
        return Err(Error::Domain { what: "mass", value: mass, min: 0.0, max: f64::INFINITY });
    }
    if !(height > 0.0) {
        return Err(Error::Domain { what: "hop height", value: height, min: 0.0, max: f64::INFINITY });
    }
    if !(gravity > 0.0) {
        return Err(Error::Domain { what: "gravity", value: gravity, min: 0.0, max: f64::INFINITY });
    }
    Ok(electrical_energy / (mass * gravity * height))
}

/// Rates and accelerations entering the stance joint-power expression.
#[derive(Debug, Clone, Copy)]
pub struct JointRates {
    pub thetadot: f64,
    pub theta_ddot: f64,
    pub xdot: f64,
    pub xddot: f64,
}

/// Stance mechanical power delivered into the mechanism:
/// P = (J thetaddot) thetadot + M (xddot + g) xdot, with M the carried
/// mass (cart + added weight; the foot is not lifted during stance).
pub fn joint_power(rates: &JointRates, carried_mass: f64, reflected_inertia: f64, gravity: f64) -> f64 {
    reflected_inertia * rates.theta_ddot * rates.thetadot
        + carried_mass * (rates.xddot + gravity) * rates.xdot
}

/// Positive-work shares behind the spring-efficiency metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringEfficiency {
    /// eta = 1 - W_motor+ / W_joint+.
    pub eta: f64,
    pub positive_motor_work: f64,
    pub positive_joint_work: f64,
}

impl SpringEfficiency {
    /// True when the ratio landed in [0, 1]; out-of-range values are
    /// reported as-is so callers can surface a consistency warning.
    pub fn is_physical(&self) -> bool {
        (0.0..=1.0).contains(&self.eta)
    }
}

/// eta = 1 - integral(max(0, P_motor)) / integral(max(0, P_joint)) over a
/// stance window. Series must share timestamps; zero positive joint work
/// is undefined rather than zero.
pub fn spring_efficiency(times: &[f64], p_motor: &[f64], p_joint: &[f64]) -> Result<SpringEfficiency> {
    if times.len() != p_motor.len() || times.len() != p_joint.len() {
        return Err(Error::Input(format!(
            "efficiency series lengths differ: {} times, {} motor, {} joint",
            times.len(),
            p_motor.len(),
            p_joint.len()
        )));
    }
    let mut motor_pos = 0.0;
    let mut joint_pos = 0.0;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        if dt < 0.0 {
            return Err(Error::Input(format!(
                "efficiency timestamps must be non-decreasing: {} then {}",
                times[i - 1],
                times[i]
            )));
        }
        motor_pos += 0.5 * (p_motor[i - 1].max(0.0) + p_motor[i].max(0.0)) * dt;
        joint_pos += 0.5 * (p_joint[i - 1].max(0.0) + p_joint[i].max(0.0)) * dt;
    }
    if joint_pos <= 0.0 {
        return Err(Error::UndefinedEfficiency);
    }
    Ok(SpringEfficiency {
        eta: 1.0 - motor_pos / joint_pos,
        positive_motor_work: motor_pos,
        positive_joint_work: joint_pos,
    })
}

/// Per-hop result: apex, durations, energy ledger, COT decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopSummary {
    /// Apex height above the touchdown ground height, m.
    pub apex_height: f64,
    pub stance_duration: f64,
    pub flight_duration: f64,
    pub ledger: EnergyLedger,
    pub cot_total: f64,
    pub cot_thermal: f64,
    pub cot_mechanical: f64,
    /// Stance spring efficiency; None when positive joint work vanished.
    pub spring_eta: Option<f64>,
}

impl HopSummary {
    /// Build the COT decomposition from a ledger. `carried_mass` is the
    /// mass whose lifting the COT normalizes by (cart + added weight by
    /// default; whether the foot counts is a config switch upstream).
    pub fn new(
        apex_height: f64,
        stance_duration: f64,
        flight_duration: f64,
        ledger: EnergyLedger,
        carried_mass: f64,
        gravity: f64,
        spring_eta: Option<f64>,
    ) -> Result<Self> {
        if !(apex_height > 0.0) {
            return Err(Error::Input(format!("apex height must be > 0, got {apex_height}")));
        }
        let cot_thermal = cost_of_transport(ledger.thermal_energy, carried_mass, apex_height, gravity)?;
        let mechanical_net =
            ledger.positive_motor_work + ledger.regen_efficiency * ledger.negative_motor_work;
        let cot_mechanical = cost_of_transport(mechanical_net, carried_mass, apex_height, gravity)?;
        // total = thermal + mechanical by construction, mirroring the
        // power identity P_elec = P_thermal + P_mech
        Ok(HopSummary {
            apex_height,
            stance_duration,
            flight_duration,
            ledger,
            cot_total: cot_thermal + cot_mechanical,
            cot_thermal,
            cot_mechanical,
            spring_eta,
        })
    }
}
