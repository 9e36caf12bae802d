//! Experiment configuration: schema, defaults, TOML loading.
//!
//! Every field has a default so an empty file is a valid config; unknown
//! keys are rejected so typos fail fast instead of silently running the
//! wrong experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mechanical parameters of the cart + leg + foot assembly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    /// Crank (thigh) link length, m.
    pub thigh_length: f64,
    /// Coupler (shank) link length, m.
    pub shank_length: f64,
    /// Rod the spring wraps: spring length = rod_length - leg length, m.
    pub rod_length: f64,
    /// Cart mass carried to apex, kg.
    pub cart_mass: f64,
    /// Unsprung foot mass, kg.
    pub foot_mass: f64,
    /// Gravity, m/s^2.
    pub gravity: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            thigh_length: 0.07,
            shank_length: 0.15,
            rod_length: 0.30,
            cart_mass: 1.1,
            foot_mass: 0.2,
            gravity: 9.81,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.shank_length > self.thigh_length) {
            return Err(Error::Config(format!(
                "shank_length ({}) must exceed thigh_length ({}) or the crank-slider locks",
                self.shank_length, self.thigh_length
            )));
        }
        for (name, v) in [
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("rod_length", self.rod_length),
            ("gravity", self.gravity),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.cart_mass < 0.0 || self.foot_mass < 0.0 {
            return Err(Error::Config("masses must be >= 0".into()));
        }
        Ok(())
    }
}

/// Electrical/thermal model of the quasi-direct-drive leg motor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorParams {
    /// Winding resistance, ohm.
    pub winding_resistance: f64,
    /// Torque constant at the motor side, N*m/A.
    pub torque_constant: f64,
    /// Gearbox reduction (output torque = gear_ratio * motor torque).
    pub gear_ratio: f64,
    /// Rotor inertia reflected to the output, kg*m^2.
    pub reflected_inertia: f64,
    /// Peak output torque, N*m.
    pub peak_torque: f64,
    /// Peak mechanical power, W.
    pub peak_power: f64,
    /// Bus voltage, V.
    pub supply_voltage: f64,
    /// Fraction of negative mechanical work credited back, in [0, 1].
    pub regen_efficiency: f64,
}

impl Default for MotorParams {
    fn default() -> Self {
        MotorParams {
            winding_resistance: 0.143,
            torque_constant: 0.0909,
            gear_ratio: 6.0,
            reflected_inertia: 3.5e-3,
            peak_torque: 16.0,
            peak_power: 500.0,
            supply_voltage: 24.0,
            regen_efficiency: 1.0,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("winding_resistance", self.winding_resistance),
            ("torque_constant", self.torque_constant),
            ("gear_ratio", self.gear_ratio),
            ("reflected_inertia", self.reflected_inertia),
            ("peak_torque", self.peak_torque),
            ("peak_power", self.peak_power),
            ("supply_voltage", self.supply_voltage),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("motor.{name} must be finite and > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.regen_efficiency) {
            return Err(Error::Config(format!(
                "motor.regen_efficiency must lie in [0, 1], got {}",
                self.regen_efficiency
            )));
        }
        Ok(())
    }
}

/// Spring geometry and force-law parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsaSection {
    /// Unloaded spring length, m.
    pub rest_length: f64,
    /// Leg length at which the spring is exactly unloaded, m.
    pub neutral_leg_length: f64,
    /// Rod length closing the leg/spring kinematic loop, m (must match
    /// robot.rod_length).
    pub rod_length: f64,
    /// Usable tensile stroke, m.
    pub max_stroke: f64,
    /// Rated tensile load, N.
    pub load_limit: f64,
    /// Twist (deg, toward the brake) at which jamming begins.
    pub jam_twist: f64,
    /// Kelvin-Voigt damping coefficient, N*s/m. Calibrated value.
    pub damping: f64,
    /// Optional path to a measured stiffness grid; omitted = built-in surface.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface_file: Option<String>,
}

impl Default for HsaSection {
    fn default() -> Self {
        HsaSection {
            rest_length: 0.116,
            neutral_leg_length: 0.184,
            rod_length: 0.30,
            max_stroke: 0.05,
            load_limit: 75.0,
            jam_twist: 135.0,
            damping: 5.0,
            surface_file: None,
        }
    }
}

/// Which element supplies the stance restoring force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplianceSource {
    /// The physical spring carries the load; the motor only damps and pushes off.
    PhysicalHsa,
    /// No spring installed; the motor emulates one (baseline condition).
    VirtualCompliance,
}

/// Hybrid controller gains and setpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    /// Flight leg-repositioning PD gains.
    pub flight_kp: f64,
    pub flight_kd: f64,
    /// Touchdown angle, rad. Omitted = the angle whose leg length equals
    /// the spring-neutral leg length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub touchdown_angle: Option<f64>,
    /// Fixed push-off torque magnitude, N*m. Calibrated value.
    pub pushoff_torque: f64,
    /// Stance damping gain, N*m*s/rad.
    pub stance_kd: f64,
    /// Task-space stiffness the motor emulates in the baseline, N/m.
    pub virtual_stiffness: f64,
    pub compliance_source: ComplianceSource,
    /// Leg length at which push-off has fully handed over to the
    /// retraction law, m. Omitted = the spring-neutral leg length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pushoff_cutoff: Option<f64>,
    /// Width of the push-off handover ramp, m.
    pub pushoff_blend: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            flight_kp: 20.0,
            flight_kd: 0.45,
            touchdown_angle: None,
            pushoff_torque: 2.8,
            stance_kd: 0.05,
            virtual_stiffness: 912.0,
            compliance_source: ComplianceSource::PhysicalHsa,
            pushoff_cutoff: None,
            pushoff_blend: 0.003,
        }
    }
}

/// Fixed-step integrator and guard-refinement settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Step size, s.
    pub step: f64,
    /// Event residual tolerance: m for touchdown, N for liftoff.
    pub guard_tolerance: f64,
    pub max_bisection_iters: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: 1e-4,
            guard_tolerance: 1e-6,
            max_bisection_iters: 60,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !(self.guard_tolerance > 0.0) {
            return Err(Error::Config(
                "integrator.step and integrator.guard_tolerance must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Experiment matrix and run bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Masses bolted to the cart, kg; the hop sweep covers each.
    pub added_mass_list: Vec<f64>,
    /// Hops recorded per condition (after the discard).
    pub n_hops: u32,
    /// Leading hops excluded from statistics while the limit cycle settles.
    pub transient_discard: u32,
    /// Condition selector for single-condition commands (calibrate etc.).
    pub with_hsa: bool,
    /// Seed for the bootstrap resampler.
    pub seed: u64,
    /// Stance time budget before a run is declared stalled, s.
    pub stance_budget: f64,
    /// Re-tune push-off torque per condition so every condition hops to
    /// the same apex (the comparison is then at matched hop height).
    pub recalibrate_pushoff: bool,
    /// Count the foot mass in the transport-cost denominator.
    pub cot_includes_foot_mass: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            added_mass_list: vec![0.0, 0.1, 0.2],
            n_hops: 64,
            transient_discard: 5,
            with_hsa: true,
            seed: 42,
            stance_budget: 1.5,
            recalibrate_pushoff: true,
            cot_includes_foot_mass: false,
        }
    }
}

/// Static braking experiment settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrakingSection {
    /// Twist servo gear reduction (baseline 4 = "1:4").
    pub twist_gear_ratio: f64,
    /// Holding power per newton of blocked force at the 1:4 baseline, W/N.
    pub twist_linear_coefficient: f64,
    /// |dx/dtheta| at the holding pose, m/rad. Omitted = evaluated at the
    /// spring-neutral pose.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leg_moment_arm: Option<f64>,
    /// Twist commanded when the brake is engaged, deg.
    pub engaged_twist: f64,
    /// Self-locking (worm) twist drive: holding costs zero power.
    pub self_locking: bool,
    /// Force sweep grid for the brake command, N.
    pub force_max: f64,
    pub force_step: f64,
}

impl Default for BrakingSection {
    fn default() -> Self {
        BrakingSection {
            twist_gear_ratio: 4.0,
            twist_linear_coefficient: 0.02,
            leg_moment_arm: None,
            engaged_twist: 140.0,
            self_locking: false,
            force_max: 75.0,
            force_step: 2.5,
        }
    }
}

/// Full experiment configuration (one TOML file).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub robot: RobotParams,
    pub motor: MotorParams,
    pub hsa: HsaSection,
    pub controller: ControllerSection,
    pub integrator: IntegratorConfig,
    pub experiment: ExperimentSection,
    pub braking: BrakingSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.motor.validate()?;
        self.integrator.validate()?;
        if (self.hsa.rod_length - self.robot.rod_length).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "hsa.rod_length ({}) and robot.rod_length ({}) describe the same rod and must match",
                self.hsa.rod_length, self.robot.rod_length
            )));
        }
        let h = &self.hsa;
        if !(h.rest_length > 0.0) {
            return Err(Error::Config("hsa.rest_length must be > 0".into()));
        }
        if !(h.max_stroke > 0.0 && h.max_stroke < h.neutral_leg_length) {
            return Err(Error::Config(
                "hsa.max_stroke must lie in (0, neutral_leg_length)".into(),
            ));
        }
        if !(h.load_limit > 0.0) {
            return Err(Error::Config("hsa.load_limit must be > 0".into()));
        }
        if h.damping < 0.0 {
            return Err(Error::Config("hsa.damping must be >= 0".into()));
        }
        let c = &self.controller;
        if c.flight_kp < 0.0 || c.flight_kd < 0.0 || c.stance_kd < 0.0 {
            return Err(Error::Config("controller gains must be >= 0".into()));
        }
        if c.pushoff_torque < 0.0 {
            return Err(Error::Config("controller.pushoff_torque must be >= 0".into()));
        }
        if c.compliance_source == ComplianceSource::VirtualCompliance
            && !(c.virtual_stiffness > 0.0)
        {
            return Err(Error::Config(
                "controller.virtual_stiffness must be > 0 in virtual-compliance mode".into(),
            ));
        }
        let want = if self.experiment.with_hsa {
            ComplianceSource::PhysicalHsa
        } else {
            ComplianceSource::VirtualCompliance
        };
        if c.compliance_source != want {
            return Err(Error::Config(format!(
                "controller.compliance_source contradicts experiment.with_hsa = {}",
                self.experiment.with_hsa
            )));
        }
        let e = &self.experiment;
        if e.added_mass_list.iter().any(|m| *m < 0.0) {
            return Err(Error::Config("experiment.added_mass_list entries must be >= 0".into()));
        }
        if !(e.stance_budget > 0.0) {
            return Err(Error::Config("experiment.stance_budget must be > 0".into()));
        }
        let b = &self.braking;
        if !(b.twist_gear_ratio > 0.0) || !(b.twist_linear_coefficient > 0.0) {
            return Err(Error::Config(
                "braking ratios and coefficients must be > 0".into(),
            ));
        }
        if let Some(arm) = b.leg_moment_arm {
            if !(arm > 0.0) {
                return Err(Error::Config("braking.leg_moment_arm must be > 0".into()));
            }
        }
        if !(b.force_max > 0.0) || !(b.force_step > 0.0) {
            return Err(Error::Config("braking force grid must be positive".into()));
        }
        Ok(())
    }
}
