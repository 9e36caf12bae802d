//! Closed-form spring-mass design calculator.
//!
//! Sizing chain: pick hop height h and usable compression dx, then the
//! stiffness that stores enough energy to lift the mass through dx + h is
//!
//! ```text
//! K = 2 m g (h + dx) / dx^2
//! ```
//!
//! and the hop cadence follows from ballistic flight plus a half period of
//! the linear spring-mass oscillator:
//!
//! ```text
//! f = 1 / (2 sqrt(2h/g) + pi sqrt(m/K))
//! ```

use crate::error::{Error, Result};
use crate::hsa::HsaGeometry;

fn check_positive(what: &'static str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain { what, value: v, min: 0.0, max: f64::INFINITY })
    }
}

/// Stiffness that lifts `mass` through `compression + height` from a full
/// spring compression, N/m.
pub fn required_stiffness(mass: f64, height: f64, compression: f64, gravity: f64) -> Result<f64> {
    check_positive("mass", mass)?;
    check_positive("hop height", height)?;
    check_positive("compression", compression)?;
    check_positive("gravity", gravity)?;
    Ok(2.0 * mass * gravity * (height + compression) / (compression * compression))
}

/// Cadence split into its ballistic and stance halves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopTiming {
    /// 1 / (flight_time + stance_time), Hz.
    pub frequency: f64,
    /// Half period of the spring-mass oscillator, s.
    pub stance_time: f64,
    /// Up-and-down ballistic time from apex `height`, s.
    pub flight_time: f64,
}

/// Hop cadence of a linear spring-mass hopper reaching apex `height`.
pub fn hop_frequency(mass: f64, stiffness: f64, height: f64, gravity: f64) -> Result<HopTiming> {
    check_positive("mass", mass)?;
    check_positive("stiffness", stiffness)?;
    check_positive("hop height", height)?;
    check_positive("gravity", gravity)?;
    let flight_time = 2.0 * (2.0 * height / gravity).sqrt();
    let stance_time = std::f64::consts::PI * (mass / stiffness).sqrt();
    Ok(HopTiming { frequency: 1.0 / (flight_time + stance_time), stance_time, flight_time })
}

/// One sized operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    pub mass: f64,
    pub hop_height: f64,
    pub compression: f64,
    pub stiffness: f64,
    pub frequency: f64,
    pub stance_time: f64,
    pub flight_time: f64,
}

/// Size a design point from the three free choices.
pub fn design_point(mass: f64, hop_height: f64, compression: f64, gravity: f64) -> Result<DesignPoint> {
    let stiffness = required_stiffness(mass, hop_height, compression, gravity)?;
    let timing = hop_frequency(mass, stiffness, hop_height, gravity)?;
    Ok(DesignPoint {
        mass,
        hop_height,
        compression,
        stiffness,
        frequency: timing.frequency,
        stance_time: timing.stance_time,
        flight_time: timing.flight_time,
    })
}

/// Acceptance thresholds a sized point and its spring must clear.
#[derive(Debug, Clone, Copy)]
pub struct DesignRequirements {
    /// Stroke the spring must offer, m.
    pub min_stroke: f64,
    /// Nominal stiffness, N/m.
    pub stiffness_target: f64,
    /// Allowed relative deviation from the target.
    pub stiffness_band: f64,
    /// Load rating margin over K * min_stroke.
    pub load_safety_factor: f64,
}

impl Default for DesignRequirements {
    fn default() -> Self {
        DesignRequirements {
            min_stroke: 0.05,
            stiffness_target: 1000.0,
            stiffness_band: 0.15,
            load_safety_factor: 1.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignCheck {
    pub name: &'static str,
    pub required: f64,
    pub actual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct DesignReport {
    pub checks: Vec<DesignCheck>,
}

impl DesignReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Check a sized point against a spring's geometry and the requirements:
/// stroke >= min_stroke, stiffness within the band of the target, and
/// load rating >= safety factor * K * min_stroke.
pub fn verify_design(
    point: &DesignPoint,
    hardware: &HsaGeometry,
    req: &DesignRequirements,
) -> DesignReport {
    let stiffness_err = (point.stiffness - req.stiffness_target).abs();
    let stiffness_allow = req.stiffness_band * req.stiffness_target;
    let required_load = req.load_safety_factor * point.stiffness * req.min_stroke;
    DesignReport {
        checks: vec![
            DesignCheck {
                name: "stroke",
                required: req.min_stroke,
                actual: hardware.max_stroke,
                pass: hardware.max_stroke >= req.min_stroke,
            },
            DesignCheck {
                name: "stiffness",
                required: stiffness_allow,
                actual: stiffness_err,
                pass: stiffness_err <= stiffness_allow,
            },
            DesignCheck {
                name: "load rating",
                required: required_load,
                actual: hardware.load_limit,
                pass: hardware.load_limit >= required_load,
            },
        ],
    }
}
