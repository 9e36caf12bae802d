use thiserror::Error;

/// Crate-wide error type. Variants map onto the failure classes the CLI
/// distinguishes: configuration/input problems, simulation faults, and
/// calibration failures.
#[derive(Debug, Error)]
pub enum Error {
    /// An input landed outside its documented bounds.
    #[error("{what} = {value} outside [{min}, {max}]")]
    Domain {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// A torque request exceeded the actuator's peak rating.
    #[error("torque {requested:.3} N*m exceeds limit {limit:.3} N*m (clamped: {clamped:.3})")]
    Saturation {
        requested: f64,
        limit: f64,
        clamped: f64,
    },

    /// The leg Jacobian vanished where it was needed as a divisor.
    #[error("kinematic singularity: |dx/dtheta| = {jacobian:.3e} m/rad at theta = {theta:.4} rad")]
    Singularity { theta: f64, jacobian: f64 },

    /// The spring was driven past its usable stroke.
    #[error("stroke limit: extension {extension:.4} m exceeds max stroke {max_stroke:.4} m")]
    StrokeLimit { extension: f64, max_stroke: f64 },

    /// The leg ran into a joint stop during flight.
    #[error("leg joint limit: theta = {theta:.4} rad at t = {time:.4} s")]
    JointLimit { theta: f64, time: f64 },

    /// No liftoff within the stance time budget.
    #[error("stall: no liftoff within {budget:.2} s of stance")]
    Stall { budget: f64 },

    /// Guard-event bisection failed to converge.
    #[error("integrator: {0}")]
    Integrator(String),

    /// A calibration target could not be met; the message names the
    /// achieved bracket.
    #[error("calibration failed: {0}")]
    Calibration(String),

    /// Twist-brake support requested while the spring is not jammed.
    #[error("brake not engaged: twist {twist:.1} deg below jam threshold {jam_twist:.1} deg")]
    BrakeNotEngaged { twist: f64, jam_twist: f64 },

    /// Spring efficiency is undefined (no positive joint work).
    #[error("spring efficiency undefined: positive joint work is zero")]
    UndefinedEfficiency,

    /// A sweep aborted at one of its grid points.
    #[error("sweep failed at blocked force {force:.2} N: {source}")]
    SweepFailed {
        force: f64,
        #[source]
        source: Box<Error>,
    },

    /// Malformed input data (grids, datasets, telemetry).
    #[error("input: {0}")]
    Input(String),

    /// Configuration file problems.
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that mean "this simulation run was driven outside
    /// its physical envelope" rather than "the inputs were malformed".
    pub fn is_overdriven(&self) -> bool {
        matches!(
            self,
            Error::StrokeLimit { .. } | Error::JointLimit { .. } | Error::Saturation { .. }
        )
    }
}
