//! Per-step simulation samples and their CSV serialization.
//!
//! The CSV layout is stable and self-describing: every column gets a `#`
//! comment line naming its unit before the header row. Floats are written
//! with Rust's shortest round-trip formatting, so identical runs produce
//! byte-identical files.

use std::fmt;
use std::io::{self, Write};

/// Hybrid dynamics mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Stance,
    Flight,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Stance => "stance",
            Mode::Flight => "flight",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One accepted integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetrySample {
    pub time: f64,
    pub mode: Mode,
    /// Leg length, m.
    pub x: f64,
    pub xdot: f64,
    /// Crank angle, rad.
    pub theta: f64,
    pub thetadot: f64,
    /// Joint torque command after saturation, N*m.
    pub tau: f64,
    pub current: f64,
    pub p_thermal: f64,
    pub p_mech: f64,
    pub p_elec: f64,
    pub hsa_force: f64,
    pub hsa_twist: f64,
}

/// Column name and unit note, in file order.
pub const TELEMETRY_COLUMNS: [(&str, &str); 13] = [
    ("time_s", "simulation time since run start [s]"),
    ("mode", "hybrid mode: stance | flight"),
    ("x_m", "leg length [m]"),
    ("xdot_mps", "leg extension rate [m/s]"),
    ("theta_rad", "crank angle [rad]"),
    ("thetadot_radps", "crank rate [rad/s]"),
    ("tau_Nm", "joint torque after saturation [N*m]"),
    ("current_A", "motor winding current [A]"),
    ("P_thermal_W", "winding heat I^2 R [W]"),
    ("P_mech_W", "mechanical output power tau*thetadot [W]"),
    ("P_elec_W", "electrical power = thermal + mechanical [W]"),
    ("hsa_force_N", "spring tension along the leg [N]"),
    ("hsa_twist_deg", "braking twist [deg]"),
];

/// Comment block plus header row.
pub fn telemetry_csv_header() -> String {
    let mut out = String::new();
    for (name, unit) in TELEMETRY_COLUMNS {
        out.push_str(&format!("# {name}: {unit}\n"));
    }
    let names: Vec<&str> = TELEMETRY_COLUMNS.iter().map(|(n, _)| *n).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    out
}

fn format_sample(s: &TelemetrySample) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        s.time,
        s.mode,
        s.x,
        s.xdot,
        s.theta,
        s.thetadot,
        s.tau,
        s.current,
        s.p_thermal,
        s.p_mech,
        s.p_elec,
        s.hsa_force,
        s.hsa_twist
    )
}

pub fn write_telemetry_csv<W: Write>(w: &mut W, samples: &[TelemetrySample]) -> io::Result<()> {
    w.write_all(telemetry_csv_header().as_bytes())?;
    for s in samples {
        w.write_all(format_sample(s).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64) -> TelemetrySample {
        TelemetrySample {
            time: t,
            mode: Mode::Stance,
            x: 0.184,
            xdot: -0.25,
            theta: 0.89,
            thetadot: 3.0,
            tau: 1.5,
            current: 2.75,
            p_thermal: 1.08,
            p_mech: 4.5,
            p_elec: 5.58,
            hsa_force: 12.0,
            hsa_twist: 0.0,
        }
    }

    #[test]
    fn header_documents_every_column() {
        let h = telemetry_csv_header();
        for (name, _) in TELEMETRY_COLUMNS {
            assert!(h.contains(&format!("# {name}:")), "missing comment for {name}");
        }
        let cols = h.lines().last().unwrap();
        assert_eq!(cols.split(',').count(), TELEMETRY_COLUMNS.len());
        assert!(cols.starts_with("time_s,mode,x_m"));
    }

    #[test]
    fn serialization_is_deterministic() {
        let samples: Vec<_> = (0..5).map(|i| sample(i as f64 * 1e-4)).collect();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_telemetry_csv(&mut a, &samples).unwrap();
        write_telemetry_csv(&mut b, &samples).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn rows_match_column_count() {
        let mut buf = Vec::new();
        write_telemetry_csv(&mut buf, &[sample(0.0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().find(|l| !l.starts_with('#') && !l.starts_with("time_s")).unwrap();
        assert_eq!(row.split(',').count(), TELEMETRY_COLUMNS.len());
        assert!(row.contains(",stance,"));
    }

    #[test]
    fn floats_round_trip_exactly() {
        let s = sample(0.12345678912345678);
        let mut buf = Vec::new();
        write_telemetry_csv(&mut buf, &[s]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().last().unwrap();
        let first: f64 = row.split(',').next().unwrap().parse().unwrap();
        assert_eq!(first, s.time);
    }
}
