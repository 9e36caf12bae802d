//! Shared plumbing: config loading, exit-code policy, calibration targets.

use hopper_core::error::Error;
use hopper_core::ExperimentConfig;
use std::path::{Path, PathBuf};

/// Apex every condition is tuned to, m.
pub const DEFAULT_TARGET_APEX: f64 = 0.052;
/// Stance spring efficiency the damping calibration aims for.
pub const DEFAULT_TARGET_ETA: f64 = 0.29;
/// Apex tolerance for push-off calibration, m.
pub const APEX_TOLERANCE: f64 = 0.002;
/// Efficiency tolerance for damping calibration.
pub const ETA_TOLERANCE: f64 = 0.01;
/// Hops per calibration probe (after its own discard).
pub const CAL_HOPS: usize = 20;
pub const CAL_DISCARD: usize = 4;

/// Load a config file (or defaults), apply the seed override, validate.
/// Returns the config plus the directory for resolving relative paths.
pub fn load_config(
    path: Option<&Path>,
    seed: Option<u64>,
) -> Result<(ExperimentConfig, Option<PathBuf>), Error> {
    let (mut cfg, base) = match path {
        Some(p) => {
            let cfg = ExperimentConfig::load(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            (cfg, p.parent().map(|d| d.to_path_buf()))
        }
        None => (ExperimentConfig::default(), None),
    };
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    cfg.validate()?;
    Ok((cfg, base))
}

/// Exit-code policy: 2 configuration, 4 calibration, 3 everything that
/// went wrong inside a simulation or sweep.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Input(_) => 2,
        Error::Calibration(_) => 4,
        _ => 3,
    }
}

/// File tag for one experimental condition, e.g. "m0.10_hsa".
pub fn condition_tag(added_mass: f64, with_hsa: bool) -> String {
    format!("m{added_mass:.2}_{}", if with_hsa { "hsa" } else { "vc" })
}
