//! Static analyses: braking sweeps, design sizing, comparison-platform
//! fits, and stiffness-surface dumps.

use hopper_core::braking::{
    braking_sweep, force_grid, leg_motor_holding_power, twist_motor_holding_power, BrakingModel,
    BrakingRow, write_braking_csv,
};
use hopper_core::error::{Error, Result};
use hopper_core::hsa::{HsaForceParams, HsaGeometry};
use hopper_core::sizing::{design_point, verify_design, DesignRequirements};
use hopper_core::spear::{bundled_spear_rows, parse_spear_rows, spear_cot_at_height};
use hopper_core::ExperimentConfig;
use std::fs;
use std::path::Path;

/// Braking sweep over the configured force grid. A saturated leg motor is
/// recorded as nan for that row and the sweep continues; fits use the
/// valid subset.
pub fn cmd_brake(cfg: &ExperimentConfig, out_dir: &Path, json: bool) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let geometry = HsaGeometry::from(&cfg.hsa);
    geometry.validate()?;
    let model = BrakingModel::from_config(&cfg.braking, &cfg.robot, &geometry)?;
    let model_1to8 = model.with_ratio(8.0);
    let forces = force_grid(cfg.braking.force_max, cfg.braking.force_step)?;

    let mut rows = Vec::with_capacity(forces.len());
    let mut saturated = Vec::new();
    for &f in &forces {
        let leg = match leg_motor_holding_power(f, &model, &cfg.motor) {
            Ok(p) => p,
            Err(Error::Saturation { .. }) => {
                saturated.push(f);
                f64::NAN
            }
            Err(e) => return Err(e),
        };
        let twist = twist_motor_holding_power(f, &model, &geometry)?;
        let twist_1to8 = twist_motor_holding_power(f, &model_1to8, &geometry)?;
        rows.push(BrakingRow { force: f, leg_motor_power: leg, twist_motor_power: twist, twist_motor_power_1to8: twist_1to8 });
    }

    let path = out_dir.join("braking.csv");
    let mut w = fs::File::create(&path)?;
    write_braking_csv(&mut w, &rows)?;

    let valid: Vec<f64> = forces
        .iter()
        .copied()
        .filter(|f| !saturated.contains(f))
        .collect();
    let sweep = braking_sweep(&valid, &model, &cfg.motor, &geometry)?;

    if json {
        println!(
            "{}",
            serde_json::json!({
                "csv": path.display().to_string(),
                "points": rows.len(),
                "saturated_forces_N": saturated,
                "quadratic_coefficient_WpN2": sweep.quadratic_coefficient,
                "linear_coefficient_WpN": sweep.linear_coefficient,
                "leg_r_squared": sweep.leg_r_squared,
                "twist_r_squared": sweep.twist_r_squared,
                "crossover_force_N": sweep.crossover_force,
            })
        );
        return Ok(());
    }
    println!("braking sweep: {} points -> {}", rows.len(), path.display());
    if !saturated.is_empty() {
        println!("  leg motor saturated at {} force(s); rows recorded as nan", saturated.len());
    }
    println!(
        "  leg motor   P = {:.6} F^2  (R^2 = {:.6})",
        sweep.quadratic_coefficient, sweep.leg_r_squared
    );
    println!(
        "  twist motor P = {:.6} F    (R^2 = {:.6})",
        sweep.linear_coefficient, sweep.twist_r_squared
    );
    println!("  crossover   {:.2} N (leg cheaper below, twist cheaper above)", sweep.crossover_force);
    Ok(())
}

/// Thin wrapper over the sizing module.
pub fn cmd_design(
    cfg: &ExperimentConfig,
    mass: f64,
    height: f64,
    compression: f64,
    json: bool,
) -> Result<()> {
    let point = design_point(mass, height, compression, cfg.robot.gravity)?;
    let geometry = HsaGeometry::from(&cfg.hsa);
    geometry.validate()?;
    let report = verify_design(&point, &geometry, &DesignRequirements::default());

    if json {
        let checks: Vec<serde_json::Value> = report
            .checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "required": c.required,
                    "actual": c.actual,
                    "pass": c.pass,
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::json!({
                "mass_kg": point.mass,
                "hop_height_m": point.hop_height,
                "compression_m": point.compression,
                "stiffness_Npm": point.stiffness,
                "frequency_Hz": point.frequency,
                "stance_time_s": point.stance_time,
                "flight_time_s": point.flight_time,
                "checks": checks,
                "all_pass": report.all_pass(),
            })
        );
        return Ok(());
    }
    println!("design point");
    println!("  mass         {:.3} kg", point.mass);
    println!("  hop height   {:.3} m", point.hop_height);
    println!("  compression  {:.3} m", point.compression);
    println!("  stiffness    {:.2} N/m", point.stiffness);
    println!(
        "  frequency    {:.3} Hz  (stance {:.4} s, flight {:.4} s)",
        point.frequency, point.stance_time, point.flight_time
    );
    println!("hardware checks");
    for c in &report.checks {
        println!(
            "  {:<12} required {:>10.3}  actual {:>10.3}  {}",
            c.name,
            c.required,
            c.actual,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    println!("result: {}", if report.all_pass() { "PASS" } else { "FAIL" });
    Ok(())
}

/// Fit cost-of-transport against hop height for the published comparison
/// platform and evaluate at a query height.
pub fn cmd_spear(cfg: &ExperimentConfig, data: Option<&Path>, height: f64, json: bool) -> Result<()> {
    let rows = match data {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Input(format!("{}: {e}", p.display())))?;
            parse_spear_rows(&text)?
        }
        None => bundled_spear_rows(),
    };
    for r in &rows {
        r.validate(cfg.robot.gravity)?;
    }
    let (cot, fit) = spear_cot_at_height(&rows, height)?;

    if json {
        let table: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "knee_rad": r.knee_angle,
                    "touchdown_m": r.touchdown_length,
                    "energy_J": r.energy,
                    "compression_m": r.compression,
                    "height_m": r.height,
                    "cot": r.cot,
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::json!({
                "rows": table,
                "fit": {
                    "slope": fit.slope,
                    "intercept": fit.intercept,
                    "r_squared": fit.r_squared,
                },
                "query_height_m": height,
                "cot_at_query": cot,
            })
        );
        return Ok(());
    }
    println!("comparison platform rows (all internally consistent):");
    for r in &rows {
        println!(
            "  knee {:.2} rad  height {:.3} m  COT {:.2}",
            r.knee_angle, r.height, r.cot
        );
    }
    println!(
        "fit: COT = {:.4} * h + {:.4}   (R^2 = {:.4})",
        fit.slope, fit.intercept, fit.r_squared
    );
    println!("COT at h = {height:.3} m: {cot:.3}");
    Ok(())
}

/// Dump the active stiffness surface in the loadable table format.
pub fn cmd_characterize(
    cfg: &ExperimentConfig,
    base_dir: Option<&Path>,
    out_dir: &Path,
    json: bool,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let params = HsaForceParams::from_section(&cfg.hsa, base_dir)?;
    let surface = &params.surface;
    let path = out_dir.join("stiffness_surface.csv");
    fs::write(&path, surface.to_table_string())?;

    let tg = surface.twist_grid();
    let dg = surface.displacement_grid();
    if json {
        println!(
            "{}",
            serde_json::json!({
                "csv": path.display().to_string(),
                "twist_nodes": tg.len(),
                "displacement_nodes": dg.len(),
                "twist_range_deg": [tg[0], tg[tg.len() - 1]],
                "displacement_range_m": [dg[0], dg[dg.len() - 1]],
                "min_stiffness_Npm": surface.min_stiffness(),
                "max_stiffness_Npm": surface.max_stiffness(),
                "positive_twist_mean_Npm": surface.positive_twist_mean(),
            })
        );
        return Ok(());
    }
    println!("stiffness surface -> {}", path.display());
    println!("  grid             {} twist x {} displacement nodes", tg.len(), dg.len());
    println!("  twist range      [{}, {}] deg", tg[0], tg[tg.len() - 1]);
    println!("  min / max        {:.1} / {:.1} N/m", surface.min_stiffness(), surface.max_stiffness());
    println!("  positive mean    {:.1} N/m", surface.positive_twist_mean());
    Ok(())
}
