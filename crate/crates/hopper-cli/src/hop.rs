//! Hop sweeps and calibration: the experiment harness proper.

use crate::common::*;
use hopper_core::controller::calibrate_pushoff;
use hopper_core::error::Result;
use hopper_core::hsa::calibrate_damping;
use hopper_core::sim::{mean_apex_for_torque, mean_spring_efficiency, run_hops, RunOutput, SimContext};
use hopper_core::stats::{bootstrap_mean_ci, DEFAULT_CONFIDENCE, DEFAULT_RESAMPLES};
use hopper_core::telemetry::write_telemetry_csv;
use hopper_core::ExperimentConfig;
use std::fs;
use std::io::Write;
use std::path::Path;

/// Aggregate results for one condition of the sweep.
pub struct ConditionSummary {
    pub added_mass: f64,
    pub with_hsa: bool,
    pub n_hops: usize,
    pub pushoff_torque: f64,
    pub mean_apex: f64,
    pub mean_frequency: f64,
    pub mean_eta: Option<f64>,
    pub cot_mean: f64,
    pub cot_ci_low: f64,
    pub cot_ci_high: f64,
    pub cot_thermal_mean: f64,
    pub cot_mechanical_mean: f64,
    pub telemetry_file: String,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Tune the push-off torque of a context to the target apex using short
/// probe runs, then return the tuned context.
fn calibrated_context(ctx: &SimContext, target_apex: f64) -> Result<SimContext> {
    let tau = calibrate_pushoff(target_apex, APEX_TOLERANCE, ctx.motor.peak_torque, |t| {
        mean_apex_for_torque(ctx, t, CAL_HOPS, CAL_DISCARD)
    })?;
    Ok(ctx.with_pushoff_torque(tau))
}

fn summarize(run: &RunOutput, ctx: &SimContext, seed: u64, telemetry_file: String) -> Result<ConditionSummary> {
    let n = run.summaries.len();
    let cots: Vec<f64> = run.summaries.iter().map(|s| s.cot_total).collect();
    let ci = bootstrap_mean_ci(&cots, DEFAULT_CONFIDENCE, DEFAULT_RESAMPLES, seed)?;
    Ok(ConditionSummary {
        added_mass: ctx.added_mass,
        with_hsa: ctx.hsa.is_some(),
        n_hops: n,
        pushoff_torque: ctx.controller.pushoff_torque,
        mean_apex: mean(run.summaries.iter().map(|s| s.apex_height)),
        mean_frequency: mean(run.hop_frequencies.iter().copied()),
        mean_eta: mean_spring_efficiency(run).ok(),
        cot_mean: ci.mean,
        cot_ci_low: ci.ci_low,
        cot_ci_high: ci.ci_high,
        cot_thermal_mean: mean(run.summaries.iter().map(|s| s.cot_thermal)),
        cot_mechanical_mean: mean(run.summaries.iter().map(|s| s.cot_mechanical)),
        telemetry_file,
    })
}

const SUMMARY_COLUMNS: [(&str, &str); 13] = [
    ("added_mass_kg", "payload bolted to the cart [kg]"),
    ("compliance", "hsa = physical spring installed, virtual = software spring baseline"),
    ("n_hops", "hops aggregated after the transient discard"),
    ("pushoff_torque_Nm", "push-off torque used for this condition [N*m]"),
    ("mean_apex_m", "mean apex height above the neutral stance pose [m]"),
    ("mean_freq_Hz", "mean hop cadence, touchdown to touchdown [Hz]"),
    ("mean_eta", "mean stance spring efficiency (nan if undefined)"),
    ("cot_total_mean", "mean electrical cost of transport"),
    ("cot_total_ci99_low", "bootstrap 99% CI lower bound on the COT mean"),
    ("cot_total_ci99_high", "bootstrap 99% CI upper bound on the COT mean"),
    ("cot_thermal_mean", "winding-loss component of the COT"),
    ("cot_mech_mean", "net mechanical component of the COT"),
    ("telemetry_file", "per-hop telemetry CSV for this condition"),
];

fn write_summary_csv(path: &Path, rows: &[ConditionSummary]) -> Result<()> {
    let mut out = String::new();
    for (name, note) in SUMMARY_COLUMNS {
        out.push_str(&format!("# {name}: {note}\n"));
    }
    let names: Vec<&str> = SUMMARY_COLUMNS.iter().map(|(n, _)| *n).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for r in rows {
        let eta = r.mean_eta.map_or("nan".to_string(), |e| format!("{e}"));
        out.push_str(&format!(
            "{},{},{},{},{},{},{eta},{},{},{},{},{},{}\n",
            r.added_mass,
            if r.with_hsa { "hsa" } else { "virtual" },
            r.n_hops,
            r.pushoff_torque,
            r.mean_apex,
            r.mean_frequency,
            r.cot_mean,
            r.cot_ci_low,
            r.cot_ci_high,
            r.cot_thermal_mean,
            r.cot_mechanical_mean,
            r.telemetry_file,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Full sweep: every added mass, with and without the physical spring.
pub fn cmd_hop(
    cfg: &ExperimentConfig,
    base_dir: Option<&Path>,
    out_dir: &Path,
    json: bool,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let n_hops = cfg.experiment.n_hops as usize;
    let discard = cfg.experiment.transient_discard as usize;
    let mut rows: Vec<ConditionSummary> = Vec::new();

    if n_hops > 0 {
        for (i, &mass) in cfg.experiment.added_mass_list.iter().enumerate() {
            for (j, with_hsa) in [true, false].into_iter().enumerate() {
                let ctx = SimContext::for_condition(cfg, mass, with_hsa, base_dir)?;
                let ctx = if cfg.experiment.recalibrate_pushoff {
                    calibrated_context(&ctx, DEFAULT_TARGET_APEX)?
                } else {
                    ctx
                };
                let run = run_hops(&ctx, n_hops, discard)?;
                let tag = condition_tag(mass, with_hsa);
                let file = format!("hop_telemetry_{tag}.csv");
                let mut w = fs::File::create(out_dir.join(&file))?;
                write_telemetry_csv(&mut w, &run.telemetry)?;
                w.flush()?;
                let seed = cfg.experiment.seed.wrapping_add((i * 2 + j) as u64);
                rows.push(summarize(&run, &ctx, seed, file)?);
            }
        }
    }
    write_summary_csv(&out_dir.join("hop_summary.csv"), &rows)?;

    if json {
        let items: Vec<serde_json::Value> = rows.iter().map(summary_json).collect();
        println!("{}", serde_json::json!({ "conditions": items }));
        return Ok(());
    }
    println!("hop sweep: {} conditions -> {}", rows.len(), out_dir.join("hop_summary.csv").display());
    for r in &rows {
        println!(
            "  mass {:+.2} kg  {:7}  apex {:.1} mm  freq {:.2} Hz  eta {}  COT {:.3} [{:.3}, {:.3}]",
            r.added_mass,
            if r.with_hsa { "spring" } else { "virtual" },
            r.mean_apex * 1e3,
            r.mean_frequency,
            r.mean_eta.map_or("  n/a".to_string(), |e| format!("{e:.3}")),
            r.cot_mean,
            r.cot_ci_low,
            r.cot_ci_high,
        );
    }
    for &mass in &cfg.experiment.added_mass_list {
        let with = rows.iter().find(|r| r.added_mass == mass && r.with_hsa);
        let without = rows.iter().find(|r| r.added_mass == mass && !r.with_hsa);
        if let (Some(w), Some(wo)) = (with, without) {
            let reduction = (1.0 - w.cot_mean / wo.cot_mean) * 100.0;
            let flag = if (10.0..=50.0).contains(&reduction) { "" } else { "  [outside 10-50% band]" };
            println!("  mass {mass:+.2} kg: spring cuts COT by {reduction:.1}%{flag}");
        }
    }
    Ok(())
}

fn summary_json(r: &ConditionSummary) -> serde_json::Value {
    serde_json::json!({
        "added_mass_kg": r.added_mass,
        "compliance": if r.with_hsa { "hsa" } else { "virtual" },
        "n_hops": r.n_hops,
        "pushoff_torque_Nm": r.pushoff_torque,
        "mean_apex_m": r.mean_apex,
        "mean_freq_Hz": r.mean_frequency,
        "mean_eta": r.mean_eta,
        "cot_total_mean": r.cot_mean,
        "cot_total_ci99": [r.cot_ci_low, r.cot_ci_high],
        "cot_thermal_mean": r.cot_thermal_mean,
        "cot_mech_mean": r.cot_mechanical_mean,
        "telemetry_file": r.telemetry_file,
    })
}

/// Probe the calibration condition: mean apex and mean efficiency at the
/// config's current damping and push-off settings.
fn probe_condition(ctx: &SimContext) -> Result<(f64, f64)> {
    let run = run_hops(ctx, CAL_HOPS, CAL_DISCARD)?;
    let apex = mean(run.summaries.iter().map(|s| s.apex_height));
    let eta = mean_spring_efficiency(&run)?;
    Ok((apex, eta))
}

/// Nested calibration: spring damping against the efficiency target, with
/// the push-off torque re-tuned to the apex target inside every damping
/// probe (the two targets interact through hop depth).
pub fn cmd_calibrate(
    cfg: &ExperimentConfig,
    base_dir: Option<&Path>,
    out_dir: &Path,
    target_apex: f64,
    target_eta: f64,
    json: bool,
) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let mass = cfg.experiment.added_mass_list.first().copied().unwrap_or(0.0);
    let ctx = SimContext::for_condition(cfg, mass, true, base_dir)?;
    let out_path = out_dir.join("calibrated.toml");

    // already calibrated? keep the config byte-stable
    if let Ok((apex, eta)) = probe_condition(&ctx) {
        if (apex - target_apex).abs() <= APEX_TOLERANCE && (eta - target_eta).abs() <= ETA_TOLERANCE {
            fs::write(&out_path, cfg.to_toml_string()?)?;
            report_calibration(&out_path, cfg.hsa.damping, ctx.controller.pushoff_torque, apex, eta, true, json);
            return Ok(());
        }
    }

    let damping = calibrate_damping(target_eta, |b| {
        let probe = calibrated_context(&ctx.with_hsa_damping(b)?, target_apex)?;
        let run = run_hops(&probe, CAL_HOPS, CAL_DISCARD)?;
        mean_spring_efficiency(&run)
    })?;
    let tuned = calibrated_context(&ctx.with_hsa_damping(damping)?, target_apex)?;
    let pushoff = tuned.controller.pushoff_torque;
    let (apex, eta) = probe_condition(&tuned)?;

    let mut out_cfg = cfg.clone();
    out_cfg.hsa.damping = damping;
    out_cfg.controller.pushoff_torque = pushoff;
    fs::write(&out_path, out_cfg.to_toml_string()?)?;
    report_calibration(&out_path, damping, pushoff, apex, eta, false, json);
    Ok(())
}

fn report_calibration(path: &Path, damping: f64, pushoff: f64, apex: f64, eta: f64, unchanged: bool, json: bool) {
    if json {
        println!(
            "{}",
            serde_json::json!({
                "config": path.display().to_string(),
                "damping_Nspm": damping,
                "pushoff_torque_Nm": pushoff,
                "mean_apex_m": apex,
                "mean_eta": eta,
                "already_calibrated": unchanged,
            })
        );
        return;
    }
    if unchanged {
        println!("already calibrated; config rewritten unchanged");
    }
    println!("calibrated config -> {}", path.display());
    println!("  damping         {damping:.3} N*s/m");
    println!("  push-off torque {pushoff:.3} N*m");
    println!("  mean apex       {:.1} mm", apex * 1e3);
    println!("  mean eta        {eta:.3}");
}
