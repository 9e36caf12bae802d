//! Release gate: one test per acceptance criterion, each printing a single
//! `ACCEPTANCE <n> <name>: PASS|FAIL — detail` line (run with
//! `cargo test --test acceptance -- --nocapture` to see lines for passing
//! criteria; failures always surface theirs).

use hopper_core::braking::{braking_sweep, force_grid, twist_motor_holding_power, BrakingModel};
use hopper_core::controller::StancePhase;
use hopper_core::energetics::cost_of_transport;
use hopper_core::hsa::{is_jammed, HsaForceParams, HsaGeometry, StiffnessSurface};
use hopper_core::kinematics::{inverse_kinematics, jacobian};
use hopper_core::sim::{run_hops, EventKind, SimContext, SimState, Stepper};
use hopper_core::telemetry::Mode;
use hopper_core::sizing::{hop_frequency, required_stiffness};
use hopper_core::spear::{bundled_spear_rows, spear_cot_at_height, SPEAR_MASS};
use hopper_core::stats::bootstrap_mean_ci;
use hopper_core::ExperimentConfig;
use rand::SeedableRng;
use rand_distr::Distribution;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_hsa-hopper");

/// Evaluate named checks, print the one-line verdict, and fail the test on
/// any miss.
fn report(n: u32, name: &str, checks: &[(bool, String)]) {
    let pass = checks.iter().all(|c| c.0);
    let detail: Vec<String> = checks
        .iter()
        .map(|(ok, d)| format!("{}{d}", if *ok { "" } else { "FAILED: " }))
        .collect();
    let line = format!(
        "ACCEPTANCE {n} {name}: {} — {}",
        if pass { "PASS" } else { "FAIL" },
        detail.join("; ")
    );
    println!("{line}");
    assert!(pass, "{line}");
}

#[test]
fn criterion_1_sizing_reproduction() {
    let g = 9.81;
    let t0 = Instant::now();
    let k = required_stiffness(1.3, 0.05, 0.05, g).unwrap();
    let timing = hop_frequency(1.3, 1000.0, 0.05, g).unwrap();
    let elapsed = t0.elapsed();

    // independent closed forms: energy balance K dx^2 / 2 = m g (h + dx),
    // half spring period plus ballistic round trip
    let k_oracle = 2.0 * 1.3 * g * (0.05 + 0.05) / (0.05 * 0.05);
    let f_oracle = 1.0
        / (std::f64::consts::PI * (1.3_f64 / 1000.0).sqrt() + 2.0 * (2.0 * 0.05 / g).sqrt());

    report(
        1,
        "sizing reproduction",
        &[
            (
                (k / k_oracle - 1.0).abs() <= 0.005 && (k / 1020.2 - 1.0).abs() <= 0.005,
                format!("stiffness {k:.2} N/m vs 1020.2 (±0.5%)"),
            ),
            (
                (timing.frequency / f_oracle - 1.0).abs() <= 0.005
                    && (timing.frequency / 3.17 - 1.0).abs() <= 0.005,
                format!("frequency {:.4} Hz vs 3.17 (±0.5%)", timing.frequency),
            ),
            (
                elapsed.as_micros() < 1000,
                format!("runtime {} us < 1 ms", elapsed.as_micros()),
            ),
        ],
    );
}

#[test]
fn criterion_2_comparison_table_oracle() {
    let g = 9.81;
    let t0 = Instant::now();
    let rows = bundled_spear_rows();
    let expected = [2.96, 1.23, 1.20];
    let mut cot_ok = true;
    let mut cots = Vec::new();
    for (r, e) in rows.iter().zip(expected) {
        let c = cost_of_transport(r.energy, SPEAR_MASS, r.height, g).unwrap();
        cots.push(format!("{c:.3}"));
        cot_ok &= (c - e).abs() <= 0.01;
    }
    let (cot_at_query, fit) = spear_cot_at_height(&rows, 0.158).unwrap();
    let elapsed = t0.elapsed();

    report(
        2,
        "comparison-platform table oracle",
        &[
            (cot_ok, format!("per-row COT [{}] vs [2.96, 1.23, 1.20] (±0.01)", cots.join(", "))),
            (
                (fit.r_squared - 0.93).abs() <= 0.01,
                format!("fit R^2 {:.4} vs 0.93 (±0.01)", fit.r_squared),
            ),
            (
                (cot_at_query - 2.46).abs() <= 0.02,
                format!("COT(0.158 m) {cot_at_query:.4} vs 2.46 (±0.02)"),
            ),
            (elapsed.as_secs_f64() < 1.0, format!("runtime {:.3} s < 1 s", elapsed.as_secs_f64())),
        ],
    );
}

#[test]
fn criterion_3_default_stiffness_surface() {
    let s = StiffnessSurface::default_surface();
    let geo = HsaGeometry::from(&ExperimentConfig::default().hsa);
    let mean = s.positive_twist_mean();
    let peak = s.max_stiffness();
    let ratio = peak / s.min_stiffness();
    // jamming onset: engagement flips exactly at the threshold, and the
    // surface has left its plateau there on the braking side
    let at_onset = s.stiffness_at(-135.0, 0.0).unwrap();
    let plateau = s.min_stiffness();

    report(
        3,
        "default stiffness surface",
        &[
            (
                (mean - 912.0).abs() <= 0.01 * 912.0,
                format!("positive-twist mean {mean:.1} N/m vs 912 (±1%)"),
            ),
            (peak >= 16_000.0, format!("peak {peak:.0} N/m >= 16000")),
            ((ratio - 21.0).abs() <= 1.0, format!("peak/min ratio {ratio:.2} vs 21 (±1)")),
            (
                !is_jammed(134.999, &geo) && is_jammed(135.0, &geo) && at_onset > 2.0 * plateau,
                format!(
                    "onset at 135 deg (engagement flips; stiffness there {at_onset:.0} N/m above {plateau:.0} plateau)"
                ),
            ),
        ],
    );
}

/// One calibrate-then-replay pipeline shared by criteria 4 and 5.
struct SummaryRow {
    added_mass: f64,
    with_spring: bool,
    n_hops: usize,
    apex: f64,
    freq: f64,
    eta: f64,
    cot_total: f64,
    cot_thermal: f64,
    cot_mech: f64,
}

struct Pipeline {
    rows: Vec<SummaryRow>,
    per_condition_secs: f64,
}

fn parse_summary(path: &Path) -> Vec<SummaryRow> {
    let text = std::fs::read_to_string(path).expect("summary csv readable");
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("added_mass_kg") || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        rows.push(SummaryRow {
            added_mass: f[0].parse().unwrap(),
            with_spring: f[1] == "hsa",
            n_hops: f[2].parse().unwrap(),
            apex: f[4].parse().unwrap(),
            freq: f[5].parse().unwrap(),
            eta: f[6].parse().unwrap(),
            cot_total: f[7].parse().unwrap(),
            cot_thermal: f[10].parse().unwrap(),
            cot_mech: f[11].parse().unwrap(),
        });
    }
    rows
}

fn pipeline() -> &'static Pipeline {
    static PIPE: OnceLock<Pipeline> = OnceLock::new();
    PIPE.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let out = Command::new(BIN)
            .args(["calibrate", "--out"])
            .arg(dir.path())
            .output()
            .expect("spawn calibrate");
        assert!(
            out.status.success(),
            "calibrate failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let config = dir.path().join("calibrated.toml");
        let replay = dir.path().join("replay");
        let t0 = Instant::now();
        let out = Command::new(BIN)
            .args(["hop", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&replay)
            .output()
            .expect("spawn hop");
        let elapsed = t0.elapsed().as_secs_f64();
        assert!(out.status.success(), "hop failed: {}", String::from_utf8_lossy(&out.stderr));
        let rows = parse_summary(&replay.join("hop_summary.csv"));
        assert!(!rows.is_empty(), "summary has condition rows");
        let per_condition_secs = elapsed / rows.len() as f64;
        Pipeline { rows, per_condition_secs }
    })
}

#[test]
fn criterion_4_hopping_calibration() {
    let p = pipeline();
    // the condition the calibration targeted: first added mass, spring in
    let row = p
        .rows
        .iter()
        .filter(|r| r.with_spring)
        .min_by(|a, b| a.added_mass.partial_cmp(&b.added_mass).unwrap())
        .expect("a with-spring condition");

    report(
        4,
        "hopping calibration",
        &[
            (row.n_hops >= 64, format!("{} hops >= 64", row.n_hops)),
            (
                (row.apex - 0.052).abs() <= 0.002,
                format!("mean apex {:.1} mm vs 52 (±2)", row.apex * 1e3),
            ),
            ((row.eta - 0.29).abs() <= 0.05, format!("eta {:.3} vs 0.29 (±0.05)", row.eta)),
            (
                (2.0..=3.5).contains(&row.freq),
                format!("hop frequency {:.2} Hz in [2.0, 3.5]", row.freq),
            ),
            (
                p.per_condition_secs < 60.0,
                format!("{:.1} s per condition < 60 s", p.per_condition_secs),
            ),
        ],
    );
}

#[test]
fn criterion_5_efficiency_ordering() {
    let p = pipeline();
    let mut masses: Vec<f64> = p.rows.iter().map(|r| r.added_mass).collect();
    masses.sort_by(|a, b| a.partial_cmp(b).unwrap());
    masses.dedup();

    let mut checks = Vec::new();
    for m in masses {
        let with = p
            .rows
            .iter()
            .find(|r| r.added_mass == m && r.with_spring)
            .expect("spring row");
        let without = p
            .rows
            .iter()
            .find(|r| r.added_mass == m && !r.with_spring)
            .expect("baseline row");
        let reduction = 100.0 * (without.cot_total - with.cot_total) / without.cot_total;
        let band_note = if (10.0..=50.0).contains(&reduction) {
            String::new()
        } else {
            " [flag: outside 10-50% band]".to_string()
        };
        checks.push((
            with.cot_total < without.cot_total,
            format!(
                "mass +{m:.1} kg electrical COT {:.3} < {:.3}, reduction {reduction:.1}%{band_note}",
                with.cot_total, without.cot_total
            ),
        ));
        checks.push((
            with.cot_thermal < without.cot_thermal,
            format!("thermal {:.3} < {:.3}", with.cot_thermal, without.cot_thermal),
        ));
        checks.push((
            with.cot_mech > without.cot_mech,
            format!("mechanical {:.3} > {:.3}", with.cot_mech, without.cot_mech),
        ));
    }
    report(5, "efficiency ordering", &checks);
}

#[test]
fn criterion_6_braking_trends() {
    let cfg = ExperimentConfig::default();
    let t0 = Instant::now();
    let geometry = HsaGeometry::from(&cfg.hsa);
    let model = BrakingModel::from_config(&cfg.braking, &cfg.robot, &geometry).unwrap();
    let forces = force_grid(cfg.braking.force_max, cfg.braking.force_step).unwrap();
    let sweep = braking_sweep(&forces, &model, &cfg.motor, &geometry).unwrap();

    let model_1to8 = model.with_ratio(8.0);
    let halves = forces.iter().all(|&f| {
        twist_motor_holding_power(f, &model_1to8, &geometry).unwrap()
            == 0.5 * twist_motor_holding_power(f, &model, &geometry).unwrap()
    });
    let mut worm = model;
    worm.self_locking = true;
    let worm_zero = forces
        .iter()
        .all(|&f| twist_motor_holding_power(f, &worm, &geometry).unwrap() == 0.0);
    let elapsed = t0.elapsed();

    report(
        6,
        "braking trends",
        &[
            (
                sweep.leg_r_squared >= 0.999 && sweep.twist_r_squared >= 0.999,
                format!(
                    "fit R^2 leg {:.6} / twist {:.6} >= 0.999",
                    sweep.leg_r_squared, sweep.twist_r_squared
                ),
            ),
            (halves, "1:8 power exactly half of 1:4 at every force".to_string()),
            (worm_zero, "self-locking worm mode holds at 0 W".to_string()),
            (elapsed.as_secs_f64() < 1.0, format!("runtime {:.3} s < 1 s", elapsed.as_secs_f64())),
        ],
    );
}

/// Context with every control law zeroed and an always-constant-K spring:
/// stance becomes the bare oscillator the closed forms describe.
fn oscillator_context(k: f64) -> SimContext {
    let cfg = ExperimentConfig::default();
    let mut ctx = SimContext::for_condition(&cfg, 0.0, true, None).unwrap();
    let surface = StiffnessSurface::new(
        vec![-150.0, 150.0],
        vec![0.0, 0.05],
        vec![k, k, k, k],
    )
    .unwrap();
    ctx.hsa = Some(HsaForceParams::new(0.0, surface, ctx.geometry.clone()).unwrap());
    ctx.controller.flight_kp = 0.0;
    ctx.controller.flight_kd = 0.0;
    ctx.controller.stance_kd = 0.0;
    ctx.controller.pushoff_torque = 0.0;
    ctx
}

fn oscillator_state(ctx: &SimContext, x: f64) -> SimState {
    let theta = inverse_kinematics(x, &ctx.robot).unwrap();
    SimState {
        mode: Mode::Stance,
        cart_height: x,
        cart_rate: 0.0,
        x,
        xdot: 0.0,
        theta,
        thetadot: 0.0,
        hsa_twist: 0.0,
        time: 0.0,
    }
}

/// Total stance energy against the spring-neutral datum; valid while the
/// jacobian is locally constant (small amplitudes).
fn stance_energy(ctx: &SimContext, k: f64, x: f64, xdot: f64, theta: f64) -> f64 {
    let m = ctx.carried_mass();
    let s = jacobian(theta, &ctx.robot).unwrap();
    let m_eff = m + ctx.motor.reflected_inertia / (s * s);
    let dl = x - ctx.geometry.neutral_leg_length;
    0.5 * m_eff * xdot * xdot + 0.5 * k * dl * dl + m * ctx.robot.gravity * x
}

#[test]
fn criterion_7_integrator_physics() {
    let k = 912.0;
    let ctx = oscillator_context(k);
    let m = ctx.carried_mass();
    let x_eq = ctx.geometry.neutral_leg_length - m * ctx.robot.gravity / k;
    let theta_eq = inverse_kinematics(x_eq, &ctx.robot).unwrap();
    let s_eq = jacobian(theta_eq, &ctx.robot).unwrap();
    let m_eff = m + ctx.motor.reflected_inertia / (s_eq * s_eq);
    let period = 2.0 * std::f64::consts::PI * (m_eff / k).sqrt();

    // (a) energy drift over one period, tiny amplitude
    let amp = 2e-4;
    let mut stepper = Stepper::with_state(&ctx, oscillator_state(&ctx, x_eq - amp), StancePhase::Compression);
    let e0 = stance_energy(&ctx, k, x_eq - amp, 0.0, inverse_kinematics(x_eq - amp, &ctx.robot).unwrap());
    let steps_per_period = (period / ctx.integrator.step).round() as usize;
    // 1.5 periods: an upward equilibrium crossing happens once per period,
    // and period measurement needs two of them
    let mut drift = f64::INFINITY;
    let mut crossings: Vec<f64> = Vec::new();
    let mut prev = stepper.sample().unwrap().0;
    for i in 0..(3 * steps_per_period / 2) {
        let out = stepper.step().unwrap();
        let (t1, x1) = (out.sample.time, out.sample.x);
        let (t0, x0) = (prev.time, prev.x);
        if (x0 - x_eq) <= 0.0 && (x1 - x_eq) > 0.0 {
            crossings.push(t0 + (t1 - t0) * (x_eq - x0) / (x1 - x0));
        }
        prev = out.sample;
        if i + 1 == steps_per_period {
            let s = out.sample;
            let e1 = stance_energy(&ctx, k, s.x, s.xdot, s.theta);
            drift = ((e1 - e0) / e0).abs();
        }
    }

    // (b) measured period from successive upward equilibrium crossings
    let period_err = if crossings.len() >= 2 {
        ((crossings[1] - crossings[0]) / period - 1.0).abs()
    } else {
        f64::INFINITY
    };

    // (c) ballistic flight through a 5 cm apex, frozen leg
    let x_n = ctx.geometry.neutral_leg_length;
    let h = 0.05;
    let theta_n = inverse_kinematics(x_n, &ctx.robot).unwrap();
    let launch = SimState {
        mode: Mode::Flight,
        cart_height: x_n,
        cart_rate: (2.0 * ctx.robot.gravity * h).sqrt(),
        x: x_n,
        xdot: 0.0,
        theta: theta_n,
        thetadot: 0.0,
        hsa_twist: 0.0,
        time: 0.0,
    };
    let mut flier = Stepper::with_state(&ctx, launch, StancePhase::Compression);
    let mut touchdown = None;
    for _ in 0..10_000 {
        let out = flier.step().unwrap();
        if let Some(ev) = out.event {
            assert_eq!(ev.kind, EventKind::Touchdown);
            touchdown = Some(ev);
            break;
        }
    }
    let td = touchdown.expect("flight ends in touchdown");
    let flight_oracle = 2.0 * (2.0 * h / ctx.robot.gravity).sqrt();
    let flight_err = (td.time / flight_oracle - 1.0).abs();

    // (d) guard residuals on an ordinary default run
    let default_ctx =
        SimContext::for_condition(&ExperimentConfig::default(), 0.0, true, None).unwrap();
    let run = run_hops(&default_ctx, 10, 0).unwrap();
    let worst_residual = run
        .events
        .iter()
        .map(|e| e.residual.abs())
        .fold(0.0, f64::max);

    report(
        7,
        "integrator physics",
        &[
            (drift < 1e-3, format!("oscillator energy drift {drift:.2e} < 0.1% per period")),
            (
                period_err < 0.01,
                format!("stance period within {:.3}% of pi*sqrt(M_eff/K)", period_err * 100.0),
            ),
            (
                flight_err < 0.01,
                format!("5 cm ballistic flight {:.4} s vs {flight_oracle:.4} (±1%)", td.time),
            ),
            (
                worst_residual < 1e-6 && td.residual.abs() < 1e-6,
                format!("guard residuals <= {worst_residual:.2e} < 1e-6"),
            ),
        ],
    );
}

#[test]
fn criterion_8_bootstrap_statistics() {
    let true_mean = 3.0;
    let normal = rand_distr::Normal::new(true_mean, 1.5).unwrap();
    let reps = 1000usize;
    let mut covered = 0usize;
    for rep in 0..reps {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10_000 + rep as u64);
        let samples: Vec<f64> = (0..70).map(|_| normal.sample(&mut rng)).collect();
        let ci = bootstrap_mean_ci(&samples, 0.99, 1000, rep as u64).unwrap();
        if ci.ci_low <= true_mean && true_mean <= ci.ci_high {
            covered += 1;
        }
    }
    let coverage = covered as f64 / reps as f64;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<f64> = (0..70).map(|_| normal.sample(&mut rng)).collect();
    let a = bootstrap_mean_ci(&samples, 0.99, 1000, 42).unwrap();
    let b = bootstrap_mean_ci(&samples, 0.99, 1000, 42).unwrap();

    report(
        8,
        "bootstrap statistics",
        &[
            (
                (0.97..=1.0).contains(&coverage),
                format!("coverage {coverage:.3} in [0.97, 1.00] over {reps} replications"),
            ),
            (
                a.ci_low == b.ci_low && a.ci_high == b.ci_high,
                "identical seeds give identical intervals".to_string(),
            ),
        ],
    );
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.added_mass_list = vec![0.1];
    cfg.experiment.n_hops = 8;
    cfg.experiment.transient_discard = 2;
    cfg.experiment.recalibrate_pushoff = false;
    let config_path = dir.path().join("exp.toml");
    std::fs::write(&config_path, cfg.to_toml_string().unwrap()).unwrap();

    let mut digests = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = Command::new(BIN)
            .args(["hop", "--config"])
            .arg(&config_path)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .expect("spawn hop");
        assert!(out.status.success(), "hop failed: {}", String::from_utf8_lossy(&out.stderr));
        let mut files: Vec<_> = std::fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        let blobs: Vec<(String, Vec<u8>)> = files
            .iter()
            .map(|p| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    std::fs::read(p).unwrap(),
                )
            })
            .collect();
        digests.push(blobs);
    }
    let names: Vec<&String> = digests[0].iter().map(|(n, _)| n).collect();
    let identical = digests[0] == digests[1];

    report(
        9,
        "determinism",
        &[(
            identical && names.len() >= 2,
            format!("two runs byte-identical across {} files ({})", names.len(), {
                let mut ns: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                ns.sort();
                ns.join(", ")
            }),
        )],
    );
}
