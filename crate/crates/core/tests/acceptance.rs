//! Acceptance suite: one test per headline criterion, each printing a single
//! `acceptance PASS|FAIL <criterion>: <measurement>` line on stderr.
//!
//! Tests hold a shared lock so that wall-clock budgets are measured without
//! other tests competing for the CPU.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use gaitspace::experiments::{
    detection_experiment, envelope_experiment, loop_budget, schedule_experiment, MAX_RECOVERY_STEPS,
};
use gaitspace::formats::{Checkpoint, Dataset};
use gaitspace::gait_oracle::{
    generate_trot, leg_fk, leg_ik, GaitParams, Leg, OracleOptions, QuadrupedGeometry, Stance, Twist,
};
use gaitspace::latent_control::{advance_phase, design_butterworth, drive_value, DriveSignalState};
use gaitspace::pipeline::{
    calibrated_planner, generate_dataset, held_out_fit, latent_structure, nominal_scenario, Evaluation,
};
use gaitspace::vae::{check_loss_gradients, gait_frequency, train, Batch, EncodeMode, TrainOptions, VaeNetworks};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(criterion: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "acceptance {verdict} {criterion}: {detail}");
}

fn check(criterion: &str, pass: bool, detail: String) {
    report(criterion, pass, &detail);
    assert!(pass, "{criterion}: {detail}");
}

#[test]
fn gradient_correctness() {
    let _guard = serial();
    let config = gaitspace::RunConfig::desk().model;
    let start = Instant::now();
    let networks = VaeNetworks::new(&config, 11);
    let batch = Batch::random(&config, 4, 12);
    let r = check_loss_gradients(&networks, &config, &batch, 10, 1e-5, 1e-4, 13).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let layers = networks.encoder.layers.len() + networks.decoder.layers.len() + networks.predictor.layers.len();
    check(
        "gradient",
        r.passed() && r.entries.len() >= 10 * layers && secs < 10.0,
        format!(
            "max relative error {:.2e} (< 1e-4) over {} coordinates in {layers} layers, {secs:.2} s (< 10 s)",
            r.max_relative_error(),
            r.entries.len()
        ),
    );
}

/// Closed-form schedule of the oscillator from phase zero: every half-cycle
/// spends `ε + 1` ticks at the zero crossing (the arrival plus `ε` holds)
/// followed by `ceil(T/2) - 1` ticks inside the lobe, in which the `j`-th
/// tick sits at phase `j·2π/T`.
fn expected_sequence(period: u32, stance: u32, ticks: usize) -> Vec<(u64, u32)> {
    let lobe = period.div_ceil(2);
    let per_half = (stance + lobe) as usize;
    (0..ticks)
        .map(|t| {
            let half = (t / per_half) as u64;
            let within = (t % per_half) as u32;
            (half, within.saturating_sub(stance))
        })
        .collect()
}

#[test]
fn oscillator_exact() {
    let _guard = serial();
    let start = Instant::now();
    let mut checked = 0usize;
    let mut worst_value = 0.0f64;
    let mut mismatch = None;
    for period in 2..=64u32 {
        for stance in 0..=12u32 {
            let amplitude = 0.75;
            let mut s = DriveSignalState::new(amplitude, period, stance);
            let lobe = period.div_ceil(2);
            let cycles = 4usize;
            let ticks = cycles * 2 * (stance + lobe) as usize;
            let expected = expected_sequence(period, stance, ticks);
            let mut support_ticks = 0usize;
            for (t, &(half, step)) in expected.iter().enumerate() {
                let got_step = if s.at_support() { 0 } else { (s.offset / s.phase_increment()).round() as u32 };
                if s.half_cycles != half || got_step != step {
                    mismatch.get_or_insert(format!("T={period} eps={stance} tick {t}: ({}, {got_step}) vs ({half}, {step})", s.half_cycles));
                }
                support_ticks += usize::from(s.at_support());
                let phase = half as f64 * PI + step as f64 * 2.0 * PI / period as f64;
                let want = if step == 0 { 0.0 } else { amplitude * phase.sin().powi(3) };
                let got = drive_value(&s);
                if step == 0 && got != 0.0 {
                    mismatch.get_or_insert(format!("T={period} eps={stance} tick {t}: drive {got} at a zero crossing"));
                }
                worst_value = worst_value.max((got - want).abs());
                s = advance_phase(&s);
                checked += 1;
            }
            let want_support = cycles * 2 * (stance as usize + 1);
            if support_ticks != want_support {
                mismatch.get_or_insert(format!("T={period} eps={stance}: {support_ticks} support ticks, want {want_support}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        "oscillator",
        mismatch.is_none() && worst_value < 1e-12 && secs < 1.0,
        format!(
            "{checked} ticks over T in 2..=64, eps in 0..=12: sequences exact, support-tick counts exact, max |A sin^3 error| {worst_value:.1e}, {secs:.3} s (< 1 s){}",
            mismatch.map(|m| format!("; first mismatch {m}")).unwrap_or_default()
        ),
    );
}

/// Steady-state gain of the filter for a sinusoid, by projection over whole periods.
fn measured_gain(cutoff: f64, hz: f64, freq: f64) -> f64 {
    let mut f = design_butterworth(cutoff, hz, 1).unwrap();
    let settle = 4000;
    let window = (hz / freq * 200.0).round() as usize;
    let (mut a, mut b) = (0.0, 0.0);
    for t in 0..settle + window {
        let w = 2.0 * PI * freq * t as f64 / hz;
        let y = f.step_channel(0, w.sin());
        if t >= settle {
            a += y * w.sin();
            b += y * w.cos();
        }
    }
    2.0 * a.hypot(b) / window as f64
}

#[test]
fn butterworth_response() {
    let _guard = serial();
    let start = Instant::now();
    let (cutoff, hz) = (10.0, 100.0);
    let mut f = design_butterworth(cutoff, hz, 1).unwrap();
    let mut y = 0.0;
    for _ in 0..20_000 {
        y = f.step_channel(0, 1.0);
    }
    let dc = f.dc_gain();
    let sweep: Vec<(f64, f64)> = (1..=45).map(|i| i as f64).map(|fr| (fr, measured_gain(cutoff, hz, fr))).collect();
    let at_cut = 20.0 * sweep.iter().find(|(fr, _)| *fr == cutoff).unwrap().1.log10();
    let monotone = sweep.windows(2).all(|w| w[1].1 < w[0].1);

    let mut f = design_butterworth(cutoff, hz, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut peak = 0.0f64;
    let mut finite = true;
    for _ in 0..1_000_000 {
        let out = f.step_channel(0, rng.random_range(-1.0..1.0));
        finite &= out.is_finite();
        peak = peak.max(out.abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        "butterworth",
        (dc - 1.0).abs() < 1e-12 && (y - 1.0).abs() < 1e-12 && (at_cut + 3.0103).abs() < 0.05 && monotone && finite && peak < 2.0 && secs < 10.0,
        format!(
            "DC gain {dc:.15} (step settles to {y:.15}), measured {at_cut:.4} dB at cutoff (-3.01 +/- 0.05), monotone sweep 1-45 Hz: {monotone}, 1e6 random ticks peak |y| {peak:.3}, {secs:.2} s"
        ),
    );
}

#[test]
fn oracle_physics() {
    let _guard = serial();
    let start = Instant::now();
    let geometry = QuadrupedGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_ik = 0.0f64;
    for i in 0..1000 {
        let leg = Leg::ALL[i % 4];
        let angles = [rng.random_range(-0.4..0.4), rng.random_range(-0.2..1.2), rng.random_range(-2.4..-0.4)];
        let target = leg_fk(angles, &geometry, leg);
        let round = leg_fk(leg_ik(target, &geometry, leg).unwrap(), &geometry, leg);
        let err = (0..3).map(|k| (round[k] - target[k]).powi(2)).sum::<f64>().sqrt();
        worst_ik = worst_ik.max(err);
    }

    let params = GaitParams { base_twist_cmd: Twist::new(0.3, 0.1, 0.2), ..GaitParams::default() };
    let options = OracleOptions { duration: 10.0, ..OracleOptions::default() };
    let traj = generate_trot(&params, &geometry, &options, 4).unwrap();
    let weight = geometry.weight();
    let mut worst_force = 0.0f64;
    let mut non_trot = 0usize;
    let mut seen = [false; 4];
    for s in &traj.states {
        let fz: f64 = (0..4).filter(|&i| s.contact[i]).map(|i| s.lambda[i][2]).sum();
        worst_force = worst_force.max((fz - weight).abs());
        match Stance::from_contacts(s.contact) {
            Some(Stance::Flight) | None => non_trot += 1,
            Some(st) => seen[st.class_index()] = true,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        "oracle physics",
        worst_ik < 1e-9 && worst_force < 1e-9 && non_trot == 0 && seen[..3].iter().all(|&b| b) && secs < 5.0,
        format!(
            "fk(ik) max error {worst_ik:.2e} m over 1000 targets, stance vertical force error {worst_force:.2e} N, {non_trot} non-trot ticks of {} ({} s), {secs:.2} s",
            traj.len(),
            options.duration
        ),
    );
}

#[test]
fn training_loss_and_determinism() {
    let _guard = serial();
    let fx = common::desk();
    let summary = fx.trained.loss_summary();
    let finite = fx.trained.outcome.history.iter().all(|l| l.is_finite());

    let options = TrainOptions { steps: 200, ..fx.config.training.clone() };
    let a = train(&fx.dataset, &fx.config.model, &options).unwrap();
    let b = train(&fx.dataset, &fx.config.model, &options).unwrap();
    let same = a.history == b.history
        && a.model == b.model
        && a.history[..] == fx.trained.outcome.history[..200];
    let c = train(&fx.dataset, &fx.config.model, &TrainOptions { seed: options.seed + 1, ..options.clone() }).unwrap();
    let seed_matters = c.history != a.history;
    let drop = summary.drop_fraction();
    check(
        "training",
        drop >= 0.5 && finite && same && seed_matters && fx.train_seconds < 600.0,
        format!(
            "{} steps in {:.1} s: mean loss {:.3} over steps 0-99 -> {:.3} over the last 100 ({:.1}% drop, >= 50%), finite {finite}, same-seed traces identical {same}, other seed differs {seed_matters}",
            summary.steps,
            fx.train_seconds,
            summary.initial,
            summary.last,
            100.0 * drop
        ),
    );
}

#[test]
fn latent_structure_clusters_and_drive() {
    let _guard = serial();
    let fx = common::desk();
    let eval = Evaluation::from_outcome(&fx.trained.outcome);
    let gait_hz = gait_frequency(fx.config.gait.swing_duration, fx.config.gait.full_stance_duration);
    let s = latent_structure(&fx.trained.outcome.model, &eval, gait_hz).unwrap();
    check(
        "latent structure",
        s.knn_accuracy >= 0.8 && s.power_ratio >= 3.0,
        format!(
            "held-out k-NN stance accuracy {:.4} (>= 0.8); drive dimension {} power {:.1}x the median (>= 3x)",
            s.knn_accuracy, s.drive_dimension, s.power_ratio
        ),
    );
}

#[test]
fn contact_prediction() {
    let _guard = serial();
    let fx = common::desk();
    let eval = Evaluation::from_outcome(&fx.trained.outcome);
    let fit = held_out_fit(&fx.trained.outcome.model, &eval).unwrap();
    check(
        "contact prediction",
        fit.contacts.per_tick >= 0.9,
        format!(
            "held-out per-tick accuracy {:.4} (>= 0.9), per-foot {:.4}",
            fit.contacts.per_tick, fit.contacts.per_foot
        ),
    );
}

fn schedule_detail(r: &gaitspace::experiments::ScheduleReport) -> String {
    r.segments
        .iter()
        .map(|g| {
            let range = |v: &[usize]| match (v.iter().min(), v.iter().max()) {
                (Some(a), Some(b)) if a == b => format!("{a}"),
                (Some(a), Some(b)) => format!("{a}-{b}"),
                _ => "none".into(),
            };
            format!(
                "swing {} -> {}, full support {} -> {} (err {})",
                g.swing_ticks,
                range(&g.executed_swing),
                g.stance_ticks,
                range(&g.executed_full_support),
                g.max_error_ticks
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

#[test]
fn online_variation_standing() {
    let _guard = serial();
    let fx = common::desk();
    let r = schedule_experiment(&fx.trained.outcome.model, &fx.config, 0).unwrap();
    check(
        "online variation (A -> 0 standing)",
        r.standing,
        format!("continuous four-foot contact after the amplitude reaches zero: {}", r.standing),
    );
}

#[test]
fn online_variation_within_one_tick() {
    let _guard = serial();
    let fx = common::desk();
    let r = schedule_experiment(&fx.trained.outcome.model, &fx.config, 0).unwrap();
    check("online variation (durations within +/-1 tick)", r.within(1), schedule_detail(&r));
}

#[test]
fn disturbance_detection() {
    let _guard = serial();
    let fx = common::desk();
    let model = &fx.trained.outcome.model;
    let scenario = nominal_scenario(&fx.config, fx.config.experiments.calibration_s);
    let (options, calibration) = calibrated_planner(model, &fx.config, &scenario, 0).unwrap();
    let d = detection_experiment(model, &fx.config, &options, calibration, 0).unwrap();
    let recovered = d.recovered_within(MAX_RECOVERY_STEPS);
    check(
        "disturbance detection",
        d.detection_rate() >= 0.9 && d.false_trigger_rate() < 1.0 / 60.0 && recovered == d.trials(),
        format!(
            "theta {:.3}: {}/{} pushes of {} m/s detected within 0.1 s (>= 90%); {} false triggers in {} s nominal (< 1/60 s); {recovered}/{} recovered within {MAX_RECOVERY_STEPS} steps (max {:?})",
            calibration.threshold,
            d.detected(),
            d.trials(),
            d.magnitude,
            d.false_triggers,
            d.nominal_s,
            d.trials(),
            d.max_recovery_steps()
        ),
    );
}

#[test]
fn response_benefit() {
    let _guard = serial();
    let fx = common::desk();
    let model = &fx.trained.outcome.model;
    let scenario = nominal_scenario(&fx.config, fx.config.experiments.calibration_s);
    let (options, _) = calibrated_planner(model, &fx.config, &scenario, 0).unwrap();
    let [with, without] = envelope_experiment(model, &fx.config, &options, 0).unwrap();
    let (w, wo) = (with.envelope.unwrap_or(0.0), without.envelope.unwrap_or(0.0));
    let curve = |r: &gaitspace::sim::EnvelopeReport| {
        r.points.iter().map(|p| format!("{}", p.recovered)).collect::<Vec<_>>().join("/")
    };
    check(
        "response benefit",
        w >= wo,
        format!(
            "envelope {w} m/s with the cadence response vs {wo} m/s without ({} trials per magnitude, identical pushes; recovered with {}, without {})",
            fx.config.experiments.envelope.trials,
            curve(&with),
            curve(&without)
        ),
    );
}

#[test]
fn loop_budget_per_tick() {
    let _guard = serial();
    let fx = common::desk();
    let b = loop_budget(&fx.trained.outcome.model, &fx.config, 10.0, 0).unwrap();
    check(
        "loop budget",
        b.ticks == 1000 && b.mean_s < b.period_s,
        format!(
            "mean plan_tick {:.3} ms over {} ticks (< {:.1} ms), worst {:.3} ms",
            1e3 * b.mean_s,
            b.ticks,
            1e3 * b.period_s,
            1e3 * b.max_s
        ),
    );
}

fn small_dataset() -> Dataset {
    let mut config = gaitspace::RunConfig::desk();
    config.data.trajectories = 3;
    config.data.duration_s = 3.0;
    generate_dataset(&config, 2).unwrap()
}

#[test]
fn persistence_roundtrips_and_fuzzed_loaders() {
    let _guard = serial();
    let fx = common::desk();

    let bytes = small_dataset().to_bytes();
    let back = Dataset::from_bytes(&bytes).unwrap();
    let dataset_exact = back.to_bytes() == bytes
        && back.trajectories.iter().zip(&small_dataset().trajectories).all(|(a, b)| {
            a.features.iter().zip(&b.features).all(|(x, y)| x.to_bits() == y.to_bits())
        });

    let model = &fx.trained.outcome.model;
    let json = Checkpoint::new(model.clone(), fx.trained.metadata.clone()).to_json();
    let loaded = Checkpoint::from_json(&json).unwrap().model;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let probe: Vec<f64> = (0..model.config.encoder_input_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
    let action = [0.2, -0.1, 0.05];
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let enc_a = model.encode(&probe, EncodeMode::Mean, None).unwrap();
    let enc_b = loaded.encode(&probe, EncodeMode::Mean, None).unwrap();
    let checkpoint_exact = bits(&enc_a.mean) == bits(&enc_b.mean)
        && bits(&enc_a.log_variance) == bits(&enc_b.log_variance)
        && bits(&model.decode(&enc_a.mean, &action).unwrap()) == bits(&loaded.decode(&enc_b.mean, &action).unwrap())
        && loaded == *model;

    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig { cases: 512, ..ProptestConfig::default() });
    let small = fuzz_checkpoint_json();
    let fuzz = runner.run(
        &(any::<usize>(), any::<usize>(), proptest::collection::vec(any::<u8>(), 0..16), any::<bool>()),
        |(at, len, junk, json_target)| {
            if json_target {
                let mut doc = small.clone().into_bytes();
                splice(&mut doc, at, len, &junk);
                let _ = Checkpoint::from_json(&String::from_utf8_lossy(&doc));
            } else {
                let mut doc = bytes.clone();
                splice(&mut doc, at, len, &junk);
                let _ = Dataset::from_bytes(&doc);
            }
            Ok(())
        },
    );
    let truncations_ok = (0..bytes.len()).step_by(97).all(|cut| Dataset::from_bytes(&bytes[..cut]).is_err());
    check(
        "persistence",
        dataset_exact && checkpoint_exact && fuzz.is_ok() && truncations_ok,
        format!(
            "dataset bytes and f32 bits identical after roundtrip: {dataset_exact}; checkpoint encode/decode probe bits identical: {checkpoint_exact}; 512 mutated dataset/checkpoint documents loaded without a crash: {}; every truncation rejected: {truncations_ok}",
            fuzz.is_ok()
        ),
    );
}

/// Small checkpoint document for mutation, so each fuzz case parses quickly.
fn fuzz_checkpoint_json() -> String {
    let config = gaitspace::vae::ModelConfig {
        hidden_width: 4,
        latent_dim: 6,
        ..gaitspace::RunConfig::desk().model
    };
    let data = small_dataset();
    let normalizer = gaitspace::vae::Normalizer::from_statistics(&data.mean, &data.std).unwrap();
    let model = gaitspace::vae::VaeModel::new(config, normalizer, 1).unwrap();
    Checkpoint::new(model, Default::default()).to_json()
}

/// Replace `len % 8` bytes at `at % (len + 1)` with `junk`.
fn splice(doc: &mut Vec<u8>, at: usize, len: usize, junk: &[u8]) {
    let at = at % (doc.len() + 1);
    let end = (at + len % 8).min(doc.len());
    doc.splice(at..end, junk.iter().copied());
}
