//! Acceptance criteria. Each test prints one `[PASS]`/`[FAIL]` line
//! (written straight to stdout so it shows without `--nocapture`) and then
//! asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use hapticsim_core::perception::RatingTable;
use hapticsim_core::pipeline::{run_scenario, ScenarioConfig};
use hapticsim_core::pneumo::{
    calibrated_gains, calibrated_plant, contact_area_reduction, pressure_to_lift, run_step_response,
};
use hapticsim_core::session::protocol::{decode, EventKind, SessionEvent};
use hapticsim_core::session::{generate_trials, replay, SchedulerConfig};
use hapticsim_core::tracking::{
    estimate_velocity, synth_trajectory, SmoothingConfig, TrajectoryProfile,
};
use hapticsim_core::types::{Material, StimulusKind, StimulusLabel, WaveformParams};
use hapticsim_core::vibro::{concat_frames, synthesize};
use hapticsim_core::VelocityTraceF64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

fn report(
    n: u32,
    name: &str,
    pass: bool,
    detail: &str,
    elapsed: Duration,
    limit: Duration,
) -> bool {
    let in_time = elapsed <= limit;
    let ok = pass && in_time;
    let line = format!(
        "[{}] criterion {n} {name}: {detail} ({:.0} ms, limit {} ms)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64() * 1e3,
        limit.as_millis()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    ok
}

fn peak_bin(samples: &[f64]) -> usize {
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    (1..buf.len() / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap()
}

#[test]
fn criterion_1_waveform_frequency_law() {
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut pass = true;
    for v in [50.0, 100.0, 200.0, 250.0] {
        let trace = VelocityTraceF64::constant(v, 3000.0, 1.0);
        let params = WaveformParams::default().with_wavelength(1.0);
        let y = concat_frames(&synthesize(&trace, &params).unwrap());
        let resolution = 3000.0 / y.len() as f64;
        let f = peak_bin(&y) as f64 * resolution;
        pass &= (f - v).abs() <= resolution;
        detail.push(format!("{v} mm/s -> {f} Hz"));
    }
    let ok = report(
        1,
        "waveform frequency law",
        pass,
        &detail.join(", "),
        start.elapsed(),
        Duration::from_secs(1),
    );
    assert!(ok);
}

#[test]
fn criterion_2_pressure_tracking_envelope() {
    let start = Instant::now();
    let (plant, gains) = (calibrated_plant::<f64>(), calibrated_gains::<f64>());
    let mut pass = true;
    let mut maes = Vec::new();
    let mut worst = (0.0f64, 0.0f64);
    for (i, target) in (1..=12).map(f64::from).enumerate() {
        let r = run_step_response(target, 6.0, &gains, &plant, i as u64).unwrap();
        pass &= r.metrics.mae_stable <= 0.6 && r.metrics.mme_stable <= 1.3;
        worst = (
            worst.0.max(r.metrics.mae_stable),
            worst.1.max(r.metrics.mme_stable),
        );
        maes.push(r.metrics.mae_stable);
    }
    let avg = maes.iter().sum::<f64>() / maes.len() as f64;
    pass &= (avg - 0.386).abs() <= 0.25;
    let detail = format!(
        "worst mae_stable {:.3} kPa, worst mme_stable {:.3} kPa, average mae_stable {avg:.3} kPa (reference 0.386 ± 0.25)",
        worst.0, worst.1
    );
    let ok = report(
        2,
        "pressure tracking envelope",
        pass,
        &detail,
        start.elapsed(),
        Duration::from_secs(10),
    );
    assert!(ok);
}

#[test]
fn criterion_3_timing_bands() {
    let start = Instant::now();
    let r = run_step_response(
        10.0,
        6.0,
        &calibrated_gains::<f64>(),
        &calibrated_plant(),
        9,
    )
    .unwrap();
    let act = r.metrics.activation_time.unwrap_or(f64::INFINITY);
    let deact = r.metrics.deactivation_time.unwrap_or(f64::INFINITY);
    let pass = (0.10..=0.30).contains(&act) && (0.20..=0.60).contains(&deact);
    let detail =
        format!("activation {act:.3} s in [0.10, 0.30], deactivation {deact:.3} s in [0.20, 0.60]");
    let ok = report(
        3,
        "timing bands",
        pass,
        &detail,
        start.elapsed(),
        Duration::from_secs(1),
    );
    assert!(ok);
}

#[test]
fn criterion_4_calibration_lookups() {
    let start = Instant::now();
    let mut pass = pressure_to_lift(10.0f64).unwrap() == 4.07;
    // (force N, [6, 8, 10 kPa] reduction %)
    let printed = [
        (1.5, [8.1, 11.9, 20.8]),
        (1.0, [8.6, 15.2, 28.8]),
        (0.75, [12.8, 25.5, 39.6]),
    ];
    let mut grid_ok = 0;
    for (force, pcts) in printed {
        for (p, want) in [6.0, 8.0, 10.0].into_iter().zip(pcts) {
            let got: f64 = contact_area_reduction(p, force).unwrap() * 100.0;
            if ((got * 10.0).round() / 10.0 - want).abs() < 1e-9 {
                grid_ok += 1;
            }
        }
    }
    pass &= grid_ok == 9;
    let mut monotone = true;
    let n = 50;
    let ps: Vec<f64> = (0..n).map(|i| 10.0 * i as f64 / (n - 1) as f64).collect();
    let fs: Vec<f64> = (0..n)
        .map(|j| 0.75 + 0.75 * j as f64 / (n - 1) as f64)
        .collect();
    let table: Vec<Vec<f64>> = ps
        .iter()
        .map(|&p| {
            fs.iter()
                .map(|&f| contact_area_reduction(p, f).unwrap())
                .collect()
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            if i + 1 < n {
                monotone &= table[i + 1][j] >= table[i][j];
            }
            if j + 1 < n {
                monotone &= table[i][j + 1] <= table[i][j];
            }
        }
    }
    let lifts: Vec<f64> = ps.iter().map(|&p| pressure_to_lift(p).unwrap()).collect();
    monotone &= lifts.windows(2).all(|w| w[1] >= w[0]);
    pass &= monotone;
    let detail = format!(
        "lift(10 kPa) = {} mm, {grid_ok}/9 grid points, monotone on 50x50 hull: {monotone}",
        pressure_to_lift(10.0f64).unwrap()
    );
    let ok = report(
        4,
        "calibration lookups",
        pass,
        &detail,
        start.elapsed(),
        Duration::from_secs(1),
    );
    assert!(ok);
}

/// Published means and SDs; rows A3, A2, A1, N, B1, B2, B3; columns glass,
/// ceramics, paper, wood, cotton, leather.
const PUBLISHED: [[(f64, f64); 6]; 7] = [
    [
        (41.7, 12.57),
        (49.7, 6.54),
        (64.9, 7.38),
        (71.2, 7.54),
        (82.2, 12.67),
        (84.1, 12.48),
    ],
    [
        (36.8, 12.5),
        (44.7, 8.43),
        (60.5, 6.03),
        (69.2, 6.71),
        (77.7, 8.86),
        (82.5, 11.05),
    ],
    [
        (31.9, 11.72),
        (40.8, 8.34),
        (54.2, 5.45),
        (62.4, 6.54),
        (73.3, 10.75),
        (77.5, 10.56),
    ],
    [
        (17.9, 7.03),
        (30.3, 6.89),
        (46.1, 5.78),
        (58.6, 7.10),
        (70.8, 10.84),
        (74.1, 9.87),
    ],
    [
        (15.7, 4.44),
        (26.4, 6.19),
        (41.0, 4.72),
        (49.3, 10.83),
        (64.2, 14.66),
        (61.90, 7.08),
    ],
    [
        (13.0, 6.27),
        (20.5, 9.61),
        (37.0, 7.16),
        (45.4, 13.16),
        (57.6, 15.34),
        (60.0, 7.47),
    ],
    [
        (11.0, 6.71),
        (17.9, 9.36),
        (31.9, 11.4),
        (38.6, 15.12),
        (53.4, 14.08),
        (58.0, 6.09),
    ],
];
const ROWS: [StimulusLabel; 7] = [
    StimulusLabel::A3,
    StimulusLabel::A2,
    StimulusLabel::A1,
    StimulusLabel::N,
    StimulusLabel::B1,
    StimulusLabel::B2,
    StimulusLabel::B3,
];
const COLS: [Material; 6] = [
    Material::Glass,
    Material::Ceramics,
    Material::Paper,
    Material::BalsaWood,
    Material::Cotton,
    Material::Leather,
];

/// ∫ min(f_a, f_b) by composite Simpson over ±12 SD.
fn overlap_by_integration((ma, sa): (f64, f64), (mb, sb): (f64, f64)) -> f64 {
    let pdf = |x: f64, m: f64, s: f64| {
        (-(x - m).powi(2) / (2.0 * s * s)).exp() / (s * std::f64::consts::TAU.sqrt())
    };
    let lo = ma.min(mb) - 12.0 * sa.max(sb);
    let hi = ma.max(mb) + 12.0 * sa.max(sb);
    let n = 100_000;
    let h = (hi - lo) / n as f64;
    let f = |x: f64| pdf(x, ma, sa).min(pdf(x, mb, sb));
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn criterion_5_perception_table_integrity() {
    let start = Instant::now();
    let table = RatingTable::embedded();
    let mut matches = 0;
    for (r, &label) in ROWS.iter().enumerate() {
        for (c, &material) in COLS.iter().enumerate() {
            let got = table.predicted_rating(material, label).unwrap();
            if (got.mean, got.sd) == PUBLISHED[r][c] {
                matches += 1;
            }
        }
    }
    let ordered = COLS.iter().all(|&m| {
        ROWS.windows(2).all(|w| {
            table.predicted_rating(m, w[0]).unwrap().mean
                >= table.predicted_rating(m, w[1]).unwrap().mean
        })
    });
    let oracle = overlap_by_integration(PUBLISHED[2][0], PUBLISHED[3][1]);
    let model = table
        .overlap(
            (Material::Glass, StimulusLabel::A1),
            (Material::Ceramics, StimulusLabel::N),
        )
        .unwrap();
    let pass = matches == 42
        && table.len() == 42
        && ordered
        && oracle >= 0.9
        && (model - oracle).abs() < 1e-6;
    let detail = format!(
        "{matches}/42 entries match, ordering holds: {ordered}, overlap(glass A1, ceramics N) = {oracle:.4} by integration ({model:.4} closed form), required >= 0.9"
    );
    let ok = report(
        5,
        "perception table integrity",
        pass,
        &detail,
        start.elapsed(),
        Duration::from_secs(1),
    );
    assert!(ok);
}

#[test]
fn criterion_6_recommendation_direction() {
    let start = Instant::now();
    let table = RatingTable::embedded();
    let mut wrong = Vec::new();
    for p in COLS {
        for v in COLS {
            if p == v {
                continue;
            }
            let (s, score) = table.recommend_stimulus(p, v).unwrap();
            let pm = table.predicted_rating(p, StimulusLabel::N).unwrap().mean;
            let vm = table.predicted_rating(v, StimulusLabel::N).unwrap().mean;
            let want = if vm > pm {
                StimulusKind::Vibro
            } else {
                StimulusKind::Pneumo
            };
            if s.kind != want {
                wrong.push(format!("{p}->{v} gives {} ({score:.3})", s.label));
            }
        }
    }
    let deployed = [
        (Material::Glass, Material::Ceramics, StimulusLabel::A1),
        (Material::Paper, Material::BalsaWood, StimulusLabel::A2),
        (Material::Cotton, Material::Leather, StimulusLabel::A2),
        (Material::Ceramics, Material::Glass, StimulusLabel::B3),
        (Material::BalsaWood, Material::Paper, StimulusLabel::B2),
        (Material::Leather, Material::Cotton, StimulusLabel::B1),
    ];
    let mut missing = Vec::new();
    for (p, v, s) in deployed {
        let ranked = table.rank_stimuli(p, v, 0.0).unwrap();
        if !ranked.iter().take(3).any(|r| r.stimulus == s) {
            let top: Vec<_> = ranked.iter().take(3).map(|r| r.stimulus.as_str()).collect();
            missing.push(format!("{p}->{v} {s} not in top 3 {top:?}"));
        }
    }
    let pass = wrong.is_empty() && missing.is_empty();
    let detail = format!(
        "{}/30 pairs in the expected direction{}; {}/6 deployed rows in top 3{}",
        30 - wrong.len(),
        if wrong.is_empty() {
            String::new()
        } else {
            format!(" (off: {})", wrong.join("; "))
        },
        6 - missing.len(),
        if missing.is_empty() {
            String::new()
        } else {
            format!(" (missing: {})", missing.join("; "))
        },
    );
    let ok = report(
        6,
        "recommendation direction",
        pass,
        &detail,
        start.elapsed(),
        Duration::from_secs(1),
    );
    assert!(ok);
}

#[test]
fn criterion_7_trial_generator() {
    use std::collections::{HashMap, HashSet};
    let start = Instant::now();
    let mut pass = true;
    let plans: Vec<_> = (0..6).map(|p| generate_trials(42, p)).collect();
    for plan in &plans {
        pass &= plan.trials.len() == 210;
        let mut counts: HashMap<_, u32> = HashMap::new();
        for t in &plan.trials {
            *counts.entry((t.material, t.stimulus)).or_default() += 1;
        }
        pass &= counts.len() == 42 && counts.values().all(|&c| c == 5);
        let mats: HashSet<_> = plan.trials.iter().map(|t| t.material).collect();
        pass &= mats.len() == 6;
        pass &= plan.trials.iter().all(|t| {
            t.is_baseline == ((t.index + 1) % 6 == 0) && t.is_training == (t.repetition == 1)
        });
        // Materials are presented in contiguous blocks of 35 following the row.
        pass &= plan
            .trials
            .iter()
            .all(|t| t.material == plan.material_order[t.index / 35]);
    }
    for pos in 0..6 {
        let col: HashSet<_> = plans.iter().map(|p| p.material_order[pos]).collect();
        pass &= col.len() == 6;
    }
    pass &= generate_trials(42, 3) == plans[3] && generate_trials(43, 3).trials != plans[3].trials;
    let ok = report(
        7,
        "trial generator",
        pass,
        "210 trials, 6x7x5 composition, Latin-square coverage over participants 0-5, baseline every 6, seeded",
        start.elapsed(),
        Duration::from_secs(1),
    );
    assert!(ok);
}

fn random_event(rng: &mut ChaCha8Rng, seq: u64) -> SessionEvent {
    let kinds = [
        EventKind::ContactBegin,
        EventKind::ContactEnd,
        EventKind::StimulusCmd,
        EventKind::Ack,
        EventKind::Error,
    ];
    let kind = kinds[rng.gen_range(0..kinds.len())];
    let mut ev = SessionEvent::new(seq, rng.gen(), kind);
    if kind == EventKind::ContactBegin || rng.gen_bool(0.3) {
        ev.material = Some(Material::ALL[rng.gen_range(0..Material::ALL.len())]);
    }
    if kind == EventKind::StimulusCmd || rng.gen_bool(0.3) {
        ev.stimulus = Some(StimulusLabel::ALL[rng.gen_range(0..7)]);
    }
    ev
}

#[test]
fn criterion_8_protocol_and_determinism() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lossless = 0;
    for _ in 0..10_000 {
        let seq = rng.gen();
        let ev = random_event(&mut rng, seq);
        let line = ev.encode();
        if decode(&line).as_ref() == Ok(&ev) && decode(&line).unwrap().encode() == line {
            lossless += 1;
        }
    }

    // Valid contact traffic interleaved with corrupted copies.
    let mut stream = String::new();
    let mut malformed = 0;
    let mut valid = 0;
    for i in 0..2_000u64 {
        let ev = if i % 2 == 0 {
            SessionEvent::contact_begin(i + 1, i * 10, Material::Glass)
        } else {
            SessionEvent::contact_end(i + 1, i * 10)
        };
        let line = ev.encode();
        if rng.gen_bool(0.2) {
            let cut = rng.gen_range(1..line.len() - 1);
            let bad = match rng.gen_range(0..3) {
                0 => line[..cut].to_string(),
                1 => format!("{}#{}", &line[..cut], &line[cut..]),
                _ => "\u{7f}garbage".to_string(),
            };
            stream.push_str(&bad);
            malformed += 1;
        } else {
            stream.push_str(&line);
            valid += 1;
        }
        stream.push('\n');
    }
    let cfg = SchedulerConfig::default().with_mapping(Material::Glass, StimulusLabel::A1);
    let out = replay(stream.as_bytes(), Vec::new(), cfg).unwrap();
    let errors = out.iter().filter(|e| e.kind == EventKind::Error).count();
    let last_valid_answered = out
        .last()
        .is_some_and(|e| e.kind != EventKind::Error || valid == 0);

    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/scenarios/cup-swap.json");
    let scenario = ScenarioConfig::load(&path).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let d = dir.path().join(run);
        run_scenario(&scenario).unwrap().write_dir(&d).unwrap();
        files.push(
            ["trace.csv", "drive.wav", "events.ndjson", "summary.json"]
                .map(|f| std::fs::read(d.join(f)).unwrap()),
        );
    }
    let identical = files[0] == files[1];

    let pass = lossless == 10_000 && errors == malformed && last_valid_answered && identical;
    let detail = format!(
        "{lossless}/10000 round-trips, {errors} Error events for {malformed} malformed lines in a {}-line stream, scenario traces byte-identical: {identical}",
        malformed + valid
    );
    let ok = report(
        8,
        "protocol and determinism",
        pass,
        &detail,
        start.elapsed(),
        Duration::from_secs(10),
    );
    assert!(ok);
}

#[test]
fn criterion_9_velocity_estimator_accuracy() {
    let start = Instant::now();
    let smoothing = SmoothingConfig::default();
    let mut worst = 0.0f64;
    let mut latency_ok = true;
    for v in [50.0f64, 75.0, 100.0, 125.0, 150.0, 175.0, 200.0] {
        let tr = synth_trajectory(&TrajectoryProfile::constant(v), 2.0).unwrap();
        let est = estimate_velocity(&tr.samples, 3000.0, &smoothing).unwrap();
        // Steady state: after the filter has had 0.5 s to converge.
        for &s in &est.speeds[1500..] {
            worst = worst.max((s - v).abs() / v);
        }
        latency_ok &= est.latency == smoothing.latency_budget_s;
    }
    let pass = worst <= 0.02 && latency_ok;
    let detail = format!(
        "worst steady-state error {:.4}% over 50-200 mm/s, latency = {} ms budget: {latency_ok}",
        worst * 100.0,
        smoothing.latency_budget_s * 1000.0
    );
    let ok = report(
        9,
        "velocity estimator accuracy",
        pass,
        &detail,
        start.elapsed(),
        Duration::from_secs(1),
    );
    assert!(ok);
}
