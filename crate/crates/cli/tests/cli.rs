use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn hapticsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hapticsim"))
        .args(args)
        .env("HAPTICSIM_CONFIG_DIR", repo_configs())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(err.trim()).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {err}"))
}

fn first_ranked(o: &Output) -> Vec<String> {
    stdout(o)
        .lines()
        .find(|l| l.trim_start().starts_with("1 "))
        .expect("rank 1 line")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

#[test]
fn recommend_direction() {
    let o = hapticsim(&["recommend", "glass", "ceramics"]);
    assert!(o.status.success());
    assert_eq!(first_ranked(&o)[2], "vibro");
    assert_eq!(first_ranked(&o)[1], "A1");

    let o = hapticsim(&["recommend", "wood", "paper"]);
    assert!(o.status.success());
    assert_eq!(first_ranked(&o)[2], "pneumo");
}

#[test]
fn recommend_identity_is_usage_error() {
    let o = hapticsim(&["recommend", "glass", "glass"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "identity_substitution");
}

#[test]
fn trials_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.csv");
    let o = hapticsim(&[
        "trials",
        "--participant",
        "3",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 211);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn synth_wav_peak_follows_speed() {
    use rustfft::{num_complex::Complex, FftPlanner};
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("tone.wav");
    let o = hapticsim(&[
        "synth",
        "--speed",
        "250",
        "--level",
        "A3",
        "--out",
        wav.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let mut r = hound::WavReader::open(&wav).unwrap();
    assert_eq!(r.spec().sample_rate, 3000);
    let mut buf: Vec<Complex<f64>> = r
        .samples::<i16>()
        .map(|s| Complex::new(f64::from(s.unwrap()), 0.0))
        .collect();
    let n = buf.len();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bin = (1..n / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap();
    assert!((bin as f64 * 3000.0 / n as f64 - 250.0).abs() <= 3000.0 / n as f64);
}

#[test]
fn synth_rejects_pneumatic_level() {
    let dir = tempfile::tempdir().unwrap();
    let o = hapticsim(&[
        "synth",
        "--speed",
        "100",
        "--level",
        "B1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["error"]["kind"], "usage");
}

#[test]
fn step_sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let o = hapticsim(&[
        "step-sweep",
        "--targets",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows: Vec<_> = metrics.lines().skip(1).collect();
    assert_eq!(rows, vec!["0,0.000,0.000,0.000,0.000"]);

    let out = dir.path().join("three");
    let o = hapticsim(&[
        "step-sweep",
        "--targets-kpa",
        "6,8,10",
        "--no-plots",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
    assert!(stdout(&o).contains("literature"));
    assert!(out.join("step_8kpa.csv").exists());
    assert!(!out.join("step_8kpa.svg").exists());

    let o = hapticsim(&[
        "step-sweep",
        "--targets",
        "12.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"]["kind"], "pressure_above_validated");
}

#[test]
fn scenario_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = hapticsim(&[
            "scenario",
            "glass-as-ceramic",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{o:?}");
        out
    };
    let a = run("a");
    let b = run("b");
    for f in ["trace.csv", "drive.wav", "events.ndjson", "summary.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let header = std::fs::read_to_string(a.join("trace.csv")).unwrap();
    assert!(header
        .starts_with("t_ms,speed_mm_s,drive_rms,pressure_kpa,lift_mm,area_reduction_pct,event\n"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn scenario_errors_carry_field_paths() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"schema":1,"name":"x","duration_s":1,"trajectory":{"kind":"constant","speed_mm_s":50},
            "contacts":[{"material":"granite","begin_ms":0}],"mapping":{}}"#,
    )
    .unwrap();
    let o = hapticsim(&[
        "scenario",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let e = error_json(&o);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"]
        .as_str()
        .unwrap()
        .contains("contacts[0].material"));
}

#[test]
fn config_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("scenarios");
    std::fs::create_dir_all(&scen).unwrap();
    std::fs::write(
        scen.join("tap.json"),
        r#"{"schema":1,"name":"tap","duration_s":1,"trajectory":{"kind":"constant","speed_mm_s":50},
            "contacts":[{"material":"paper","begin_ms":100}],"mapping":{"paper":"A2"}}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_hapticsim"))
        .args(["scenario", "tap", "--out", out.to_str().unwrap()])
        .env("HAPTICSIM_CONFIG_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{o:?}");
    assert!(out.join("trace.csv").exists());
}

#[test]
fn overlap_prints_score() {
    let o = hapticsim(&["overlap", "glass:A1", "ceramics:N"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("overlap 0.742"));
    let o = hapticsim(&["overlap", "glass", "ceramics:N"]);
    assert_eq!(o.status.code(), Some(2));
}
