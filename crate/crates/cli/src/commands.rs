use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use hapticsim_core::perception::RatingTable;
use hapticsim_core::pipeline::{run_batch, ScenarioConfig};
use hapticsim_core::pneumo::tuning::reference;
use hapticsim_core::pneumo::{
    run_step_response_with_release, write_metrics_csv, write_step_trace_csv, PneumoConfig,
    StepResponse,
};
use hapticsim_core::session::generate_trials;
use hapticsim_core::tracking::{
    estimate_velocity, read_tracking_csv, SmoothingConfig, TrackingCsv, VelocityTrace,
};
use hapticsim_core::types::{Material, StimulusKind, StimulusLabel, WaveformParams};
use hapticsim_core::vibro::{amplitude_for_accel, concat_frames, synthesize, write_wav, LraModel};
use hapticsim_core::Error;

use crate::manifest::Manifest;
use crate::svg::{line_plot, Series};
use crate::{Cli, Command, Global};

#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: "usage",
            message: message.into(),
            code: 2,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError {
            kind: "io",
            message: format!("{}: {e}", path.display()),
            code: 1,
        }
    }

    fn invariant(message: impl Into<String>) -> Self {
        CliError {
            kind: "invariant",
            message: message.into(),
            code: 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::UnknownStimulus(_) => "unknown_stimulus",
            Error::UnknownMaterial(_) => "unknown_material",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::OutOfRange { .. } => "out_of_range",
            Error::PressureAboveValidated { .. } => "pressure_above_validated",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::NonMonotonicTime { .. } => "non_monotonic_time",
            Error::Nyquist { .. } => "nyquist",
            Error::UnknownRating { .. } => "unknown_rating",
            Error::RatingTable(_) => "rating_table",
            Error::IdentitySubstitution(_) => "identity_substitution",
            Error::Io(_) => "io",
            Error::Parse(_) => "config",
        };
        let code = if matches!(e, Error::IdentitySubstitution(_)) {
            2
        } else {
            1
        };
        CliError {
            kind,
            message: e.to_string(),
            code,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn mkdir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn out_dir(global: &Global, sub: &str) -> PathBuf {
    global
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(sub))
}

/// `--out` naming a file with the given extension, else a directory plus
/// the default file name.
fn out_file(global: &Global, sub: &str, ext: &str, default_name: &str) -> (PathBuf, PathBuf) {
    match &global.out {
        Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) => {
            let dir = p
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            (dir, p.clone())
        }
        _ => {
            let dir = out_dir(global, sub);
            let file = dir.join(default_name);
            (dir, file)
        }
    }
}

fn parse_material(s: &str) -> CliResult<Material> {
    s.parse().map_err(|e: Error| CliError::usage(e.to_string()))
}

fn parse_label(s: &str) -> CliResult<StimulusLabel> {
    s.parse().map_err(|e: Error| CliError::usage(e.to_string()))
}

pub fn run(cli: &Cli, argv: &[String]) -> CliResult {
    match &cli.command {
        Command::StepSweep(a) => step_sweep(&cli.global, a, argv),
        Command::Synth(a) => synth(&cli.global, a, argv),
        Command::Trials(a) => trials(&cli.global, a, argv),
        Command::Recommend(a) => recommend(&cli.global, a, argv),
        Command::Scenario(a) => scenario(&cli.global, a, argv),
        Command::Overlap(a) => overlap(&cli.global, a, argv),
    }
}

// ---------------------------------------------------------------- step-sweep

#[derive(Args, Debug)]
pub struct StepSweepArgs {
    /// Step targets in kPa, comma separated (default 1..12)
    #[arg(long = "targets-kpa", visible_alias = "targets", value_delimiter = ',')]
    pub targets_kpa: Option<Vec<f64>>,
    /// Time at target, s (at least 5)
    #[arg(long = "hold-s", default_value_t = 6.0)]
    pub hold_s: f64,
    /// Time after the setpoint returns to zero, s
    #[arg(long = "release-s", default_value_t = 2.0)]
    pub release_s: f64,
    /// Worker threads
    #[arg(long)]
    pub threads: Option<usize>,
    /// Skip the SVG plots
    #[arg(long)]
    pub no_plots: bool,
}

fn load_pneumo(global: &Global, manifest: &mut Manifest) -> CliResult<PneumoConfig<f64>> {
    let path = global
        .config
        .clone()
        .or_else(|| Some(global.config_dir.join("plant.json")).filter(|p| p.exists()));
    match path {
        Some(p) => {
            let bytes = read(&p)?;
            let text = String::from_utf8_lossy(&bytes);
            let cfg = PneumoConfig::from_json(&text)
                .map_err(|e| CliError::from(Error::Parse(format!("{}: {e}", p.display()))))?;
            manifest.config(&p, &bytes);
            Ok(cfg)
        }
        None => {
            let cfg = PneumoConfig::default();
            manifest.builtin_config("plant", &cfg.to_json());
            Ok(cfg)
        }
    }
}

fn label_kpa(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

fn step_plot(r: &StepResponse<f64>) -> String {
    let pts = |f: fn(&hapticsim_core::pneumo::StepSample<f64>) -> f64| -> Vec<(f64, f64)> {
        r.trace.iter().map(|s| (s.t, f(s))).collect()
    };
    line_plot(
        &format!("Step response, {} kPa", r.target),
        "time (s)",
        "pressure (kPa)",
        &[
            Series {
                label: "setpoint",
                color: "#888888",
                points: pts(|s| s.setpoint),
                step: true,
            },
            Series {
                label: "measured",
                color: "#1f77b4",
                points: pts(|s| s.measured),
                step: true,
            },
            Series {
                label: "tube",
                color: "#d62728",
                points: pts(|s| s.pressure),
                step: false,
            },
        ],
    )
}

fn step_sweep(global: &Global, a: &StepSweepArgs, argv: &[String]) -> CliResult {
    let seed = global.seed.unwrap_or(0);
    let mut manifest = Manifest::new(argv, "step-sweep", seed);
    let cfg = load_pneumo(global, &mut manifest)?;
    let targets = a
        .targets_kpa
        .clone()
        .unwrap_or_else(|| (1..=12).map(f64::from).collect());
    if targets.is_empty() {
        return Err(CliError::usage("--targets-kpa needs at least one value"));
    }
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, targets.len());

    let mut results: Vec<Option<Result<StepResponse<f64>, Error>>> = vec![None; targets.len()];
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let targets = &targets;
                let cfg = &cfg;
                s.spawn(move || {
                    (w..targets.len())
                        .step_by(threads)
                        .map(|i| {
                            let r = run_step_response_with_release(
                                targets[i],
                                a.hold_s,
                                a.release_s,
                                &cfg.gains,
                                &cfg.plant,
                                seed + i as u64,
                            );
                            (i, r)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let responses = results
        .into_iter()
        .map(|r| r.expect("every target ran"))
        .collect::<Result<Vec<_>, _>>()?;

    let dir = out_dir(global, "step-sweep");
    mkdir(&dir)?;
    let rows: Vec<_> = responses.iter().map(|r| (r.target, r.metrics)).collect();
    let metrics_path = dir.join("metrics.csv");
    let mut w = create(&metrics_path)?;
    write_metrics_csv(&mut w, &rows)?;
    w.flush().map_err(|e| CliError::io(&metrics_path, e))?;
    manifest.output(&metrics_path);

    for r in &responses {
        let stem = format!("step_{}kpa", label_kpa(r.target));
        let p = dir.join(format!("{stem}.csv"));
        let mut w = create(&p)?;
        write_step_trace_csv(&mut w, &r.trace)?;
        w.flush().map_err(|e| CliError::io(&p, e))?;
        manifest.output(&p);
        if !a.no_plots {
            let p = dir.join(format!("{stem}.svg"));
            std::fs::write(&p, step_plot(r)).map_err(|e| CliError::io(&p, e))?;
            manifest.output(&p);
        }
    }

    let n = responses.len() as f64;
    let mean = |f: &dyn Fn(&StepResponse<f64>) -> f64| responses.iter().map(f).sum::<f64>() / n;
    let mean_opt = |f: &dyn Fn(&StepResponse<f64>) -> Option<f64>| {
        let v: Vec<f64> = responses.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let summary: Vec<(&str, Option<f64>, f64)> = vec![
        (
            "mae_prop_kpa",
            Some(mean(&|r| r.metrics.mae_prop)),
            reference::MAE_PROP,
        ),
        (
            "mme_prop_kpa",
            Some(mean(&|r| r.metrics.mme_prop)),
            reference::MME_PROP,
        ),
        (
            "mae_stable_kpa",
            Some(mean(&|r| r.metrics.mae_stable)),
            reference::MAE_STABLE,
        ),
        (
            "mme_stable_kpa",
            Some(mean(&|r| r.metrics.mme_stable)),
            reference::MME_STABLE,
        ),
        (
            "activation_s",
            mean_opt(&|r| r.metrics.activation_time.filter(|_| r.target > 0.0)),
            reference::ACTIVATION_S,
        ),
        (
            "deactivation_s",
            mean_opt(&|r| r.metrics.deactivation_time.filter(|_| r.target > 0.0)),
            reference::DEACTIVATION_S,
        ),
    ];
    let summary_path = dir.join("summary.csv");
    let mut w = create(&summary_path)?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.3}"));
    let mut text = String::from("metric,simulated_average,literature_value\n");
    for (name, sim, lit) in &summary {
        text.push_str(&format!("{name},{},{lit}\n", fmt(*sim)));
    }
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(&summary_path, e))?;
    manifest.output(&summary_path);
    manifest.write(&dir)?;

    println!("target_kpa  mae_prop  mme_prop  mae_stable  mme_stable  activation_s  settling_s");
    for r in &responses {
        let m = &r.metrics;
        println!(
            "{:>10}  {:>8.3}  {:>8.3}  {:>10.3}  {:>10.3}  {:>12}  {:>10}",
            r.target,
            m.mae_prop,
            m.mme_prop,
            m.mae_stable,
            m.mme_stable,
            fmt(m.activation_time),
            fmt(m.settling_time)
        );
    }
    println!();
    println!(
        "{:<16} {:>10} {:>12}",
        "average", "simulated", "literature*"
    );
    for (name, sim, lit) in &summary {
        println!("{name:<16} {:>10} {lit:>12.3}", fmt(*sim));
    }
    println!("* reference values reported for the physical device, not a test oracle");
    println!("wrote {}", dir.display());
    Ok(())
}

// --------------------------------------------------------------------- synth

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["trace", "speed_mm_s"])))]
pub struct SynthArgs {
    /// Speed trace (t_s,speed_mm_s) or landmark (t_s,x_mm,y_mm) CSV
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Constant scanning speed, mm/s
    #[arg(long = "speed-mm-s", visible_alias = "speed")]
    pub speed_mm_s: Option<f64>,
    /// Duration for a constant speed, s
    #[arg(long = "duration-s", default_value_t = 1.0)]
    pub duration_s: f64,
    /// Vibrotactile level
    #[arg(long, default_value = "A3")]
    pub level: String,
    /// Virtual surface wavelength, mm
    #[arg(long = "lambda-mm", visible_alias = "lambda", default_value_t = 1.0)]
    pub lambda_mm: f64,
    /// Initial phase, rad
    #[arg(long = "phase-rad", default_value_t = 0.0)]
    pub phase_rad: f64,
    /// Output sample rate, samples/s (a multiple of 1000)
    #[arg(long = "sample-rate-hz", default_value_t = 3000)]
    pub sample_rate_hz: u32,
}

fn synth(global: &Global, a: &SynthArgs, argv: &[String]) -> CliResult {
    let seed = global.seed.unwrap_or(0);
    let mut manifest = Manifest::new(argv, "synth", seed);
    let label = parse_label(&a.level)?;
    let accel = match label.stimulus().vibro_accel {
        Some(acc) if label.kind() == StimulusKind::Vibro => acc,
        _ => {
            return Err(CliError::usage(format!(
                "--level must be A1, A2 or A3, got {label}"
            )))
        }
    };
    let rate = f64::from(a.sample_rate_hz);
    let trace: VelocityTrace<f64> = match (&a.trace, a.speed_mm_s) {
        (Some(path), _) => {
            let bytes = read(path)?;
            manifest.config(path, &bytes);
            match read_tracking_csv::<f64, _>(BufReader::new(bytes.as_slice()))? {
                TrackingCsv::Trace(t) => t,
                TrackingCsv::Landmarks(l) => {
                    estimate_velocity(&l, rate, &SmoothingConfig::default())?
                }
            }
        }
        (None, Some(v)) => {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::usage("--speed-mm-s must be non-negative"));
            }
            if !(a.duration_s > 0.0) {
                return Err(CliError::usage("--duration-s must be positive"));
            }
            VelocityTrace::constant(v, rate, a.duration_s)
        }
        (None, None) => unreachable!("clap enforces the source group"),
    };
    let params = WaveformParams {
        amplitude: amplitude_for_accel(accel, &LraModel::default())?,
        wavelength_mm: a.lambda_mm,
        phase: a.phase_rad,
        sample_rate: rate,
        ..WaveformParams::default()
    };
    let samples = concat_frames(&synthesize(&trace, &params)?);

    let (dir, file) = out_file(global, "synth", "wav", "drive.wav");
    mkdir(&dir)?;
    write_wav(create(&file)?, &samples, a.sample_rate_hz)?;
    manifest.output(&file);
    manifest.write(&dir)?;
    println!(
        "wrote {} ({} samples, {:.3} s, level {label} = {accel} m/s^2, lambda {} mm)",
        file.display(),
        samples.len(),
        samples.len() as f64 / rate,
        a.lambda_mm
    );
    Ok(())
}

// -------------------------------------------------------------------- trials

#[derive(Args, Debug)]
pub struct TrialsArgs {
    /// Participant index; selects the Latin-square row (index mod 6)
    #[arg(long, default_value_t = 0)]
    pub participant: u64,
}

fn trials(global: &Global, a: &TrialsArgs, argv: &[String]) -> CliResult {
    let seed = global.seed.unwrap_or(0);
    let mut manifest = Manifest::new(argv, "trials", seed);
    let plan = generate_trials(seed, a.participant);
    let (dir, file) = out_file(global, "trials", "csv", "trials.csv");
    mkdir(&dir)?;
    plan.write_csv(create(&file)?)?;
    manifest.output(&file);
    manifest.write(&dir)?;
    let order: Vec<_> = plan.material_order.iter().map(|m| m.as_str()).collect();
    println!(
        "participant {} seed {}: {} trials, material order {}",
        a.participant,
        seed,
        plan.trials.len(),
        order.join(" > ")
    );
    println!("wrote {}", file.display());
    Ok(())
}

// ----------------------------------------------------------------- recommend

#[derive(Args, Debug)]
pub struct RecommendArgs {
    /// Material actually touched
    pub physical: String,
    /// Material to be rendered
    #[arg(name = "virtual")]
    pub virtual_: String,
    /// Overlap scores this close to the best count as tied (lower intensity wins)
    #[arg(long, default_value_t = 0.0)]
    pub tie_tolerance: f64,
}

fn recommend(global: &Global, a: &RecommendArgs, argv: &[String]) -> CliResult {
    let physical = parse_material(&a.physical)?;
    let virtual_ = parse_material(&a.virtual_)?;
    let table = RatingTable::embedded();
    // Identity check first: it is a usage error, not an empty ranking.
    table.recommend_stimulus(physical, virtual_)?;
    let ranked = table.rank_stimuli(physical, virtual_, a.tie_tolerance)?;

    let mut csv = String::from("rank,stimulus,kind,overlap\n");
    println!("{physical} as {virtual_}:");
    println!("rank  stimulus  kind     overlap");
    for (i, r) in ranked.iter().enumerate() {
        let kind = match r.stimulus.kind() {
            StimulusKind::None => "none",
            StimulusKind::Vibro => "vibro",
            StimulusKind::Pneumo => "pneumo",
        };
        println!(
            "{:>4}  {:<8}  {:<7}  {:.4}",
            i + 1,
            r.stimulus.as_str(),
            kind,
            r.overlap
        );
        csv.push_str(&format!(
            "{},{},{kind},{:.6}\n",
            i + 1,
            r.stimulus,
            r.overlap
        ));
    }
    if let Some(dir) = &global.out {
        let mut manifest = Manifest::new(argv, "recommend", global.seed.unwrap_or(0));
        manifest.builtin_config("ratings", hapticsim_core::perception::RATINGS_CSV);
        mkdir(dir)?;
        let p = dir.join("ranking.csv");
        std::fs::write(&p, csv).map_err(|e| CliError::io(&p, e))?;
        manifest.output(&p);
        manifest.write(dir)?;
    }
    Ok(())
}

// ------------------------------------------------------------------- overlap

#[derive(Args, Debug)]
pub struct OverlapArgs {
    /// First cell as material:stimulus, e.g. glass:A1
    pub a: String,
    /// Second cell as material:stimulus, e.g. ceramics:N
    pub b: String,
}

fn parse_cell(s: &str) -> CliResult<(Material, StimulusLabel)> {
    let (m, st) = s
        .split_once(':')
        .ok_or_else(|| CliError::usage(format!("expected material:stimulus, got `{s}`")))?;
    Ok((parse_material(m)?, parse_label(st)?))
}

fn overlap(global: &Global, a: &OverlapArgs, argv: &[String]) -> CliResult {
    let ca = parse_cell(&a.a)?;
    let cb = parse_cell(&a.b)?;
    let table = RatingTable::embedded();
    let ra = table.predicted_rating(ca.0, ca.1)?;
    let rb = table.predicted_rating(cb.0, cb.1)?;
    let score = table.overlap(ca, cb)?;
    println!("{}:{} mean {} sd {}", ca.0, ca.1, ra.mean, ra.sd);
    println!("{}:{} mean {} sd {}", cb.0, cb.1, rb.mean, rb.sd);
    println!("overlap {score:.6}");
    if let Some(dir) = &global.out {
        let mut manifest = Manifest::new(argv, "overlap", global.seed.unwrap_or(0));
        manifest.builtin_config("ratings", hapticsim_core::perception::RATINGS_CSV);
        mkdir(dir)?;
        let p = dir.join("overlap.json");
        let body = serde_json::json!({
            "a": { "material": ca.0, "stimulus": ca.1, "mean": ra.mean, "sd": ra.sd },
            "b": { "material": cb.0, "stimulus": cb.1, "mean": rb.mean, "sd": rb.sd },
            "overlap": score,
        });
        let text = serde_json::to_string_pretty(&body).expect("json") + "\n";
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))?;
        manifest.output(&p);
        manifest.write(dir)?;
    }
    Ok(())
}

// ------------------------------------------------------------------ scenario

#[derive(Args, Debug)]
pub struct ScenarioArgs {
    /// Scenario names (looked up in <config-dir>/scenarios) or paths
    pub names: Vec<String>,
    /// Worker threads for several scenarios
    #[arg(long)]
    pub threads: Option<usize>,
}

fn scenario_path(global: &Global, name: &str) -> PathBuf {
    let p = PathBuf::from(name);
    if p.extension().is_some() || p.components().count() > 1 {
        p
    } else {
        global
            .config_dir
            .join("scenarios")
            .join(format!("{name}.json"))
    }
}

fn scenario(global: &Global, a: &ScenarioArgs, argv: &[String]) -> CliResult {
    let mut paths: Vec<PathBuf> = a.names.iter().map(|n| scenario_path(global, n)).collect();
    if let Some(c) = &global.config {
        paths.insert(0, c.clone());
    }
    if paths.is_empty() {
        return Err(CliError::usage(
            "scenario needs --config <path> or a scenario name",
        ));
    }
    let mut configs = Vec::with_capacity(paths.len());
    let mut hashes = Vec::with_capacity(paths.len());
    for p in &paths {
        let bytes = read(p)?;
        let text = String::from_utf8_lossy(&bytes);
        let mut cfg = ScenarioConfig::from_json(&text, p.parent())
            .map_err(|e| CliError::from(Error::Parse(format!("{}: {e}", p.display()))))?;
        if let Some(seed) = global.seed {
            cfg.seed = seed;
        }
        configs.push(cfg);
        hashes.push(bytes);
    }
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let results = run_batch(&configs, threads);

    let root = out_dir(global, "scenario");
    let single = configs.len() == 1;
    let mut violations = Vec::new();
    for ((cfg, result), (path, bytes)) in configs.iter().zip(results).zip(paths.iter().zip(&hashes))
    {
        let trace = result?;
        let dir = if single {
            root.clone()
        } else {
            root.join(&cfg.name)
        };
        trace.write_dir(&dir)?;
        let mut manifest = Manifest::new(argv, "scenario", cfg.seed);
        manifest.config(path, bytes);
        for f in ["trace.csv", "drive.wav", "events.ndjson", "summary.json"] {
            manifest.output(&dir.join(f));
        }
        manifest.write(&dir)?;

        let s = &trace.summary;
        println!(
            "{} (seed {}): {} ms, {} commands, {} errors",
            s.name,
            s.seed,
            s.duration_ms,
            s.commands.len(),
            s.errors
        );
        if let Some(onset) = s.vibro_onset_ms {
            println!(
                "  vibro onset {onset} ms after command (budget {:.2} ms)",
                cfg.budget.vibro_total()
            );
        }
        if let Some(p) = &s.pneumo {
            println!(
                "  pneumo {} kPa: hold {:.2} kPa (max err {:.2}), lift {:.2} mm, area -{:.1}%",
                p.target_kpa, p.hold_mean_kpa, p.hold_max_err_kpa, p.lift_mm, p.area_reduction_pct
            );
        }
        println!("  wrote {}", dir.display());
        if !s.causal {
            violations.push(format!("{}: actuation before its latency budget", s.name));
        }
        if !s.exclusive {
            violations.push(format!("{}: both actuators driven at once", s.name));
        }
    }
    if !violations.is_empty() {
        return Err(CliError::invariant(violations.join("; ")));
    }
    Ok(())
}
