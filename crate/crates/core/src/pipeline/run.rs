use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pneumo::{
    contact_area_reduction, plant_step, pressure_to_lift, PidController, PlantState, PressureSensor,
};
use crate::session::protocol::write_event;
use crate::session::{EventKind, Scheduler, SessionEvent};
use crate::tracking::{
    estimate_velocity, LandmarkSample, SmoothingConfig, CAPTURE_RATE_HZ, DEFAULT_TRACE_RATE_HZ,
};
use crate::types::{StimulusKind, StimulusLabel, WaveformParams, MAX_PNEUMO_PRESSURE};
use crate::vibro::{amplitude_for_accel, write_wav, DriveSynth};

use super::config::{LatencyBudget, ScenarioConfig};

/// Master clock rate, ticks per second.
pub const CLOCK_HZ: u64 = 1000;
const FRAME_LEN: usize = (DEFAULT_TRACE_RATE_HZ as u64 / CLOCK_HZ) as usize;

/// One 1 ms row of the merged trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t_ms: u64,
    /// Delayed speed estimate feeding the drive, mm/s.
    pub speed_mm_s: f64,
    pub drive_rms: f64,
    /// True tube pressure, kPa.
    pub pressure_kpa: f64,
    pub lift_mm: f64,
    pub area_reduction_pct: f64,
    /// Session messages at this tick, `|`-separated.
    pub event: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PneumoSummary {
    pub target_kpa: f64,
    pub start_ms: u64,
    pub stop_ms: Option<u64>,
    /// Command to 90 % of target, ms.
    pub activation_ms: Option<u64>,
    /// Stop to below 10 % of target, ms.
    pub deactivation_ms: Option<u64>,
    /// Mean and worst deviation of the tube pressure over the last 2 s of
    /// the stimulus.
    pub hold_mean_kpa: f64,
    pub hold_max_err_kpa: f64,
    pub lift_mm: f64,
    pub area_reduction_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub seed: u64,
    pub duration_ms: u64,
    pub budget: LatencyBudget,
    pub vibro_delay_ms: f64,
    pub commands: Vec<(u64, StimulusLabel)>,
    pub errors: usize,
    /// First audible drive after the first vibrotactile command, ms.
    pub vibro_onset_ms: Option<u64>,
    pub vibro_amplitude: Option<f64>,
    pub pneumo: Option<PneumoSummary>,
    pub peak_pressure_kpa: f64,
    pub exclusive: bool,
    pub causal: bool,
}

/// Full result of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub rows: Vec<TraceRow>,
    /// Drive samples at 3000 samples/s.
    pub drive: Vec<f64>,
    pub inbound: Vec<SessionEvent>,
    pub outbound: Vec<SessionEvent>,
    pub summary: ScenarioSummary,
}

#[derive(Debug, Clone, Copy)]
enum Change {
    Vibro { amplitude: f64, cmd_ms: u64 },
    Pneumo { target: f64 },
}

fn describe(ev: &SessionEvent) -> String {
    let mut s = format!("{:?}", ev.kind);
    if let Some(m) = ev.material {
        if ev.kind == EventKind::ContactBegin {
            s.push(':');
            s.push_str(m.as_str());
        }
    }
    if let Some(st) = ev.stimulus {
        s.push(':');
        s.push_str(st.as_str());
    }
    s
}

/// Capture ticks: the first 1 ms tick at or after each 1/30 s boundary.
fn capture_ticks(n_ticks: u64) -> impl Iterator<Item = u64> {
    let rate = CAPTURE_RATE_HZ as u64;
    (0..)
        .map(move |i: u64| (i * CLOCK_HZ).div_ceil(rate))
        .take_while(move |&k| k < n_ticks)
}

fn contact_events(cfg: &ScenarioConfig) -> Vec<SessionEvent> {
    let end = cfg.duration_ms();
    let mut raw: Vec<(u64, u8, SessionEvent)> = Vec::new();
    for c in &cfg.contacts {
        raw.push((
            c.begin_ms,
            1,
            SessionEvent::contact_begin(0, c.begin_ms, c.material),
        ));
        if let Some(e) = c.end_ms.filter(|&e| e < end) {
            raw.push((e, 0, SessionEvent::contact_end(0, e)));
        }
    }
    // Releases before touches at the same instant.
    raw.sort_by_key(|(t, order, _)| (*t, *order));
    raw.into_iter()
        .enumerate()
        .map(|(i, (_, _, mut ev))| {
            ev.seq = i as u64 + 1;
            ev
        })
        .collect()
}

/// Runs one scenario on the 1 kHz master clock. Output depends only on
/// the config (including its seed).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SessionTrace> {
    cfg.validate()?;
    let n_ticks = cfg.duration_ms();
    let budget_ms = cfg.budget.vibro_total();

    // Capture and estimation.
    let landmarks: Vec<LandmarkSample<f64>> = capture_ticks(n_ticks)
        .map(|k| {
            let t = k as f64 / CLOCK_HZ as f64;
            let (x, y) = cfg.trajectory.position_at(t);
            LandmarkSample::new(t, x, y)
        })
        .collect();
    let smoothing = SmoothingConfig {
        latency_budget_s: budget_ms / 1000.0,
        jitter_sd_s: cfg.jitter_sd_ms / 1000.0,
        seed: cfg.seed,
        ..SmoothingConfig::default()
    };
    let velocity = estimate_velocity(&landmarks, DEFAULT_TRACE_RATE_HZ, &smoothing)?;
    let delay_ms = (velocity.latency * 1000.0).max(budget_ms);
    let delay_s = delay_ms / 1000.0;
    let delay_ticks = (delay_ms - 1e-9).ceil() as u64;

    // Actuators.
    let params = WaveformParams {
        amplitude: 0.0,
        wavelength_mm: cfg.wavelength_mm,
        ..WaveformParams::default()
    };
    params.validate(velocity.max_speed())?;
    let mut synth = DriveSynth::new(params)?;
    if synth.block_len() != FRAME_LEN {
        return Err(Error::InvalidParameter {
            name: "sample_rate",
            reason: "drive frames must be 3 samples at 1 kHz".into(),
        });
    }
    let plant = cfg.pneumo.plant;
    let mut pid = PidController::new(cfg.pneumo.gains);
    let mut sensor = PressureSensor::new(&plant, cfg.seed);
    let ctrl_ticks = (cfg.pneumo.gains.sample_period * CLOCK_HZ as f64).round() as u64;
    let sensor_ticks = (CLOCK_HZ as f64 / plant.sensor_rate).round() as u64;
    let inner_dt = 1.0 / CLOCK_HZ as f64;
    let mut state = PlantState::<f64>::default();
    sensor.sample(state.pressure);

    let inbound = contact_events(cfg);
    let mut scheduler = Scheduler::new(cfg.scheduler_config());
    let mut next_in = 0usize;
    let mut outbound = Vec::new();
    let mut fresh = Vec::new();
    let mut changes: VecDeque<(u64, Change)> = VecDeque::new();

    let mut vibro_amp = 0.0;
    let mut vibro_cmd_ms = 0u64;
    let mut vibro_free_at = 0u64;
    let mut pneumo_target = 0.0;
    let mut duty = 0.0;

    let mut rows = Vec::with_capacity(n_ticks as usize);
    let mut drive = Vec::with_capacity(n_ticks as usize * FRAME_LEN);
    let mut pneumo_spans: Vec<(u64, f64, Option<u64>)> = Vec::new();
    let mut commands = Vec::new();
    let mut exclusive = true;
    let mut causal = true;
    let mut speeds = [0.0; FRAME_LEN];

    for k in 0..n_ticks {
        let mut event = Vec::new();
        while next_in < inbound.len() && inbound[next_in].t_ms <= k {
            event.push(describe(&inbound[next_in]));
            scheduler.handle(&inbound[next_in], &mut fresh);
            next_in += 1;
        }
        scheduler.tick(k, &mut fresh);

        for ev in fresh.drain(..) {
            event.push(describe(&ev));
            if ev.kind == EventKind::StimulusCmd {
                let label = ev.stimulus.unwrap_or(StimulusLabel::N);
                let t = ev.t_ms;
                commands.push((t, label));
                let stim = label.stimulus();
                match stim.kind {
                    StimulusKind::None => {
                        if vibro_amp > 0.0
                            || changes.iter().any(|c| matches!(c.1, Change::Vibro { .. }))
                        {
                            changes.push_back((
                                t + delay_ticks,
                                Change::Vibro {
                                    amplitude: 0.0,
                                    cmd_ms: t,
                                },
                            ));
                            vibro_free_at = t + delay_ticks;
                        }
                        changes.push_back((t, Change::Pneumo { target: 0.0 }));
                    }
                    StimulusKind::Vibro => {
                        let accel = stim.vibro_accel.expect("vibro level");
                        let amplitude = amplitude_for_accel(accel, &cfg.lra)?;
                        changes.push_back((
                            t + delay_ticks,
                            Change::Vibro {
                                amplitude,
                                cmd_ms: t,
                            },
                        ));
                        vibro_free_at = u64::MAX;
                    }
                    StimulusKind::Pneumo => {
                        let target = stim.pneumo_pressure.expect("pneumo level");
                        let at = if cfg.exclusive {
                            t.max(vibro_free_at)
                        } else {
                            t
                        };
                        changes.push_back((at, Change::Pneumo { target }));
                    }
                }
            }
            outbound.push(ev);
        }

        // Apply due changes in order of effect time.
        let mut pending: Vec<_> = changes.drain(..).collect();
        pending.sort_by_key(|c| c.0);
        for (at, change) in pending {
            if at > k {
                changes.push_back((at, change));
                continue;
            }
            match change {
                Change::Vibro { amplitude, cmd_ms } => {
                    vibro_amp = amplitude;
                    vibro_cmd_ms = cmd_ms;
                }
                Change::Pneumo { target } => {
                    if target > 0.0 && pneumo_target == 0.0 {
                        pneumo_spans.push((k, target, None));
                    } else if target == 0.0 && pneumo_target > 0.0 {
                        if let Some(span) = pneumo_spans.last_mut() {
                            span.2 = Some(k);
                        }
                    }
                    pneumo_target = target;
                }
            }
        }

        if k % ctrl_ticks == 0 {
            duty = pid.tick(pneumo_target, sensor.held());
        }

        for (j, v) in speeds.iter_mut().enumerate() {
            let t = (k as usize * FRAME_LEN + j) as f64 / DEFAULT_TRACE_RATE_HZ - delay_s;
            *v = velocity.speed_at(t);
        }
        synth.set_amplitude(vibro_amp);
        let frame = synth.next_frame(&speeds);
        let rms = frame.rms();
        drive.extend_from_slice(&frame.samples);

        if rms > 0.0 {
            causal &= k as f64 + 1e-9 >= vibro_cmd_ms as f64 + budget_ms;
            exclusive &= pneumo_target == 0.0;
        }
        if duty > 0.0 {
            causal &= commands
                .iter()
                .any(|&(t, l)| t <= k && l.kind() == StimulusKind::Pneumo);
        }

        let p = state.pressure;
        let p_lookup = p.min(MAX_PNEUMO_PRESSURE);
        rows.push(TraceRow {
            t_ms: k,
            speed_mm_s: speeds[0],
            drive_rms: rms,
            pressure_kpa: p,
            lift_mm: pressure_to_lift(p_lookup)?,
            area_reduction_pct: 100.0 * contact_area_reduction(p_lookup, cfg.normal_force_n)?,
            event: event.join("|"),
        });

        state = plant_step(state, duty, inner_dt, &plant);
        if (k + 1) % sensor_ticks == 0 {
            sensor.sample(state.pressure);
        }
    }
    let mut tail = Vec::new();
    scheduler.finish(&mut tail);
    for ev in &tail {
        if ev.kind == EventKind::StimulusCmd {
            commands.push((ev.t_ms, ev.stimulus.unwrap_or(StimulusLabel::N)));
        }
    }
    outbound.extend(tail);

    let first_vibro = commands.iter().find(|c| c.1.kind() == StimulusKind::Vibro);
    let vibro_onset_ms = first_vibro.and_then(|&(t, _)| {
        rows.iter()
            .skip(t as usize)
            .find(|r| r.drive_rms > 0.0)
            .map(|r| r.t_ms - t)
    });
    let vibro_amplitude = first_vibro
        .map(|&(_, l)| amplitude_for_accel(l.stimulus().vibro_accel.expect("vibro"), &cfg.lra))
        .transpose()?;

    let pneumo = pneumo_spans.first().map(|&(start, target, stop)| {
        let end = stop.unwrap_or(n_ticks);
        let hold = &rows[end.saturating_sub(2000).max(start) as usize..end as usize];
        let n = hold.len().max(1) as f64;
        let hold_mean = hold.iter().map(|r| r.pressure_kpa).sum::<f64>() / n;
        let hold_err = hold
            .iter()
            .map(|r| (r.pressure_kpa - target).abs())
            .fold(0.0, f64::max);
        let activation_ms = rows[start as usize..end as usize]
            .iter()
            .find(|r| r.pressure_kpa >= 0.9 * target)
            .map(|r| r.t_ms - start);
        let deactivation_ms = stop.and_then(|s| {
            rows[s as usize..]
                .iter()
                .find(|r| r.pressure_kpa < 0.1 * target)
                .map(|r| r.t_ms - s)
        });
        let p = hold_mean.min(MAX_PNEUMO_PRESSURE);
        PneumoSummary {
            target_kpa: target,
            start_ms: start,
            stop_ms: stop,
            activation_ms,
            deactivation_ms,
            hold_mean_kpa: hold_mean,
            hold_max_err_kpa: hold_err,
            lift_mm: pressure_to_lift(p).unwrap_or(0.0),
            area_reduction_pct: 100.0
                * contact_area_reduction(p, cfg.normal_force_n).unwrap_or(0.0),
        }
    });

    let summary = ScenarioSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        duration_ms: n_ticks,
        budget: cfg.budget,
        vibro_delay_ms: delay_ms,
        commands,
        errors: outbound
            .iter()
            .filter(|e| e.kind == EventKind::Error)
            .count(),
        vibro_onset_ms,
        vibro_amplitude,
        pneumo,
        peak_pressure_kpa: rows.iter().map(|r| r.pressure_kpa).fold(0.0, f64::max),
        exclusive,
        causal,
    };
    Ok(SessionTrace {
        rows,
        drive,
        inbound,
        outbound,
        summary,
    })
}

/// Runs independent scenarios on up to `threads` workers; results keep the
/// input order.
pub fn run_batch(configs: &[ScenarioConfig], threads: usize) -> Vec<Result<SessionTrace>> {
    let threads = threads.clamp(1, configs.len().max(1));
    let mut results: Vec<Option<Result<SessionTrace>>> = vec![None; configs.len()];
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                s.spawn(move || {
                    configs
                        .iter()
                        .enumerate()
                        .skip(w)
                        .step_by(threads)
                        .map(|(i, c)| (i, run_scenario(c)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("scenario worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every scenario ran"))
        .collect()
}

impl SessionTrace {
    /// CSV `t_ms,speed_mm_s,drive_rms,pressure_kpa,lift_mm,area_reduction_pct,event`.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "t_ms",
            "speed_mm_s",
            "drive_rms",
            "pressure_kpa",
            "lift_mm",
            "area_reduction_pct",
            "event",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.t_ms.to_string(),
                format!("{:.4}", r.speed_mm_s),
                format!("{:.6}", r.drive_rms),
                format!("{:.4}", r.pressure_kpa),
                format!("{:.4}", r.lift_mm),
                format!("{:.3}", r.area_reduction_pct),
                r.event.clone(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary).expect("summary serializes");
        s.push('\n');
        s
    }

    /// Writes `trace.csv`, `drive.wav`, `events.ndjson` (scheduler output)
    /// and `summary.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_trace_csv(BufWriter::new(File::create(dir.join("trace.csv"))?))?;
        write_wav(
            BufWriter::new(File::create(dir.join("drive.wav"))?),
            &self.drive,
            DEFAULT_TRACE_RATE_HZ as u32,
        )?;
        let mut ev = BufWriter::new(File::create(dir.join("events.ndjson"))?);
        for e in &self.outbound {
            write_event(&mut ev, e)?;
        }
        ev.flush()?;
        std::fs::write(dir.join("summary.json"), self.summary_json())?;
        Ok(())
    }
}
