//! Closed-loop step-response runs and their tracking metrics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{PidGains, MAX_PNEUMO_PRESSURE};

use super::pid::PidController;
use super::plant::{plant_step, PlantParams, PlantState};
use super::sensor::PressureSensor;

/// Inner Euler step, s.
pub const INNER_DT: f64 = 0.001;
/// Length of the stable stage at the end of the hold, s.
pub const STABLE_STAGE_S: f64 = 5.0;
/// Half-width of the band that ends the proportional stage, kPa.
pub const SETTLE_BAND_KPA: f64 = 0.5;
/// Time simulated after the setpoint returns to zero, s.
pub const DEFAULT_RELEASE_S: f64 = 2.0;

/// One controller tick of a step-response run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepSample<T: Scalar> {
    pub t: T,
    pub setpoint: T,
    /// Sensor reading used by the controller, kPa.
    pub measured: T,
    pub duty: T,
    /// Simulated tube pressure, kPa (not a sensor value).
    pub pressure: T,
}

/// Tracking metrics in the proportional and stable stages plus timing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepMetrics<T: Scalar> {
    pub mae_prop: T,
    pub mme_prop: T,
    pub mae_stable: T,
    pub mme_stable: T,
    /// Time from step onset until the reading reaches 90 % of target, s.
    pub activation_time: Option<T>,
    /// Time from setpoint release until the reading falls below 10 % of
    /// target, s.
    pub deactivation_time: Option<T>,
    /// Time after which the tube pressure stays within ±0.5 kPa of target
    /// for the rest of the hold, s.
    pub settling_time: Option<T>,
    /// Peak tube pressure above target during the hold, kPa.
    pub overshoot: T,
}

impl<T: Scalar> StepMetrics<T> {
    fn zero() -> Self {
        StepMetrics {
            mae_prop: T::zero(),
            mme_prop: T::zero(),
            mae_stable: T::zero(),
            mme_stable: T::zero(),
            activation_time: Some(T::zero()),
            deactivation_time: Some(T::zero()),
            settling_time: Some(T::zero()),
            overshoot: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse<T: Scalar> {
    pub target: T,
    pub hold: T,
    pub trace: Vec<StepSample<T>>,
    pub metrics: StepMetrics<T>,
}

fn mae_mme<T: Scalar>(errors: impl Iterator<Item = T>) -> (T, T) {
    let (mut sum, mut max, mut n) = (T::zero(), T::zero(), 0usize);
    for e in errors {
        let a = e.abs();
        sum = sum + a;
        max = max.max(a);
        n += 1;
    }
    if n == 0 {
        (T::zero(), T::zero())
    } else {
        (sum / T::from_usize_lossy(n), max)
    }
}

/// Time at which the reading sequence first satisfies `hit`, interpolated
/// linearly between controller samples.
fn crossing_time<T: Scalar>(samples: &[StepSample<T>], level: T, rising: bool) -> Option<T> {
    let hit = |m: T| if rising { m >= level } else { m < level };
    let first = samples.iter().position(|s| hit(s.measured))?;
    if first == 0 {
        return Some(samples[0].t);
    }
    let (a, b) = (samples[first - 1], samples[first]);
    let span = b.measured - a.measured;
    let frac = if span.abs() > T::zero() {
        ((level - a.measured) / span).clamp_to(T::zero(), T::one())
    } else {
        T::one()
    };
    Some(a.t + (b.t - a.t) * frac)
}

/// Runs a 0 → `target` step held for `hold` seconds, then releases the
/// setpoint to zero for `release` seconds.
pub fn run_step_response_with_release<T: Scalar>(
    target: T,
    hold: T,
    release: T,
    gains: &PidGains<T>,
    plant: &PlantParams<T>,
    seed: u64,
) -> Result<StepResponse<T>> {
    if target > T::lit(MAX_PNEUMO_PRESSURE) {
        return Err(Error::PressureAboveValidated {
            target_kpa: target.as_f64(),
        });
    }
    if !(target >= T::zero()) {
        return Err(Error::OutOfRange {
            quantity: "target_kpa",
            value: target.as_f64(),
            min: 0.0,
            max: MAX_PNEUMO_PRESSURE,
        });
    }
    if !(hold >= T::lit(STABLE_STAGE_S)) {
        return Err(Error::OutOfRange {
            quantity: "hold_s",
            value: hold.as_f64(),
            min: STABLE_STAGE_S,
            max: f64::INFINITY,
        });
    }
    if !(release >= T::zero()) {
        return Err(Error::InvalidParameter {
            name: "release_s",
            reason: "must be non-negative".into(),
        });
    }
    gains.validate()?;
    plant.validate()?;

    let period = gains.sample_period;
    let inner_dt = T::lit(INNER_DT);
    let inner_per_tick = (period / inner_dt).round().to_usize().unwrap_or(1).max(1);
    let sensor_every = (T::one() / (plant.sensor_rate * inner_dt))
        .round()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let hold_ticks = (hold / period).round().to_usize().unwrap_or(0);
    let release_ticks = (release / period).round().to_usize().unwrap_or(0);
    let total_ticks = hold_ticks + release_ticks;

    if target == T::zero() {
        let trace = (0..total_ticks)
            .map(|k| StepSample {
                t: T::from_usize_lossy(k) * period,
                setpoint: T::zero(),
                measured: T::zero(),
                duty: T::zero(),
                pressure: T::zero(),
            })
            .collect();
        return Ok(StepResponse {
            target,
            hold,
            trace,
            metrics: StepMetrics::zero(),
        });
    }

    let mut state = PlantState::<T>::default();
    let mut sensor = PressureSensor::new(plant, seed);
    let mut pid = PidController::new(*gains);
    let mut trace = Vec::with_capacity(total_ticks);
    let mut inner_index = 0usize;
    sensor.sample(state.pressure);

    for k in 0..total_ticks {
        let t = T::from_usize_lossy(k) * period;
        let setpoint = if k < hold_ticks { target } else { T::zero() };
        let measured = sensor.held();
        let duty = pid.tick(setpoint, measured);
        trace.push(StepSample {
            t,
            setpoint,
            measured,
            duty,
            pressure: state.pressure,
        });
        for _ in 0..inner_per_tick {
            state = plant_step(state, duty, inner_dt, plant);
            inner_index += 1;
            if inner_index.is_multiple_of(sensor_every) {
                sensor.sample(state.pressure);
            }
        }
    }

    let metrics = step_metrics(&trace, target, hold_ticks, period);
    Ok(StepResponse {
        target,
        hold,
        trace,
        metrics,
    })
}

/// Runs a step response with the default release window.
pub fn run_step_response<T: Scalar>(
    target: T,
    hold: T,
    gains: &PidGains<T>,
    plant: &PlantParams<T>,
    seed: u64,
) -> Result<StepResponse<T>> {
    run_step_response_with_release(target, hold, T::lit(DEFAULT_RELEASE_S), gains, plant, seed)
}

fn step_metrics<T: Scalar>(
    trace: &[StepSample<T>],
    target: T,
    hold_ticks: usize,
    period: T,
) -> StepMetrics<T> {
    let band = T::lit(SETTLE_BAND_KPA);
    let held = &trace[..hold_ticks.min(trace.len())];
    let released = &trace[hold_ticks.min(trace.len())..];

    let entry = held
        .iter()
        .position(|s| (s.measured - target).abs() <= band)
        .unwrap_or(held.len());
    let (mae_prop, mme_prop) = mae_mme(held[..entry].iter().map(|s| s.measured - target));

    let stable_ticks = (T::lit(STABLE_STAGE_S) / period)
        .round()
        .to_usize()
        .unwrap_or(0);
    let stable = &held[held.len().saturating_sub(stable_ticks)..];
    let (mae_stable, mme_stable) = mae_mme(stable.iter().map(|s| s.measured - target));

    let activation_time = crossing_time(held, target * T::lit(0.9), true);
    let deactivation_time = released.first().and_then(|first| {
        crossing_time(released, target * T::lit(0.1), false).map(|t| t - first.t)
    });

    let last_out = held
        .iter()
        .rposition(|s| (s.pressure - target).abs() > band);
    let settling_time = match last_out {
        None => Some(T::zero()),
        Some(i) if i + 1 < held.len() => Some(held[i + 1].t),
        Some(_) => None,
    };
    let overshoot = held
        .iter()
        .map(|s| s.pressure - target)
        .fold(T::zero(), T::max);

    StepMetrics {
        mae_prop,
        mme_prop,
        mae_stable,
        mme_stable,
        activation_time,
        deactivation_time,
        settling_time,
        overshoot,
    }
}

/// Writes `t_s,setpoint_kpa,measured_kpa,duty`.
pub fn write_step_trace_csv<T: Scalar, W: Write>(mut w: W, trace: &[StepSample<T>]) -> Result<()> {
    writeln!(w, "t_s,setpoint_kpa,measured_kpa,duty")?;
    for s in trace {
        writeln!(
            w,
            "{:.3},{:.3},{:.3},{:.6}",
            s.t.as_f64(),
            s.setpoint.as_f64(),
            s.measured.as_f64(),
            s.duty.as_f64()
        )?;
    }
    Ok(())
}

/// Writes `target_kpa,mae_prop,mme_prop,mae_stable,mme_stable`.
pub fn write_metrics_csv<T: Scalar, W: Write>(
    mut w: W,
    rows: &[(T, StepMetrics<T>)],
) -> Result<()> {
    writeln!(w, "target_kpa,mae_prop,mme_prop,mae_stable,mme_stable")?;
    for (target, m) in rows {
        writeln!(
            w,
            "{},{:.3},{:.3},{:.3},{:.3}",
            target.as_f64(),
            m.mae_prop.as_f64(),
            m.mme_prop.as_f64(),
            m.mae_stable.as_f64(),
            m.mme_stable.as_f64()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pneumo::{calibrated_gains, calibrated_plant};

    #[test]
    fn zero_target_is_all_zero() {
        let r =
            run_step_response(0.0f64, 6.0, &calibrated_gains(), &calibrated_plant(), 1).unwrap();
        assert_eq!(r.metrics, StepMetrics::zero());
        assert!(r
            .trace
            .iter()
            .all(|s| s.setpoint == 0.0 && s.measured == 0.0 && s.duty == 0.0));
    }

    #[test]
    fn refuses_above_validated_range() {
        let err = run_step_response(12.5f64, 6.0, &calibrated_gains(), &calibrated_plant(), 1)
            .unwrap_err();
        assert!(matches!(err, Error::PressureAboveValidated { .. }));
        assert!(err.to_string().contains("unevenly"));
        assert!(
            run_step_response(-1.0f64, 6.0, &calibrated_gains(), &calibrated_plant(), 1).is_err()
        );
        assert!(
            run_step_response(5.0f64, 4.0, &calibrated_gains(), &calibrated_plant(), 1).is_err()
        );
    }

    #[test]
    fn metrics_invariants() {
        for target in [1.0f64, 6.0, 12.0] {
            let r = run_step_response(target, 6.0, &calibrated_gains(), &calibrated_plant(), 5)
                .unwrap();
            let m = r.metrics;
            assert!(m.mme_prop >= m.mae_prop && m.mae_prop >= 0.0);
            assert!(m.mme_stable >= m.mae_stable && m.mae_stable >= 0.0);
            assert!(m.activation_time.is_some() && m.deactivation_time.is_some());
        }
    }

    #[test]
    fn settles_quickly_at_ten_kpa() {
        let r =
            run_step_response(10.0f64, 6.0, &calibrated_gains(), &calibrated_plant(), 2).unwrap();
        let settle = r.metrics.settling_time.expect("settles");
        assert!(settle <= 1.0, "settling {settle}");
        assert!(r.metrics.overshoot <= 1.5);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let a =
            run_step_response(7.0f64, 6.0, &calibrated_gains(), &calibrated_plant(), 42).unwrap();
        let b =
            run_step_response(7.0f64, 6.0, &calibrated_gains(), &calibrated_plant(), 42).unwrap();
        assert_eq!(a, b);
        let c =
            run_step_response(7.0f64, 6.0, &calibrated_gains(), &calibrated_plant(), 43).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn csv_headers() {
        let r =
            run_step_response(3.0f64, 5.0, &calibrated_gains(), &calibrated_plant(), 1).unwrap();
        let mut buf = Vec::new();
        write_step_trace_csv(&mut buf, &r.trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,setpoint_kpa,measured_kpa,duty\n"));
        assert_eq!(text.lines().count(), r.trace.len() + 1);

        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &[(3.0, r.metrics)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("target_kpa,mae_prop,mme_prop,mae_stable,mme_stable\n3,"));
    }

    #[test]
    fn crossing_interpolates() {
        let mk = |t: f64, m: f64| StepSample {
            t,
            setpoint: 10.0,
            measured: m,
            duty: 0.0,
            pressure: m,
        };
        let s = [mk(0.0, 0.0), mk(0.05, 6.0), mk(0.10, 12.0)];
        let t = crossing_time(&s, 9.0, true).unwrap();
        assert!((t - 0.075).abs() < 1e-12);
    }
}
