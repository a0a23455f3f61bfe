//! Synthetic fingertip trajectories and speed estimation from low-rate
//! landmark samples.
//!
//! Landmarks arrive at the 30 Hz capture rate. Positions are smoothed with an
//! exponential moving average, differentiated, and upsampled to the drive
//! rate (3000 samples/s by default) by linear interpolation.

use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lerp, Scalar};

/// Capture rate of the top-view camera, frames/s.
pub const CAPTURE_RATE_HZ: f64 = 30.0;
/// Default rate of the estimated speed trace, samples/s.
pub const DEFAULT_TRACE_RATE_HZ: f64 = 3000.0;
/// Measured end-to-end vibrotactile latency, s.
pub const DEFAULT_LATENCY_BUDGET_S: f64 = 0.05353;
/// Fastest supported sliding speed, mm/s.
pub const MAX_SPEED_MM_S: f64 = 400.0;

/// One fingertip landmark in the surface plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LandmarkSample<T: Scalar> {
    pub t: T,
    pub x: T,
    pub y: T,
}

impl<T: Scalar> LandmarkSample<T> {
    pub fn new(t: T, x: T, y: T) -> Self {
        LandmarkSample { t, x, y }
    }
}

/// Speed profile used to generate a synthetic path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "")]
pub enum TrajectoryProfile<T: Scalar> {
    /// Straight slide at a fixed speed.
    Constant {
        speed_mm_s: T,
        #[serde(default)]
        heading_rad: T,
    },
    /// Straight slide whose speed follows `mid - half·cos(2πt/period)`,
    /// starting at `min_speed_mm_s`.
    Sweep {
        min_speed_mm_s: T,
        max_speed_mm_s: T,
        period_s: T,
        #[serde(default)]
        heading_rad: T,
    },
    /// Piecewise-linear path through recorded `[t_s, x_mm, y_mm]` points.
    Waypoints { points: Vec<[T; 3]> },
}

impl<T: Scalar> TrajectoryProfile<T> {
    pub fn constant(speed_mm_s: T) -> Self {
        TrajectoryProfile::Constant {
            speed_mm_s,
            heading_rad: T::zero(),
        }
    }

    pub fn sweep(min_speed_mm_s: T, max_speed_mm_s: T, period_s: T) -> Self {
        TrajectoryProfile::Sweep {
            min_speed_mm_s,
            max_speed_mm_s,
            period_s,
            heading_rad: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let max = T::lit(MAX_SPEED_MM_S);
        let check_speed = |name: &'static str, v: T| -> Result<()> {
            if !v.is_finite() || v < T::zero() || v > max {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("speed {v} mm/s outside [0, {MAX_SPEED_MM_S}]"),
                });
            }
            Ok(())
        };
        match self {
            TrajectoryProfile::Constant { speed_mm_s, .. } => {
                check_speed("speed_mm_s", *speed_mm_s)
            }
            TrajectoryProfile::Sweep {
                min_speed_mm_s,
                max_speed_mm_s,
                period_s,
                ..
            } => {
                check_speed("min_speed_mm_s", *min_speed_mm_s)?;
                check_speed("max_speed_mm_s", *max_speed_mm_s)?;
                if min_speed_mm_s > max_speed_mm_s {
                    return Err(Error::InvalidParameter {
                        name: "min_speed_mm_s",
                        reason: "min speed exceeds max speed".into(),
                    });
                }
                if !(*period_s > T::zero()) {
                    return Err(Error::InvalidParameter {
                        name: "period_s",
                        reason: "must be positive".into(),
                    });
                }
                Ok(())
            }
            TrajectoryProfile::Waypoints { points } => {
                if points.len() < 2 {
                    return Err(Error::TooFewSamples {
                        needed: 2,
                        got: points.len(),
                    });
                }
                for (i, w) in points.windows(2).enumerate() {
                    let dt = w[1][0] - w[0][0];
                    if !(dt > T::zero()) {
                        return Err(Error::NonMonotonicTime { index: i + 1 });
                    }
                    let dist = (w[1][1] - w[0][1]).hypot(w[1][2] - w[0][2]);
                    check_speed("waypoints", dist / dt)?;
                }
                Ok(())
            }
        }
    }

    /// Ground-truth speed at time `t` (seconds from the trajectory start).
    pub fn speed_at(&self, t: T) -> T {
        match self {
            TrajectoryProfile::Constant { speed_mm_s, .. } => *speed_mm_s,
            TrajectoryProfile::Sweep {
                min_speed_mm_s,
                max_speed_mm_s,
                period_s,
                ..
            } => {
                let two = T::lit(2.0);
                let mid = (*min_speed_mm_s + *max_speed_mm_s) / two;
                let half = (*max_speed_mm_s - *min_speed_mm_s) / two;
                mid - half * (T::TAU() * t / *period_s).cos()
            }
            TrajectoryProfile::Waypoints { points } => {
                let t_abs = points[0][0] + t;
                match points
                    .windows(2)
                    .find(|w| t_abs >= w[0][0] && t_abs < w[1][0])
                {
                    Some(w) => (w[1][1] - w[0][1]).hypot(w[1][2] - w[0][2]) / (w[1][0] - w[0][0]),
                    None => T::zero(),
                }
            }
        }
    }

    /// Ground-truth position at time `t`.
    pub fn position_at(&self, t: T) -> (T, T) {
        let along = |heading: T, dist: T| (dist * heading.cos(), dist * heading.sin());
        match self {
            TrajectoryProfile::Constant {
                speed_mm_s,
                heading_rad,
            } => along(*heading_rad, *speed_mm_s * t),
            TrajectoryProfile::Sweep {
                min_speed_mm_s,
                max_speed_mm_s,
                period_s,
                heading_rad,
            } => {
                let two = T::lit(2.0);
                let mid = (*min_speed_mm_s + *max_speed_mm_s) / two;
                let half = (*max_speed_mm_s - *min_speed_mm_s) / two;
                let w = T::TAU() / *period_s;
                along(*heading_rad, mid * t - half / w * (w * t).sin())
            }
            TrajectoryProfile::Waypoints { points } => {
                let t_abs = points[0][0] + t;
                let last = points[points.len() - 1];
                if t_abs >= last[0] {
                    return (last[1], last[2]);
                }
                let w = points
                    .windows(2)
                    .find(|w| t_abs < w[1][0])
                    .expect("t within waypoint span");
                let frac = ((t_abs - w[0][0]) / (w[1][0] - w[0][0])).max(T::zero());
                (lerp(w[0][1], w[1][1], frac), lerp(w[0][2], w[1][2], frac))
            }
        }
    }
}

/// Synthetic capture: the landmark samples plus the profile that generated
/// them, kept as ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub samples: Vec<LandmarkSample<T>>,
    pub profile: TrajectoryProfile<T>,
    pub duration: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn true_speed(&self, t: T) -> T {
        self.profile.speed_at(t)
    }
}

/// Samples `profile` at the 30 Hz capture rate for `duration` seconds.
pub fn synth_trajectory<T: Scalar>(
    profile: &TrajectoryProfile<T>,
    duration: T,
) -> Result<Trajectory<T>> {
    if !(duration > T::zero()) || !duration.is_finite() {
        return Err(Error::InvalidParameter {
            name: "duration",
            reason: format!("must be positive, got {duration}"),
        });
    }
    profile.validate()?;
    let rate = T::lit(CAPTURE_RATE_HZ);
    let n = ((duration * rate).as_f64() - 1e-9).ceil().max(1.0) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = T::from_usize_lossy(i) / rate;
            let (x, y) = profile.position_at(t);
            LandmarkSample { t, x, y }
        })
        .collect();
    Ok(Trajectory {
        samples,
        profile: profile.clone(),
        duration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    ZeroOrderHold,
}

/// Smoothing and latency configuration of the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SmoothingConfig<T: Scalar> {
    /// EMA time constant over positions, s. Zero disables smoothing.
    pub time_constant_s: T,
    pub interpolation: Interpolation,
    /// End-to-end estimation latency budget, s. Covers the filter group
    /// delay; the remainder is processing time.
    pub latency_budget_s: T,
    /// Standard deviation of seeded latency jitter, s. Zero disables jitter.
    pub jitter_sd_s: T,
    pub seed: u64,
}

impl<T: Scalar> Default for SmoothingConfig<T> {
    fn default() -> Self {
        SmoothingConfig {
            time_constant_s: T::lit(1.0 / CAPTURE_RATE_HZ),
            interpolation: Interpolation::Linear,
            latency_budget_s: T::lit(DEFAULT_LATENCY_BUDGET_S),
            jitter_sd_s: T::zero(),
            seed: 0,
        }
    }
}

impl<T: Scalar> SmoothingConfig<T> {
    /// Low-frequency group delay of EMA plus backward difference for a
    /// capture interval `dt`, s.
    pub fn group_delay(&self, dt: T) -> T {
        let half = dt / T::lit(2.0);
        if self.time_constant_s <= T::zero() {
            return half;
        }
        let alpha = T::one() - (-dt / self.time_constant_s).exp();
        (T::one() - alpha) / alpha * dt + half
    }
}

/// Speed estimates on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VelocityTrace<T: Scalar> {
    /// Samples per second.
    pub rate: T,
    /// Time of the first estimate, s.
    pub start_time: T,
    /// Non-negative speeds, mm/s.
    pub speeds: Vec<T>,
    /// Reported estimation delay, s.
    pub latency: T,
}

impl<T: Scalar> VelocityTrace<T> {
    /// A constant-speed trace covering `duration` seconds at `rate`.
    pub fn constant(speed: T, rate: T, duration: T) -> Self {
        let n = ((duration * rate).as_f64() - 1e-9).ceil().max(0.0) as usize;
        VelocityTrace {
            rate,
            start_time: T::zero(),
            speeds: vec![speed; n],
            latency: T::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }

    pub fn duration(&self) -> T {
        T::from_usize_lossy(self.speeds.len()) / self.rate
    }

    pub fn max_speed(&self) -> T {
        self.speeds.iter().copied().fold(T::zero(), T::max)
    }

    /// Zero-order-hold lookup; zero outside the trace.
    pub fn speed_at(&self, t: T) -> T {
        let idx = ((t - self.start_time) * self.rate).floor();
        if idx < T::zero() {
            return T::zero();
        }
        idx.to_usize()
            .and_then(|i| self.speeds.get(i).copied())
            .unwrap_or_else(T::zero)
    }

    /// Resamples onto a new rate by zero-order hold.
    pub fn resample(&self, rate: T) -> VelocityTrace<T> {
        if rate == self.rate {
            return self.clone();
        }
        let n = ((self.duration() * rate).as_f64() - 1e-9).ceil().max(0.0) as usize;
        let speeds = (0..n)
            .map(|j| {
                let i = (T::from_usize_lossy(j) * self.rate / rate).floor();
                let i = i
                    .to_usize()
                    .unwrap_or(0)
                    .min(self.speeds.len().saturating_sub(1));
                self.speeds[i]
            })
            .collect();
        VelocityTrace {
            rate,
            start_time: self.start_time,
            speeds,
            latency: self.latency,
        }
    }
}

/// Estimates fingertip speed at `out_rate` from landmark samples.
pub fn estimate_velocity<T: Scalar>(
    samples: &[LandmarkSample<T>],
    out_rate: T,
    smoothing: &SmoothingConfig<T>,
) -> Result<VelocityTrace<T>> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if !(out_rate >= T::lit(CAPTURE_RATE_HZ)) {
        return Err(Error::InvalidParameter {
            name: "out_rate",
            reason: format!("must be at least {CAPTURE_RATE_HZ} samples/s"),
        });
    }
    for (i, w) in samples.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(Error::NonMonotonicTime { index: i + 1 });
        }
    }
    if smoothing.time_constant_s < T::zero() || smoothing.jitter_sd_s < T::zero() {
        return Err(Error::InvalidParameter {
            name: "smoothing",
            reason: "time constant and jitter must be non-negative".into(),
        });
    }

    let n = samples.len();
    let t0 = samples[0].t;
    let mean_dt = (samples[n - 1].t - t0) / T::from_usize_lossy(n - 1);

    let group_delay = smoothing.group_delay(mean_dt);
    if group_delay > smoothing.latency_budget_s {
        return Err(Error::InvalidParameter {
            name: "latency_budget_s",
            reason: format!(
                "budget {} s is shorter than the filter group delay {} s",
                smoothing.latency_budget_s, group_delay
            ),
        });
    }

    // EMA over positions.
    let mut sx = samples[0].x;
    let mut sy = samples[0].y;
    let mut smoothed = Vec::with_capacity(n);
    smoothed.push((sx, sy));
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        let alpha = if smoothing.time_constant_s > T::zero() {
            T::one() - (-dt / smoothing.time_constant_s).exp()
        } else {
            T::one()
        };
        sx = sx + alpha * (w[1].x - sx);
        sy = sy + alpha * (w[1].y - sy);
        smoothed.push((sx, sy));
    }

    // Backward differences; the first estimate is copied backward.
    let mut est = Vec::with_capacity(n);
    est.push(T::zero());
    for k in 1..n {
        let dt = samples[k].t - samples[k - 1].t;
        let (x1, y1) = smoothed[k];
        let (x0, y0) = smoothed[k - 1];
        est.push((x1 - x0).hypot(y1 - y0) / dt);
    }
    est[0] = est[1];

    let duration = samples[n - 1].t - t0 + mean_dt;
    let n_out = ((duration * out_rate).as_f64() - 1e-9).ceil() as usize;
    let mut speeds = Vec::with_capacity(n_out);
    let mut k = 0usize;
    for j in 0..n_out {
        let t = t0 + T::from_usize_lossy(j) / out_rate;
        while k + 1 < n && samples[k + 1].t <= t {
            k += 1;
        }
        let v = if k + 1 >= n {
            est[n - 1]
        } else {
            match smoothing.interpolation {
                Interpolation::ZeroOrderHold => est[k],
                Interpolation::Linear => {
                    let frac = (t - samples[k].t) / (samples[k + 1].t - samples[k].t);
                    lerp(est[k], est[k + 1], frac)
                }
            }
        };
        speeds.push(if v.is_finite() {
            v.max(T::zero())
        } else {
            T::zero()
        });
    }

    let mut latency = smoothing.latency_budget_s;
    if smoothing.jitter_sd_s > T::zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(smoothing.seed);
        let normal = Normal::new(0.0, smoothing.jitter_sd_s.as_f64())
            .map_err(|e| Error::Parse(e.to_string()))?;
        latency = (latency + T::lit(normal.sample(&mut rng))).max(group_delay);
    }

    Ok(VelocityTrace {
        rate: out_rate,
        start_time: t0,
        speeds,
        latency,
    })
}

/// Reads a `t_s,x_mm,y_mm` landmark CSV.
pub fn read_landmarks_csv<T: Scalar, R: std::io::Read>(
    reader: R,
) -> Result<Vec<LandmarkSample<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "x_mm", "y_mm"] {
        return Err(Error::Parse(format!(
            "expected header t_s,x_mm,y_mm, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<(f64, f64, f64)>() {
        let (t, x, y) = rec?;
        out.push(LandmarkSample::new(T::lit(t), T::lit(x), T::lit(y)));
    }
    Ok(out)
}

pub fn write_landmarks_csv<T: Scalar, W: Write>(
    mut w: W,
    samples: &[LandmarkSample<T>],
) -> Result<()> {
    writeln!(w, "t_s,x_mm,y_mm")?;
    for s in samples {
        writeln!(
            w,
            "{:.6},{:.6},{:.6}",
            s.t.as_f64(),
            s.x.as_f64(),
            s.y.as_f64()
        )?;
    }
    Ok(())
}

/// Reads a `t_s,speed_mm_s` trace CSV sampled on a uniform grid.
pub fn read_trace_csv<T: Scalar, R: std::io::Read>(reader: R) -> Result<VelocityTrace<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "speed_mm_s"] {
        return Err(Error::Parse("expected header t_s,speed_mm_s".into()));
    }
    let rows: Vec<(f64, f64)> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: rows.len(),
        });
    }
    if let Some(i) = rows.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::NonMonotonicTime { index: i + 1 });
    }
    let span = rows[rows.len() - 1].0 - rows[0].0;
    let rate = ((rows.len() - 1) as f64 / span * 1e3).round() / 1e3;
    if let Some(i) = rows.iter().position(|r| r.1 < 0.0 || !r.1.is_finite()) {
        return Err(Error::Parse(format!(
            "row {i}: speed must be finite and non-negative"
        )));
    }
    Ok(VelocityTrace {
        rate: T::lit(rate),
        start_time: T::lit(rows[0].0),
        speeds: rows.iter().map(|r| T::lit(r.1)).collect(),
        latency: T::zero(),
    })
}

pub fn write_trace_csv<T: Scalar, W: Write>(mut w: W, trace: &VelocityTrace<T>) -> Result<()> {
    writeln!(w, "t_s,speed_mm_s")?;
    for (i, v) in trace.speeds.iter().enumerate() {
        let t = trace.start_time + T::from_usize_lossy(i) / trace.rate;
        writeln!(w, "{:.9},{:.6}", t.as_f64(), v.as_f64())?;
    }
    Ok(())
}

/// Sniffs the header line and dispatches to the landmark or speed reader.
pub enum TrackingCsv<T: Scalar> {
    Landmarks(Vec<LandmarkSample<T>>),
    Trace(VelocityTrace<T>),
}

pub fn read_tracking_csv<T: Scalar, R: BufRead>(mut reader: R) -> Result<TrackingCsv<T>> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    let header = buf.lines().next().unwrap_or_default().trim();
    if header.starts_with("t_s,speed_mm_s") {
        read_trace_csv(buf.as_bytes()).map(TrackingCsv::Trace)
    } else {
        read_landmarks_csv(buf.as_bytes()).map(TrackingCsv::Landmarks)
    }
}
