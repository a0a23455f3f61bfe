//! Speed-driven vibrotactile drive synthesis.
//!
//! The drive is `Y = A·sin(θ)` where the phase advances by
//! `2π·(v/λ)/fs` per sample, so the instantaneous frequency is the scanning
//! speed divided by the virtual-surface wavelength. Samples are grouped into
//! fixed-length render frames (1000 frames/s by default).

use std::io::{Seek, Write};
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tracking::VelocityTrace;
use crate::types::WaveformParams;

/// Resonance of the linear resonant actuator, Hz.
pub const LRA_RESONANT_HZ: f64 = 250.0;
/// Acceleration produced at full-scale drive (the A3 level), m/s².
pub const FULL_SCALE_ACCEL: f64 = 6.2;

#[derive(Debug, Clone, PartialEq)]
pub struct DriveFrame<T: Scalar> {
    /// Time of the first sample, s.
    pub t0: T,
    /// Drive values in [-1, 1].
    pub samples: Vec<T>,
    pub frame_rate: T,
}

impl<T: Scalar> DriveFrame<T> {
    pub fn rms(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        let sum = self.samples.iter().fold(T::zero(), |acc, &y| acc + y * y);
        (sum / T::from_usize_lossy(self.samples.len())).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LraModel<T: Scalar> {
    pub resonant_freq: T,
    /// m/s² per unit of normalized drive at resonance.
    pub accel_per_unit_amplitude: T,
}

impl<T: Scalar> Default for LraModel<T> {
    fn default() -> Self {
        LraModel {
            resonant_freq: T::lit(LRA_RESONANT_HZ),
            accel_per_unit_amplitude: T::lit(FULL_SCALE_ACCEL),
        }
    }
}

impl<T: Scalar> LraModel<T> {
    pub fn full_scale_accel(&self) -> T {
        self.accel_per_unit_amplitude
    }
}

/// Normalized drive amplitude for a peak acceleration under a linear
/// calibration.
pub fn amplitude_for_accel<T: Scalar>(accel: T, model: &LraModel<T>) -> Result<T> {
    if !(model.accel_per_unit_amplitude > T::zero()) {
        return Err(Error::InvalidParameter {
            name: "accel_per_unit_amplitude",
            reason: "must be positive".into(),
        });
    }
    let full = model.full_scale_accel();
    if !(accel > T::zero() && accel <= full) {
        return Err(Error::OutOfRange {
            quantity: "accel",
            value: accel.as_f64(),
            min: 0.0,
            max: full.as_f64(),
        });
    }
    Ok((accel / model.accel_per_unit_amplitude).min(T::one()))
}

/// Running-phase oscillator.
#[derive(Debug, Clone)]
pub struct DriveSynth<T: Scalar> {
    params: WaveformParams<T>,
    phase: T,
    phase_per_speed: T,
    block_len: usize,
    emitted: usize,
}

impl<T: Scalar> DriveSynth<T> {
    pub fn new(params: WaveformParams<T>) -> Result<Self> {
        params.validate(T::zero())?;
        let block_len = params.block_len()?;
        Ok(DriveSynth {
            phase: params.phase,
            phase_per_speed: T::TAU() / (params.wavelength_mm * params.sample_rate),
            params,
            block_len,
            emitted: 0,
        })
    }

    pub fn params(&self) -> &WaveformParams<T> {
        &self.params
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn set_amplitude(&mut self, amplitude: T) {
        self.params.amplitude = amplitude.clamp_to(T::zero(), T::one());
    }

    /// Emits one sample for speed `v` (mm/s) and advances the phase.
    #[inline]
    pub fn next_sample(&mut self, v: T) -> T {
        let y = self.params.amplitude * self.phase.sin();
        self.phase = (self.phase + self.phase_per_speed * v) % T::TAU();
        self.emitted += 1;
        y
    }

    /// Emits one render frame; `speeds` must hold exactly one block.
    pub fn next_frame(&mut self, speeds: &[T]) -> DriveFrame<T> {
        debug_assert_eq!(speeds.len(), self.block_len);
        let t0 = T::from_usize_lossy(self.emitted) / self.params.sample_rate;
        let samples = speeds.iter().map(|&v| self.next_sample(v)).collect();
        DriveFrame {
            t0,
            samples,
            frame_rate: self.params.render_rate,
        }
    }
}

/// Per-sample speeds on the drive grid, padded by holding the last speed
/// up to a whole number of frames.
fn drive_speeds<T: Scalar>(
    trace: &VelocityTrace<T>,
    params: &WaveformParams<T>,
    block: usize,
) -> Vec<T> {
    let mut v = trace.resample(params.sample_rate).speeds;
    let rem = v.len() % block;
    if rem != 0 {
        let last = *v.last().expect("non-empty trace");
        v.extend(std::iter::repeat_n(last, block - rem));
    }
    v
}

/// Synthesizes the full drive for `trace` as a gapless frame sequence.
pub fn synthesize<T: Scalar>(
    trace: &VelocityTrace<T>,
    params: &WaveformParams<T>,
) -> Result<Vec<DriveFrame<T>>> {
    if trace.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    params.validate(trace.max_speed())?;
    let mut synth = DriveSynth::new(*params)?;
    let block = synth.block_len();
    let speeds = drive_speeds(trace, params, block);
    Ok(speeds
        .chunks_exact(block)
        .map(|c| synth.next_frame(c))
        .collect())
}

/// Concatenates frames back into the sample stream.
pub fn concat_frames<T: Scalar>(frames: &[DriveFrame<T>]) -> Vec<T> {
    frames
        .iter()
        .flat_map(|f| f.samples.iter().copied())
        .collect()
}

/// Writes 16-bit little-endian mono PCM in a WAV container.
pub fn write_wav<T: Scalar, W: Write + Seek>(
    writer: W,
    samples: &[T],
    sample_rate: u32,
) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::new(writer, spec)?;
    for &y in samples {
        let q = (y.as_f64().clamp(-1.0, 1.0) * i16::MAX as f64).round() as i16;
        w.write_sample(q)?;
    }
    w.finalize()?;
    Ok(())
}

/// Summary of a streamed synthesis run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamReport {
    pub frames: usize,
    /// Frames whose production exceeded one frame period of wall time.
    pub deadline_misses: usize,
    pub worst_production: Duration,
}

/// Single-producer, single-consumer frame stream.
///
/// The producer synthesizes frames on its own thread and hands them over a
/// bounded channel; each frame must be produced within one frame period.
pub struct FrameStream<T: Scalar> {
    rx: Receiver<DriveFrame<T>>,
    handle: Option<JoinHandle<StreamReport>>,
    expected_t0: T,
    period: T,
}

impl<T: Scalar> FrameStream<T> {
    pub fn spawn(
        trace: VelocityTrace<T>,
        params: WaveformParams<T>,
        capacity: usize,
    ) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        params.validate(trace.max_speed())?;
        let mut synth = DriveSynth::new(params)?;
        let block = synth.block_len();
        let speeds = drive_speeds(&trace, &params, block);
        let deadline = Duration::from_secs_f64(1.0 / params.render_rate.as_f64());
        let (tx, rx) = sync_channel(capacity.max(1));
        let handle = std::thread::spawn(move || {
            let mut report = StreamReport::default();
            for chunk in speeds.chunks_exact(block) {
                let start = Instant::now();
                let frame = synth.next_frame(chunk);
                let took = start.elapsed();
                report.frames += 1;
                report.worst_production = report.worst_production.max(took);
                if took > deadline {
                    report.deadline_misses += 1;
                }
                if tx.send(frame).is_err() {
                    break;
                }
            }
            report
        });
        Ok(FrameStream {
            rx,
            handle: Some(handle),
            expected_t0: T::zero(),
            period: T::one() / params.render_rate,
        })
    }

    /// Next frame; errors if the stream skipped or repeated a frame slot.
    pub fn recv(&mut self) -> Option<Result<DriveFrame<T>>> {
        let frame = self.rx.recv().ok()?;
        let tol = self.period * T::lit(1e-6);
        let gap = (frame.t0 - self.expected_t0).abs();
        self.expected_t0 = frame.t0 + self.period;
        if gap > tol + frame.t0.abs() * T::epsilon() * T::lit(16.0) {
            return Some(Err(Error::InvalidParameter {
                name: "frame_stream",
                reason: format!("frame at t0={} breaks the gapless stream", frame.t0),
            }));
        }
        Some(Ok(frame))
    }

    /// Drains remaining frames and joins the producer.
    pub fn finish(mut self) -> StreamReport {
        while self.rx.recv().is_ok() {}
        self.handle
            .take()
            .map(|h| h.join().expect("producer thread panicked"))
            .unwrap_or_default()
    }
}
