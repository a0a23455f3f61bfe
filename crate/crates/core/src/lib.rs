//! Simulation and modeling library for a combined vibrotactile / pneumatic
//! fingertip display: speed-driven texture synthesis, a closed-loop tube
//! pressure model, the roughness-rating model, the MR session protocol and
//! an end-to-end scenario runner.
//!
//! Numeric cores are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for callers that don't care.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod perception;
pub mod pipeline;
pub mod pneumo;
pub mod scalar;
pub mod session;
pub mod tracking;
pub mod types;
pub mod vibro;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use types::{Material, Stimulus, StimulusKind, StimulusLabel};

pub type WaveformParamsF64 = types::WaveformParams<f64>;
pub type WaveformParamsF32 = types::WaveformParams<f32>;
pub type PidGainsF64 = types::PidGains<f64>;
pub type PidGainsF32 = types::PidGains<f32>;
pub type VelocityTraceF64 = tracking::VelocityTrace<f64>;
pub type VelocityTraceF32 = tracking::VelocityTrace<f32>;
pub type TrajectoryProfileF64 = tracking::TrajectoryProfile<f64>;
pub type TrajectoryProfileF32 = tracking::TrajectoryProfile<f32>;
pub type SmoothingConfigF64 = tracking::SmoothingConfig<f64>;
pub type DriveSynthF64 = vibro::DriveSynth<f64>;
pub type DriveSynthF32 = vibro::DriveSynth<f32>;
pub type PlantParamsF64 = pneumo::PlantParams<f64>;
pub type PlantParamsF32 = pneumo::PlantParams<f32>;
pub type PneumoConfigF64 = pneumo::PneumoConfig<f64>;
pub type StepResponseF64 = pneumo::StepResponse<f64>;
pub type StepResponseF32 = pneumo::StepResponse<f32>;
