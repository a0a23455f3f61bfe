//! Closed-loop pneumatic pressure control against a simulated
//! pump/tube/leak plant, plus the static lift and contact-area models.

mod actuator;
mod config;
mod pid;
mod plant;
mod sensor;
mod step;
pub mod tuning;

pub use actuator::{
    contact_area_reduction, pressure_to_lift, AREA_FORCES_N, AREA_PRESSURES_KPA,
    AREA_REDUCTION_PCT, FORCE_RANGE_N, LIFT_POINTS,
};
pub use config::{PneumoConfig, CONFIG_SCHEMA};
pub use pid::{pid_tick, PidController, PidState};
pub use plant::{
    plant_step, PlantParams, PlantState, MAX_INNER_DT, MAX_PLANT_PRESSURE, PRESSURE_GAIN_KPA,
};
pub use sensor::PressureSensor;
pub use step::{
    run_step_response, run_step_response_with_release, write_metrics_csv, write_step_trace_csv,
    StepMetrics, StepResponse, StepSample, DEFAULT_RELEASE_S, INNER_DT, SETTLE_BAND_KPA,
    STABLE_STAGE_S,
};

use crate::scalar::Scalar;
use crate::types::PidGains;

/// Plant parameters produced by `examples/calibrate.rs`; mirrored in
/// `configs/plant.json`.
pub fn calibrated_plant<T: Scalar>() -> PlantParams<T> {
    PlantParams {
        tube_volume: T::lit(1.0),
        pump_max_flow: T::lit(1.2),
        pump_flow_droop: T::lit(0.04),
        leak_coeff: T::lit(0.01),
        valve_vent_flow: T::lit(0.35),
        sensor_rate: T::lit(20.0),
        sensor_noise_sd: T::lit(0.3),
        sensor_quantization: T::lit(0.05),
    }
}

/// Controller gains produced by the same calibration search.
pub fn calibrated_gains<T: Scalar>() -> PidGains<T> {
    PidGains::new(T::lit(0.08), T::lit(0.2), T::lit(0.0))
}
