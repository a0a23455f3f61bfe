//! End-to-end touch simulation: tracking feeds the vibrotactile channel,
//! session events drive the pneumatic channel, all on one 1 kHz clock.

pub mod config;
pub mod run;

pub use config::{ContactSpan, LatencyBudget, ScenarioConfig, SCENARIO_SCHEMA};
pub use run::{
    run_batch, run_scenario, PneumoSummary, ScenarioSummary, SessionTrace, TraceRow, CLOCK_HZ,
};
