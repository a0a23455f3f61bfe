//! Contact-event protocol, stimulus scheduling and experiment trial plans.

pub mod protocol;
pub mod scheduler;
pub mod transport;
pub mod trials;

pub use protocol::{decode, EventKind, EventReader, ProtocolError, SessionEvent};
pub use scheduler::{stimulus_intervals, Fault, Scheduler, SchedulerConfig};
pub use transport::{queue, replay, serve, Inbound, Intake, Outlet, Overflow, QUEUE_CAPACITY};
pub use trials::{generate_trials, Trial, TrialPlan};
