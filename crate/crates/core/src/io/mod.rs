//! Scenario files, state dumps, output tables and the run pipeline.

pub mod dump;
pub mod output;
pub mod run;
pub mod scenario;

pub use dump::StateDump;
pub use run::{exit_code, run, Command, Outcome, RunOptions};
pub use scenario::{InitialKind, InitialState, Outputs, Scenario, SteadySettings, WignerOutput};
