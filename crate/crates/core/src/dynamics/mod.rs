//! Master-equation time evolution and steady states.

mod evolve;
mod generator;
mod steady;

pub use evolve::{evolve, evolve_with, EvolutionConfig, IntegrationStats, Trajectory};
pub use generator::{lindblad_rhs, trace_norm_bound, Generator};
pub use steady::{steady_state, steady_state_direct, Sector, SteadyOptions};
