//! Dissipative preparation and stabilization of entangled coherent states of
//! a trapped ion's motion.
//!
//! The crate builds the effective sideband Hamiltonians, evolves the Lindblad
//! master equation, solves for steady states, and evaluates fidelities and
//! joint Wigner functions. All numerics are generic over [`Real`]; the `*64`
//! and `*32` aliases below fix the precision.

pub mod dense;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod model;
pub mod observables;
pub mod operator_core;
pub mod reduction;
pub mod scalar;
pub mod sparse;

pub use error::{Error, Result};
pub use operator_core::*;
pub use scalar::{Cx, Real};

pub type OperatorMatrix64 = OperatorMatrix<f64>;
pub type StateVector64 = StateVector<f64>;
pub type DensityMatrix64 = DensityMatrix<f64>;

pub type OperatorMatrix32 = OperatorMatrix<f32>;
pub type StateVector32 = StateVector<f32>;
pub type DensityMatrix32 = DensityMatrix<f32>;

pub type EvolutionConfig64 = dynamics::EvolutionConfig<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type ModelSpec64 = model::ModelSpec<f64>;
pub type WignerGrid64 = observables::WignerGrid<f64>;
pub type Scenario64 = io::Scenario<f64>;
