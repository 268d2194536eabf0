//! Truncated Fock-space operators and states.

mod operator;
mod space;
mod state;

pub use operator::{
    annihilation, check_truncation, creation, displaced_parity, displacement, displacement_matrix,
    internal_op, lowering, number, number_op, parity, total_parity, InternalOp, OperatorMatrix,
};
pub use space::{HilbertSpace, Level};
pub use state::{
    cat_normalization, cat_state, coherent_amplitudes, coherent_state, DensityMatrix, Parity, StateVector,
};
