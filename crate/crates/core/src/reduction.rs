//! Single-mode reduction of the ideal two-mode model.
//!
//! With `c = (a + b)/√2` the drive `(a + b)²` becomes `2c²` and the
//! antisymmetric mode decouples. Evolving the reduced model and comparing
//! fidelities gives an independent check on the full two-mode run.

use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_with, EvolutionConfig};
use crate::error::{Error, Result};
use crate::model::{couple_to_internal, JumpOperator, ModelSpec, Variant};
use crate::operator_core::{
    cat_state, internal_op, lowering, HilbertSpace, InternalOp, Level, OperatorMatrix, Parity, StateVector,
};
use crate::scalar::{creal, Cx, Real};
use crate::sparse::CsrMatrix;

/// Driven symmetric mode `c` coupled to the two-level ion.
#[derive(Clone, Debug)]
pub struct ReducedModel<T> {
    pub c_dim: usize,
    pub space: HilbertSpace,
    /// `[−2λc² + ε] e^{−iφ₀} S⁺ + H.c.`
    pub hamiltonian: OperatorMatrix<T>,
    pub jumps: Vec<JumpOperator<T>>,
    /// Cat amplitude in the c mode, `√(ε/2λ)`.
    pub reference_alpha: T,
}

impl<T: Real> ReducedModel<T> {
    /// Even or odd cat of amplitude `reference_alpha` in the c mode.
    pub fn cat(&self, parity: Parity) -> Result<StateVector<T>> {
        cat_state(&self.space.vibrational_part(), creal(self.reference_alpha), parity)
    }

    /// Maps `Σ ψ_n |s⟩|n⟩_c` onto the two-mode space as `Σ ψ_n |s⟩|n⟩_c|0⟩_d`.
    pub fn lift(&self, psi: &StateVector<T>, full: &HilbertSpace) -> Result<StateVector<T>> {
        if psi.space() != &self.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: psi.space().total_dim(),
            });
        }
        if full.mode_count() != 2 || full.internal_levels() != self.space.internal_levels() {
            return Err(Error::Unsupported("lift targets a two-mode space with the same internal levels".into()));
        }
        let (da, db) = (full.mode_dims()[0], full.mode_dims()[1]);
        let mut out = vec![Cx::<T>::default(); full.total_dim()];
        for (idx, &amp) in psi.amplitudes().iter().enumerate() {
            if amp.norm() == T::zero() {
                continue;
            }
            let (level, occ) = self.space.decompose(idx);
            let n = occ[0];
            if n >= da || n >= db {
                return Err(Error::Truncation {
                    mode: 0,
                    amplitude_sq: n as f64,
                    limit: da.min(db) as f64 - 1.0,
                });
            }
            // |n⟩_c|0⟩_d = 2^{−n/2} Σ_k √C(n,k) |k⟩_a|n−k⟩_b
            let scale = T::lit(0.5).powi(n as i32).sqrt();
            for k in 0..=n {
                let w = T::from_f64(binomial(n, k)).unwrap().sqrt() * scale;
                out[full.index(level, &[k, n - k])] += amp * w;
            }
        }
        StateVector::from_amplitudes(full, out)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Reduced model with `c_dim` twice the largest mode truncation.
pub fn reduce<T: Real>(spec: &ModelSpec<T>) -> Result<ReducedModel<T>> {
    let c_dim = 2 * spec.mode_dims.iter().copied().max().unwrap_or(0);
    reduce_with_dim(spec, c_dim)
}

pub fn reduce_with_dim<T: Real>(spec: &ModelSpec<T>, c_dim: usize) -> Result<ReducedModel<T>> {
    spec.validate()?;
    if spec.mode_count != 2 {
        return Err(Error::Unsupported("the reduction applies to two modes".into()));
    }
    if spec.variant != Variant::Ideal {
        return Err(Error::Unsupported(
            "the reduction is exact only for the ideal Hamiltonian".into(),
        ));
    }
    if spec.has_vibrational_damping() {
        return Err(Error::Unsupported("the reduction requires zero vibrational damping".into()));
    }
    if c_dim < 2 {
        return Err(Error::param("c_dim", "must be at least 2"));
    }
    let space = HilbertSpace::with_internal(2, &[c_dim])?;
    let c = lowering::<T>(c_dim);
    let drive = c
        .matmul(&c)
        .scale(creal(-T::lit(2.0) * spec.lambda_rate))
        .add(&CsrMatrix::identity(c_dim).scale(creal(spec.epsilon)))
        .scale(Cx::from_polar(T::one(), -spec.phi0));
    let hamiltonian = couple_to_internal(&space, &drive)?;

    let mut jumps = vec![JumpOperator {
        label: "S-".into(),
        op: internal_op(&space, InternalOp::Lower)?,
        rate: spec.gamma,
    }];
    if spec.dephasing_rate > T::zero() {
        jumps.push(JumpOperator {
            label: "Sz".into(),
            op: internal_op(&space, InternalOp::Inversion)?,
            rate: spec.dephasing_rate,
        });
    }
    Ok(ReducedModel {
        c_dim,
        space,
        hamiltonian,
        jumps,
        reference_alpha: (spec.epsilon / (T::lit(2.0) * spec.lambda_rate)).sqrt(),
    })
}

/// Fidelity traces of the reduced and full runs at shared sample times.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OracleReport<T> {
    pub c_dim: usize,
    pub times: Vec<T>,
    pub fidelity_reduced: Vec<T>,
    pub fidelity_full: Vec<T>,
    pub max_deviation: T,
    pub tolerance: T,
    pub passed: bool,
}

impl<T: Real> OracleReport<T> {
    pub fn deviations(&self) -> impl Iterator<Item = T> + '_ {
        self.fidelity_reduced.iter().zip(&self.fidelity_full).map(|(a, b)| (*a - *b).abs())
    }
}

/// Deviation at which the comparison is declared failed.
pub const ORACLE_TOLERANCE: f64 = 1e-3;

/// Evolves `initial` (a c-mode ket) in the reduced model and its lift in the
/// full model, then compares the cat fidelities sample by sample.
pub fn compare_with_full<T: Real>(
    spec: &ModelSpec<T>,
    initial: &StateVector<T>,
    cfg: &EvolutionConfig<T>,
) -> Result<OracleReport<T>> {
    let red = reduce(spec)?;
    compare_reduced(spec, &red, initial, cfg)
}

pub fn compare_reduced<T: Real>(
    spec: &ModelSpec<T>,
    red: &ReducedModel<T>,
    initial: &StateVector<T>,
    cfg: &EvolutionConfig<T>,
) -> Result<OracleReport<T>> {
    let full_space = spec.space()?;
    let lifted = red.lift(initial, &full_space)?;
    // fidelities are only comparable on a common time grid
    let cfg = EvolutionConfig {
        stop_at_steady: false,
        store_times: Vec::new(),
        store_every_sample: false,
        ..cfg.clone()
    };
    let parity = initial_parity(initial);
    let red_target = red.cat(parity)?;
    let full_target = cat_state(&full_space.vibrational_part(), creal(spec.cat_amplitude()?), parity)?;

    let (r, f) = rayon::join(
        || evolve_with(&initial.to_density(), &red.hamiltonian, &red.jumps, &cfg, Some(&red_target)),
        || {
            let h = crate::model::build_hamiltonian(spec)?;
            let jumps = crate::model::jump_operators(spec)?;
            evolve_with(&lifted.to_density(), &h, &jumps, &cfg, Some(&full_target))
        },
    );
    let (r, f) = (r?, f?);
    let fr = r.fidelity.expect("target given");
    let ff = f.fidelity.expect("target given");
    let len = fr.len().min(ff.len());
    let max_deviation = fr[..len]
        .iter()
        .zip(&ff[..len])
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max);
    let tolerance = T::lit(ORACLE_TOLERANCE);
    Ok(OracleReport {
        c_dim: red.c_dim,
        times: r.times[..len].to_vec(),
        fidelity_reduced: fr[..len].to_vec(),
        fidelity_full: ff[..len].to_vec(),
        max_deviation,
        tolerance,
        passed: max_deviation <= tolerance,
    })
}

fn initial_parity<T: Real>(psi: &StateVector<T>) -> Parity {
    let space = psi.space();
    let odd: T = psi
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| !space.is_even(*i))
        .map(|(_, a)| a.norm_sqr())
        .sum();
    if odd > T::lit(0.5) {
        Parity::Odd
    } else {
        Parity::Even
    }
}

/// The c-mode ket `|s⟩|n⟩_c`.
pub fn reduced_fock<T: Real>(red: &ReducedModel<T>, level: Level, n: usize) -> Result<StateVector<T>> {
    StateVector::fock(&red.space, level, &[n])
}
