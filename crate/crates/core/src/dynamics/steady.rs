use ndarray::Array2;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::generator::Generator;
use crate::dense::{self, NullSpace};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, jump_operators, JumpOperator, ModelSpec};
use crate::operator_core::{DensityMatrix, HilbertSpace, OperatorMatrix};
use crate::scalar::{cunit, Cx, Real};
use crate::sparse::CsrMatrix;

/// Subspace of operators on which the steady state is sought.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// Operators supported on even-phonon basis states.
    Even,
    /// Operators supported on odd-phonon basis states.
    Odd,
    /// Operators without coherences between the two parity sectors.
    ParityDiagonal,
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyOptions<T> {
    pub sector: Sector,
    /// Largest Hilbert dimension (within the sector) accepted by the dense solve.
    pub max_dim: usize,
    /// Largest number of unknown matrix elements (the dense system is its square).
    pub max_unknowns: usize,
    /// Pivots below this fraction of the largest count as zero.
    pub pivot_tol: T,
    /// Bound on the Frobenius norm of L(ρ_ss).
    pub residual_tol: T,
}

impl<T: Real> SteadyOptions<T> {
    pub fn new(sector: Sector) -> Self {
        Self {
            sector,
            max_dim: 128,
            max_unknowns: 4096,
            pivot_tol: T::lit(1e-10),
            residual_tol: T::lit(1e-9),
        }
    }
}

/// Steady state of the model by a direct null-space solve.
pub fn steady_state_direct<T: Real>(spec: &ModelSpec<T>, opts: &SteadyOptions<T>) -> Result<DensityMatrix<T>> {
    spec.validate()?;
    steady_state(&build_hamiltonian(spec)?, &jump_operators(spec)?, opts)
}

/// Unique normalized ρ with L(ρ) = 0 inside the requested sector.
pub fn steady_state<T: Real>(
    h: &OperatorMatrix<T>,
    jumps: &[JumpOperator<T>],
    opts: &SteadyOptions<T>,
) -> Result<DensityMatrix<T>> {
    let space = h.space().clone();
    let n = space.total_dim();
    let gen = Generator::new(h, jumps)?;
    let h_eff = gen.h_eff();

    let even: Vec<bool> = (0..n).map(|i| space.is_even(i)).collect();
    let in_rows: Vec<bool> = match opts.sector {
        Sector::Even => even.clone(),
        Sector::Odd => even.iter().map(|e| !e).collect(),
        Sector::ParityDiagonal | Sector::Full => vec![true; n],
    };
    let sector_dim = in_rows.iter().filter(|&&b| b).count();
    if sector_dim > opts.max_dim {
        return Err(Error::DimensionGuard {
            dim: sector_dim,
            max: opts.max_dim,
        });
    }
    check_invariance(&space, h_eff, jumps, opts.sector, &in_rows, &even)?;

    let included = |i: usize, j: usize| -> bool {
        in_rows[i] && in_rows[j] && (opts.sector != Sector::ParityDiagonal || even[i] == even[j])
    };
    // column-stacked unknowns (i, j)
    const NONE: usize = usize::MAX;
    let mut pos = vec![NONE; n * n];
    let mut unknowns = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if included(i, j) {
                pos[i * n + j] = unknowns.len();
                unknowns.push((i, j));
            }
        }
    }
    let m = unknowns.len();
    if m > opts.max_unknowns {
        return Err(Error::DimensionGuard {
            dim: m,
            max: opts.max_unknowns,
        });
    }
    let mut sup: Array2<Cx<T>> = Array2::zeros((m, m));
    let ht = h_eff.transpose();
    let lts: Vec<(T, CsrMatrix<T>)> = jumps
        .iter()
        .filter(|j| j.rate != T::zero())
        .map(|j| (j.rate, j.op.csr().transpose()))
        .collect();
    let iu = cunit::<T>();
    let leak = |k: usize, l: usize| Error::SectorLeak(format!("element ({k}, {l}) leaves the sector"));
    for (col, &(i, j)) in unknowns.iter().enumerate() {
        let (ks, hv) = ht.row(i);
        for (&k, &v) in ks.iter().zip(hv) {
            let r = pos[k * n + j];
            if r == NONE {
                return Err(leak(k, j));
            }
            sup[[r, col]] -= iu * v;
        }
        let (ls, hv) = ht.row(j);
        for (&l, &v) in ls.iter().zip(hv) {
            let r = pos[i * n + l];
            if r == NONE {
                return Err(leak(i, l));
            }
            sup[[r, col]] += iu * v.conj();
        }
        for (rate, lt) in &lts {
            let (ks, kv) = lt.row(i);
            let (ls, lv) = lt.row(j);
            for (&k, &a) in ks.iter().zip(kv) {
                for (&l, &b) in ls.iter().zip(lv) {
                    let r = pos[k * n + l];
                    if r == NONE {
                        return Err(leak(k, l));
                    }
                    sup[[r, col]] += a * b.conj() * *rate;
                }
            }
        }
    }

    let v = match dense::null_vector(sup, opts.pivot_tol) {
        NullSpace::Vector(v) => v,
        NullSpace::Nullity(k) => return Err(Error::DegenerateNullSpace(k)),
    };
    let mut mat: Array2<Cx<T>> = Array2::zeros((n, n));
    for (&(i, j), &z) in unknowns.iter().zip(&v) {
        mat[[i, j]] = z;
    }
    let tr = mat.diag().iter().fold(Cx::zero(), |a: Cx<T>, &b| a + b);
    if tr.norm() < T::epsilon() * v.iter().map(|z| z.norm()).fold(T::zero(), T::max) {
        return Err(Error::ZeroState);
    }
    mat.mapv_inplace(|z| z / tr);
    let mut rho = DensityMatrix::from_raw(&space, mat)?;
    rho.hermitize_normalize();

    let res = gen.eval(rho.matrix());
    let residual = res.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    if !(residual <= opts.residual_tol) {
        return Err(Error::Residual {
            residual: residual.to_f64_lossy(),
            tol: opts.residual_tol.to_f64_lossy(),
        });
    }
    rho.validate()?;
    Ok(rho)
}

fn check_invariance<T: Real>(
    space: &HilbertSpace,
    h_eff: &CsrMatrix<T>,
    jumps: &[JumpOperator<T>],
    sector: Sector,
    in_rows: &[bool],
    even: &[bool],
) -> Result<()> {
    match sector {
        Sector::Full => Ok(()),
        Sector::Even | Sector::Odd => {
            for (k, i, _) in h_eff.triplets() {
                if in_rows[k] != in_rows[i] {
                    return Err(Error::SectorLeak(format!(
                        "Hamiltonian couples basis states {i} and {k} across the sector boundary"
                    )));
                }
            }
            for j in jumps.iter().filter(|j| j.rate != T::zero()) {
                for (k, i, _) in j.op.csr().triplets() {
                    if in_rows[i] && !in_rows[k] {
                        return Err(Error::SectorLeak(format!(
                            "jump operator `{}` maps out of the {:?} sector",
                            j.label, sector
                        )));
                    }
                }
            }
            Ok(())
        }
        Sector::ParityDiagonal => {
            for (k, i, _) in h_eff.triplets() {
                if even[k] != even[i] {
                    return Err(Error::SectorLeak("Hamiltonian does not conserve phonon parity".into()));
                }
            }
            for j in jumps.iter().filter(|j| j.rate != T::zero()) {
                let mut flips = None;
                for (k, i, _) in j.op.csr().triplets() {
                    let f = even[k] != even[i];
                    if *flips.get_or_insert(f) != f {
                        return Err(Error::SectorLeak(format!(
                            "jump operator `{}` has no definite parity",
                            j.label
                        )));
                    }
                }
            }
            let _ = space;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{couple_to_internal, Variant};
    use crate::operator_core::{cat_state, internal_op, lowering, InternalOp, Level, Parity, StateVector};
    use crate::scalar::creal;

    #[test]
    fn driven_qubit_matches_closed_form() {
        // H = (Ω/2)σx, decay Γ: ρ_ee = (Ω²/4)/(Γ²/4 + Ω²/2); the idle mode relaxes to vacuum
        let s = HilbertSpace::with_internal(2, &[2]).unwrap();
        let (om, g) = (1.3, 0.7);
        let sx = &internal_op::<f64>(&s, InternalOp::Raise).unwrap() + &internal_op(&s, InternalOp::Lower).unwrap();
        let h = sx.scale_re(om / 2.0);
        let jumps = [
            JumpOperator {
                label: "S-".into(),
                op: internal_op(&s, InternalOp::Lower).unwrap(),
                rate: g,
            },
            JumpOperator {
                label: "a".into(),
                op: crate::operator_core::annihilation(&s, 0).unwrap(),
                rate: 1.0,
            },
        ];
        let rho = steady_state(&h, &jumps, &SteadyOptions::new(Sector::Full)).unwrap();
        let want = (om * om / 4.0) / (g * g / 4.0 + om * om / 2.0);
        assert!((rho.level_population(Level::E) - want).abs() < 1e-12);
    }

    #[test]
    fn single_mode_even_sector_gives_cat() {
        // H = [−2c² + ε]S⁺ + h.c. is dark on the even cat of amplitude √(ε/2)
        let d = 14;
        let s = HilbertSpace::with_internal(2, &[d]).unwrap();
        let c = lowering::<f64>(d);
        let drive = c.matmul(&c).scale(Cx::new(-2.0, 0.0)).add(&CsrMatrix::identity(d).scale(Cx::new(1.0, 0.0)));
        let h = couple_to_internal(&s, &drive).unwrap();
        let jumps = [JumpOperator {
            label: "S-".into(),
            op: internal_op(&s, InternalOp::Lower).unwrap(),
            rate: 10.0,
        }];
        let rho = steady_state(&h, &jumps, &SteadyOptions::new(Sector::Even)).unwrap();
        let cat = cat_state(&s.vibrational_part(), creal(0.5f64.sqrt()), Parity::Even)
            .unwrap()
            .with_internal(&s, Level::G)
            .unwrap();
        let f = cat.to_density().matrix().iter().zip(rho.matrix()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        assert!(f > 1.0 - 1e-6, "{f}");
        let odd = steady_state(&h, &jumps, &SteadyOptions::new(Sector::Odd)).unwrap();
        assert!(odd.level_population(Level::G) > 1.0 - 1e-6);
    }

    #[test]
    fn decoupled_mode_makes_null_space_degenerate() {
        // the antisymmetric mode is free in the ideal two-mode model
        let mut spec = ModelSpec::<f64>::two_mode_reference(5);
        spec.variant = Variant::Ideal;
        spec.gamma_vib = vec![0.0, 0.0];
        spec.epsilon = 1.0;
        match steady_state_direct(&spec, &SteadyOptions::new(Sector::Even)) {
            Err(Error::DegenerateNullSpace(k)) => assert!(k >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn leak_and_guard_are_reported() {
        let spec = ModelSpec::<f64>::two_mode_reference(6);
        assert!(matches!(
            steady_state_direct(&spec, &SteadyOptions::new(Sector::Even)),
            Err(Error::SectorLeak(_))
        ));
        let mut opts = SteadyOptions::new(Sector::Full);
        opts.max_dim = 50;
        assert!(matches!(
            steady_state_direct(&spec, &opts),
            Err(Error::DimensionGuard { dim: 72, max: 50 })
        ));
        let _ = StateVector::<f64>::vacuum(&spec.space().unwrap());
    }
}
