//! Reduced states, fidelities and joint Wigner functions.

use ndarray::Array2;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_core::{check_truncation, displaced_parity, DensityMatrix, HilbertSpace, StateVector};
use crate::scalar::{Cx, Real};

/// Traces out the internal level, leaving the vibrational state.
pub fn partial_trace_internal<T: Real>(rho: &DensityMatrix<T>) -> DensityMatrix<T> {
    let space = rho.space();
    let vib = space.vibrational_part();
    let v = space.vib_dim();
    let m = rho.matrix();
    let out = Array2::from_shape_fn((v, v), |(a, b)| {
        (0..space.internal_levels()).fold(Cx::zero(), |acc, s| acc + m[[s * v + a, s * v + b]])
    });
    DensityMatrix::from_raw(&vib, out).expect("vibrational shape")
}

/// Traces out one vibrational mode of a vibrational-only state.
pub fn partial_trace_mode<T: Real>(rho: &DensityMatrix<T>, mode: usize) -> Result<DensityMatrix<T>> {
    let space = rho.space();
    if space.has_internal() {
        return Err(Error::param("rho", "trace out the internal level first"));
    }
    let dims = space.mode_dims();
    if mode >= dims.len() {
        return Err(Error::ModeIndex {
            index: mode,
            modes: dims.len(),
        });
    }
    if dims.len() < 2 {
        return Err(Error::param("mode", "cannot trace out the only mode"));
    }
    let rest: Vec<usize> = dims.iter().enumerate().filter(|&(m, _)| m != mode).map(|(_, &d)| d).collect();
    let out_space = HilbertSpace::vibrational(&rest)?;
    let n = out_space.total_dim();
    let m = rho.matrix();
    let mut out = Array2::zeros((n, n));
    let embed = |occ: &[usize], k: usize| {
        let mut full = occ.to_vec();
        full.insert(mode, k);
        space.index(0, &full)
    };
    for a in 0..n {
        let oa = out_space.decompose(a).1;
        for b in 0..n {
            let ob = out_space.decompose(b).1;
            let mut s = Cx::zero();
            for k in 0..dims[mode] {
                s += m[[embed(&oa, k), embed(&ob, k)]];
            }
            out[[a, b]] = s;
        }
    }
    DensityMatrix::from_raw(&out_space, out)
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure<T: Real>(rho: &DensityMatrix<T>, target: &StateVector<T>) -> Result<T> {
    if rho.space() != target.space() {
        return Err(Error::DimensionMismatch {
            expected: rho.space().total_dim(),
            found: target.space().total_dim(),
        });
    }
    let psi = target.amplitudes();
    let m = rho.matrix();
    let mut f = Cx::zero();
    for (i, &pi) in psi.iter().enumerate() {
        if pi.is_zero() {
            continue;
        }
        let mut row = Cx::zero();
        for (j, &pj) in psi.iter().enumerate() {
            row += m[[i, j]] * pj;
        }
        f += pi.conj() * row;
    }
    Ok(f.re)
}

fn two_mode_vib<T: Real>(rho: &DensityMatrix<T>) -> Result<(usize, usize)> {
    let s = rho.space();
    if s.has_internal() || s.mode_count() != 2 {
        return Err(Error::param(
            "rho",
            "joint Wigner function needs a two-mode vibrational state",
        ));
    }
    Ok((s.mode_dims()[0], s.mode_dims()[1]))
}

/// `M_{kl} = Σ_{ij} P_{ji} ρ[(i,k),(j,l)]`: mode a contracted with `P`.
fn contract_first<T: Real>(rho: &Array2<Cx<T>>, p: &Array2<Cx<T>>, da: usize, db: usize) -> Array2<Cx<T>> {
    let mut m = Array2::zeros((db, db));
    for i in 0..da {
        for j in 0..da {
            let w = p[[j, i]];
            if w.is_zero() {
                continue;
            }
            for k in 0..db {
                let r = rho.row(i * db + k);
                for l in 0..db {
                    m[[k, l]] += w * r[j * db + l];
                }
            }
        }
    }
    m
}

fn contract_second<T: Real>(m: &Array2<Cx<T>>, p: &Array2<Cx<T>>) -> T {
    let mut s = Cx::zero();
    for ((k, l), &z) in m.indexed_iter() {
        s += z * p[[l, k]];
    }
    s.re
}

fn wigner_scale<T: Real>(modes: i32) -> T {
    (T::lit(2.0) / T::PI()).powi(modes)
}

/// Joint Wigner function
/// `W(β, χ) = (4/π²) Tr[ρ D_a(β)Π_a D_a†(β) ⊗ D_b(χ)Π_b D_b†(χ)]`.
pub fn wigner_joint<T: Real>(rho: &DensityMatrix<T>, beta: Cx<T>, chi: Cx<T>) -> Result<T> {
    let (da, db) = two_mode_vib(rho)?;
    check_truncation(0, da, beta)?;
    check_truncation(1, db, chi)?;
    let m = contract_first(rho.matrix(), &displaced_parity(da, beta), da, db);
    Ok(wigner_scale::<T>(2) * contract_second(&m, &displaced_parity(db, chi)))
}

/// Wigner function at the phase-space origin for any number of modes:
/// `(2/π)^m ⟨Π⟩`.
pub fn wigner_origin<T: Real>(rho: &DensityMatrix<T>) -> T {
    let s = rho.space();
    let m = rho.matrix();
    let parity: T = (0..s.total_dim())
        .map(|i| if s.is_even(i) { m[[i, i]].re } else { -m[[i, i]].re })
        .sum();
    wigner_scale::<T>(s.mode_count() as i32) * parity
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WignerMeta {
    /// Free-form description of where the state came from.
    pub provenance: String,
    /// Cat amplitude the grid is meant to be compared with.
    pub alpha_reference: Option<f64>,
}

/// `W(i·y1, i·y2)` on a square grid; `values[[r, c]]` is at `(axis1[r], axis2[c])`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid<T> {
    pub axis1: Vec<T>,
    pub axis2: Vec<T>,
    pub values: Array2<T>,
    pub meta: WignerMeta,
}

impl<T: Real> WignerGrid<T> {
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    /// Largest absolute difference to another grid on the same axes.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.values.dim() != other.values.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .fold(T::zero(), |a, (&x, &y)| a.max((x - y).abs())))
    }

    /// Checks `|W| ≤ 4/π² + slack`.
    pub fn within_bound(&self, slack: T) -> bool {
        self.max_abs() <= wigner_scale::<T>(2) + slack
    }
}

/// Evenly spaced points over `[lo, hi]`, ascending.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * T::from_usize(k).unwrap() / T::from_usize(n - 1).unwrap())
            .collect(),
    }
}

/// Plane cut `W(i·y1, i·y2)` for `y1, y2` on `n_points` values in `[lo, hi]`.
/// Displaced parities are computed once per axis value; rows run in parallel.
pub fn wigner_plane_cut<T: Real>(rho: &DensityMatrix<T>, lo: T, hi: T, n_points: usize) -> Result<WignerGrid<T>> {
    let (da, db) = two_mode_vib(rho)?;
    if !(lo <= hi) || n_points == 0 {
        return Err(Error::param("window", "need lo ≤ hi and at least one point"));
    }
    let ys = linspace(lo, hi, n_points);
    let edge = Cx::new(T::zero(), lo.abs().max(hi.abs()));
    check_truncation(0, da, edge)?;
    check_truncation(1, db, edge)?;
    let pb: Vec<Array2<Cx<T>>> = ys
        .par_iter()
        .map(|&y| displaced_parity(db, Cx::new(T::zero(), y)))
        .collect();
    let rows: Vec<Vec<T>> = ys
        .par_iter()
        .map(|&y1| {
            let m = contract_first(rho.matrix(), &displaced_parity(da, Cx::new(T::zero(), y1)), da, db);
            pb.iter().map(|p| wigner_scale::<T>(2) * contract_second(&m, p)).collect()
        })
        .collect();
    let mut values = Array2::zeros((n_points, n_points));
    for (r, row) in rows.into_iter().enumerate() {
        for (c, w) in row.into_iter().enumerate() {
            values[[r, c]] = w;
        }
    }
    Ok(WignerGrid {
        axis1: ys.clone(),
        axis2: ys,
        values,
        meta: WignerMeta::default(),
    })
}

/// `⟨γ|δ⟩` for coherent states.
fn coherent_overlap<T: Real>(g: Cx<T>, d: Cx<T>) -> Cx<T> {
    let re = -(g.norm_sqr() + d.norm_sqr()) / T::lit(2.0);
    (g.conj() * d + Cx::new(re, T::zero())).exp()
}

/// Analytic joint Wigner function of `Σ_k c_k |α_k⟩|α'_k⟩` (infinite Fock
/// space), via `D(β)ΠD†(β)|α⟩ = e^{−2i Im(βα*)}|2β − α⟩`.
pub fn coherent_superposition_wigner<T: Real>(terms: &[(Cx<T>, Cx<T>, Cx<T>)], beta: Cx<T>, chi: Cx<T>) -> T {
    let two = T::lit(2.0);
    // ⟨γ|D(x)ΠD†(x)|δ⟩
    let pmat = |gamma: Cx<T>, delta: Cx<T>, x: Cx<T>| -> Cx<T> {
        let phase = Cx::new(T::zero(), -two * (x * delta.conj()).im).exp();
        let moved = x * two - delta;
        phase * coherent_overlap(gamma, moved)
    };
    let overlap = coherent_overlap::<T>;
    let mut num: Cx<T> = Cx::zero();
    let mut norm: Cx<T> = Cx::zero();
    for &(ck, ak, bk) in terms {
        for &(cl, al, bl) in terms {
            let w = cl.conj() * ck;
            num += w * pmat(al, ak, beta) * pmat(bl, bk, chi);
            norm += w * overlap(al, ak) * overlap(bl, bk);
        }
    }
    wigner_scale::<T>(2) * (num / norm).re
}

impl<T: Real> WignerGrid<T> {
    /// Grid of the analytic two-mode cat `𝒩(|α,α⟩ ± |−α,−α⟩)`.
    pub fn analytic_cat(alpha: T, even: bool, lo: T, hi: T, n_points: usize) -> Self {
        let ys = linspace(lo, hi, n_points);
        let a = Cx::new(alpha, T::zero());
        let sign = if even { T::one() } else { -T::one() };
        let terms = [(Cx::one(), a, a), (Cx::new(sign, T::zero()), -a, -a)];
        let values = Array2::from_shape_fn((n_points, n_points), |(r, c)| {
            coherent_superposition_wigner(&terms, Cx::new(T::zero(), ys[r]), Cx::new(T::zero(), ys[c]))
        });
        WignerGrid {
            axis1: ys.clone(),
            axis2: ys,
            values,
            meta: WignerMeta {
                provenance: format!("analytic {} cat", if even { "even" } else { "odd" }),
                alpha_reference: Some(alpha.to_f64_lossy()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_core::{cat_state, coherent_state, Level, Parity};
    use crate::scalar::creal;

    fn vib2(d: usize) -> HilbertSpace {
        HilbertSpace::vibrational(&[d, d]).unwrap()
    }

    const W0: f64 = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);

    #[test]
    fn internal_trace_of_product_state() {
        let s = HilbertSpace::new(&[3, 3]).unwrap();
        let psi = StateVector::<f64>::fock(&s, Level::G, &[1, 2]).unwrap();
        let r = partial_trace_internal(&psi.to_density());
        let want = StateVector::fock(&s.vibrational_part(), Level::G, &[1, 2]).unwrap().to_density();
        assert!(crate::dense::max_abs(&(r.matrix() - want.matrix())) < 1e-15);
    }

    #[test]
    fn internal_trace_of_bell_state_is_mixed() {
        let s = HilbertSpace::new(&[2]).unwrap();
        let mut amps = vec![Cx::zero(); 4];
        amps[s.index(0, &[0])] = Cx::one();
        amps[s.index(1, &[1])] = Cx::one();
        let psi = StateVector::<f64>::from_amplitudes(&s, amps).unwrap();
        let r = partial_trace_internal(&psi.to_density());
        assert!((r.purity() - 0.5).abs() < 1e-14);
        assert!((r.trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn vacuum_fidelity_to_even_cat() {
        let s = vib2(22);
        let cat = cat_state(&s, creal(2.0f64), Parity::Even).unwrap();
        let f = fidelity_pure(&StateVector::vacuum(&s).to_density(), &cat).unwrap();
        let n = crate::operator_core::cat_normalization(creal(2.0f64), 2, Parity::Even);
        let want = (2.0 * n * (-4.0f64).exp()).powi(2);
        assert!((f - want).abs() < 1e-12);
        assert!((f - 6.709e-4).abs() < 1e-6);
        let odd = cat_state(&s, creal(2.0f64), Parity::Odd).unwrap();
        assert!(fidelity_pure(&odd.to_density(), &cat).unwrap().abs() < 1e-12);
        assert!((fidelity_pure(&cat.to_density(), &cat.with_phase(0.7)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_and_cat_origin_values() {
        let s = vib2(22);
        let vac = StateVector::<f64>::vacuum(&s).to_density();
        assert!((wigner_joint(&vac, Cx::zero(), Cx::zero()).unwrap() - W0).abs() < 1e-12);
        for (p, sign) in [(Parity::Even, 1.0), (Parity::Odd, -1.0)] {
            let cat = cat_state(&s, creal(2.0f64), p).unwrap().to_density();
            let w = wigner_joint(&cat, Cx::zero(), Cx::zero()).unwrap();
            assert!((w - sign * W0).abs() < 1e-10);
            assert!((wigner_origin(&cat) - w).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_product_is_gaussian() {
        let s = vib2(24);
        let a = creal(2.0f64);
        let rho = coherent_state(&s, &[a, a], Level::G).unwrap().to_density();
        for (b, c) in [(a, a), (creal(1.5), Cx::new(2.0, 0.5)), (Cx::new(0.0, 0.4), creal(2.3))] {
            let want = W0 * (-2.0 * (b - a).norm_sqr()).exp() * (-2.0 * (c - a).norm_sqr()).exp();
            let w = wigner_joint(&rho, b, c).unwrap();
            assert!((w - want).abs() < 1e-8, "{b} {c}: {w} vs {want}");
        }
    }

    #[test]
    fn cat_matches_analytic_oracle_on_both_cuts() {
        // at dim 24 the window edge is truncation-limited at ~1e-7
        let s = vib2(30);
        for even in [true, false] {
            let p = if even { Parity::Even } else { Parity::Odd };
            let rho = cat_state(&s, creal(2.0f64), p).unwrap().to_density();
            let grid = wigner_plane_cut(&rho, -1.5, 1.5, 13).unwrap();
            let oracle = WignerGrid::analytic_cat(2.0, even, -1.5, 1.5, 13);
            let d = grid.max_abs_diff(&oracle).unwrap();
            assert!(d < 1e-8, "{d}");
        }
    }

    #[test]
    fn cat_fringes() {
        // single-axis cut: W(iy, 0) ∝ e^{-2y²}(… + cos 8y); diagonal: cos 16y
        let a = creal(2.0f64);
        let terms = [(Cx::one(), a, a), (Cx::one(), -a, -a)];
        let pi = std::f64::consts::PI;
        let axis = |y: f64| coherent_superposition_wigner(&terms, Cx::new(0.0, y), Cx::zero());
        let diag = |y: f64| coherent_superposition_wigner(&terms, Cx::new(0.0, y), Cx::new(0.0, y));
        // the non-interfering lobes contribute ~e^{-16} at these points
        assert!(axis(pi / 16.0).abs() < 1e-6);
        assert!(diag(pi / 32.0).abs() < 1e-6);
        assert!(axis(0.0) > 0.99 * W0 && diag(0.0) > 0.99 * W0);
        assert!(diag(pi / 16.0) < 0.0);
        let s = vib2(24);
        let rho = cat_state(&s, a, Parity::Even).unwrap().to_density();
        let w = wigner_joint(&rho, Cx::new(0.0, pi / 16.0), Cx::zero()).unwrap();
        assert!(w.abs() < 1e-6);
        // odd cat flips the interference sign
        let odd = cat_state(&s, a, Parity::Odd).unwrap().to_density();
        let we = wigner_joint(&rho, Cx::new(0.0, 0.05), Cx::new(0.0, 0.05)).unwrap();
        let wo = wigner_joint(&odd, Cx::new(0.0, 0.05), Cx::new(0.0, 0.05)).unwrap();
        assert!(we > 0.0 && wo < 0.0);
    }

    #[test]
    fn grid_symmetry_and_bound() {
        let s = vib2(22);
        let rho = cat_state(&s, creal(2.0f64), Parity::Odd).unwrap().to_density();
        let g = wigner_plane_cut(&rho, -1.5, 1.5, 21).unwrap();
        let n = 21;
        for r in 0..n {
            for c in 0..n {
                assert!((g.values[[r, c]] - g.values[[n - 1 - r, n - 1 - c]]).abs() < 1e-8);
            }
        }
        assert!(g.within_bound(1e-6));
        assert_eq!(g.axis1[0], -1.5);
        assert_eq!(g.axis1[20], 1.5);
    }

    #[test]
    fn wigner_is_linear() {
        let s = vib2(12);
        let r1 = cat_state(&s, creal(1.0f64), Parity::Even).unwrap().to_density();
        let r2 = coherent_state(&s, &[creal(0.5), Cx::new(0.0, 0.8)], Level::G).unwrap().to_density();
        let mix = r1.mix(&r2, 0.3).unwrap();
        let (b, c) = (Cx::new(0.2, -0.4), Cx::new(-0.3, 0.1));
        let lhs = wigner_joint(&mix, b, c).unwrap();
        let rhs = 0.3 * wigner_joint(&r1, b, c).unwrap() + 0.7 * wigner_joint(&r2, b, c).unwrap();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn truncation_guard_and_shape_errors() {
        let s = vib2(8);
        let vac = StateVector::<f64>::vacuum(&s).to_density();
        assert!(matches!(wigner_joint(&vac, creal(1.5), Cx::zero()), Err(Error::Truncation { .. })));
        let full = StateVector::<f64>::vacuum(&HilbertSpace::new(&[4, 4]).unwrap()).to_density();
        assert!(wigner_joint(&full, Cx::zero(), Cx::zero()).is_err());
    }

    #[test]
    fn mode_trace_of_three_mode_product() {
        let s = HilbertSpace::vibrational(&[3, 4, 2]).unwrap();
        let psi = StateVector::<f64>::fock(&s, Level::G, &[2, 1, 1]).unwrap();
        let r = partial_trace_mode(&psi.to_density(), 1).unwrap();
        assert_eq!(r.space().mode_dims(), &[3, 2]);
        let want = StateVector::fock(r.space(), Level::G, &[2, 1]).unwrap().to_density();
        assert!(crate::dense::max_abs(&(r.matrix() - want.matrix())) < 1e-15);
        assert!(partial_trace_mode(&psi.to_density(), 3).is_err());
    }
}
