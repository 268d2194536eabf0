use ndarray::Array2;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::operator::{check_truncation, OperatorMatrix};
use super::space::{HilbertSpace, Level};
use crate::dense;
use crate::error::{Error, Result};
use crate::scalar::{creal, Cx, Real};

/// Sign of a cat superposition, equivalently its total phonon parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parity {
    #[serde(rename = "+")]
    Even,
    #[serde(rename = "-")]
    Odd,
}

impl Parity {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Parity::Even => T::one(),
            Parity::Odd => -T::one(),
        }
    }

    pub fn of_phonons(n: usize) -> Self {
        if n % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Normalized ket on a [`HilbertSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    space: HilbertSpace,
    amps: Vec<Cx<T>>,
}

impl<T: Real> StateVector<T> {
    /// Normalizes `amps`; fails on the zero vector.
    pub fn from_amplitudes(space: &HilbertSpace, amps: Vec<Cx<T>>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: space.total_dim(),
                found: amps.len(),
            });
        }
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::epsilon()) {
            return Err(Error::ZeroState);
        }
        Ok(Self {
            space: space.clone(),
            amps: amps.into_iter().map(|z| z / norm).collect(),
        })
    }

    /// Fock basis ket `|level⟩|n_0, n_1, …⟩`. `level` is ignored on
    /// vibrational-only spaces.
    pub fn fock(space: &HilbertSpace, level: Level, occupations: &[usize]) -> Result<Self> {
        if occupations.len() != space.mode_count() {
            return Err(Error::DimensionMismatch {
                expected: space.mode_count(),
                found: occupations.len(),
            });
        }
        for (m, (&n, &d)) in occupations.iter().zip(space.mode_dims()).enumerate() {
            if n >= d {
                return Err(Error::param(
                    format!("occupation[{m}]"),
                    format!("{n} is outside the truncation (dim {d})"),
                ));
            }
        }
        let lvl = if space.has_internal() { level.index() } else { 0 };
        let mut amps = vec![Cx::zero(); space.total_dim()];
        amps[space.index(lvl, occupations)] = Cx::one();
        Ok(Self {
            space: space.clone(),
            amps,
        })
    }

    pub fn vacuum(space: &HilbertSpace) -> Self {
        Self::fock(space, Level::G, &vec![0; space.mode_count()]).expect("vacuum is always representable")
    }

    /// Product of per-mode vibrational kets (each of length `mode_dims[m]`)
    /// with the internal level.
    pub fn product(space: &HilbertSpace, level: Level, factors: &[Vec<Cx<T>>]) -> Result<Self> {
        if factors.len() != space.mode_count() {
            return Err(Error::DimensionMismatch {
                expected: space.mode_count(),
                found: factors.len(),
            });
        }
        let mut vib: Vec<Cx<T>> = vec![Cx::one()];
        for (f, &d) in factors.iter().zip(space.mode_dims()) {
            if f.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: f.len(),
                });
            }
            vib = vib
                .iter()
                .flat_map(|&x| f.iter().map(move |&y| x * y))
                .collect();
        }
        let mut amps = vec![Cx::zero(); space.total_dim()];
        let off = if space.has_internal() {
            level.index() * space.vib_dim()
        } else {
            0
        };
        amps[off..off + vib.len()].copy_from_slice(&vib);
        Self::from_amplitudes(space, amps)
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Cx<T>] {
        &self.amps
    }

    pub fn norm(&self) -> T {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Result<Cx<T>> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: other.space.total_dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .fold(Cx::zero(), |acc, (a, b)| acc + a.conj() * b))
    }

    /// Unnormalized `O|ψ⟩`.
    pub fn apply(&self, op: &OperatorMatrix<T>) -> Result<Vec<Cx<T>>> {
        if op.space() != &self.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: op.dim(),
            });
        }
        Ok(op.apply(&self.amps))
    }

    /// `⟨ψ|O|ψ⟩`.
    pub fn expect(&self, op: &OperatorMatrix<T>) -> Result<Cx<T>> {
        let v = self.apply(op)?;
        Ok(self
            .amps
            .iter()
            .zip(&v)
            .fold(Cx::zero(), |acc, (a, b)| acc + a.conj() * b))
    }

    /// Multiplies by a global phase.
    pub fn with_phase(&self, phase: T) -> Self {
        let p = Cx::from_polar(T::one(), phase);
        Self {
            space: self.space.clone(),
            amps: self.amps.iter().map(|&z| z * p).collect(),
        }
    }

    /// Embeds a vibrational-only ket into `space` with the given internal level.
    pub fn with_internal(&self, space: &HilbertSpace, level: Level) -> Result<Self> {
        if self.space.has_internal() || space.vibrational_part() != self.space {
            return Err(Error::DimensionMismatch {
                expected: space.vib_dim(),
                found: self.space.total_dim(),
            });
        }
        let mut amps = vec![Cx::zero(); space.total_dim()];
        let off = if space.has_internal() {
            level.index() * space.vib_dim()
        } else {
            0
        };
        amps[off..off + self.amps.len()].copy_from_slice(&self.amps);
        Ok(Self {
            space: space.clone(),
            amps,
        })
    }

    pub fn to_density(&self) -> DensityMatrix<T> {
        let n = self.amps.len();
        let mat = Array2::from_shape_fn((n, n), |(i, j)| self.amps[i] * self.amps[j].conj());
        DensityMatrix {
            space: self.space.clone(),
            mat,
        }
    }
}

/// Truncated single-mode coherent amplitudes `e^{−|α|²/2} αⁿ/√n!`,
/// not renormalized.
pub fn coherent_amplitudes<T: Real>(dim: usize, alpha: Cx<T>) -> Vec<Cx<T>> {
    let mut out = Vec::with_capacity(dim);
    let mut c = creal((-alpha.norm_sqr() / T::lit(2.0)).exp());
    for n in 0..dim {
        out.push(c);
        c = c * alpha / T::from_usize(n + 1).unwrap().sqrt();
    }
    out
}

fn renormalized<T: Real>(v: Vec<Cx<T>>) -> Vec<Cx<T>> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Product coherent state `|α_0⟩|α_1⟩…` with the internal factor in `level`.
/// Each factor is renormalized after truncation.
pub fn coherent_state<T: Real>(space: &HilbertSpace, amplitudes: &[Cx<T>], level: Level) -> Result<StateVector<T>> {
    if amplitudes.len() != space.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: space.mode_count(),
            found: amplitudes.len(),
        });
    }
    let mut factors = Vec::with_capacity(amplitudes.len());
    for (m, (&a, &d)) in amplitudes.iter().zip(space.mode_dims()).enumerate() {
        check_truncation(m, d, a)?;
        factors.push(renormalized(coherent_amplitudes(d, a)));
    }
    StateVector::product(space, level, &factors)
}

/// Closed-form cat normalization `(2 ± 2e^{−2m|α|²})^{−1/2}` for `m` modes.
pub fn cat_normalization<T: Real>(alpha: Cx<T>, modes: usize, parity: Parity) -> T {
    let overlap = (-T::lit(2.0) * T::from_usize(modes).unwrap() * alpha.norm_sqr()).exp();
    (T::lit(2.0) + parity.sign::<T>() * T::lit(2.0) * overlap).sqrt().recip()
}

/// Multi-mode cat `𝒩(|α⟩^{⊗m} ± |−α⟩^{⊗m})`, internal factor `|g⟩`.
pub fn cat_state<T: Real>(space: &HilbertSpace, alpha: Cx<T>, parity: Parity) -> Result<StateVector<T>> {
    let m = space.mode_count();
    if m == 0 {
        return Err(Error::param("space", "cat state needs at least one mode"));
    }
    if parity == Parity::Odd && alpha.is_zero() {
        return Err(Error::ZeroState);
    }
    let plus = coherent_state(space, &vec![alpha; m], Level::G)?;
    let minus = coherent_state(space, &vec![-alpha; m], Level::G)?;
    let s = parity.sign::<T>();
    let amps = plus
        .amps
        .iter()
        .zip(&minus.amps)
        .map(|(&p, &q)| p + q * s)
        .collect();
    StateVector::from_amplitudes(space, amps)
}

/// Density operator: Hermitian, unit trace, positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    space: HilbertSpace,
    mat: Array2<Cx<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity (1e−10), trace (1e−8) and positivity (−1e−8).
    pub fn new(space: &HilbertSpace, mat: Array2<Cx<T>>) -> Result<Self> {
        let rho = Self::from_raw(space, mat)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix after a shape check only.
    pub fn from_raw(space: &HilbertSpace, mat: Array2<Cx<T>>) -> Result<Self> {
        let n = space.total_dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mat.nrows(),
            });
        }
        Ok(Self {
            space: space.clone(),
            mat,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > T::tol(1e-10) {
            return Err(Error::param("density", format!("not Hermitian (error {herm})")));
        }
        let tr = self.trace().re;
        if (tr - T::one()).abs() > T::tol(1e-8) {
            return Err(Error::param("density", format!("trace {tr} differs from 1")));
        }
        if !dense::is_positive_above(&self.mat, T::tol(1e-8)) {
            return Err(Error::param("density", "has a negative eigenvalue below -1e-8"));
        }
        Ok(())
    }

    /// Maximally mixed state.
    pub fn mixed(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        let w = creal(T::from_usize(n).unwrap().recip());
        Self {
            space: space.clone(),
            mat: Array2::from_diag_elem(n, w),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<Cx<T>> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<Cx<T>> {
        self.mat
    }

    pub fn trace(&self) -> Cx<T> {
        self.mat.diag().iter().fold(Cx::zero(), |a, &b| a + b)
    }

    pub fn hermiticity_error(&self) -> T {
        let n = self.mat.nrows();
        let mut err = T::zero();
        for i in 0..n {
            for j in i..n {
                err = err.max((self.mat[[i, j]] - self.mat[[j, i]].conj()).norm());
            }
        }
        err
    }

    /// `Tr(ρ O)`.
    pub fn expect(&self, op: &OperatorMatrix<T>) -> Result<Cx<T>> {
        if op.space() != &self.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: op.dim(),
            });
        }
        Ok(op
            .csr()
            .triplets()
            .fold(Cx::zero(), |acc, (i, j, v)| acc + v * self.mat[[j, i]]))
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> T {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Population of an internal level.
    pub fn level_population(&self, level: Level) -> T {
        if !self.space.has_internal() {
            return if level == Level::G { self.trace().re } else { T::zero() };
        }
        let v = self.space.vib_dim();
        let off = level.index() * v;
        (off..off + v).map(|i| self.mat[[i, i]].re).sum()
    }

    /// Replaces ρ by (ρ + ρ†)/2 and rescales to unit trace.
    pub fn hermitize_normalize(&mut self) {
        let n = self.mat.nrows();
        for i in 0..n {
            for j in i..n {
                let avg = (self.mat[[i, j]] + self.mat[[j, i]].conj()) / T::lit(2.0);
                self.mat[[i, j]] = avg;
                self.mat[[j, i]] = avg.conj();
            }
        }
        let tr = self.trace().re;
        self.mat.mapv_inplace(|z| z / tr);
    }

    /// Convex combination `w·self + (1 − w)·other`.
    pub fn mix(&self, other: &Self, w: T) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.space.total_dim(),
                found: other.space.total_dim(),
            });
        }
        let (a, b) = (creal(w), creal(T::one() - w));
        let mat = ndarray::Zip::from(&self.mat)
            .and(&other.mat)
            .map_collect(|&x, &y| x * a + y * b);
        Ok(Self {
            space: self.space.clone(),
            mat,
        })
    }
}
