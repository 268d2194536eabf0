use std::ops::{Add, Mul, Neg, Sub};

use ndarray::Array2;
use num_traits::{One, Zero};

use super::space::HilbertSpace;
use crate::dense;
use crate::error::{Error, Result};
use crate::scalar::{creal, Cx, Real};
use crate::sparse::CsrMatrix;

/// Electronic operator selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InternalOp {
    Raise,
    Lower,
    Inversion,
}

/// Complex operator on a [`HilbertSpace`], stored sparse.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix<T> {
    space: HilbertSpace,
    mat: CsrMatrix<T>,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn from_csr(space: &HilbertSpace, mat: CsrMatrix<T>) -> Result<Self> {
        let n = space.total_dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(Self {
            space: space.clone(),
            mat,
        })
    }

    pub fn from_dense(space: &HilbertSpace, m: &Array2<Cx<T>>) -> Result<Self> {
        Self::from_csr(space, CsrMatrix::from_dense(m))
    }

    pub fn zeros(space: &HilbertSpace) -> Self {
        let n = space.total_dim();
        Self {
            space: space.clone(),
            mat: CsrMatrix::zeros(n, n),
        }
    }

    pub fn identity(space: &HilbertSpace) -> Self {
        Self {
            space: space.clone(),
            mat: CsrMatrix::identity(space.total_dim()),
        }
    }

    /// Kronecker product of per-factor operators; `None` stands for identity.
    /// `internal` is ignored on spaces without an internal factor.
    pub fn tensor_product(
        space: &HilbertSpace,
        internal: Option<&CsrMatrix<T>>,
        modes: &[Option<&CsrMatrix<T>>],
    ) -> Result<Self> {
        if modes.len() != space.mode_count() {
            return Err(Error::DimensionMismatch {
                expected: space.mode_count(),
                found: modes.len(),
            });
        }
        let mut acc = if space.has_internal() {
            match internal {
                Some(m) => {
                    check_square(m, 2)?;
                    m.clone()
                }
                None => CsrMatrix::identity(2),
            }
        } else {
            CsrMatrix::identity(1)
        };
        for (factor, &d) in modes.iter().zip(space.mode_dims()) {
            let f = match factor {
                Some(m) => {
                    check_square(m, d)?;
                    (*m).clone()
                }
                None => CsrMatrix::identity(d),
            };
            acc = acc.kron(&f);
        }
        Self::from_csr(space, acc)
    }

    /// Embeds a single-mode operator on `mode`, identity elsewhere.
    pub fn embed_mode(space: &HilbertSpace, mode: usize, local: &CsrMatrix<T>) -> Result<Self> {
        space.check_mode(mode)?;
        let mut factors: Vec<Option<&CsrMatrix<T>>> = vec![None; space.mode_count()];
        factors[mode] = Some(local);
        Self::tensor_product(space, None, &factors)
    }

    /// Embeds a 2×2 electronic operator, identity on the modes.
    pub fn embed_internal(space: &HilbertSpace, local: &CsrMatrix<T>) -> Result<Self> {
        if !space.has_internal() {
            return Err(Error::Unsupported("space has no internal factor".into()));
        }
        Self::tensor_product(space, Some(local), &vec![None; space.mode_count()])
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn csr(&self) -> &CsrMatrix<T> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn get(&self, i: usize, j: usize) -> Cx<T> {
        self.mat.get(i, j)
    }

    pub fn to_dense(&self) -> Array2<Cx<T>> {
        self.mat.to_dense()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            mat: self.mat.adjoint(),
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space.clone(),
            mat: self.mat.matmul(&other.mat),
        })
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space.clone(),
            mat: self.mat.add(&other.mat),
        })
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            space: self.space.clone(),
            mat: self.mat.sub(&other.mat),
        })
    }

    pub fn scale(&self, s: Cx<T>) -> Self {
        Self {
            space: self.space.clone(),
            mat: self.mat.scale(s),
        }
    }

    pub fn scale_re(&self, s: T) -> Self {
        self.scale(creal(s))
    }

    /// `[A, B] = AB − BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.minus(&other.matmul(self)?)
    }

    pub fn max_abs(&self) -> T {
        self.mat.max_abs()
    }

    /// Entrywise max-norm distance.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same(other)?;
        Ok(self.mat.max_abs_diff(&other.mat))
    }

    /// `max |A − A†|`.
    pub fn hermiticity_error(&self) -> T {
        self.mat.max_abs_diff(&self.mat.adjoint())
    }

    pub fn apply(&self, x: &[Cx<T>]) -> Vec<Cx<T>> {
        self.mat.mul_vec(x)
    }
}

fn check_square<T: Real>(m: &CsrMatrix<T>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.nrows(),
        });
    }
    Ok(())
}

impl<'a, T: Real> Add<&'a OperatorMatrix<T>> for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn add(self, rhs: Self) -> OperatorMatrix<T> {
        self.plus(rhs).expect("operator spaces differ")
    }
}

impl<'a, T: Real> Sub<&'a OperatorMatrix<T>> for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn sub(self, rhs: Self) -> OperatorMatrix<T> {
        self.minus(rhs).expect("operator spaces differ")
    }
}

impl<'a, T: Real> Mul<&'a OperatorMatrix<T>> for &'a OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn mul(self, rhs: Self) -> OperatorMatrix<T> {
        self.matmul(rhs).expect("operator spaces differ")
    }
}

impl<T: Real> Neg for &OperatorMatrix<T> {
    type Output = OperatorMatrix<T>;
    fn neg(self) -> OperatorMatrix<T> {
        self.scale_re(-T::one())
    }
}

/// Single-mode lowering operator on `dim` Fock levels.
pub fn lowering<T: Real>(dim: usize) -> CsrMatrix<T> {
    let trip = (1..dim)
        .map(|n| (n - 1, n, creal(T::from_usize(n).unwrap().sqrt())))
        .collect();
    CsrMatrix::from_triplets(dim, dim, trip)
}

/// Single-mode number operator.
pub fn number<T: Real>(dim: usize) -> CsrMatrix<T> {
    let diag: Vec<_> = (0..dim).map(|n| creal(T::from_usize(n).unwrap())).collect();
    CsrMatrix::from_diagonal(&diag)
}

/// Single-mode parity `(−1)^n`.
pub fn parity<T: Real>(dim: usize) -> CsrMatrix<T> {
    let diag: Vec<_> = (0..dim)
        .map(|n| if n % 2 == 0 { Cx::one() } else { -Cx::<T>::one() })
        .collect();
    CsrMatrix::from_diagonal(&diag)
}

/// Lowering operator `a` on the indexed mode.
pub fn annihilation<T: Real>(space: &HilbertSpace, mode: usize) -> Result<OperatorMatrix<T>> {
    space.check_mode(mode)?;
    OperatorMatrix::embed_mode(space, mode, &lowering(space.mode_dims()[mode]))
}

/// Raising operator `a†` on the indexed mode.
pub fn creation<T: Real>(space: &HilbertSpace, mode: usize) -> Result<OperatorMatrix<T>> {
    Ok(annihilation(space, mode)?.adjoint())
}

/// `a†a` on the indexed mode.
pub fn number_op<T: Real>(space: &HilbertSpace, mode: usize) -> Result<OperatorMatrix<T>> {
    space.check_mode(mode)?;
    OperatorMatrix::embed_mode(space, mode, &number(space.mode_dims()[mode]))
}

/// `S⁺ = |e⟩⟨g|`, `S⁻ = |g⟩⟨e|`, `S_z = (|e⟩⟨e| − |g⟩⟨g|)/2`.
pub fn internal_op<T: Real>(space: &HilbertSpace, which: InternalOp) -> Result<OperatorMatrix<T>> {
    let half = T::lit(0.5);
    let local = match which {
        InternalOp::Raise => CsrMatrix::from_triplets(2, 2, vec![(1, 0, Cx::one())]),
        InternalOp::Lower => CsrMatrix::from_triplets(2, 2, vec![(0, 1, Cx::one())]),
        InternalOp::Inversion => CsrMatrix::from_diagonal(&[creal(-half), creal(half)]),
    };
    OperatorMatrix::embed_internal(space, &local)
}

/// Total phonon parity `(−1)^{Σ n_m}`, identity on the internal factor.
pub fn total_parity<T: Real>(space: &HilbertSpace) -> OperatorMatrix<T> {
    let diag: Vec<Cx<T>> = (0..space.total_dim())
        .map(|i| if space.is_even(i) { Cx::one() } else { -Cx::<T>::one() })
        .collect();
    OperatorMatrix {
        space: space.clone(),
        mat: CsrMatrix::from_diagonal(&diag),
    }
}

/// Guard shared by coherent states and displacements: `|α|² ≤ dim/4`, with
/// a few ulps of slack so that amplitudes such as `√8` at dim 32 pass.
pub fn check_truncation<T: Real>(mode: usize, dim: usize, amplitude: Cx<T>) -> Result<()> {
    let a2 = amplitude.norm_sqr().to_f64_lossy();
    let limit = dim as f64 / 4.0;
    let slack = 8.0 * T::epsilon().to_f64_lossy() * limit;
    if a2 > limit + slack {
        return Err(Error::Truncation {
            mode,
            amplitude_sq: a2,
            limit,
        });
    }
    Ok(())
}

/// Extra Fock levels used when exponentiating a displacement generator, so that
/// the retained block is free of cutoff artefacts.
fn displacement_padding<T: Real>(beta: Cx<T>) -> usize {
    let b = beta.norm().to_f64_lossy();
    (4.0 * b * b + 8.0 * b).ceil() as usize + 16
}

/// Dense single-mode displacement `exp(β a† − β* a)` on `dim` levels.
///
/// The generator is exponentiated on an enlarged space and the leading
/// `dim × dim` block retained.
pub fn displacement_matrix<T: Real>(dim: usize, beta: Cx<T>) -> Array2<Cx<T>> {
    if beta.is_zero() {
        return dense::identity(dim);
    }
    let big = dim + displacement_padding(beta);
    let a = lowering::<T>(big).to_dense();
    let gen = dense::adjoint(&a).mapv(|z| z * beta) - a.mapv(|z| z * beta.conj());
    let d = dense::expm(&gen);
    d.slice(ndarray::s![..dim, ..dim]).to_owned()
}

/// Displacement operator on the indexed mode.
pub fn displacement<T: Real>(space: &HilbertSpace, mode: usize, beta: Cx<T>) -> Result<OperatorMatrix<T>> {
    space.check_mode(mode)?;
    let dim = space.mode_dims()[mode];
    check_truncation(mode, dim, beta)?;
    let local = CsrMatrix::from_dense(&displacement_matrix(dim, beta));
    OperatorMatrix::embed_mode(space, mode, &local)
}

/// Dense single-mode displaced parity `D(β) (−1)^{a†a} D(β)†` on `dim` levels.
pub fn displaced_parity<T: Real>(dim: usize, beta: Cx<T>) -> Array2<Cx<T>> {
    if beta.is_zero() {
        return parity::<T>(dim).to_dense();
    }
    let big = dim + displacement_padding(beta);
    let a = lowering::<T>(big).to_dense();
    let gen = dense::adjoint(&a).mapv(|z| z * beta) - a.mapv(|z| z * beta.conj());
    let d = dense::expm(&gen);
    let mut dp = d.clone();
    for ((_, j), z) in dp.indexed_iter_mut() {
        if j % 2 == 1 {
            *z = -*z;
        }
    }
    let full = dp.dot(&dense::adjoint(&d));
    full.slice(ndarray::s![..dim, ..dim]).to_owned()
}
