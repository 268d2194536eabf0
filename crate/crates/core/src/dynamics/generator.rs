use ndarray::Array2;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::JumpOperator;
use crate::operator_core::{DensityMatrix, OperatorMatrix};
use crate::scalar::{creal, cunit, Cx, Real};
use crate::sparse::CsrMatrix;

const TILE: usize = 32;

/// `L` restricted to one source block.
enum JumpKernel<T> {
    /// At most one entry per row: `(LρL†)_{ij} = l_i l_j* ρ_{p_i p_j}`.
    /// Stored as (target row, source column, value).
    Monomial(Monomial<T>),
    /// Target-by-source sparse block.
    General(CsrMatrix<T>),
}

/// Struct-of-arrays form of a monomial jump block.
struct Monomial<T> {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Cx<T>>,
    conj: Vec<Cx<T>>,
}

struct JumpBlock<T> {
    source: usize,
    target: usize,
    kernel: JumpKernel<T>,
}

struct Block<T> {
    /// Global basis indices, ascending.
    basis: Vec<usize>,
    /// Offset of the block inside the flat state.
    offset: usize,
    h_eff: CsrMatrix<T>,
}

/// Prepared Lindblad generator acting on a block-diagonal density matrix.
///
/// Stores `H_eff = H − (i/2) Σ r L†L`, so that
/// `dρ/dt = −i(H_eff ρ − ρ H_eff†) + Σ r LρL†`. The state is kept as the
/// concatenation of row-major diagonal blocks; blocks that cannot be
/// populated from the initial state are dropped.
pub struct Generator<T> {
    dim: usize,
    h_eff: CsrMatrix<T>,
    blocks: Vec<Block<T>>,
    jumps: Vec<(T, Vec<JumpBlock<T>>)>,
    len: usize,
    max_block: usize,
}

fn effective_hamiltonian<T: Real>(h: &OperatorMatrix<T>, jumps: &[JumpOperator<T>]) -> Result<CsrMatrix<T>> {
    let mut h_eff = h.csr().clone();
    for j in jumps {
        if j.op.space() != h.space() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                found: j.op.dim(),
            });
        }
        if j.rate == T::zero() {
            continue;
        }
        let l = j.op.csr();
        let ldl = l.adjoint().matmul(l);
        h_eff = h_eff.add(&ldl.scale(cunit::<T>() * creal(-j.rate / T::lit(2.0))));
    }
    Ok(h_eff)
}

impl<T: Real> Generator<T> {
    /// Generator on the full (single-block) operator space.
    pub fn new(h: &OperatorMatrix<T>, jumps: &[JumpOperator<T>]) -> Result<Self> {
        let n = h.dim();
        Self::with_blocks(h, jumps, &[(0..n).collect()], None)
    }

    /// Generator on the block-diagonal operators defined by `partition`.
    ///
    /// `H_eff` must not couple different blocks and every jump operator must
    /// map each block into a single block. When `seed` is given (a density
    /// matrix), only blocks reachable from its populated blocks are kept and
    /// the seed must vanish off the block diagonal.
    pub fn with_blocks(
        h: &OperatorMatrix<T>,
        jumps: &[JumpOperator<T>],
        partition: &[Vec<usize>],
        seed: Option<&Array2<Cx<T>>>,
    ) -> Result<Self> {
        let n = h.dim();
        let h_eff = effective_hamiltonian(h, jumps)?;
        let mut owner = vec![usize::MAX; n];
        for (b, idx) in partition.iter().enumerate() {
            for &i in idx {
                if i >= n || owner[i] != usize::MAX {
                    return Err(Error::param("partition", "blocks must partition the basis"));
                }
                owner[i] = b;
            }
        }
        if owner.iter().any(|&o| o == usize::MAX) {
            return Err(Error::param("partition", "blocks must cover the basis"));
        }
        let mut local = vec![0usize; n];
        for idx in partition {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            for (k, &i) in sorted.iter().enumerate() {
                local[i] = k;
            }
        }
        for (k, i, _) in h_eff.triplets() {
            if owner[k] != owner[i] {
                return Err(Error::SectorLeak(format!(
                    "effective Hamiltonian couples basis states {i} and {k} in different blocks"
                )));
            }
        }
        // block map of each jump: source -> target
        let nb = partition.len();
        let mut maps = Vec::new();
        for j in jumps.iter().filter(|j| j.rate != T::zero()) {
            let mut map = vec![None; nb];
            for (k, i, _) in j.op.csr().triplets() {
                let slot = &mut map[owner[i]];
                match slot {
                    None => *slot = Some(owner[k]),
                    Some(t) if *t != owner[k] => {
                        return Err(Error::SectorLeak(format!(
                            "jump operator `{}` splits a block",
                            j.label
                        )))
                    }
                    _ => {}
                }
            }
            maps.push(map);
        }

        let mut active = vec![seed.is_none(); nb];
        if let Some(rho) = seed {
            for ((i, j), z) in rho.indexed_iter() {
                if z.is_zero() {
                    continue;
                }
                if owner[i] != owner[j] {
                    return Err(Error::SectorLeak(format!(
                        "initial state has a coherence between blocks at ({i}, {j})"
                    )));
                }
                active[owner[i]] = true;
            }
            loop {
                let mut changed = false;
                for map in &maps {
                    for s in 0..nb {
                        if let (true, Some(t)) = (active[s], map[s]) {
                            if !active[t] {
                                active[t] = true;
                                changed = true;
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
        }

        let mut block_of = vec![usize::MAX; nb];
        let mut blocks = Vec::new();
        let mut offset = 0;
        for (b, idx) in partition.iter().enumerate() {
            if !active[b] {
                continue;
            }
            let mut basis = idx.clone();
            basis.sort_unstable();
            let m = basis.len();
            let trip = basis
                .iter()
                .flat_map(|&gi| {
                    let (c, v) = h_eff.row(gi);
                    let li = local[gi];
                    let local = &local;
                    c.iter().zip(v).map(move |(&gk, &z)| (li, local[gk], z))
                })
                .collect();
            block_of[b] = blocks.len();
            blocks.push(Block {
                basis,
                offset,
                h_eff: CsrMatrix::from_triplets(m, m, trip),
            });
            offset += m * m;
        }

        let mut kernels = Vec::new();
        for (j, map) in jumps.iter().filter(|j| j.rate != T::zero()).zip(&maps) {
            let l = j.op.csr();
            let mut parts = Vec::new();
            for s in 0..nb {
                let Some(t) = map[s] else { continue };
                if !active[s] {
                    continue;
                }
                let (bs, bt) = (block_of[s], block_of[t]);
                let mut trip = Vec::new();
                for &gk in &blocks[bt].basis {
                    let (c, v) = l.row(gk);
                    for (&gi, &z) in c.iter().zip(v) {
                        if owner[gi] == s {
                            trip.push((local[gk], local[gi], z));
                        }
                    }
                }
                let mut rows = vec![0usize; blocks[bt].basis.len()];
                for &(k, _, _) in &trip {
                    rows[k] += 1;
                }
                let kernel = if rows.iter().all(|&r| r <= 1) {
                    JumpKernel::Monomial(Monomial {
                        rows: trip.iter().map(|e| e.0).collect(),
                        cols: trip.iter().map(|e| e.1).collect(),
                        vals: trip.iter().map(|e| e.2).collect(),
                        conj: trip.iter().map(|e| e.2.conj()).collect(),
                    })
                } else {
                    JumpKernel::General(CsrMatrix::from_triplets(
                        blocks[bt].basis.len(),
                        blocks[bs].basis.len(),
                        trip,
                    ))
                };
                parts.push(JumpBlock {
                    source: bs,
                    target: bt,
                    kernel,
                });
            }
            kernels.push((j.rate, parts));
        }

        let max_block = blocks.iter().map(|b| b.basis.len()).max().unwrap_or(0);
        Ok(Self {
            dim: n,
            h_eff,
            blocks,
            jumps: kernels,
            len: offset,
            max_block,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the flat block state.
    pub fn state_len(&self) -> usize {
        self.len
    }

    /// Scratch length required by [`Generator::apply`].
    pub fn scratch_len(&self) -> usize {
        self.max_block * self.max_block
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.basis.len()).collect()
    }

    /// Effective non-Hermitian Hamiltonian on the full space.
    pub fn h_eff(&self) -> &CsrMatrix<T> {
        &self.h_eff
    }

    /// Extracts the retained blocks of a full matrix.
    pub fn pack(&self, m: &Array2<Cx<T>>) -> Vec<Cx<T>> {
        let mut out = Vec::with_capacity(self.len);
        for b in &self.blocks {
            for &i in &b.basis {
                for &j in &b.basis {
                    out.push(m[[i, j]]);
                }
            }
        }
        out
    }

    /// Full matrix from a flat block state; dropped entries are zero.
    pub fn unpack(&self, y: &[Cx<T>]) -> Array2<Cx<T>> {
        let mut m = Array2::zeros((self.dim, self.dim));
        for b in &self.blocks {
            let k = b.basis.len();
            for (a, &i) in b.basis.iter().enumerate() {
                let row = &y[b.offset + a * k..b.offset + (a + 1) * k];
                for (&j, &z) in b.basis.iter().zip(row) {
                    m[[i, j]] = z;
                }
            }
        }
        m
    }

    /// The retained diagonal blocks as separate matrices.
    pub fn unpack_blocks(&self, y: &[Cx<T>]) -> Vec<Array2<Cx<T>>> {
        self.blocks
            .iter()
            .map(|b| {
                let k = b.basis.len();
                Array2::from_shape_vec((k, k), y[b.offset..b.offset + k * k].to_vec()).expect("square")
            })
            .collect()
    }

    /// Trace of a flat block state.
    pub fn trace(&self, y: &[Cx<T>]) -> Cx<T> {
        let mut t = Cx::zero();
        for b in &self.blocks {
            let k = b.basis.len();
            for a in 0..k {
                t += y[b.offset + a * k + a];
            }
        }
        t
    }

    /// Sum of column 2-norms, an upper bound on the trace norm.
    pub fn trace_norm_bound(&self, y: &[Cx<T>]) -> T {
        self.blocks
            .iter()
            .map(|b| {
                let k = b.basis.len();
                trace_norm_bound(&y[b.offset..b.offset + k * k], k)
            })
            .sum()
    }

    /// Writes `L(ρ)` into `out`; `scratch` must hold [`Generator::scratch_len`] entries.
    pub fn apply(&self, rho: &[Cx<T>], out: &mut [Cx<T>], scratch: &mut [Cx<T>]) {
        debug_assert_eq!(rho.len(), self.len);
        for b in &self.blocks {
            let m = b.basis.len();
            let r = &rho[b.offset..b.offset + m * m];
            let x = &mut scratch[..m * m];
            sparse_dense(&b.h_eff, r, x, m);
            // −iX + (−iX)†, tiled for locality
            let o = &mut out[b.offset..b.offset + m * m];
            for ib in (0..m).step_by(TILE) {
                for jb in (0..m).step_by(TILE) {
                    for i in ib..(ib + TILE).min(m) {
                        for j in jb..(jb + TILE).min(m) {
                            let a = x[i * m + j];
                            let c = x[j * m + i];
                            // −i(a − c*)
                            o[i * m + j] = Cx::new(a.im + c.im, c.re - a.re);
                        }
                    }
                }
            }
        }
        for (rate, parts) in &self.jumps {
            let rate = *rate;
            for part in parts {
                let src = &self.blocks[part.source];
                let tgt = &self.blocks[part.target];
                let (ms, mt) = (src.basis.len(), tgt.basis.len());
                let r = &rho[src.offset..src.offset + ms * ms];
                match &part.kernel {
                    JumpKernel::Monomial(m) => {
                        let mut gathered = vec![Cx::zero(); m.cols.len()];
                        for ((&i, &pi), &li) in m.rows.iter().zip(&m.cols).zip(&m.vals) {
                            let row = &r[pi * ms..(pi + 1) * ms];
                            let li = li * rate;
                            for ((g, &pj), &lj) in gathered.iter_mut().zip(&m.cols).zip(&m.conj) {
                                *g = lj * row[pj];
                            }
                            let o = &mut out[tgt.offset + i * mt..tgt.offset + (i + 1) * mt];
                            for (&j, &g) in m.rows.iter().zip(&gathered) {
                                o[j] += li * g;
                            }
                        }
                    }
                    JumpKernel::General(l) => {
                        // Y = L ρ (mt × ms), then out += r Y L†
                        let y = &mut scratch[..mt * ms];
                        sparse_dense(l, r, y, ms);
                        let o = &mut out[tgt.offset..tgt.offset + mt * mt];
                        for i in 0..mt {
                            for j in 0..mt {
                                let (cols, vals) = l.row(j);
                                let mut s = Cx::zero();
                                for (&k, &v) in cols.iter().zip(vals) {
                                    s += y[i * ms + k] * v.conj();
                                }
                                o[i * mt + j] += s * rate;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Allocating convenience wrapper around [`Generator::apply`] on full matrices.
    pub fn eval(&self, rho: &Array2<Cx<T>>) -> Array2<Cx<T>> {
        let y = self.pack(rho);
        let mut out = vec![Cx::zero(); self.len];
        let mut scratch = vec![Cx::zero(); self.scratch_len()];
        self.apply(&y, &mut out, &mut scratch);
        self.unpack(&out)
    }
}

/// `x = A r` with `r` row-major with `cols` columns.
fn sparse_dense<T: Real>(a: &CsrMatrix<T>, r: &[Cx<T>], x: &mut [Cx<T>], cols: usize) {
    for i in 0..a.nrows() {
        let xi = &mut x[i * cols..(i + 1) * cols];
        xi.iter_mut().for_each(|z| *z = Cx::zero());
        let (ks, vals) = a.row(i);
        for (&k, &v) in ks.iter().zip(vals) {
            let rk = &r[k * cols..(k + 1) * cols];
            for (xo, &z) in xi.iter_mut().zip(rk) {
                *xo += v * z;
            }
        }
    }
}

/// Right-hand side of the master equation,
/// `−i[H, ρ] + Σ (r/2)(2LρL† − L†Lρ − ρL†L)`.
pub fn lindblad_rhs<T: Real>(
    rho: &DensityMatrix<T>,
    h: &OperatorMatrix<T>,
    jumps: &[JumpOperator<T>],
) -> Result<Array2<Cx<T>>> {
    if rho.space() != h.space() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: rho.space().total_dim(),
        });
    }
    Ok(Generator::new(h, jumps)?.eval(rho.matrix()))
}

/// Upper bound on the trace norm of a square row-major matrix: the sum of its
/// column 2-norms.
pub fn trace_norm_bound<T: Real>(m: &[Cx<T>], n: usize) -> T {
    let mut cols = vec![T::zero(); n];
    for i in 0..n {
        for (c, z) in cols.iter_mut().zip(&m[i * n..(i + 1) * n]) {
            *c += z.norm_sqr();
        }
    }
    cols.into_iter().map(|c| c.sqrt()).sum()
}
