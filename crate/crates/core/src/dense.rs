//! Dense kernels: matrix exponential, rank-revealing LU null vectors,
//! Cholesky positivity test and Hermitian eigenvalues.

use ndarray::{Array1, Array2};
use num_traits::{One, Zero};

use crate::scalar::{Cx, Real};

pub fn identity<T: Real>(n: usize) -> Array2<Cx<T>> {
    Array2::from_diag_elem(n, Cx::one())
}

pub fn adjoint<T: Real>(m: &Array2<Cx<T>>) -> Array2<Cx<T>> {
    m.t().mapv(|z| z.conj())
}

/// Maximum absolute column sum.
pub fn norm1<T: Real>(m: &Array2<Cx<T>>) -> T {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<T>())
        .fold(T::zero(), |a, b| a.max(b))
}

pub fn max_abs<T: Real>(m: &Array2<Cx<T>>) -> T {
    m.iter().map(|z| z.norm()).fold(T::zero(), |a, b| a.max(b))
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm<T: Real>(a: &Array2<Cx<T>>) -> Array2<Cx<T>> {
    let n = a.nrows();
    let norm = norm1(a).to_f64_lossy();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = T::lit(0.5f64.powi(squarings));
    let scaled = a.mapv(|z| z * scale);

    let mut result = identity::<T>(n);
    let mut term = identity::<T>(n);
    let eps = T::epsilon();
    for k in 1..=40 {
        term = term.dot(&scaled).mapv(|z| z / T::from_usize(k).unwrap());
        result = result + &term;
        if max_abs(&term) <= eps * max_abs(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Outcome of a rank-revealing LU factorization.
#[derive(Debug)]
pub enum NullSpace<T> {
    /// Unique null vector (up to scale).
    Vector(Vec<Cx<T>>),
    /// Number of numerically vanishing pivots when it differs from one.
    Nullity(usize),
}

/// Finds the null vector of a square matrix by LU with complete pivoting.
/// Pivots below `rel_tol` times the first pivot count as zero.
pub fn null_vector<T: Real>(mut m: Array2<Cx<T>>, rel_tol: T) -> NullSpace<T> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut col_perm: Vec<usize> = (0..n).collect();
    let mut first_pivot = T::zero();
    let mut rank = n;

    for k in 0..n {
        let (mut pr, mut pc, mut best) = (k, k, T::zero());
        for i in k..n {
            let row = m.row(i);
            for j in k..n {
                let v = row[j].norm_sqr();
                if v > best {
                    best = v;
                    pr = i;
                    pc = j;
                }
            }
        }
        let piv_abs = best.sqrt();
        if k == 0 {
            first_pivot = piv_abs;
        }
        if piv_abs <= rel_tol * first_pivot || piv_abs == T::zero() {
            rank = k;
            break;
        }
        if pr != k {
            for j in 0..n {
                m.swap([k, j], [pr, j]);
            }
        }
        if pc != k {
            for i in 0..n {
                m.swap([i, k], [i, pc]);
            }
            col_perm.swap(k, pc);
        }
        let pivot = m[[k, k]];
        let (head, mut tail) = m.view_mut().split_at(ndarray::Axis(0), k + 1);
        let prow = head.row(k);
        for mut row in tail.rows_mut() {
            let f = row[k] / pivot;
            if f.is_zero() {
                continue;
            }
            row[k] = Cx::zero();
            for j in (k + 1)..n {
                let p = prow[j];
                row[j] -= f * p;
            }
        }
    }

    let nullity = n - rank;
    if nullity != 1 {
        return NullSpace::Nullity(nullity);
    }
    // U x = 0 with the free (last) pivot variable set to one.
    let mut x: Vec<Cx<T>> = vec![Cx::zero(); n];
    x[n - 1] = Cx::one();
    for k in (0..n - 1).rev() {
        let mut s: Cx<T> = Cx::zero();
        for j in (k + 1)..n {
            s += m[[k, j]] * x[j];
        }
        x[k] = -s / m[[k, k]];
    }
    let mut out = vec![Cx::zero(); n];
    for (k, &c) in col_perm.iter().enumerate() {
        out[c] = x[k];
    }
    NullSpace::Vector(out)
}

/// Returns true when `m + shift·I` admits a Cholesky factorization, i.e. the
/// Hermitian matrix `m` has no eigenvalue below `-shift`.
pub fn is_positive_above<T: Real>(m: &Array2<Cx<T>>, shift: T) -> bool {
    let n = m.nrows();
    let mut l: Array2<Cx<T>> = Array2::zeros((n, n));
    for j in 0..n {
        let mut d = m[[j, j]].re + shift;
        {
            let lj = l.row(j);
            for k in 0..j {
                d -= lj[k].norm_sqr();
            }
        }
        if !(d > T::zero()) {
            return false;
        }
        let d = d.sqrt();
        l[[j, j]] = Cx::new(d, T::zero());
        for i in (j + 1)..n {
            let mut s = m[[i, j]];
            let li = l.row(i);
            let lj = l.row(j);
            for k in 0..j {
                s -= li[k] * lj[k].conj();
            }
            l[[i, j]] = s / d;
        }
    }
    true
}

/// Eigenvalues of a Hermitian matrix in ascending order, via cyclic Jacobi on
/// the real symmetric embedding `[[Re, -Im], [Im, Re]]`.
pub fn hermitian_eigenvalues<T: Real>(m: &Array2<Cx<T>>) -> Vec<T> {
    let n = m.nrows();
    let mut a: Array2<T> = Array2::zeros((2 * n, 2 * n));
    for ((i, j), z) in m.indexed_iter() {
        a[[i, j]] = z.re;
        a[[i + n, j + n]] = z.re;
        a[[i, j + n]] = -z.im;
        a[[i + n, j]] = z.im;
    }
    let mut eig = symmetric_eigenvalues(a).to_vec();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig.into_iter().step_by(2).collect()
}

fn symmetric_eigenvalues<T: Real>(mut a: Array2<T>) -> Array1<T> {
    let n = a.nrows();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        let diag: T = (0..n).map(|i| a[[i, i]] * a[[i, i]]).sum();
        if off <= T::epsilon() * T::epsilon() * diag.max(T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let tau = (a[[q, q]] - a[[p, p]]) / (two * apq);
                let t = tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
            }
        }
    }
    a.diag().to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Cx<f64> {
        Cx::new(re, im)
    }

    #[test]
    fn expm_of_pauli_rotation() {
        // exp(-i θ σ_x) = cos θ I - i sin θ σ_x
        let theta = 0.7;
        let m = Array2::from_shape_vec((2, 2), vec![c(0.0, 0.0), c(0.0, -theta), c(0.0, -theta), c(0.0, 0.0)])
            .unwrap();
        let e = expm(&m);
        assert!((e[[0, 0]] - c(theta.cos(), 0.0)).norm() < 1e-14);
        assert!((e[[0, 1]] - c(0.0, -theta.sin())).norm() < 1e-14);
    }

    #[test]
    fn expm_large_norm_uses_squaring() {
        let m = Array2::from_diag(&Array1::from(vec![c(3.0, 0.0), c(-2.0, 1.0)]));
        let e = expm(&m);
        assert!((e[[0, 0]] - c(3.0f64.exp(), 0.0)).norm() < 1e-12 * 3.0f64.exp());
        assert!((e[[1, 1]] - c(-2.0, 1.0).exp()).norm() < 1e-14);
    }

    #[test]
    fn null_vector_of_rank_deficient_matrix() {
        let m = Array2::from_shape_vec(
            (3, 3),
            vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(0.0, 1.0), c(1.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(3.0, 0.0), c(4.0, -1.0)],
        )
        .unwrap();
        // row3 = row1 + row2
        match null_vector(m.clone(), 1e-12) {
            NullSpace::Vector(v) => {
                let r = m.dot(&Array1::from(v));
                assert!(r.iter().all(|z| z.norm() < 1e-12));
            }
            NullSpace::Nullity(k) => panic!("nullity {k}"),
        }
        assert!(matches!(null_vector(identity::<f64>(3), 1e-12), NullSpace::Nullity(0)));
        assert!(matches!(null_vector(Array2::<Cx<f64>>::zeros((2, 2)), 1e-12), NullSpace::Nullity(2)));
    }

    #[test]
    fn cholesky_detects_negative_eigenvalue() {
        let m = Array2::from_shape_vec((2, 2), vec![c(0.5, 0.0), c(0.0, 0.6), c(0.0, -0.6), c(0.5, 0.0)]).unwrap();
        // eigenvalues 0.5 ± 0.6
        assert!(!is_positive_above(&m, 1e-6));
        assert!(is_positive_above(&m, 0.11));
    }

    #[test]
    fn hermitian_eigenvalues_match_closed_form() {
        let m = Array2::from_shape_vec((2, 2), vec![c(1.0, 0.0), c(0.0, -2.0), c(0.0, 2.0), c(1.0, 0.0)]).unwrap();
        let e = hermitian_eigenvalues(&m);
        assert!((e[0] + 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }
}
