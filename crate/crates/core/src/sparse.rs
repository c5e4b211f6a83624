//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate
//! gradient solver for the symmetric positive definite systems of the toolkit.

use crate::error::{Error, Result};

/// Relative residual targeted by [`pcg`] unless told otherwise.
pub const DEFAULT_RTOL: f64 = 1e-12;
/// Accepted true relative residual once restarts stop making progress or
/// the iteration cap is reached.
const STAGNATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix of size `n` from `(row, col, value)` triplets; duplicates
    /// are summed in insertion order so the result is bitwise reproducible.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> CsrMatrix {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside a {n}x{n} matrix");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> CsrMatrix {
        CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|` over all entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `self + s * other`; both must have the same size.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, s * v)));
        }
        CsrMatrix::from_triplets(self.n, t)
    }

    /// Replaces the rows and columns of `fixed` entries by those of the
    /// identity. Combined with zeroing the matching right-hand side entries
    /// this imposes homogeneous Dirichlet values while keeping symmetry.
    pub fn constrain(&mut self, fixed: &[bool]) {
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if fixed[i] || fixed[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final `‖b - Ax‖ / ‖b‖`.
    pub relative_residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A` with Jacobi
/// preconditioned conjugate gradients.
pub fn pcg(a: &CsrMatrix, b: &[f64], rtol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.size();
    if b.len() != n {
        return Err(Error::Invalid(format!("right-hand side has length {} for a {n}x{n} system", b.len())));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let max_iter = 20 * n + 100;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    let mut last_true = f64::INFINITY;
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bnorm;
        if res <= rtol {
            // Guard against drift of the recursively updated residual.
            let true_res = residual(a, &x, b) / bnorm;
            if true_res <= rtol.max(1e-14) * 10.0 {
                return Ok((x, SolveStats { iterations: it, relative_residual: true_res }));
            }
            // A restart that no longer halves the true residual has hit the
            // rounding floor of the system.
            if true_res > 0.5 * last_true {
                if true_res <= STAGNATION_TOL {
                    return Ok((x, SolveStats { iterations: it, relative_residual: true_res }));
                }
                return Err(Error::Solver { iterations: it, residual: true_res });
            }
            last_true = true_res;
            r = b.iter().zip(a.mul_vec(&x)).map(|(b, ax)| b - ax).collect();
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let true_res = residual(a, &x, b) / bnorm;
    if true_res <= STAGNATION_TOL {
        return Ok((x, SolveStats { iterations: max_iter, relative_residual: true_res }));
    }
    Err(Error::Solver { iterations: max_iter, residual: true_res })
}

/// `‖b - A x‖`.
pub fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    ax.iter().zip(b).map(|(ax, b)| (b - ax) * (b - ax)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 1e-3));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn pcg_solves_tridiagonal() {
        let a = laplacian_1d(200);
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.mul_vec(&xs);
        let (x, stats) = pcg(&a, &b, 1e-12).unwrap();
        assert!(stats.relative_residual <= 1e-10);
        assert!(x.iter().zip(&xs).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let (x, stats) = pcg(&laplacian_1d(10), &[0.0; 10], 1e-12).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn indefinite_matrix_reports_solver_error() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(pcg(&a, &[1.0, 1.0], 1e-12), Err(Error::Solver { .. })));
    }

    #[test]
    fn constrain_keeps_symmetry() {
        let mut a = laplacian_1d(5);
        a.constrain(&[true, false, false, false, true]);
        assert_eq!(a.max_asymmetry(), 0.0);
        assert_eq!(a.get(0, 0), 1.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    proptest! {
        #[test]
        fn matvec_is_linear(x in proptest::collection::vec(-1.0f64..1.0, 30), s in -3.0f64..3.0) {
            let a = laplacian_1d(30);
            let lhs = a.mul_vec(&x.iter().map(|v| v * s).collect::<Vec<_>>());
            let rhs: Vec<f64> = a.mul_vec(&x).iter().map(|v| v * s).collect();
            for (l, r) in lhs.iter().zip(&rhs) {
                prop_assert!((l - r).abs() <= 1e-12);
            }
        }
    }
}
