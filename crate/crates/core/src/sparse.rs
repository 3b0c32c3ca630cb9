//! Compressed-row sparse matrices and the linear solvers used by the
//! time stepper.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` entries. Duplicates are summed in
/// insertion order when the matrix is finalized.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds `scale * m` with its top-left corner at `(row0, col0)`.
    pub fn push_block(&mut self, row0: usize, col0: usize, scale: f64, m: &SparseMatrix) {
        for (i, j, v) in m.iter() {
            self.push(row0 + i, col0 + j, scale * v);
        }
    }

    pub fn finalize(mut self) -> SparseMatrix {
        // Stable sort keeps the accumulation order of duplicates fixed.
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());
        let mut rows = Vec::with_capacity(self.entries.len());
        let mut it = self.entries.into_iter().peekable();
        while let Some((i, j, mut v)) = it.next() {
            while let Some(&(i2, j2, v2)) = it.peek() {
                if (i2, j2) != (i, j) {
                    break;
                }
                v += v2;
                it.next();
            }
            if v != 0.0 {
                rows.push(i);
                col_idx.push(j);
                values.push(v);
            }
        }
        for &i in &rows {
            row_ptr[i + 1] += 1;
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `y = A^T x`
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.iter() {
            b.push(j, i, v);
        }
        b.finalize()
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Every stored `(i, j)` has a stored `(j, i)`.
    pub fn is_structurally_symmetric(&self) -> bool {
        self.nrows == self.ncols
            && self.iter().all(|(i, j, _)| {
                self.col_idx[self.row_ptr[j]..self.row_ptr[j + 1]]
                    .binary_search(&i)
                    .is_ok()
            })
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }

    /// Coordinate text format: one `row col value` line per stored entry,
    /// preceded by a `% rows cols nnz` header.
    pub fn write_coordinate(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(w, "{i} {j} {v:e}")?;
        }
        Ok(())
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trips: Vec<_> = self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips)
            .map_err(|e| Error::Internal(format!("sparse matrix conversion failed: {e:?}")))
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `||b - A x|| / ||b||`, or `||A x||` when `b = 0`.
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Sparse LU factorization with partial pivoting.
pub struct LuSolver {
    n: usize,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for LuSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuSolver").field("n", &self.n).finish()
    }
}

impl LuSolver {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::invalid("LU factorization needs a square matrix"));
        }
        let lu = a.to_faer()?.sp_lu().map_err(|e| Error::SolverFailure {
            iterations: 0,
            residual: f64::NAN,
            reason: format!("sparse LU failed: {e:?}"),
        })?;
        Ok(LuSolver { n: a.nrows, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        self.lu
            .solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct CholeskySolver {
    n: usize,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for CholeskySolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CholeskySolver").field("n", &self.n).finish()
    }
}

impl CholeskySolver {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::invalid("Cholesky factorization needs a square matrix"));
        }
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::SolverFailure {
                iterations: 0,
                residual: f64::NAN,
                reason: format!("sparse Cholesky failed: {e:?}"),
            })?;
        Ok(CholeskySolver { n: a.nrows, llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.llt
            .solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients with Jacobi preconditioning for SPD `a`.
pub fn conjugate_gradient(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, KrylovStats)> {
    let n = b.len();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::invalid("CG needs a positive diagonal"));
    }
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((
            x,
            KrylovStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let step = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let res = norm(&r) / nb;
        if res <= tol {
            return Ok((
                x,
                KrylovStats {
                    iterations: it,
                    relative_residual: res,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        residual: norm(&r) / nb,
        reason: "conjugate gradients did not converge".into(),
    })
}

/// Restarted GMRES for `op(x) = b` starting from `x0`.
pub fn gmres(
    mut op: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, KrylovStats)> {
    let n = b.len();
    let nb = norm(b);
    let mut x = x0;
    if nb == 0.0 {
        return Ok((
            vec![0.0; n],
            KrylovStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut total = 0;
    loop {
        let ax = op(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        let res = beta / nb;
        if res <= tol {
            return Ok((
                x,
                KrylovStats {
                    iterations: total,
                    relative_residual: res,
                },
            ));
        }
        if total >= max_iter {
            return Err(Error::SolverFailure {
                iterations: total,
                residual: res,
                reason: "GMRES did not converge".into(),
            });
        }
        let m = restart.min(max_iter - total).max(1);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let mut w = op(&basis[k])?;
            for (i, v) in basis.iter().enumerate() {
                let hik = dot(&w, v);
                h[i][k] = hik;
                w.iter_mut().zip(v).for_each(|(w, v)| *w -= hik * v);
            }
            // Second Gram-Schmidt pass.
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                h[i][k] += c;
                w.iter_mut().zip(v).for_each(|(w, v)| *w -= c * v);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if (g[k + 1].abs() / nb) <= 0.1 * tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            x.iter_mut().zip(v).for_each(|(x, v)| *x += yi * v);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SparseMatrix {
        let mut b = TripletBuilder::new(4, 4);
        for i in 0..4 {
            b.push(i, i, 4.0);
            if i + 1 < 4 {
                b.push(i, i + 1, -1.0);
                b.push(i + 1, i, -1.5);
            }
        }
        b.push(0, 3, 0.5);
        b.push(0, 3, -0.5);
        b.push(2, 2, 1.0);
        b.finalize()
    }

    #[test]
    fn builder_sums_duplicates_and_drops_zeros() {
        let a = sample();
        assert_eq!(a.get(2, 2), 5.0);
        assert_eq!(a.get(0, 3), 0.0);
        assert_eq!(a.nnz(), 10);
        assert!(a.is_structurally_symmetric());
        assert_eq!(a.transpose().get(1, 0), a.get(0, 1));
    }

    #[test]
    fn lu_and_krylov_agree() {
        let a = sample();
        let b = vec![1.0, -2.0, 0.5, 3.0];
        let x = LuSolver::new(&a).unwrap().solve(&b);
        assert!(relative_residual(&a, &x, &b) < 1e-15);
        let (xg, stats) = gmres(|v| Ok(a.matvec(v)), &b, vec![0.0; 4], 1e-14, 10, 50).unwrap();
        assert!(stats.relative_residual <= 1e-14);
        for (p, q) in x.iter().zip(&xg) {
            assert!((p - q).abs() < 1e-13);
        }
        let dense = a
            .to_dense()
            .lu()
            .solve(&nalgebra::DVector::from_vec(b.clone()))
            .unwrap();
        for (p, q) in x.iter().zip(dense.iter()) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn spd_solvers() {
        let mut bld = TripletBuilder::new(5, 5);
        for i in 0..5 {
            bld.push(i, i, 2.0 + i as f64);
            if i + 1 < 5 {
                bld.push(i, i + 1, -1.0);
                bld.push(i + 1, i, -1.0);
            }
        }
        let a = bld.finalize();
        let b = vec![1.0, 0.0, -1.0, 2.0, 0.25];
        let x = CholeskySolver::new(&a).unwrap().solve(&b);
        assert!(relative_residual(&a, &x, &b) < 1e-15);
        let (xc, _) = conjugate_gradient(&a, &b, 1e-14, 100).unwrap();
        for (p, q) in x.iter().zip(&xc) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn coordinate_dump() {
        let a = sample();
        let mut out = Vec::new();
        a.write_coordinate(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "% 4 4 10");
        assert_eq!(lines.len(), 11);
        let parsed: Vec<(usize, usize, f64)> = lines[1..]
            .iter()
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
            })
            .collect();
        assert_eq!(parsed, a.iter().collect::<Vec<_>>());
    }
}
