//! Sparse assembly and factorization wrappers plus the small dense helpers.

use crate::error::{CoreError, Result};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

/// Accumulating triplet builder; duplicate entries sum on conversion.
pub struct TripletList {
    rows: usize,
    cols: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletList {
    pub fn new(rows: usize, cols: usize) -> Self {
        TripletList { rows, cols, entries: Vec::new() }
    }

    pub fn with_capacity(rows: usize, cols: usize, cap: usize) -> Self {
        TripletList { rows, cols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.entries.push(Triplet::new(row, col, value));
    }

    pub fn to_mat(&self) -> Result<SparseColMat<usize, f64>> {
        SparseColMat::try_new_from_triplets(self.rows, self.cols, &self.entries)
            .map_err(|e| CoreError::LinearSolve(format!("sparse assembly failed: {e:?}")))
    }
}

pub fn col_from_slice(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn slice_from_col(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// Cached sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SpdFactor {
    factor: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SpdFactor {
    pub fn new(mat: &SparseColMat<usize, f64>) -> Result<Self> {
        let n = mat.nrows();
        let factor = mat
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| CoreError::LinearSolve(format!("Cholesky failed: {e:?}")))?;
        Ok(SpdFactor { factor, n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        slice_from_col(&self.factor.solve(&col_from_slice(b)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Cached sparse LU factorization for unsymmetric systems.
pub struct LuFactor {
    factor: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl LuFactor {
    pub fn new(mat: &SparseColMat<usize, f64>) -> Result<Self> {
        let n = mat.nrows();
        let factor = mat
            .sp_lu()
            .map_err(|e| CoreError::LinearSolve(format!("LU failed: {e:?}")))?;
        Ok(LuFactor { factor, n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        slice_from_col(&self.factor.solve(&col_from_slice(b)))
    }

    /// Solve with the transposed matrix (shares the factorization).
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        slice_from_col(&self.factor.solve_transpose(&col_from_slice(b)))
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// y = A x for a sparse matrix held column-wise.
pub fn spmv(mat: &SparseColMat<usize, f64>, x: &[f64], y: &mut [f64]) {
    y.fill(0.0);
    for col in 0..mat.ncols() {
        let xi = x[col];
        if xi == 0.0 {
            continue;
        }
        let rows = mat.row_idx_of_col_raw(col);
        let vals = mat.val_of_col(col);
        for (r, v) in rows.iter().zip(vals) {
            y[*r] += v * xi;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Set when a search direction had non-positive curvature; the operator
    /// is not positive definite and `x` holds the last safe iterate.
    pub indefinite: bool,
}

/// Preconditioned conjugate gradients with a curvature guard.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> PcgOutcome {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let b_norm = norm2(b).max(1e-300);
    if norm2(&r) <= tol * b_norm {
        return PcgOutcome { x, iters: 0, converged: true, indefinite: false };
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return PcgOutcome { x, iters: it, converged: false, indefinite: true };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= tol * b_norm {
            return PcgOutcome { x, iters: it, converged: true, indefinite: false };
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    PcgOutcome { x, iters: max_iter, converged: false, indefinite: false }
}

/// Gaussian elimination with partial pivoting, sized for the tiny dense
/// systems that show up in critical-point polishing.
pub fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|row| row.clone()).collect();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let (mut piv, mut best) = (k, m[k][k].abs());
        for i in k + 1..n {
            if m[i][k].abs() > best {
                best = m[i][k].abs();
                piv = i;
            }
        }
        if best < 1e-300 {
            return Err(CoreError::LinearSolve("singular small system".into()));
        }
        m.swap(k, piv);
        rhs.swap(k, piv);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in k + 1..n {
            s -= m[k][j] * x[j];
        }
        x[k] = s / m[k][k];
    }
    Ok(x)
}

/// Eigenvalues and eigenvectors of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues ascending with matching column vectors.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|r| r.clone()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[i][j] * m[i][j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].partial_cmp(&m[j][j]).unwrap());
    let eigenvalues = order.iter().map(|&i| m[i][i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&c| (0..n).map(|r| v[r][c]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_accumulate_duplicates() {
        let mut t = TripletList::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 0, 1.0);
        t.push(1, 1, 3.0);
        t.push(0, 1, 0.5);
        t.push(1, 0, 0.5);
        let m = t.to_mat().unwrap();
        let f = SpdFactor::new(&m).unwrap();
        // [[2, .5], [.5, 3]] x = [1, 0] => x = (3/5.75, -0.5/5.75)
        let x = f.solve(&[1.0, 0.0]);
        assert!((x[0] - 3.0 / 5.75).abs() < 1e-14);
        assert!((x[1] + 0.5 / 5.75).abs() < 1e-14);
    }

    #[test]
    fn lu_solves_unsymmetric_and_transpose() {
        let mut t = TripletList::new(2, 2);
        t.push(0, 0, 2.0);
        t.push(0, 1, 1.0);
        t.push(1, 1, 4.0);
        let m = t.to_mat().unwrap();
        let f = LuFactor::new(&m).unwrap();
        let x = f.solve(&[5.0, 8.0]);
        assert!((x[0] - 1.5).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
        // Transpose system: [[2,0],[1,4]] y = [2, 9] => y = (1, 2)
        let y = f.solve_transpose(&[2.0, 9.0]);
        assert!((y[0] - 1.0).abs() < 1e-14 && (y[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn pcg_matches_direct_solve() {
        // Small SPD tridiagonal system.
        let n = 40;
        let mut t = TripletList::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        let m = t.to_mat().unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let direct = SpdFactor::new(&m).unwrap().solve(&b);
        let out = pcg(
            |x, y| spmv(&m, x, y),
            |r| r.iter().map(|v| v / 2.0).collect(),
            &b,
            1e-12,
            200,
        );
        assert!(out.converged);
        let err: f64 = out
            .x
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-9, "pcg/direct mismatch {err}");
    }

    #[test]
    fn pcg_flags_indefinite_operators() {
        let out = pcg(
            |x, y| {
                y[0] = -x[0];
                y[1] = x[1];
            },
            |r| r.to_vec(),
            &[1.0, 0.0],
            1e-12,
            10,
        );
        assert!(out.indefinite);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // [[2,1,0],[1,2,1],[0,1,2]] has eigenvalues 2-sqrt(2), 2, 2+sqrt(2).
        let a = vec![
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let (vals, vecs) = jacobi_eigen(&a);
        let s = 2.0f64.sqrt();
        assert!((vals[0] - (2.0 - s)).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - (2.0 + s)).abs() < 1e-12);
        // Check A v = lambda v for the lowest pair.
        for r in 0..3 {
            let av: f64 = (0..3).map(|c| a[r][c] * vecs[0][c]).sum();
            assert!((av - vals[0] * vecs[0][r]).abs() < 1e-10);
        }
    }

    #[test]
    fn small_solver_handles_pivoting() {
        let a = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let x = solve_small(&a, &[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![4.0, 3.0]);
    }
}
