//! Dense real linear algebra: row-major matrices, LU with partial pivoting,
//! and 2-norms.
//!
//! Every system handled here is at most a few hundred rows, so storage is
//! dense throughout.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative pivot threshold: a pivot below `SINGULAR_RTOL * ‖a‖∞` is singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Elementwise absolute value.
    pub fn abs(&self) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v.abs()).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Matrix, s: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} += {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::Dimension(format!(
                "{}x{} * vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `selfᵀ v` without materializing the transpose.
    pub fn tr_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return Err(Error::Dimension(format!(
                "({}x{})ᵀ * vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for i in 0..self.rows {
            let r = self.row(i);
            for (a, &ra) in r.iter().enumerate() {
                if ra == 0.0 {
                    continue;
                }
                let grow = &mut g.data[a * n..(a + 1) * n];
                for (gv, &rb) in grow.iter_mut().zip(r) {
                    *gv += ra * rb;
                }
            }
        }
        g
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm, computed with scaling so it neither overflows nor
/// underflows for extreme entries.
pub fn norm2_vec(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn norm_inf_vec(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Largest singular value by power iteration on `aᵀa`.
pub fn norm2_mat(a: &Matrix) -> Result<f64> {
    norm2_mat_with(a, 1e-10, 10_000)
}

pub fn norm2_mat_with(a: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    a.ensure_finite("norm2_mat input")?;
    if a.max_abs() == 0.0 || a.cols() == 0 {
        return Ok(0.0);
    }
    // Deterministic start with no special alignment to coordinate axes.
    let mut v: Vec<f64> = (0..a.cols())
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let n0 = norm2_vec(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut sigma2 = 0.0;
    for it in 0..max_iter {
        let av = a.matvec(&v)?;
        let next_sigma2 = dot(&av, &av);
        let mut w = a.tr_matvec(&av)?;
        let wn = norm2_vec(&w);
        if wn == 0.0 {
            // Start vector landed in the null space; the matrix is nonzero so
            // retry from a coordinate vector of the heaviest column.
            let heavy = (0..a.cols())
                .max_by(|&i, &j| {
                    norm2_vec(&a.column(i)).total_cmp(&norm2_vec(&a.column(j)))
                })
                .unwrap_or(0);
            v = vec![0.0; a.cols()];
            v[heavy] = 1.0;
            continue;
        }
        w.iter_mut().for_each(|x| *x /= wn);
        v = w;
        if it > 0 && (next_sigma2 - sigma2).abs() <= tol * next_sigma2 {
            // One more Rayleigh quotient with the refined vector.
            let av = a.matvec(&v)?;
            return Ok(dot(&av, &av).max(next_sigma2).sqrt());
        }
        sigma2 = next_sigma2;
    }
    Err(Error::NonConvergence {
        what: "spectral norm power iteration",
        iterations: max_iter,
        residual: sigma2,
    })
}

/// LU factorization `P a = L U` with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "LU of non-square {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        a.ensure_finite("LU input")?;
        let n = a.rows();
        let threshold = SINGULAR_RTOL * a.norm_inf();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(Error::Singular { pivot, threshold });
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let inv = 1.0 / lu[(k, k)];
            let (upper, lower) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n..(k + 1) * n];
            for row in lower.chunks_exact_mut(n) {
                let l = row[k] * inv;
                row[k] = l;
                if l != 0.0 {
                    for (r, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *r -= l * u;
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!(
                "rhs of length {} for {}x{} system",
                b.len(),
                self.n,
                self.n
            )));
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = dot(&row[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = dot(&row[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    pub fn solve_mat(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.n {
            return Err(Error::Dimension(format!(
                "rhs with {} rows for {}x{} system",
                b.rows(),
                self.n,
                self.n
            )));
        }
        // Row-oriented substitution over all right-hand sides at once.
        let (n, m) = (self.n, b.cols());
        let mut x = Matrix::zeros(n, m);
        for (i, &p) in self.perm.iter().enumerate() {
            x.row_mut(i).copy_from_slice(b.row(p));
        }
        for i in 0..n {
            let (done, rest) = x.data.split_at_mut(i * m);
            let xi = &mut rest[..m];
            for (k, &l) in self.lu.row(i)[..i].iter().enumerate() {
                if l != 0.0 {
                    for (o, v) in xi.iter_mut().zip(&done[k * m..(k + 1) * m]) {
                        *o -= l * v;
                    }
                }
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = x.data.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            let row = self.lu.row(i);
            for (k, &u) in row[i + 1..].iter().enumerate() {
                if u != 0.0 {
                    for (o, v) in xi.iter_mut().zip(&tail[k * m..(k + 1) * m]) {
                        *o -= u * v;
                    }
                }
            }
            let inv = 1.0 / row[i];
            xi.iter_mut().for_each(|v| *v *= inv);
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve_mat(&Matrix::identity(self.n))
    }
}

/// Solves `a X = b` by LU with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    b.ensure_finite("lu_solve rhs")?;
    Lu::factor(a)?.solve_mat(b)
}

/// Numerical rank by Gaussian elimination with complete pivoting.
pub fn rank(a: &Matrix, rtol: f64) -> usize {
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let threshold = rtol * m.max_abs().max(f64::MIN_POSITIVE);
    let mut r = 0;
    let mut col_order: Vec<usize> = (0..cols).collect();
    while r < rows.min(cols) {
        let mut best = (r, r, 0.0);
        for i in r..rows {
            for (jj, &j) in col_order.iter().enumerate().skip(r) {
                let v = m[(i, j)].abs();
                if v > best.2 {
                    best = (i, jj, v);
                }
            }
        }
        if best.2 <= threshold {
            break;
        }
        let (pi, pj) = (best.0, best.1);
        for j in 0..cols {
            m.data.swap(r * cols + j, pi * cols + j);
        }
        col_order.swap(r, pj);
        let c = col_order[r];
        let pivot = m[(r, c)];
        for i in r + 1..rows {
            let l = m[(i, c)] / pivot;
            if l != 0.0 {
                for &j in &col_order[r..] {
                    let u = m[(r, j)];
                    m[(i, j)] -= l * u;
                }
            }
        }
        r += 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn well_conditioned(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
        let mut a = random_matrix(rng, n, n);
        for i in 0..n {
            a[(i, i)] += n as f64;
        }
        a
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -4.0]]).unwrap();
        assert_eq!(lu_solve(&Matrix::identity(2), &b).unwrap(), b);
    }

    #[test]
    fn diagonal_solve() {
        let a = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![2.0], vec![8.0]]).unwrap();
        let x = lu_solve(&a, &b).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn random_solve_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = well_conditioned(&mut rng, 20);
        let b = random_matrix(&mut rng, 20, 3);
        let x = lu_solve(&a, &b).unwrap();
        let mut r = a.matmul(&x).unwrap();
        r.add_scaled(&b, -1.0).unwrap();
        assert!(r.max_abs() <= 1e-10 * b.max_abs());
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(
            Lu::factor(&a),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let a = Matrix::from_rows(&[vec![f64::NAN, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(Lu::factor(&a), Err(Error::NonFinite(_))));
        assert!(matches!(norm2_mat(&a), Err(Error::NonFinite(_))));
    }

    #[test]
    fn inverse_recovers_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = well_conditioned(&mut rng, 15);
        let inv = Lu::factor(&a).unwrap().inverse().unwrap();
        let mut e = inv.matmul(&a).unwrap();
        e.add_scaled(&Matrix::identity(15), -1.0).unwrap();
        assert!(e.max_abs() < 1e-8);
    }

    #[test]
    fn vector_norms() {
        assert_eq!(norm2_vec(&[3.0, 4.0]), 5.0);
        assert_eq!(norm2_vec(&[0.0, 0.0, 0.0]), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..50).map(|_| rng.random_range(-10.0..10.0)).collect();
        let direct = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm2_vec(&v) - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn spectral_norm_diagonal_and_zero() {
        let d = Matrix::from_diag(&[1.0, 3.0, 2.0]);
        assert!((norm2_mat(&d).unwrap() - 3.0).abs() < 1e-8);
        assert_eq!(norm2_mat(&Matrix::zeros(4, 3)).unwrap(), 0.0);
    }

    #[test]
    fn spectral_norm_matches_random_probe_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(&mut rng, 10, 6);
        let sigma = norm2_mat(&a).unwrap();
        let ratio = |v: &[f64]| norm2_vec(&a.matvec(v).unwrap()) / norm2_vec(v);
        let mut best = (0.0, vec![0.0; 6]);
        for _ in 0..100_000 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = ratio(&v);
            assert!(r <= sigma + 1e-9);
            if r > best.0 {
                best = (r, v);
            }
        }
        // Random-search refinement around the best probe.
        let mut step = 0.1;
        for _ in 0..20_000 {
            let v: Vec<f64> = best
                .1
                .iter()
                .map(|x| x + step * rng.random_range(-1.0..1.0))
                .collect();
            let r = ratio(&v);
            assert!(r <= sigma + 1e-9);
            if r > best.0 {
                best = (r, v);
            } else {
                step = (step * 0.999).max(1e-6);
            }
        }
        assert!((sigma - best.0) / sigma < 1e-3, "sigma {sigma} probe max {}", best.0);
    }

    #[test]
    fn rank_detects_deficiency() {
        let a = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        assert_eq!(rank(&a, 1e-12), 2);
        assert_eq!(rank(&Matrix::identity(4), 1e-12), 4);
    }
}
