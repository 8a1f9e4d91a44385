//! Dense small-matrix linear algebra.
//!
//! Everything here targets matrices of order at most a few dozen: the
//! state matrices of an ensemble and the block systems assembled from them.
//! Storage is row-major `f64`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data, checking the entry count and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape("Mat::from_vec", "dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Mat::from_vec",
                format!("{} entries for a {rows}x{cols} matrix", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix", "entries must be finite"));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Reshapes an integrator state without the finiteness check, so that
    /// an overflowing stage reaches the integrator's divergence test.
    pub(crate) fn from_state(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "state has {rows}x{cols} entries");
        Mat { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::shape("Mat::from_rows", "ragged rows"));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Mat::from_vec(rows.len(), cols, data)
    }

    /// Column vector from a slice.
    pub fn column(v: &[f64]) -> Self {
        Mat {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// Block-diagonal matrix with the given square or rectangular blocks.
    pub fn block_diag(blocks: &[Mat]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = Mat::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            out.set_block(r0, c0, b);
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(blocks: &[Mat]) -> Result<Self> {
        let cols = blocks
            .first()
            .ok_or_else(|| Error::shape("Mat::vstack", "no blocks"))?
            .cols;
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(Error::shape("Mat::vstack", "column counts differ"));
        }
        let data: Vec<f64> = blocks.iter().flat_map(|b| b.data.iter().copied()).collect();
        let rows = data.len() / cols;
        Ok(Mat { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Matrix product; panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec: dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `xᵀ M x` for square `M`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// `(M + Mᵀ)/2`.
    pub fn symmetrized(&self) -> Mat {
        let mut s = self.clone();
        s.symmetrize();
        s
    }

    pub fn symmetrize(&mut self) {
        debug_assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        let mut out = Mat::zeros(rows, cols);
        for i in 0..rows {
            out.data[i * cols..(i + 1) * cols]
                .copy_from_slice(&self.data[(r0 + i) * self.cols + c0..(r0 + i) * self.cols + c0 + cols]);
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat) {
        for i in 0..block.rows {
            let dst = (r0 + i) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(i));
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Induced 1-norm (max column sum).
    pub fn norm1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest singular value of any matrix, via the eigenvalues of `AᵀA`.
    pub fn spectral_norm(&self) -> f64 {
        let gram = self.transpose().matmul(self);
        let largest = symmetric_eigenvalues(&gram)
            .into_iter()
            .fold(0.0_f64, f64::max);
        largest.max(0.0).sqrt()
    }

    /// `‖M − Mᵀ‖₂`, the asymmetry of a square matrix.
    pub fn asymmetry(&self) -> f64 {
        (self - &self.transpose()).spectral_norm()
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mat{}x{}", self.rows, self.cols)?;
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Mat {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Mat::from_rows(&rows)
    }
}

impl From<Mat> for Vec<Vec<f64>> {
    fn from(m: Mat) -> Self {
        m.to_rows()
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<'a> Add<&'a Mat> for &'a Mat {
    type Output = Mat;

    fn add(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "add: shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a Mat> for &'a Mat {
    type Output = Mat;

    fn sub(self, rhs: &Mat) -> Mat {
        assert_eq!(self.shape(), rhs.shape(), "sub: shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a Mat> for &'a Mat {
    type Output = Mat;

    fn mul(self, rhs: &Mat) -> Mat {
        self.matmul(rhs)
    }
}

impl Neg for &Mat {
    type Output = Mat;

    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm of a vector.
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Spectral norm of a square matrix.
pub fn matrix_2norm(a: &Mat) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::shape(
            "matrix_2norm",
            format!("expected a square matrix, got {}x{}", a.rows, a.cols),
        ));
    }
    Ok(a.spectral_norm())
}

/// `d₂(A, A′) = ‖A − A′‖₂` between two square matrices of equal order.
pub fn matrix_distance(a: &Mat, other: &Mat) -> Result<f64> {
    if a.shape() != other.shape() {
        return Err(Error::shape(
            "matrix_distance",
            format!("{:?} vs {:?}", a.shape(), other.shape()),
        ));
    }
    matrix_2norm(&(a - other))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, in ascending order.
///
/// Only the upper triangle is trusted; callers pass matrices that are
/// symmetric up to rounding.
pub fn symmetric_eigenvalues(a: &Mat) -> Vec<f64> {
    const MAX_SWEEPS: usize = 100;
    assert!(a.is_square(), "symmetric_eigenvalues: square matrix required");
    let n = a.rows;
    let mut m = a.symmetrized();
    if n == 1 {
        return vec![m[(0, 0)]];
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| a.total_cmp(b));
    eig
}

pub fn min_eigenvalue(a: &Mat) -> f64 {
    symmetric_eigenvalues(a)[0]
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    norm1: f64,
}

/// Pivots smaller than this times the largest entry are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

impl Lu {
    pub fn factor(a: &Mat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::shape("Lu::factor", "square matrix required"));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let (piv_row, piv_abs) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs <= PIVOT_TOLERANCE * scale || piv_abs == 0.0 {
                return Err(Error::Singular { pivot: piv_abs });
            }
            if piv_row != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, piv_row * n + j);
                }
                perm.swap(k, piv_row);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu.data[i * n + j] -= factor * lu.data[k * n + j];
                    }
                }
            }
        }
        Ok(Lu {
            lu,
            perm,
            norm1: a.norm1(),
        })
    }

    pub fn solve(&self, b: &Mat) -> Result<Mat> {
        let n = self.lu.rows;
        if b.rows != n {
            return Err(Error::shape(
                "Lu::solve",
                format!("rhs has {} rows, system has {n}", b.rows),
            ));
        }
        let cols = b.cols;
        let mut x = Mat::zeros(n, cols);
        for (i, &p) in self.perm.iter().enumerate() {
            x.data[i * cols..(i + 1) * cols].copy_from_slice(b.row(p));
        }
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[(i, k)];
                if l != 0.0 {
                    for j in 0..cols {
                        x.data[i * cols + j] -= l * x.data[k * cols + j];
                    }
                }
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.lu[(i, k)];
                if u != 0.0 {
                    for j in 0..cols {
                        x.data[i * cols + j] -= u * x.data[k * cols + j];
                    }
                }
            }
            let d = self.lu[(i, i)];
            for j in 0..cols {
                x.data[i * cols + j] /= d;
            }
        }
        Ok(x)
    }

    /// Reciprocal 1-norm condition number, `1 / (‖A‖₁ ‖A⁻¹‖₁)`, using the explicit inverse.
    pub fn rcond(&self) -> f64 {
        let n = self.lu.rows;
        match self.solve(&Mat::identity(n)) {
            Ok(inv) => 1.0 / (self.norm1 * inv.norm1()),
            Err(_) => 0.0,
        }
    }
}

/// Solution of `A X = B` together with the reciprocal condition estimate of `A`.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: Mat,
    pub rcond: f64,
}

impl LinearSolution {
    pub fn condition(&self) -> f64 {
        1.0 / self.rcond
    }
}

pub fn linear_solve(a: &Mat, b: &Mat) -> Result<LinearSolution> {
    let lu = Lu::factor(a)?;
    let x = lu.solve(b)?;
    Ok(LinearSolution {
        x,
        rcond: lu.rcond(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn norm_of_identity_and_rotation() {
        assert!(approx(matrix_2norm(&Mat::identity(2)).unwrap(), 1.0, 1e-14));
        let rot = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        assert!(approx(matrix_2norm(&rot).unwrap(), 1.0, 1e-14));
        let mut e = Mat::zeros(2, 2);
        e[(0, 0)] = 0.5;
        assert!(approx(matrix_2norm(&e).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn norm_rejects_rectangular() {
        assert!(matches!(
            matrix_2norm(&Mat::zeros(2, 3)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn distances() {
        let a = Mat::from_rows(&[[0.0, 1.0], [-1.0, 0.0]]).unwrap();
        assert_eq!(matrix_distance(&a, &a).unwrap(), 0.0);
        for j in 0..4 {
            let mut b = a.clone();
            b.as_mut_slice()[j] += 0.5;
            assert!(approx(matrix_distance(&a, &b).unwrap(), 0.5, 1e-14));
        }
        let d = matrix_distance(&Mat::identity(2), &Mat::diag(&[3.0, 1.0])).unwrap();
        assert!(approx(d, 2.0, 1e-14));
        assert!(matrix_distance(&Mat::identity(2), &Mat::identity(3)).is_err());
    }

    #[test]
    fn jacobi_matches_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let m = Mat::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&m);
        assert!(approx(e[0], 1.0, 1e-14) && approx(e[1], 3.0, 1e-14));
        // tridiagonal (2,-1) of order 5: 2 - 2cos(kπ/6)
        let mut t = Mat::zeros(5, 5);
        for i in 0..5 {
            t[(i, i)] = 2.0;
            if i + 1 < 5 {
                t[(i, i + 1)] = -1.0;
                t[(i + 1, i)] = -1.0;
            }
        }
        let e = symmetric_eigenvalues(&t);
        for (k, ev) in e.iter().enumerate() {
            let expected = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / 6.0).cos();
            assert!(approx(*ev, expected, 1e-12), "{ev} vs {expected}");
        }
    }

    #[test]
    fn solve_trivial_systems() {
        let b = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let s = linear_solve(&Mat::identity(2), &b).unwrap();
        assert_eq!(s.x, b);
        assert!(approx(s.rcond, 1.0, 1e-15));
        let s = linear_solve(&Mat::diag(&[2.0, 4.0]), &Mat::identity(2)).unwrap();
        assert!(approx(s.x[(0, 0)], 0.5, 1e-15));
        assert!(approx(s.x[(1, 1)], 0.25, 1e-15));
        assert_eq!(s.x[(0, 1)], 0.0);
    }

    #[test]
    fn singular_system_reports_pivot() {
        let a = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        match linear_solve(&a, &Mat::identity(2)) {
            Err(Error::Singular { pivot }) => assert!(pivot < 1e-12),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn block_helpers() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let bd = Mat::block_diag(&[a.clone(), Mat::identity(1)]);
        assert_eq!(bd.shape(), (3, 3));
        assert_eq!(bd.block(0, 0, 2, 2), a);
        assert_eq!(bd[(2, 2)], 1.0);
        assert_eq!(bd[(0, 2)], 0.0);
        let st = Mat::vstack(&[Mat::column(&[1.0]), Mat::column(&[2.0])]).unwrap();
        assert_eq!(st.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn serde_uses_nested_rows() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: Mat = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<Mat>("[[1.0],[2.0,3.0]]").is_err());
    }
}
