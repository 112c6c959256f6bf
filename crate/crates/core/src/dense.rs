//! Row-major dense matrices with 3×3 block access, and an LU wrapper.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;

use crate::kernels::Mat3;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps row-major storage.
    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "storage size mismatch");
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    /// The 3×3 block coupling row panel `a` to column panel `b`.
    pub fn block(&self, a: usize, b: usize) -> Mat3 {
        Mat3::from_fn(|i, j| self.get(3 * a + i, 3 * b + j))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t.data[j * self.nrows + i] = self.data[i * self.ncols + j];
            }
        }
        t
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
        }
    }

    /// Left-multiplies each 3-row strip `a` by `blocks[a]`.
    pub fn left_block_diagonal(&self, blocks: &[Mat3]) -> Self {
        assert_eq!(3 * blocks.len(), self.nrows);
        let mut out = Self::zeros(self.nrows, self.ncols);
        for (a, p) in blocks.iter().enumerate() {
            for i in 0..3 {
                let dst = &mut out.data[(3 * a + i) * self.ncols..(3 * a + i + 1) * self.ncols];
                for k in 0..3 {
                    let w = p[(i, k)];
                    if w == 0.0 {
                        continue;
                    }
                    let src = &self.data[(3 * a + k) * self.ncols..(3 * a + k + 1) * self.ncols];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        out
    }

    /// Copies `block` into the sub-matrix starting at `(row, col)`.
    pub fn insert(&mut self, row: usize, col: usize, block: &Self) {
        for i in 0..block.nrows {
            let dst = (row + i) * self.ncols + col;
            self.data[dst..dst + block.ncols].copy_from_slice(block.row(i));
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let c = self.to_faer() * other.to_faer();
        Self::from_faer(&c)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.nrows, self.ncols, |i, j| self.get(i, j))
    }

    pub fn from_faer(m: &Mat<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.data[i * m.ncols() + j] = m[(i, j)];
            }
        }
        out
    }

    /// Spectral condition number from the singular values.
    pub fn condition_number(&self) -> f64 {
        match self.to_faer().singular_values() {
            Ok(s) => {
                let max = s.iter().cloned().fold(0.0, f64::max);
                let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
                max / min
            }
            Err(_) => f64::NAN,
        }
    }

    /// Writes `N`, a tag and the row-major entries as little-endian 64-bit values.
    pub fn write_binary(&self, w: &mut impl std::io::Write, tag: &str) -> std::io::Result<()> {
        let mut tag_bytes = [b' '; 16];
        for (d, s) in tag_bytes.iter_mut().zip(tag.bytes()) {
            *d = s;
        }
        w.write_all(&(self.nrows as u64).to_le_bytes())?;
        w.write_all(&(self.ncols as u64).to_le_bytes())?;
        w.write_all(&tag_bytes)?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

/// LU factorisation with partial pivoting, kept for repeated solves.
pub struct LuFactor {
    lu: PartialPivLu<f64>,
    n: usize,
}

impl LuFactor {
    pub fn new(m: &DenseMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "LU needs a square matrix");
        Self {
            lu: m.to_faer().partial_piv_lu(),
            n: m.nrows(),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let b = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solves for every column of `rhs`.
    pub fn solve_matrix(&self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(rhs.nrows(), self.n);
        DenseMatrix::from_faer(&self.lu.solve(rhs.to_faer()))
    }
}
