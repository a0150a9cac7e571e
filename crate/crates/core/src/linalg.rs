//! Dense row-major `f64` matrices.
//!
//! Batches are stored feature-major: a batch of `B` images is a `784 x B`
//! matrix, one example per column, so a single `matmul` pushes the whole
//! batch through a layer.
//!
//! Shape mismatches are programming errors and panic.

use std::fmt;

/// Column block width for `matmul`: a packed `k x BLOCK` slab of the right
/// operand stays in cache while all rows of the left operand pass over it.
const BLOCK: usize = 256;
/// Output tile is `ROWS x PANEL`, held in registers across the k loop.
const ROWS: usize = 4;
const PANEL: usize = 8;

type Tile = [[f64; PANEL]; ROWS];

#[inline(always)]
fn kernel_body(a: &[f64], panel: &[f64], k_dim: usize) -> Tile {
    let mut acc = [[0.0; PANEL]; ROWS];
    let (a0, rest) = a.split_at(k_dim);
    let (a1, rest) = rest.split_at(k_dim);
    let (a2, a3) = rest.split_at(k_dim);
    let rows = a0.iter().zip(a1).zip(a2).zip(&a3[..k_dim]);
    for ((((&x0, &x1), &x2), &x3), b) in rows.zip(panel.chunks_exact(PANEL)) {
        for c in 0..PANEL {
            acc[0][c] += x0 * b[c];
            acc[1][c] += x1 * b[c];
            acc[2][c] += x2 * b[c];
            acc[3][c] += x3 * b[c];
        }
    }
    acc
}

// Same arithmetic in both builds: separate multiply and add, no fused
// multiply-add, so results are bit-identical whichever one runs.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn kernel_avx2(a: &[f64], panel: &[f64], k_dim: usize) -> Tile {
    kernel_body(a, panel, k_dim)
}

fn kernel_full(a: &[f64], panel: &[f64], k_dim: usize) -> Tile {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { kernel_avx2(a, panel, k_dim) };
        }
    }
    kernel_body(a, panel, k_dim)
}

fn kernel_partial(a: &[f64], panel: &[f64], k_dim: usize, group: usize) -> Tile {
    let mut acc = [[0.0; PANEL]; ROWS];
    for (g, row) in acc.iter_mut().take(group).enumerate() {
        for (&x, b) in a[g * k_dim..(g + 1) * k_dim].iter().zip(panel.chunks_exact(PANEL)) {
            for c in 0..PANEL {
                row[c] += x * b[c];
            }
        }
    }
    acc
}

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elementwise {
    Add,
    Sub,
    Mul,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive, got {rows}x{cols}");
        Self { rows, cols, values: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major values.
    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive, got {rows}x{cols}");
        assert_eq!(values.len(), rows * cols, "expected {rows}x{cols} values");
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { rows, cols, values }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn column(values: &[f64]) -> Self {
        Self::from_vec(values.len(), 1, values.to_vec())
    }

    /// Builds a matrix whose entries are `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, values)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Row-major values.
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        assert!(row < self.rows && col < self.cols, "index ({row}, {col}) out of bounds");
        self.values[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.rows && col < self.cols, "index ({row}, {col}) out of bounds");
        self.values[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn col_to_vec(&self, col: usize) -> Vec<f64> {
        assert!(col < self.cols);
        (0..self.rows).map(|i| self.values[i * self.cols + col]).collect()
    }

    /// Copies the contiguous column range `[start, end)` into a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> Matrix {
        assert!(start < end && end <= self.cols, "column range {start}..{end} out of bounds");
        let width = end - start;
        let mut values = Vec::with_capacity(self.rows * width);
        for i in 0..self.rows {
            values.extend_from_slice(&self.row(i)[start..end]);
        }
        Matrix { rows: self.rows, cols: width, values }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let (n, k_dim, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        let mut packed = vec![0.0; k_dim * BLOCK];
        // Every output entry starts at zero and accumulates a[i][k] * b[k][j]
        // over k in ascending order, so the result does not depend on the
        // tiling or on how many columns `other` has.
        for j0 in (0..m).step_by(BLOCK) {
            let w = (j0 + BLOCK).min(m) - j0;
            let panels = w.div_ceil(PANEL);
            // panel p holds columns j0 + PANEL*p .. +PANEL, k-major, zero padded
            for p in 0..panels {
                let dst = &mut packed[p * k_dim * PANEL..(p + 1) * k_dim * PANEL];
                let c0 = j0 + p * PANEL;
                let width = PANEL.min(j0 + w - c0);
                for k in 0..k_dim {
                    let row = &mut dst[k * PANEL..(k + 1) * PANEL];
                    row[..width].copy_from_slice(&other.values[k * m + c0..k * m + c0 + width]);
                    row[width..].fill(0.0);
                }
            }
            let mut i = 0;
            while i < n {
                let group = (n - i).min(ROWS);
                let a = &self.values[i * k_dim..(i + group) * k_dim];
                for p in 0..panels {
                    let panel = &packed[p * k_dim * PANEL..(p + 1) * k_dim * PANEL];
                    let tile = if group == ROWS { kernel_full(a, panel, k_dim) } else { kernel_partial(a, panel, k_dim, group) };
                    let c0 = j0 + p * PANEL;
                    let width = PANEL.min(j0 + w - c0);
                    for (g, row) in tile.iter().take(group).enumerate() {
                        out[(i + g) * m + c0..(i + g) * m + c0 + width].copy_from_slice(&row[..width]);
                    }
                }
                i += group;
            }
        }
        Matrix { rows: n, cols: m, values: out }
    }

    pub fn transpose(&self) -> Matrix {
        let mut values = vec![0.0; self.values.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        Matrix { rows: self.cols, cols: self.rows, values }
    }

    pub fn elementwise(&self, other: &Matrix, op: Elementwise) -> Matrix {
        assert_eq!(
            self.shape(),
            other.shape(),
            "elementwise {op:?} shape mismatch"
        );
        let f: fn(f64, f64) -> f64 = match op {
            Elementwise::Add => |a, b| a + b,
            Elementwise::Sub => |a, b| a - b,
            Elementwise::Mul => |a, b| a * b,
        };
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Matrix { rows: self.rows, cols: self.cols, values }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.elementwise(other, Elementwise::Add)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.elementwise(other, Elementwise::Sub)
    }

    /// Hadamard product.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        self.elementwise(other, Elementwise::Mul)
    }

    /// Adds the column vector `bias` to every column.
    pub fn broadcast_add_col(&self, bias: &Matrix) -> Matrix {
        assert_eq!(
            bias.shape(),
            (self.rows, 1),
            "bias must be {}x1, got {}x{}",
            self.rows,
            bias.rows,
            bias.cols
        );
        let mut out = self.clone();
        for (i, &b) in bias.values.iter().enumerate() {
            for v in &mut out.values[i * self.cols..(i + 1) * self.cols] {
                *v += b;
            }
        }
        out
    }

    pub fn scale(&self, k: f64) -> Matrix {
        self.map(|v| v * k)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Sums each row, giving a `rows x 1` column.
    pub fn row_sums(&self) -> Matrix {
        let values = (0..self.rows).map(|i| self.row(i).iter().sum()).collect();
        Matrix { rows: self.rows, cols: 1, values }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Compressed sparse columns: a dense matrix minus a constant background,
/// keeping only entries that differ from the background.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumns {
    rows: usize,
    cols: usize,
    background: f64,
    col_ptr: Vec<usize>,
    row_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseColumns {
    pub fn from_dense(dense: &Matrix, background: f64) -> Self {
        let (rows, cols) = dense.shape();
        let mut col_ptr = Vec::with_capacity(cols + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for j in 0..cols {
            for i in 0..rows {
                let v = dense.values[i * cols + j];
                if v != background {
                    row_idx.push(i as u32);
                    values.push(v - background);
                }
            }
            col_ptr.push(values.len());
        }
        Self { rows, cols, background, col_ptr, row_idx, values }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn background(&self) -> f64 {
        self.background
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `a * self`, equal to `a.matmul(dense)` up to rounding.
    pub fn left_mul(&self, a: &Matrix) -> Matrix {
        assert_eq!(a.cols, self.rows, "left_mul dimension mismatch: {}x{} * {}x{}", a.rows, a.cols, self.rows, self.cols);
        let at = a.transpose();
        let n = a.rows;
        let offset: Vec<f64> = a.row_sums().values.iter().map(|s| s * self.background).collect();
        let mut out_t = vec![0.0; self.cols * n];
        for j in 0..self.cols {
            let out = &mut out_t[j * n..(j + 1) * n];
            out.copy_from_slice(&offset);
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let v = self.values[p];
                for (o, &w) in out.iter_mut().zip(at.row(self.row_idx[p] as usize)) {
                    *o += v * w;
                }
            }
        }
        Matrix { rows: self.cols, cols: n, values: out_t }.transpose()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for v in self.row(i).iter().take(8) {
                write!(f, "{v:10.4} ")?;
            }
            if self.cols > 8 {
                write!(f, "...")?;
            }
            writeln!(f)?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}
