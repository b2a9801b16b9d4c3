//! Matrix polynomials, matrix pencils and the first companion form.
//!
//! A polynomial `P(λ) = λ^d A_d + … + λ A_1 + A_0` is stored by its grade `d`
//! and the coefficient list `[A_0, …, A_d]`. The grade is explicit, so a zero
//! leading coefficient is representable.
//!
//! The first companion form of an `m × n` polynomial of grade `d ≥ 1` is the
//! `(m + (d-1)n) × dn` pencil `λW + W̃` with
//!
//! ```text
//! W = diag(A_d, I_n, …, I_n)      W̃ = [ A_{d-1} A_{d-2} … A_0 ]
//!                                     [  -I_n     0    …  0  ]
//!                                     [   0     -I_n   …  0  ]
//!                                     [             …        ]
//! ```

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::matrix::{fro_norm, zeros, CMat};

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPolynomial {
    rows: usize,
    cols: usize,
    coeffs: Vec<CMat>,
}

impl MatrixPolynomial {
    /// Build from `[A_0, …, A_d]`; the grade is `coeffs.len() - 1`.
    pub fn new(rows: usize, cols: usize, coeffs: Vec<CMat>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("polynomial dimensions must be positive".into()));
        }
        if coeffs.is_empty() {
            return Err(Error::Dimension("polynomial needs at least one coefficient".into()));
        }
        for (k, a) in coeffs.iter().enumerate() {
            if a.nrows() != rows || a.ncols() != cols {
                return Err(Error::Dimension(format!(
                    "coefficient A_{k} is {}x{}, expected {rows}x{cols}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        Ok(Self { rows, cols, coeffs })
    }

    pub fn zeros(rows: usize, cols: usize, grade: usize) -> Result<Self> {
        Self::new(rows, cols, vec![zeros(rows, cols); grade + 1])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn grade(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Largest `k` with `A_k ≠ 0`, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|a| fro_norm(a.as_ref()) != 0.0)
    }

    /// Coefficient `A_k`.
    pub fn coeff(&self, k: usize) -> &CMat {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[CMat] {
        &self.coeffs
    }

    /// `(Σ_k ‖A_k‖_F²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|a| a.squared_norm_l2())
            .sum::<f64>()
            .sqrt()
    }

    /// Multiply coefficient `k` by `alphas[k]`.
    pub fn scale(&self, alphas: &[c64]) -> Result<Self> {
        if alphas.len() != self.coeffs.len() {
            return Err(Error::ScalarCount { expected: self.coeffs.len(), got: alphas.len() });
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(alphas)
            .map(|(a, &s)| if s == c64::new(1.0, 0.0) { a.clone() } else { Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s) })
            .collect();
        Ok(Self { rows: self.rows, cols: self.cols, coeffs })
    }

    /// Rescale to unit norm. The zero polynomial is returned unchanged.
    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        if norm == 0.0 {
            return self.clone();
        }
        let s = vec![c64::new(1.0 / norm, 0.0); self.coeffs.len()];
        self.scale(&s).expect("one scalar per coefficient")
    }

    /// Coefficientwise sum; both operands must share dimensions and grade.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols || self.grade() != other.grade() {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} grade-{} and {}x{} grade-{} polynomials",
                self.rows,
                self.cols,
                self.grade(),
                other.rows,
                other.cols,
                other.grade()
            )));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, coeffs })
    }

    pub fn block_grid(&self) -> Result<BlockGrid> {
        BlockGrid::new(self.rows, self.cols, self.grade())
    }

    /// First companion form `λW + W̃`.
    pub fn companion_form(&self) -> Result<MatrixPencil> {
        let grid = self.block_grid()?;
        let (m, n, d) = (grid.m, grid.n, grid.grade);
        let mut lam = zeros(grid.rows(), grid.cols());
        let mut cst = zeros(grid.rows(), grid.cols());
        lam.as_mut().submatrix_mut(0, 0, m, n).copy_from(self.coeffs[d].as_ref());
        for j in 0..d {
            cst.as_mut()
                .submatrix_mut(0, j * n, m, n)
                .copy_from(self.coeffs[d - 1 - j].as_ref());
        }
        for k in 1..d {
            let r0 = m + (k - 1) * n;
            for t in 0..n {
                lam[(r0 + t, k * n + t)] = c64::new(1.0, 0.0);
                cst[(r0 + t, (k - 1) * n + t)] = c64::new(-1.0, 0.0);
            }
        }
        Ok(MatrixPencil { lam, cst, grid: Some(grid) })
    }
}

/// Block layout of the companion form of an `m × n` grade-`d` polynomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockGrid {
    pub m: usize,
    pub n: usize,
    pub grade: usize,
}

impl BlockGrid {
    pub fn new(m: usize, n: usize, grade: usize) -> Result<Self> {
        if grade == 0 {
            return Err(Error::GradeZero);
        }
        if m == 0 || n == 0 {
            return Err(Error::Dimension("block grid needs positive m and n".into()));
        }
        Ok(Self { m, n, grade })
    }

    /// `R = m + (d-1)n`.
    pub fn rows(&self) -> usize {
        self.m + (self.grade - 1) * self.n
    }

    /// `C = dn`.
    pub fn cols(&self) -> usize {
        self.grade * self.n
    }

    /// `[m, n, …, n]` with `d - 1` trailing `n`s.
    pub fn row_blocks(&self) -> Vec<usize> {
        std::iter::once(self.m).chain(std::iter::repeat_n(self.n, self.grade - 1)).collect()
    }

    pub fn col_blocks(&self) -> Vec<usize> {
        vec![self.n; self.grade]
    }
}

/// The pencil `λW + W̃`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPencil {
    lam: CMat,
    cst: CMat,
    grid: Option<BlockGrid>,
}

impl MatrixPencil {
    pub fn new(lam: CMat, cst: CMat) -> Result<Self> {
        if lam.nrows() != cst.nrows() || lam.ncols() != cst.ncols() {
            return Err(Error::Dimension(format!(
                "pencil parts are {}x{} and {}x{}",
                lam.nrows(),
                lam.ncols(),
                cst.nrows(),
                cst.ncols()
            )));
        }
        Ok(Self { lam, cst, grid: None })
    }

    /// Attach companion block metadata; dimensions must agree with the grid.
    pub fn with_grid(self, grid: BlockGrid) -> Result<Self> {
        if self.lam.nrows() != grid.rows() || self.lam.ncols() != grid.cols() {
            return Err(Error::Dimension("pencil does not match block grid".into()));
        }
        Ok(Self { grid: Some(grid), ..self })
    }

    /// `W`.
    pub fn lam_part(&self) -> &CMat {
        &self.lam
    }

    /// `W̃`.
    pub fn const_part(&self) -> &CMat {
        &self.cst
    }

    pub fn grid(&self) -> Option<BlockGrid> {
        self.grid
    }

    pub fn nrows(&self) -> usize {
        self.lam.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.lam.ncols()
    }

    /// `(‖W‖_F² + ‖W̃‖_F²)^{1/2}`.
    pub fn fro_norm(&self) -> f64 {
        (self.lam.squared_norm_l2() + self.cst.squared_norm_l2()).sqrt()
    }

    /// `(W + E, W̃ + Ẽ)`.
    pub fn perturbed(&self, pert: &crate::perturbation::PencilPerturbation) -> Result<Self> {
        if pert.lam_part().shape() != self.lam.shape() {
            return Err(Error::Dimension("perturbation does not match pencil".into()));
        }
        Ok(Self { lam: &self.lam + pert.lam_part(), cst: &self.cst + pert.const_part(), grid: self.grid })
    }
}
