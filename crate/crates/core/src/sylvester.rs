//! Coupled Sylvester least-squares problems.
//!
//! The system
//!
//! ```text
//! A X + Y B = M
//! C X + Y D = N          A, B, C, D, M, N: p × q,  X: q × q,  Y: p × p
//! ```
//!
//! is vectorized column-major as `T [vec X; vec Y] = [vec M; vec N]` with
//!
//! ```text
//! T = [ I_q ⊗ A   Bᵀ ⊗ I_p ]
//!     [ I_q ⊗ C   Dᵀ ⊗ I_p ]
//! ```
//!
//! A system may keep only a subset of the `2pq` rows of `T`. The iteration in
//! [`crate::structurer`] keeps exactly the rows indexing unstructured pencil
//! entries, with `A = B = W + E`, `C = D = W̃ + Ẽ` and right-hand side `-𝓔ᵘ`.
//!
//! Solutions are the minimum-norm least-squares solution `x = T⁺b`, with the
//! pseudoinverse cut at `rank_tol = max(rows, cols) · ε · σ_max`. The default
//! strategy factors `Tᴴ = QR` (or `T = QR` when tall) and accepts the result
//! only when `1/‖R⁻¹‖_F`, a lower bound on `σ_min`, exceeds
//! `max(rows, cols) · ε · ‖T‖_F`, an upper bound on `rank_tol`. In that case
//! every singular value survives the cut, so the QR solution is the
//! pseudoinverse solution. Otherwise the full SVD is used.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::linalg::triangular_inverse::invert_upper_triangular;
use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::traits::ComplexField;
use faer::{c64, Col, ColRef, Conj, Mat, MatRef, Par};

use crate::error::{Error, Result};
use crate::matrix::{all_finite, is_real, CMat};
use crate::perturbation::{Part, PencilPerturbation, StructureMask};
use crate::poly::MatrixPencil;

/// How [`CoupledSylvesterSystem::solve_with`] factors the operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolveStrategy {
    /// Householder QR with a certified full-rank check, SVD otherwise.
    #[default]
    Auto,
    /// Always the truncated SVD.
    Svd,
}

/// Which factorization produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    Qr,
    Svd,
    Empty,
}

#[derive(Clone, Debug)]
pub struct SylvesterSolution {
    /// `q × q`.
    pub x: CMat,
    /// `p × p`.
    pub y: CMat,
    /// `‖T x - b‖₂` over the kept rows.
    pub residual_norm: f64,
    /// Frobenius condition number of the kept-row operator.
    pub kappa: f64,
    pub rank: usize,
    pub method: SolveMethod,
}

impl SylvesterSolution {
    /// `(‖X‖_F² + ‖Y‖_F²)^{1/2}`, the Euclidean norm of the stacked unknowns.
    pub fn norm(&self) -> f64 {
        (self.x.squared_norm_l2() + self.y.squared_norm_l2()).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct CoupledSylvesterSystem {
    a: CMat,
    b: CMat,
    c: CMat,
    d: CMat,
    /// Kept rows of the full operator, strictly increasing; `None` keeps all.
    rows: Option<Vec<usize>>,
    rhs: Vec<c64>,
}

impl CoupledSylvesterSystem {
    /// Full (unrestricted) system `AX + YB = M`, `CX + YD = N`.
    pub fn new(a: CMat, b: CMat, c: CMat, d: CMat, m: &CMat, n: &CMat) -> Result<Self> {
        let shape = a.shape();
        if [b.shape(), c.shape(), d.shape(), m.shape(), n.shape()].iter().any(|&s| s != shape) {
            return Err(Error::Dimension("coupled Sylvester coefficients must share one shape".into()));
        }
        let mut rhs = Vec::with_capacity(2 * shape.0 * shape.1);
        for side in [m, n] {
            for j in 0..shape.1 {
                for i in 0..shape.0 {
                    rhs.push(side[(i, j)]);
                }
            }
        }
        Ok(Self { a, b, c, d, rows: None, rhs })
    }

    /// Row-restricted system of one structuring step: solve
    /// `((W+E)X + Y(W+E), (W̃+Ẽ)X + Y(W̃+Ẽ))ᵘ = -𝓔ᵘ`.
    pub fn assemble(pencil: &MatrixPencil, pert: &PencilPerturbation, mask: &StructureMask) -> Result<Self> {
        let grid = mask.grid();
        if pert.grid() != grid || pencil.nrows() != grid.rows() || pencil.ncols() != grid.cols() {
            return Err(Error::Dimension("pencil, perturbation and mask disagree on dimensions".into()));
        }
        let lam = pencil.lam_part() + pert.lam_part();
        let cst = pencil.const_part() + pert.const_part();
        let (p, q) = (grid.rows(), grid.cols());
        let mut rows = Vec::with_capacity(mask.unstructured_count());
        let mut rhs = Vec::with_capacity(mask.unstructured_count());
        for (offset, part) in [(0, Part::Lam), (p * q, Part::Const)] {
            let e = pert.part(part);
            for (i, j) in mask.unstructured_positions(part) {
                rows.push(offset + j * p + i);
                rhs.push(-e[(i, j)]);
            }
        }
        Ok(Self { a: lam.clone(), b: lam, c: cst.clone(), d: cst, rows: Some(rows), rhs })
    }

    /// `(p, q)`: `X` is `q × q`, `Y` is `p × p`.
    pub fn dims(&self) -> (usize, usize) {
        self.a.shape()
    }

    /// `q² + p²`.
    pub fn unknowns(&self) -> usize {
        let (p, q) = self.dims();
        q * q + p * p
    }

    pub fn kept_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn row_indices(&self) -> Option<&[usize]> {
        self.rows.as_deref()
    }

    pub fn rhs(&self) -> &[c64] {
        &self.rhs
    }

    pub fn rhs_norm(&self) -> f64 {
        self.rhs.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn coefficients(&self) -> [&CMat; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    fn full_row(&self, k: usize) -> usize {
        self.rows.as_ref().map_or(k, |r| r[k])
    }

    /// `q‖A‖² + p‖B‖² + q‖C‖² + p‖D‖²`, equal to `‖T‖_F²` for the full operator.
    pub fn kron_fro_norm_sqr(&self) -> f64 {
        let (p, q) = self.dims();
        q as f64 * (self.a.squared_norm_l2() + self.c.squared_norm_l2())
            + p as f64 * (self.b.squared_norm_l2() + self.d.squared_norm_l2())
    }

    fn build_operator<T: Field>(&self) -> Mat<T> {
        let (p, q) = self.dims();
        let mut t = Mat::<T>::zeros(self.kept_rows(), self.unknowns());
        for k in 0..self.kept_rows() {
            let r = self.full_row(k);
            let (left, right) = if r < p * q { (&self.a, &self.b) } else { (&self.c, &self.d) };
            let idx = r % (p * q);
            let (i, j) = (idx % p, idx / p);
            // (left · X)_{ij} = Σ_l left_{il} X_{lj}
            for l in 0..q {
                t[(k, j * q + l)] = T::from_c64(left[(i, l)]);
            }
            // (Y · right)_{ij} = Σ_l Y_{il} right_{lj}
            for l in 0..p {
                t[(k, q * q + l * p + i)] = T::from_c64(right[(l, j)]);
            }
        }
        t
    }

    /// Dense kept-row operator.
    pub fn operator(&self) -> CMat {
        self.build_operator::<c64>()
    }

    fn is_real(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.d].iter().all(|m| is_real(m.as_ref())) && self.rhs.iter().all(|z| z.im == 0.0)
    }

    fn is_finite(&self) -> bool {
        [&self.a, &self.b, &self.c, &self.d].iter().all(|m| all_finite(m.as_ref()))
            && self.rhs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn solve(&self) -> Result<SylvesterSolution> {
        self.solve_with(SolveStrategy::Auto)
    }

    pub fn solve_with(&self, strategy: SolveStrategy) -> Result<SylvesterSolution> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        if self.is_real() {
            self.solve_in::<f64>(strategy)
        } else {
            self.solve_in::<c64>(strategy)
        }
    }

    fn solve_in<T: Field>(&self, strategy: SolveStrategy) -> Result<SylvesterSolution> {
        let (p, q) = self.dims();
        let op = self.build_operator::<T>();
        let b = Col::<T>::from_fn(self.kept_rows(), |i| T::from_c64(self.rhs[i]));
        let dense = solve_dense(op.as_ref(), b.as_ref(), strategy)?;
        let residual = &op * &dense.x - &b;
        let x = Mat::from_fn(q, q, |i, j| dense.x[j * q + i].to_c64());
        let y = Mat::from_fn(p, p, |i, j| dense.x[q * q + j * p + i].to_c64());
        Ok(SylvesterSolution {
            x,
            y,
            residual_norm: residual.norm_l2(),
            kappa: dense.kappa,
            rank: dense.rank,
            method: dense.method,
        })
    }

    /// Minimum-norm least-squares solution `(X, Y, ‖Tx - b‖)`.
    pub fn min_norm_solve(&self) -> Result<(CMat, CMat, f64)> {
        let s = self.solve()?;
        Ok((s.x, s.y, s.residual_norm))
    }

    /// `κ_F(T) = ‖T‖_F ‖T⁺‖_F` of the kept-row operator; `+∞` when every
    /// singular value is below the rank tolerance.
    pub fn frobenius_condition_number(&self) -> Result<f64> {
        Ok(self.solve()?.kappa)
    }

    /// Upper bound on `‖X‖·‖Y‖` for the minimum-norm solution:
    /// `κ(T)² (‖M‖² + ‖N‖²) / (2(q‖A‖² + p‖B‖² + q‖C‖² + p‖D‖²))`.
    pub fn lemma_bound(&self, rhs_norms: (f64, f64)) -> Result<f64> {
        let rhs_sqr = rhs_norms.0 * rhs_norms.0 + rhs_norms.1 * rhs_norms.1;
        if rhs_sqr == 0.0 {
            return Ok(0.0);
        }
        let kappa = self.frobenius_condition_number()?;
        Ok(lemma_bound_value(kappa, self.kron_fro_norm_sqr(), rhs_sqr))
    }
}

pub(crate) fn lemma_bound_value(kappa: f64, kron_fro_sqr: f64, rhs_sqr: f64) -> f64 {
    if rhs_sqr == 0.0 {
        0.0
    } else if kron_fro_sqr == 0.0 || !kappa.is_finite() {
        f64::INFINITY
    } else {
        kappa * kappa / (2.0 * kron_fro_sqr) * rhs_sqr
    }
}

/// Scalars the dense solver runs over. Real systems are solved in `f64`,
/// which gives the same minimum-norm solution at a fraction of the cost.
trait Field: ComplexField<Real = f64> + Copy {
    fn from_c64(z: c64) -> Self;
    fn to_c64(self) -> c64;
    fn re(self) -> f64;
    fn scale(self, s: f64) -> Self;
}

impl Field for f64 {
    fn from_c64(z: c64) -> Self {
        z.re
    }
    fn to_c64(self) -> c64 {
        c64::new(self, 0.0)
    }
    fn re(self) -> f64 {
        self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

impl Field for c64 {
    fn from_c64(z: c64) -> Self {
        z
    }
    fn to_c64(self) -> c64 {
        self
    }
    fn re(self) -> f64 {
        self.re
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
}

struct DenseSolution<T> {
    x: Col<T>,
    kappa: f64,
    rank: usize,
    method: SolveMethod,
}

fn solve_dense<T: Field>(op: MatRef<'_, T>, b: ColRef<'_, T>, strategy: SolveStrategy) -> Result<DenseSolution<T>> {
    let (rows, cols) = op.shape();
    if rows == 0 || cols == 0 {
        return Ok(DenseSolution { x: Col::zeros(cols), kappa: f64::INFINITY, rank: 0, method: SolveMethod::Empty });
    }
    if strategy == SolveStrategy::Auto {
        if let Some(s) = solve_qr(op, b) {
            return Ok(s);
        }
    }
    solve_svd(op, b)
}

/// Full-rank solve through Householder QR. Returns `None` when full rank
/// cannot be certified against the SVD rank tolerance.
fn solve_qr<T: Field>(op: MatRef<'_, T>, b: ColRef<'_, T>) -> Option<DenseSolution<T>> {
    let (rows, cols) = op.shape();
    let size = rows.min(cols);
    let fro = op.norm_l2();
    let tol_upper = rows.max(cols) as f64 * f64::EPSILON * fro;
    let par = Par::Seq;

    let wide = rows <= cols;
    let qr = if wide { op.adjoint().qr() } else { op.qr() };
    let r = qr.thin_R();
    let mut r_inv = Mat::<T>::zeros(size, size);
    invert_upper_triangular(r_inv.as_mut(), r, par);
    let r_inv_fro = r_inv.norm_l2();
    if !r_inv_fro.is_finite() || r_inv_fro == 0.0 || 1.0 / r_inv_fro <= tol_upper {
        return None;
    }

    let basis = qr.Q_basis();
    let coeff = qr.Q_coeff();
    let n_householder = basis.nrows();
    let x = if wide {
        // T = Rᴴ Qᴴ: solve Rᴴ z = b, then x = Q [z; 0].
        let mut z = Mat::<T>::zeros(cols, 1);
        z.as_mut().submatrix_mut(0, 0, rows, 1).copy_from(b.as_mat());
        solve_lower_triangular_in_place(r.adjoint(), z.as_mut().submatrix_mut(0, 0, rows, 1), par);
        let mut mem = MemBuffer::new(householder::apply_block_householder_sequence_on_the_left_in_place_scratch::<T>(
            n_householder,
            coeff.nrows(),
            1,
        ));
        householder::apply_block_householder_sequence_on_the_left_in_place_with_conj(
            basis,
            coeff,
            Conj::No,
            z.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
        z
    } else {
        // T = QR: x = R⁻¹ (Qᴴ b)[..cols].
        let mut qb = b.as_mat().to_owned();
        let mut mem = MemBuffer::new(householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<T>(
            n_householder,
            coeff.nrows(),
            1,
        ));
        householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
            basis,
            coeff,
            Conj::Yes,
            qb.as_mut(),
            par,
            MemStack::new(&mut mem),
        );
        let mut top = qb.as_ref().submatrix(0, 0, cols, 1).to_owned();
        solve_upper_triangular_in_place(r, top.as_mut(), par);
        top
    };
    Some(DenseSolution {
        x: x.col(0).to_owned(),
        kappa: fro * r_inv_fro,
        rank: size,
        method: SolveMethod::Qr,
    })
}

fn solve_svd<T: Field>(op: MatRef<'_, T>, b: ColRef<'_, T>) -> Result<DenseSolution<T>> {
    let (rows, cols) = op.shape();
    let svd = op.thin_svd().map_err(|_| Error::Svd)?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let sigma_max = (0..s.nrows()).map(|i| s[i].re()).fold(0.0, f64::max);
    let rank_tol = rows.max(cols) as f64 * f64::EPSILON * sigma_max;
    let ub = u.adjoint() * b;
    let mut coef = Col::<T>::zeros(s.nrows());
    let (mut sum_sq, mut sum_inv_sq, mut rank) = (0.0f64, 0.0f64, 0);
    for i in 0..s.nrows() {
        let sigma = s[i].re();
        sum_sq += sigma * sigma;
        if sigma > rank_tol {
            coef[i] = ub[i].scale(1.0 / sigma);
            sum_inv_sq += 1.0 / (sigma * sigma);
            rank += 1;
        }
    }
    let kappa = if rank == 0 { f64::INFINITY } else { sum_sq.sqrt() * sum_inv_sq.sqrt() };
    Ok(DenseSolution { x: v * &coef, kappa, rank, method: SolveMethod::Svd })
}
