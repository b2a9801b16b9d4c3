//! Perturbations `(E, Ẽ)` of companion pencils and their structured /
//! unstructured split.
//!
//! Structured positions are the polynomial-coefficient slots of the companion
//! form: the `m × n` block `(1,1)` of the λ-part (the `F_d` slot) and the whole
//! first block row of the constant part (the `F_{d-1} … F_0` slots). Every
//! other entry, i.e. everything touching the identity and zero scaffolding,
//! is unstructured. The mask is entrywise, so rectangular polynomials need no
//! special handling.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{Error, Result};
use crate::matrix::{zeros, CMat};
use crate::poly::{BlockGrid, MatrixPolynomial};

/// Default absolute per-entry tolerance for certifying a perturbation as
/// structured.
pub const TOL_MASK: f64 = 1e-13;

/// Which half of the pencil an entry belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Lam,
    Const,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructureMask {
    grid: BlockGrid,
}

impl StructureMask {
    pub fn new(grid: BlockGrid) -> Self {
        Self { grid }
    }

    pub fn grid(&self) -> BlockGrid {
        self.grid
    }

    pub fn is_structured(&self, part: Part, i: usize, j: usize) -> bool {
        match part {
            Part::Lam => i < self.grid.m && j < self.grid.n,
            Part::Const => i < self.grid.m,
        }
    }

    /// Number of structured positions over both parts: `mn + m·dn`.
    pub fn structured_count(&self) -> usize {
        self.grid.m * self.grid.n + self.grid.m * self.grid.cols()
    }

    pub fn unstructured_count(&self) -> usize {
        2 * self.grid.rows() * self.grid.cols() - self.structured_count()
    }

    /// Unstructured `(i, j)` positions of one part in column-major order,
    /// which is the order of `vec(·)`.
    pub fn unstructured_positions(&self, part: Part) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (rows, cols) = (self.grid.rows(), self.grid.cols());
        (0..cols).flat_map(move |j| (0..rows).map(move |i| (i, j))).filter(move |&(i, j)| !self.is_structured(part, i, j))
    }
}

/// A perturbation `(E, Ẽ)` of a companion pencil with block grid `grid`.
#[derive(Clone, Debug, PartialEq)]
pub struct PencilPerturbation {
    lam: CMat,
    cst: CMat,
    grid: BlockGrid,
}

impl PencilPerturbation {
    pub fn new(grid: BlockGrid, lam: CMat, cst: CMat) -> Result<Self> {
        let shape = (grid.rows(), grid.cols());
        if lam.shape() != shape || cst.shape() != shape {
            return Err(Error::Dimension(format!(
                "perturbation parts are {:?} and {:?}, grid requires {shape:?}",
                lam.shape(),
                cst.shape()
            )));
        }
        Ok(Self { lam, cst, grid })
    }

    pub fn zeros(grid: BlockGrid) -> Self {
        Self { lam: zeros(grid.rows(), grid.cols()), cst: zeros(grid.rows(), grid.cols()), grid }
    }

    /// Place the coefficients of `delta` into the structured slots.
    pub fn embed(delta: &MatrixPolynomial) -> Result<Self> {
        let grid = delta.block_grid()?;
        let (m, n, d) = (grid.m, grid.n, grid.grade);
        let mut out = Self::zeros(grid);
        out.lam.as_mut().submatrix_mut(0, 0, m, n).copy_from(delta.coeff(d).as_ref());
        for j in 0..d {
            out.cst.as_mut().submatrix_mut(0, j * n, m, n).copy_from(delta.coeff(d - 1 - j).as_ref());
        }
        Ok(out)
    }

    pub fn lam_part(&self) -> &CMat {
        &self.lam
    }

    pub fn const_part(&self) -> &CMat {
        &self.cst
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut CMat, &mut CMat) {
        (&mut self.lam, &mut self.cst)
    }

    pub fn part(&self, part: Part) -> &CMat {
        match part {
            Part::Lam => &self.lam,
            Part::Const => &self.cst,
        }
    }

    pub fn grid(&self) -> BlockGrid {
        self.grid
    }

    pub fn mask(&self) -> StructureMask {
        StructureMask::new(self.grid)
    }

    /// `(‖E‖_F² + ‖Ẽ‖_F²)^{1/2}`.
    pub fn fro_norm(&self) -> f64 {
        (self.lam.squared_norm_l2() + self.cst.squared_norm_l2()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        crate::matrix::all_finite(self.lam.as_ref()) && crate::matrix::all_finite(self.cst.as_ref())
    }

    pub fn scaled(&self, s: c64) -> Self {
        let f = |a: &CMat| Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s);
        Self { lam: f(&self.lam), cst: f(&self.cst), grid: self.grid }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Dimension("perturbations live on different block grids".into()));
        }
        Ok(Self { lam: &self.lam + &other.lam, cst: &self.cst + &other.cst, grid: self.grid })
    }

    /// Split into `(structured, unstructured)`. The two parts have disjoint
    /// supports and sum to `self` exactly.
    pub fn split(&self, mask: &StructureMask) -> Result<(Self, Self)> {
        if mask.grid() != self.grid {
            return Err(Error::Dimension("structure mask and perturbation grids differ".into()));
        }
        let pick = |a: &CMat, part: Part, keep_structured: bool| {
            Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
                if mask.is_structured(part, i, j) == keep_structured {
                    a[(i, j)]
                } else {
                    c64::new(0.0, 0.0)
                }
            })
        };
        let structured = Self { lam: pick(&self.lam, Part::Lam, true), cst: pick(&self.cst, Part::Const, true), grid: self.grid };
        let unstructured = Self { lam: pick(&self.lam, Part::Lam, false), cst: pick(&self.cst, Part::Const, false), grid: self.grid };
        Ok((structured, unstructured))
    }

    /// Norms of the structured and unstructured parts without materializing them.
    pub fn split_norms(&self) -> (f64, f64) {
        let mask = self.mask();
        let (mut s, mut u) = (0.0, 0.0);
        for (part, a) in [(Part::Lam, &self.lam), (Part::Const, &self.cst)] {
            for j in 0..a.ncols() {
                for i in 0..a.nrows() {
                    let v = a[(i, j)].norm_sqr();
                    if mask.is_structured(part, i, j) {
                        s += v;
                    } else {
                        u += v;
                    }
                }
            }
        }
        (s.sqrt(), u.sqrt())
    }

    /// Largest absolute value at an unstructured position.
    /// NaN if any unstructured entry is NaN.
    pub fn unstructured_max_abs(&self) -> f64 {
        let mask = self.mask();
        [Part::Lam, Part::Const]
            .into_iter()
            .flat_map(|p| mask.unstructured_positions(p).map(move |(i, j)| self.part(p)[(i, j)].norm()))
            .fold(0.0, |acc: f64, x| if acc.is_nan() || x.is_nan() { f64::NAN } else { acc.max(x) })
    }

    /// Read `E(λ)` back from the structured slots: `F_d` from the λ-part
    /// block `(1,1)`, `F_{d-1} … F_0` from the constant first block row.
    pub fn extract_polynomial_delta(&self, tol_mask: f64) -> Result<MatrixPolynomial> {
        let residue = self.unstructured_max_abs();
        if !(residue <= tol_mask) {
            return Err(Error::NotStructured { residue, tol: tol_mask });
        }
        let (m, n, d) = (self.grid.m, self.grid.n, self.grid.grade);
        let mut coeffs = vec![zeros(m, n); d + 1];
        coeffs[d] = self.lam.as_ref().submatrix(0, 0, m, n).to_owned();
        for j in 0..d {
            coeffs[d - 1 - j] = self.cst.as_ref().submatrix(0, j * n, m, n).to_owned();
        }
        MatrixPolynomial::new(m, n, coeffs)
    }
}

/// Entry distribution for random coefficients and perturbations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EntryDist {
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl EntryDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EntryDist::Normal { mean, std } if mean.is_finite() && std.is_finite() && std >= 0.0 => Ok(()),
            EntryDist::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            other => Err(Error::Distribution(format!("{other:?}"))),
        }
    }

    /// A sampler for real values; degenerate distributions yield constants.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        Ok(match *self {
            EntryDist::Normal { mean, std } if std == 0.0 => Sampler::Constant(mean),
            EntryDist::Uniform { lo, hi } if lo == hi => Sampler::Constant(lo),
            EntryDist::Normal { mean, std } => {
                Sampler::Normal(Normal::new(mean, std).map_err(|e| Error::Distribution(e.to_string()))?)
            }
            EntryDist::Uniform { lo, hi } => {
                Sampler::Uniform(Uniform::new(lo, hi).map_err(|e| Error::Distribution(e.to_string()))?)
            }
        })
    }
}

#[derive(Clone, Debug)]
pub enum Sampler {
    Constant(f64),
    Normal(Normal<f64>),
    Uniform(Uniform<f64>),
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Constant(c) => *c,
            Sampler::Normal(d) => d.sample(rng),
            Sampler::Uniform(d) => d.sample(rng),
        }
    }

    /// Real `rows × cols` matrix filled in row-major order.
    pub fn matrix<R: Rng + ?Sized>(&self, rows: usize, cols: usize, rng: &mut R) -> CMat {
        let mut a = zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                a[(i, j)] = c64::new(self.sample(rng), 0.0);
            }
        }
        a
    }
}

/// Generator used everywhere randomness is needed: ChaCha8 keyed by `seed`,
/// with the trial index selecting an independent stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Every entry of `E` and `Ẽ` i.i.d. from `dist` (λ-part first, row-major).
pub fn random_perturbation(grid: BlockGrid, dist: &EntryDist, seed: u64) -> Result<PencilPerturbation> {
    random_perturbation_with(grid, dist, &mut trial_rng(seed, 0))
}

pub fn random_perturbation_with<R: Rng + ?Sized>(grid: BlockGrid, dist: &EntryDist, rng: &mut R) -> Result<PencilPerturbation> {
    let s = dist.sampler()?;
    let lam = s.matrix(grid.rows(), grid.cols(), rng);
    let cst = s.matrix(grid.rows(), grid.cols(), rng);
    PencilPerturbation::new(grid, lam, cst)
}
