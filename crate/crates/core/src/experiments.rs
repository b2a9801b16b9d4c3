//! Random batches, the mobile-manipulator polynomial and the scaling study.
//!
//! Every trial draws from its own ChaCha stream `(seed, trial)`, so results do
//! not depend on thread scheduling and batches are reproducible bit for bit.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{write_history_csv, write_scaling_csv, write_summary_csv};
use crate::matrix::{from_real_rows, matrix_two_norm, CMat};
use crate::perturbation::{random_perturbation_with, trial_rng, EntryDist, PencilPerturbation};
use crate::poly::MatrixPolynomial;
use crate::structurer::{structure_linearization, Status, StructuringConfig, StructuringResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchSpec {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub trials: usize,
    pub coeff_dist: EntryDist,
    pub normalize: bool,
    pub pert_dist: EntryDist,
    pub seed: u64,
    pub cfg: StructuringConfig,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            m: 3,
            n: 3,
            d: 5,
            trials: 100,
            coeff_dist: EntryDist::Normal { mean: 0.0, std: 10.0 },
            normalize: true,
            pert_dist: EntryDist::Uniform { lo: 0.0, hi: 0.1 },
            seed: 1,
            cfg: StructuringConfig::default(),
        }
    }
}

impl BatchSpec {
    /// 3×3, degree 5.
    pub fn example1(trials: usize, seed: u64) -> Self {
        Self { trials, seed, ..Self::default() }
    }

    /// 8×8, degree 4.
    pub fn example2(trials: usize, seed: u64) -> Self {
        Self { m: 8, n: 8, d: 4, trials, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trial count must be at least 1".into()));
        }
        if self.m == 0 || self.n == 0 || self.d == 0 {
            return Err(Error::Config(format!("need m, n, d >= 1, got {}x{} degree {}", self.m, self.n, self.d)));
        }
        self.coeff_dist.validate()?;
        self.pert_dist.validate()?;
        self.cfg.validate()
    }

    /// Polynomial and initial perturbation of one trial.
    pub fn generate(&self, trial: usize) -> Result<(MatrixPolynomial, PencilPerturbation)> {
        let mut rng = trial_rng(self.seed, trial as u64);
        let sampler = self.coeff_dist.sampler()?;
        let coeffs = (0..=self.d).map(|_| sampler.matrix(self.m, self.n, &mut rng)).collect();
        let mut poly = MatrixPolynomial::new(self.m, self.n, coeffs)?;
        if self.normalize {
            poly = poly.normalized();
        }
        let pert = random_perturbation_with(poly.block_grid()?, &self.pert_dist, &mut rng)?;
        Ok((poly, pert))
    }
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub trial: usize,
    pub polynomial: MatrixPolynomial,
    pub perturbation: PencilPerturbation,
    pub result: StructuringResult,
}

/// Quantiles of `‖𝓔ᵘ‖` at one iteration index over all trials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryRow {
    pub iter: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Trials that were still running at this index (had a record there).
    pub count: usize,
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    pub spec: BatchSpec,
    pub trials: Vec<TrialOutcome>,
}

impl BatchOutcome {
    pub fn converged_count(&self) -> usize {
        self.trials.iter().filter(|t| t.result.converged()).count()
    }

    pub fn iteration_counts(&self) -> Vec<usize> {
        self.trials.iter().map(|t| t.result.iterations).collect()
    }

    pub fn max_iterations(&self) -> usize {
        self.iteration_counts().into_iter().max().unwrap_or(0)
    }

    /// Lower median of the iteration counts.
    pub fn median_iterations(&self) -> usize {
        let mut c = self.iteration_counts();
        c.sort_unstable();
        c.get((c.len().saturating_sub(1)) / 2).copied().unwrap_or(0)
    }

    /// `(iterations, trials)` pairs in increasing order of iterations.
    pub fn iteration_histogram(&self) -> Vec<(usize, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for c in self.iteration_counts() {
            *h.entry(c).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }

    /// Per-iteration quantiles; a trial that stopped earlier contributes its
    /// final `‖𝓔ᵘ‖`.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let len = self.trials.iter().map(|t| t.result.history.len()).max().unwrap_or(0);
        (0..len)
            .map(|k| {
                let mut vals: Vec<f64> = Vec::with_capacity(self.trials.len());
                let mut count = 0;
                for t in &self.trials {
                    let h = &t.result.history;
                    if let Some(r) = h.get(k) {
                        count += 1;
                        vals.push(r.norm_eu);
                    } else if let Some(r) = h.last() {
                        vals.push(r.norm_eu);
                    }
                }
                vals.sort_by(f64::total_cmp);
                SummaryRow {
                    iter: k,
                    min: quantile(&vals, 0.0),
                    q1: quantile(&vals, 0.25),
                    median: quantile(&vals, 0.5),
                    q3: quantile(&vals, 0.75),
                    max: quantile(&vals, 1.0),
                    count,
                }
            })
            .collect()
    }

    pub fn write_history_csv<W: Write>(&self, w: W) -> Result<()> {
        write_history_csv(w, self.trials.iter().flat_map(|t| t.result.history.iter().map(move |r| (t.trial, r))))
    }

    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        write_summary_csv(w, &self.summary())
    }
}

/// Linear interpolation between order statistics of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Generate, perturb and structure `spec.trials` polynomials in parallel.
/// Outcomes are ordered by trial index.
pub fn run_random_batch(spec: &BatchSpec) -> Result<BatchOutcome> {
    spec.validate()?;
    let trials = (0..spec.trials)
        .into_par_iter()
        .map(|trial| {
            let (polynomial, perturbation) = spec.generate(trial)?;
            let result = structure_linearization(&polynomial, &perturbation, &spec.cfg)?;
            Ok(TrialOutcome { trial, polynomial, perturbation, result })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchOutcome { spec: *spec, trials })
}

/// `Q(λ) = λ²M + λD + K` of the two-dimensional three-link mobile
/// manipulator, `M = [M₀ 0; 0 0]`, `D = [D₀ 0; 0 0]`, `K = [K₀ −F₀ᵀ; F₀ 0]`.
pub fn manipulator_polynomial() -> MatrixPolynomial {
    let m0 = [[18.7532, -7.94493, 7.94494], [-7.94493, 31.8182, -26.8182], [7.94494, -26.8182, 26.8182]];
    let d0 = [[-1.52143, -1.55168, 1.55168], [3.22064, 3.28467, -3.28467], [-3.22064, -3.28467, 3.28467]];
    let k0 = [[67.4894, 69.2393, -69.2393], [69.8124, 1.68624, -1.68617], [-69.8123, -1.68617, -68.2707]];
    let f0 = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
    let padded = |b: &[[f64; 3]; 3]| {
        let mut r = [[0.0; 5]; 5];
        for i in 0..3 {
            r[i][..3].copy_from_slice(&b[i]);
        }
        r
    };
    let mut k = padded(&k0);
    for i in 0..2 {
        for j in 0..3 {
            k[3 + i][j] = f0[i][j];
            k[j][3 + i] = -f0[i][j];
        }
    }
    let coeffs: Vec<CMat> = vec![from_real_rows(&k), from_real_rows(&padded(&d0)), from_real_rows(&padded(&m0))];
    MatrixPolynomial::new(5, 5, coeffs).expect("fixed 5x5 coefficients")
}

#[derive(Clone, Debug)]
pub struct ManipulatorRun {
    pub normalized: bool,
    pub polynomial: MatrixPolynomial,
    pub perturbation: PencilPerturbation,
    pub result: StructuringResult,
}

impl ManipulatorRun {
    pub fn write_history_csv<W: Write>(&self, w: W) -> Result<()> {
        write_history_csv(w, self.result.history.iter().map(|r| (0, r)))
    }
}

/// Structure the manipulator companion pencil under one perturbation with
/// entries uniform on `(0, pert_scale)`, once for the polynomial as given and
/// once for its unit-norm scaling. Returns `[unnormalized, normalized]`.
pub fn run_manipulator_experiment(pert_scale: f64, seed: u64, cfg: &StructuringConfig) -> Result<[ManipulatorRun; 2]> {
    let dist = EntryDist::Uniform { lo: 0.0, hi: pert_scale };
    dist.validate()?;
    let raw = manipulator_polynomial();
    let pert = random_perturbation_with(raw.block_grid()?, &dist, &mut trial_rng(seed, 0))?;
    let run = |normalized: bool| -> Result<ManipulatorRun> {
        let polynomial = if normalized { raw.normalized() } else { raw.clone() };
        let result = structure_linearization(&polynomial, &pert, cfg)?;
        Ok(ManipulatorRun { normalized, polynomial, perturbation: pert.clone(), result })
    };
    Ok([run(false)?, run(true)?])
}

/// One scaling-study case: `Q(λ) = Σ αₖ Aₖ λᵏ` perturbed uniformly on `(0, range_hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingRow {
    /// `[α₀, α₁, α₂]`.
    pub alphas: [f64; 3],
    pub range_hi: f64,
    pub norm_e1: f64,
    /// `‖𝓔ˢ‖` of the final perturbation; NaN unless converged.
    pub norm_es: f64,
    /// `‖𝓔ˢ‖ / ‖𝓔₁‖`, 0 for a zero perturbation; NaN unless converged.
    pub ratio: f64,
    pub norm_u2: f64,
    pub norm_v2: f64,
    pub converged: bool,
    pub status: Status,
    pub iterations: usize,
}

/// Seeded random `21 × 16` quadratic of unit norm.
pub fn camera_standin(seed: u64) -> MatrixPolynomial {
    let mut rng = trial_rng(seed, u64::MAX);
    let sampler = EntryDist::Normal { mean: 0.0, std: 1.0 }.sampler().expect("valid distribution");
    let coeffs = (0..3).map(|_| sampler.matrix(21, 16, &mut rng)).collect();
    MatrixPolynomial::new(21, 16, coeffs).expect("consistent shapes").normalized()
}

/// `[1/‖Q‖; 3]`, `[1, 1, 1]` and `[1, 1, 10]` (the last scales `A₂`).
pub fn default_alphas(base: &MatrixPolynomial) -> Vec<[f64; 3]> {
    let inv = 1.0 / base.norm();
    vec![[inv; 3], [1.0; 3], [1.0, 1.0, 10.0]]
}

pub const DEFAULT_RANGES: [f64; 4] = [0.001, 0.01, 0.1, 2.0];

/// Every combination of `alphas_list` and `pert_ranges` on a quadratic base.
/// Each range uses one perturbation for all scalings.
pub fn run_scaling_study(
    base: &MatrixPolynomial,
    alphas_list: &[[f64; 3]],
    pert_ranges: &[f64],
    seed: u64,
    cfg: &StructuringConfig,
) -> Result<Vec<ScalingRow>> {
    if base.grade() != 2 {
        return Err(Error::Config(format!("scaling study needs a quadratic, got grade {}", base.grade())));
    }
    let grid = base.block_grid()?;
    let perts = pert_ranges
        .iter()
        .enumerate()
        .map(|(k, &hi)| random_perturbation_with(grid, &EntryDist::Uniform { lo: 0.0, hi }, &mut trial_rng(seed, k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let cases: Vec<(usize, [f64; 3])> =
        (0..pert_ranges.len()).flat_map(|k| alphas_list.iter().map(move |a| (k, *a))).collect();
    cases
        .into_par_iter()
        .map(|(k, alphas)| {
            let scalars: Vec<_> = alphas.iter().map(|&a| faer::c64::new(a, 0.0)).collect();
            let poly = base.scale(&scalars)?;
            let pert = &perts[k];
            let r = structure_linearization(&poly, pert, cfg)?;
            Ok(scaling_row(alphas, pert_ranges[k], pert, &r))
        })
        .collect()
}

fn scaling_row(alphas: [f64; 3], range_hi: f64, pert: &PencilPerturbation, r: &StructuringResult) -> ScalingRow {
    let norm_e1 = pert.fro_norm();
    let converged = r.converged();
    let (norm_es, ratio, norm_u2, norm_v2) = if converged {
        let es = r.final_split_norms().0;
        let ratio = if norm_e1 == 0.0 { 0.0 } else { es / norm_e1 };
        let two = |a: &CMat| matrix_two_norm(a.as_ref()).unwrap_or(f64::NAN);
        (es, ratio, two(&r.u), two(&r.v))
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };
    ScalingRow { alphas, range_hi, norm_e1, norm_es, ratio, norm_u2, norm_v2, converged, status: r.status, iterations: r.iterations }
}

pub fn write_scaling_rows<W: Write>(w: W, rows: &[ScalingRow]) -> Result<()> {
    write_scaling_csv(w, rows)
}
