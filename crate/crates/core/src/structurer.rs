//! Reduction of a full perturbation of a companion pencil to a structured one.
//!
//! Each step solves the row-restricted coupled Sylvester problem for the
//! current unstructured part `𝓔ᵢᵘ`, applies the strict equivalence
//! `(I + Yᵢ)(C¹ + 𝓔ᵢ)(I + Xᵢ)` to both halves of the pencil and accumulates
//! `U ← (I + Yᵢ)U`, `V ← V(I + Xᵢ)`. The unstructured part of the next
//! perturbation is `(Yᵢ(C¹ + 𝓔ᵢ)Xᵢ)ᵘ`, which shrinks quadratically while
//!
//! ```text
//! αᵢ = κ(Tᵢ)² · max(‖W+Eᵢ‖, ‖W̃+Ẽᵢ‖) / (√2 (R + C) (‖W+Eᵢ‖² + ‖W̃+Ẽᵢ‖²))
//! ```
//!
//! stays bounded, giving `‖𝓔ᵢ₊₁ᵘ‖ ≤ αᵢ ‖𝓔ᵢᵘ‖²`.
//!
//! The perturbation is stored separately from the companion pencil and
//! updated by the increment `Y A + (A + Y A) X`, so rounding at unstructured
//! positions scales with `‖𝓔ᵢᵘ‖` rather than with the unit entries of the
//! identity blocks.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::{fro_norm, identity, matrix_two_norm, singular_value_range, CMat};
use crate::perturbation::{PencilPerturbation, StructureMask};
use crate::poly::{MatrixPencil, MatrixPolynomial};
use crate::sylvester::{CoupledSylvesterSystem, SolveMethod, SolveStrategy};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructuringConfig {
    /// Stop once `‖𝓔ᵢᵘ‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive increases of `‖𝓔ᵢᵘ‖` that count as divergence.
    pub divergence_window: usize,
    /// Keep per-iteration records (including `‖U‖₂`, `‖V‖₂`).
    pub record_history: bool,
    pub strategy: SolveStrategy,
}

impl Default for StructuringConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50, divergence_window: 3, record_history: true, strategy: SolveStrategy::Auto }
    }
}

impl StructuringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.divergence_window == 0 {
            return Err(Error::Config("divergence_window must be at least 1".into()));
        }
        Ok(())
    }
}

/// `‖𝓔ᵢᵘ‖` above `DIVERGENCE_GROWTH · ‖𝓔₁ᵘ‖` is declared divergent.
pub const DIVERGENCE_GROWTH: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    Diverged,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "Converged",
            Status::MaxIterations => "MaxIterations",
            Status::Diverged => "Diverged",
        }
    }
}

/// Diagnostics of the least-squares solve performed from one state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub kappa_t: f64,
    pub alpha: f64,
    pub beta: f64,
    pub residual: f64,
    /// `‖Xᵢ‖_F`.
    pub norm_x: f64,
    /// `‖Yᵢ‖_F`.
    pub norm_y: f64,
    /// `‖W + Eᵢ‖_F`.
    pub norm_lam: f64,
    /// `‖W̃ + Ẽᵢ‖_F`.
    pub norm_const: f64,
    pub method: SolveMethod,
}

/// State after `iter` completed steps, plus the step taken from it (absent
/// for the terminal state).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub norm_eu: f64,
    pub norm_es: f64,
    pub norm_u2: f64,
    pub norm_v2: f64,
    pub step: Option<StepRecord>,
}

#[derive(Clone, Debug)]
pub struct StructuringResult {
    pub status: Status,
    /// Number of least-squares steps taken.
    pub iterations: usize,
    pub final_perturbation: PencilPerturbation,
    /// `E(λ)` read from the structured part of the final perturbation.
    pub delta_poly: MatrixPolynomial,
    /// `R × R`.
    pub u: CMat,
    /// `C × C`.
    pub v: CMat,
    pub history: Vec<IterationRecord>,
    /// Largest `αᵢ` over executed steps (0 when no step ran).
    pub alpha: f64,
    /// Largest `βᵢ` over executed steps (0 when no step ran).
    pub beta: f64,
    /// Why the run stopped without converging.
    pub reason: Option<String>,
}

impl StructuringResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// `(‖𝓔ˢ‖, ‖𝓔ᵘ‖)` of the final perturbation.
    pub fn final_split_norms(&self) -> (f64, f64) {
        self.final_perturbation.split_norms()
    }

    /// `C¹_P + 𝓔_final`.
    pub fn final_pencil(&self, poly: &MatrixPolynomial) -> Result<MatrixPencil> {
        poly.companion_form()?.perturbed(&self.final_perturbation)
    }

    /// Extreme singular values of `U` and `V`.
    pub fn transform_singular_values(&self) -> Result<((f64, f64), (f64, f64))> {
        Ok((singular_value_range(self.u.as_ref())?, singular_value_range(self.v.as_ref())?))
    }
}

fn alpha_beta(kappa: f64, norm_lam: f64, norm_const: f64, rc: f64) -> (f64, f64) {
    let denom = std::f64::consts::SQRT_2 * rc * (norm_lam * norm_lam + norm_const * norm_const);
    let alpha = if denom == 0.0 { f64::INFINITY } else { kappa * kappa * norm_lam.max(norm_const) / denom };
    (alpha, (2.0 / rc).sqrt() * kappa)
}

/// Reduce `C¹_P + 𝓔₁` to `C¹_P + 𝓔_final` with `𝓔_final` structured.
pub fn structure_linearization(
    poly: &MatrixPolynomial,
    e1: &PencilPerturbation,
    cfg: &StructuringConfig,
) -> Result<StructuringResult> {
    cfg.validate()?;
    let pencil = poly.companion_form()?;
    let grid = pencil.grid().expect("companion forms carry a block grid");
    if e1.grid() != grid {
        return Err(Error::Dimension(format!(
            "perturbation grid {:?} does not match companion grid {:?}",
            e1.grid(),
            grid
        )));
    }
    let mask = StructureMask::new(grid);
    let rc = (grid.rows() + grid.cols()) as f64;

    let mut e = e1.clone();
    let mut u = identity(grid.rows());
    let mut v = identity(grid.cols());
    let mut history = Vec::new();
    let (mut alpha_max, mut beta_max) = (0.0f64, 0.0f64);
    let mut iterations = 0;
    let mut increases = 0;
    let mut prev_eu: Option<f64> = None;
    let mut first_eu: Option<f64> = None;

    let (status, reason) = loop {
        let (norm_es, norm_eu) = e.split_norms();
        if let Some(prev) = prev_eu {
            increases = if norm_eu > prev { increases + 1 } else { 0 };
        }
        prev_eu = Some(norm_eu);
        let first = *first_eu.get_or_insert(norm_eu);
        let finite = norm_eu.is_finite() && norm_es.is_finite() && e.is_finite();

        let mut record = IterationRecord { iter: iterations, norm_eu, norm_es, norm_u2: f64::NAN, norm_v2: f64::NAN, step: None };
        if cfg.record_history && finite {
            record.norm_u2 = matrix_two_norm(u.as_ref()).unwrap_or(f64::NAN);
            record.norm_v2 = matrix_two_norm(v.as_ref()).unwrap_or(f64::NAN);
        }

        let stop = if !finite {
            Some((Status::Diverged, Some("non-finite perturbation".to_string())))
        } else if norm_eu <= cfg.tol {
            Some((Status::Converged, None))
        } else if norm_eu > DIVERGENCE_GROWTH * first {
            Some((Status::Diverged, Some(format!("unstructured norm {norm_eu:e} exceeds {DIVERGENCE_GROWTH:e} x initial"))))
        } else if increases >= cfg.divergence_window {
            Some((Status::Diverged, Some(format!("unstructured norm increased {increases} consecutive times"))))
        } else if iterations >= cfg.max_iter {
            Some((Status::MaxIterations, None))
        } else {
            None
        };
        if let Some(stop) = stop {
            if cfg.record_history {
                history.push(record);
            }
            break stop;
        }

        let sys = CoupledSylvesterSystem::assemble(&pencil, &e, &mask)?;
        let sol = match sys.solve_with(cfg.strategy) {
            Ok(sol) => sol,
            Err(err @ (Error::NonFinite | Error::Svd)) => {
                if cfg.record_history {
                    history.push(record);
                }
                break (Status::Diverged, Some(err.to_string()));
            }
            Err(err) => return Err(err),
        };

        let lam = pencil.lam_part() + e.lam_part();
        let cst = pencil.const_part() + e.const_part();
        let (norm_lam, norm_const) = (fro_norm(lam.as_ref()), fro_norm(cst.as_ref()));
        let (alpha, beta) = alpha_beta(sol.kappa, norm_lam, norm_const, rc);
        alpha_max = alpha_max.max(alpha);
        beta_max = beta_max.max(beta);
        record.step = Some(StepRecord {
            kappa_t: sol.kappa,
            alpha,
            beta,
            residual: sol.residual_norm,
            norm_x: fro_norm(sol.x.as_ref()),
            norm_y: fro_norm(sol.y.as_ref()),
            norm_lam,
            norm_const,
            method: sol.method,
        });
        if cfg.record_history {
            history.push(record);
        }

        // (I+Y) A (I+X) - A = Y A + (A + Y A) X
        let increment = |a: &CMat| {
            let ya = &sol.y * a;
            let left = a + &ya;
            ya + &left * &sol.x
        };
        let (d_lam, d_cst) = (increment(&lam), increment(&cst));
        let (e_lam, e_cst) = e.parts_mut();
        *e_lam += &d_lam;
        *e_cst += &d_cst;
        u = &u + &sol.y * &u;
        v = &v + &v * &sol.x;
        iterations += 1;
    };

    let (structured, _) = e.split(&mask)?;
    let delta_poly = structured.extract_polynomial_delta(f64::INFINITY)?;
    Ok(StructuringResult {
        status,
        iterations,
        final_perturbation: e,
        delta_poly,
        u,
        v,
        history,
        alpha: alpha_max,
        beta: beta_max,
        reason,
    })
}

/// Largest recorded `αᵢ`; zero when the history holds no step.
pub fn alpha_estimate(history: &[IterationRecord]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Config("alpha estimate needs a non-empty history".into()));
    }
    Ok(history.iter().filter_map(|r| r.step).map(|s| s.alpha).fold(0.0, f64::max))
}

/// Largest recorded `βᵢ = √(2/(R+C)) κ(Tᵢ)`; zero when the history holds no step.
pub fn beta_estimate(history: &[IterationRecord]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Config("beta estimate needs a non-empty history".into()));
    }
    Ok(history.iter().filter_map(|r| r.step).map(|s| s.beta).fold(0.0, f64::max))
}

/// Perturbation size below which the companion pencil is guaranteed to be
/// strictly equivalent to a structured perturbation: `π / (12 d^{3/2})`.
pub fn theorem2_threshold(grade: usize) -> f64 {
    PI / (12.0 * (grade as f64).powf(1.5))
}

/// `(‖𝓔₁‖ < threshold, threshold)`.
pub fn theorem2_hypothesis(poly: &MatrixPolynomial, e1: &PencilPerturbation) -> (bool, f64) {
    let threshold = theorem2_threshold(poly.grade());
    (e1.fro_norm() < threshold, threshold)
}

/// `4 d (1 + ‖P‖_F) ‖𝓔₁‖`, the growth allowed for the structured perturbation
/// when the hypothesis holds.
pub fn theorem2_growth_bound(poly: &MatrixPolynomial, e1: &PencilPerturbation) -> f64 {
    4.0 * poly.grade() as f64 * (1.0 + poly.norm()) * e1.fro_norm()
}

/// `ε(1+β)/(1-αε)` when `αε < 1`, else `+∞`.
pub fn theorem3_bound(epsilon: f64, alpha: f64, beta: f64) -> f64 {
    if epsilon == 0.0 {
        return 0.0;
    }
    let ae = alpha * epsilon;
    if ae < 1.0 {
        epsilon * (1.0 + beta) / (1.0 - ae)
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturbation::{random_perturbation, EntryDist};
    use crate::poly::BlockGrid;
    use faer::c64;

    fn scale_identity(n: usize, s: f64) -> CMat {
        faer::Mat::from_fn(n, n, |i, j| if i == j { c64::new(s, 0.0) } else { c64::new(0.0, 0.0) })
    }

    fn random_poly(m: usize, n: usize, d: usize, seed: u64) -> MatrixPolynomial {
        let mut rng = crate::perturbation::trial_rng(seed, 0);
        let s = EntryDist::Normal { mean: 0.0, std: 10.0 }.sampler().unwrap();
        MatrixPolynomial::new(m, n, (0..=d).map(|_| s.matrix(m, n, &mut rng)).collect()).unwrap().normalized()
    }

    #[test]
    fn zero_perturbation_converges_immediately() {
        let p = random_poly(3, 3, 5, 1);
        let e1 = PencilPerturbation::zeros(p.block_grid().unwrap());
        let r = structure_linearization(&p, &e1, &StructuringConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.u, identity(15));
        assert_eq!(r.v, identity(15));
        assert_eq!(r.delta_poly.norm(), 0.0);
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn structured_perturbation_is_left_alone() {
        let p = random_poly(2, 3, 3, 2);
        let delta = random_poly(2, 3, 3, 3);
        let e1 = PencilPerturbation::embed(&delta).unwrap();
        let r = structure_linearization(&p, &e1, &StructuringConfig::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.final_perturbation, e1);
        assert_eq!(r.delta_poly, delta);
    }

    #[test]
    fn example_one_instance_converges_quickly() {
        let p = random_poly(3, 3, 5, 7);
        let e1 = random_perturbation(p.block_grid().unwrap(), &EntryDist::Uniform { lo: 0.0, hi: 0.1 }, 7).unwrap();
        let cfg = StructuringConfig { tol: 1e-15, ..Default::default() };
        let r = structure_linearization(&p, &e1, &cfg).unwrap();
        assert_eq!(r.status, Status::Converged, "{:?}", r.history);
        assert!(r.iterations <= 8, "iterations {}", r.iterations);
        assert!(r.final_split_norms().1 <= 1e-15);
    }

    fn check_run_invariants(p: &MatrixPolynomial, e1: &PencilPerturbation, r: &StructuringResult) {
        let c = p.companion_form().unwrap();
        let original = c.perturbed(e1).unwrap();
        let result = r.final_pencil(p).unwrap();
        let res = crate::verify::equivalence_residual(&r.u, &r.v, &original, &result).unwrap();
        assert!(res <= 1e-9 * (1.0 + original.fro_norm()), "equivalence residual {res}");

        let roundtrip = p.add(&r.delta_poly).unwrap().companion_form().unwrap();
        let (_, eu) = r.final_split_norms();
        let diff = fro_norm((roundtrip.lam_part() - result.lam_part()).as_ref())
            + fro_norm((roundtrip.const_part() - result.const_part()).as_ref());
        assert!(diff <= 2.0 * eu + 1e-12, "round trip {diff}");

        let e0 = r.history[0].norm_eu;
        for (k, w) in r.history.windows(2).enumerate() {
            let s = w[0].step.unwrap();
            assert!(w[1].norm_eu <= s.alpha * w[0].norm_eu * w[0].norm_eu * (1.0 + 1e-8), "step {k}");
            // ‖𝓔ᵘ‖ after k+1 steps ≤ α^{2^{k+1}-1} ‖𝓔₁ᵘ‖^{2^{k+1}}
            let pow = 2f64.powi(k as i32 + 1);
            let log_bound = (pow - 1.0) * r.alpha.ln() + pow * e0.ln();
            assert!(w[1].norm_eu.ln() <= log_bound + 1e-8, "chained step {k}");
        }

        let growth = |norms: &mut dyn Iterator<Item = f64>| norms.fold(1.0, |acc, n| acc * (1.0 + n)) - 1.0;
        let steps: Vec<StepRecord> = r.history.iter().filter_map(|h| h.step).collect();
        let du = matrix_two_norm((&r.u - identity(r.u.nrows())).as_ref()).unwrap();
        let dv = matrix_two_norm((&r.v - identity(r.v.nrows())).as_ref()).unwrap();
        assert!(du <= growth(&mut steps.iter().map(|s| s.norm_y)) + 1e-12);
        assert!(dv <= growth(&mut steps.iter().map(|s| s.norm_x)) + 1e-12);
    }

    #[test]
    fn converged_runs_satisfy_invariants() {
        for (m, n, d, seed) in [(3, 3, 5, 11), (2, 3, 2, 12), (3, 2, 3, 13), (1, 1, 4, 14)] {
            let p = random_poly(m, n, d, seed);
            let e1 = random_perturbation(p.block_grid().unwrap(), &EntryDist::Uniform { lo: 0.0, hi: 0.1 }, seed).unwrap();
            let r = structure_linearization(&p, &e1, &StructuringConfig::default()).unwrap();
            assert!(r.converged(), "{m}x{n} d={d}: {:?}", r.status);
            check_run_invariants(&p, &e1, &r);
        }
    }

    #[test]
    fn history_flag_controls_records() {
        let p = random_poly(2, 2, 2, 3);
        let e1 = random_perturbation(p.block_grid().unwrap(), &EntryDist::Uniform { lo: 0.0, hi: 0.1 }, 3).unwrap();
        let full = structure_linearization(&p, &e1, &StructuringConfig::default()).unwrap();
        let bare = structure_linearization(&p, &e1, &StructuringConfig { record_history: false, ..Default::default() }).unwrap();
        assert_eq!(full.history.len(), full.iterations + 1);
        assert!(full.history.last().unwrap().step.is_none());
        assert!(bare.history.is_empty());
        assert_eq!(full.u, bare.u);
        assert_eq!(full.alpha, bare.alpha);
        assert_eq!(alpha_estimate(&full.history).unwrap(), full.alpha);
        assert_eq!(beta_estimate(&full.history).unwrap(), full.beta);
    }

    #[test]
    fn max_iterations_is_reported() {
        let p = random_poly(2, 2, 2, 3);
        let e1 = random_perturbation(p.block_grid().unwrap(), &EntryDist::Uniform { lo: 0.0, hi: 0.1 }, 3).unwrap();
        let r = structure_linearization(&p, &e1, &StructuringConfig { max_iter: 1, ..Default::default() }).unwrap();
        assert_eq!(r.status, Status::MaxIterations);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn complex_polynomial_converges() {
        let p0 = random_poly(2, 2, 3, 4);
        let p = p0.scale(&[c64::new(0.0, 1.0), c64::new(0.6, 0.8), c64::new(1.0, 0.0), c64::new(0.0, -1.0)]).unwrap();
        let g = p.block_grid().unwrap();
        let re = random_perturbation(g, &EntryDist::Uniform { lo: 0.0, hi: 0.05 }, 1).unwrap();
        let im = random_perturbation(g, &EntryDist::Uniform { lo: 0.0, hi: 0.05 }, 2).unwrap();
        let e1 = re.add(&im.scaled(c64::new(0.0, 1.0))).unwrap();
        let r = structure_linearization(&p, &e1, &StructuringConfig::default()).unwrap();
        assert!(r.converged(), "{:?}", r.history);
    }

    #[test]
    fn rejects_mismatched_perturbation() {
        let p = random_poly(2, 2, 2, 1);
        let e1 = PencilPerturbation::zeros(BlockGrid::new(2, 2, 3).unwrap());
        assert!(structure_linearization(&p, &e1, &StructuringConfig::default()).is_err());
    }

    #[test]
    fn invalid_config() {
        assert!(StructuringConfig { tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(StructuringConfig { max_iter: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn huge_perturbation_does_not_converge() {
        let p = random_poly(2, 2, 3, 5);
        let e1 = random_perturbation(p.block_grid().unwrap(), &EntryDist::Normal { mean: 0.0, std: 50.0 }, 5).unwrap();
        let cfg = StructuringConfig { max_iter: 30, ..Default::default() };
        let r = structure_linearization(&p, &e1, &cfg).unwrap();
        assert_ne!(r.status, Status::Converged);
    }

    #[test]
    fn alpha_beta_formulas() {
        // κ = 1, ‖W+E‖ = ‖W̃+Ẽ‖ = 1, R = C = 1: α = 1/(√2·2·2), β = 1.
        let (a, b) = alpha_beta(1.0, 1.0, 1.0, 2.0);
        assert!((a - 1.0 / (std::f64::consts::SQRT_2 * 4.0)).abs() < 1e-16);
        assert!((b - 1.0).abs() < 1e-16);
        let rec = |kappa: f64| IterationRecord {
            iter: 0,
            norm_eu: 1.0,
            norm_es: 0.0,
            norm_u2: 1.0,
            norm_v2: 1.0,
            step: Some(StepRecord {
                kappa_t: kappa,
                alpha: alpha_beta(kappa, 1.0, 1.0, 10.0).0,
                beta: alpha_beta(kappa, 1.0, 1.0, 10.0).1,
                residual: 0.0,
                norm_x: 0.0,
                norm_y: 0.0,
                norm_lam: 1.0,
                norm_const: 1.0,
                method: SolveMethod::Qr,
            }),
        };
        let h = [rec(3.0), rec(3.0)];
        assert!((beta_estimate(&h).unwrap() - (0.2f64).sqrt() * 3.0).abs() < 1e-15);
        assert!(alpha_estimate(&[]).is_err());
    }

    #[test]
    fn theorem_thresholds() {
        assert!((theorem2_threshold(1) - 0.261_799_387_799_149_4).abs() < 1e-15);
        assert!((theorem2_threshold(4) - PI / 96.0).abs() < 1e-16);
        let p = random_poly(1, 1, 2, 1);
        let zero = PencilPerturbation::zeros(p.block_grid().unwrap());
        assert!(theorem2_hypothesis(&p, &zero).0);
        assert_eq!(theorem2_growth_bound(&p, &zero), 0.0);
    }

    #[test]
    fn growth_bound_arithmetic() {
        // d = 2, ‖P‖ = 1, ‖𝓔₁‖ = 0.01 → 0.16
        let p = MatrixPolynomial::new(1, 1, vec![scale_identity(1, 0.0), scale_identity(1, 0.0), scale_identity(1, 1.0)]).unwrap();
        let g = p.block_grid().unwrap();
        let mut lam = faer::Mat::zeros(g.rows(), g.cols());
        lam[(1, 1)] = c64::new(0.01, 0.0);
        let e1 = PencilPerturbation::new(g, lam, faer::Mat::zeros(g.rows(), g.cols())).unwrap();
        assert!((theorem2_growth_bound(&p, &e1) - 0.16).abs() < 1e-15);
    }

    #[test]
    fn theorem3_cases() {
        assert_eq!(theorem3_bound(0.0, 5.0, 2.0), 0.0);
        // αε = 1/2 → 2(1+β)ε
        assert!((theorem3_bound(0.1, 5.0, 2.0) - 2.0 * 3.0 * 0.1).abs() < 1e-15);
        assert_eq!(theorem3_bound(0.1, 10.0, 2.0), f64::INFINITY);
        assert_eq!(theorem3_bound(0.1, 20.0, 2.0), f64::INFINITY);
    }
}
