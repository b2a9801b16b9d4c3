//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Criteria run one after another so the timed runs are not
//! competing with each other for cores.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use linstruct::experiments::{
    camera_standin, default_alphas, run_manipulator_experiment, run_random_batch, run_scaling_study, BatchOutcome, BatchSpec,
};
use linstruct::matrix::{fro_norm, matrix_two_norm, CMat};
use linstruct::perturbation::{random_perturbation_with, trial_rng, EntryDist, Sampler};
use linstruct::structurer::{theorem2_hypothesis, theorem3_bound, StructuringResult};
use linstruct::{
    brute_force_first_step_oracle, c64, equivalence_residual, BlockGrid, CoupledSylvesterSystem, MatrixPolynomial,
    PencilPerturbation, StructuringConfig,
};

struct Suite {
    failures: Vec<&'static str>,
}

impl Suite {
    fn check(&mut self, name: &'static str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures.push(name);
        }
    }
}

/// A converged run together with its inputs.
struct Run<'a> {
    poly: &'a MatrixPolynomial,
    e1: &'a PencilPerturbation,
    result: &'a StructuringResult,
}

fn batch_runs(b: &BatchOutcome) -> Vec<Run<'_>> {
    b.trials.iter().map(|t| Run { poly: &t.polynomial, e1: &t.perturbation, result: &t.result }).collect()
}

fn normal(rows: usize, cols: usize, sampler: &Sampler, rng: &mut rand_chacha::ChaCha8Rng, complex: bool) -> CMat {
    let re = sampler.matrix(rows, cols, rng);
    if !complex {
        return re;
    }
    let im = sampler.matrix(rows, cols, rng);
    faer::Mat::from_fn(rows, cols, |i, j| c64::new(re[(i, j)].re, im[(i, j)].re))
}

/// Largest `‖𝓔ᵢ₊₁ᵘ‖ / (αᵢ ‖𝓔ᵢᵘ‖²)` over all recorded steps.
fn worst_decay_ratio(runs: &[Run]) -> f64 {
    runs.iter()
        .filter(|r| r.result.converged())
        .flat_map(|r| r.result.history.windows(2))
        .map(|w| {
            let s = w[0].step.expect("non-terminal record has a step");
            w[1].norm_eu / (s.alpha * w[0].norm_eu * w[0].norm_eu)
        })
        .fold(0.0, f64::max)
}

/// Largest `residual / (1 + ‖C¹ + 𝓔₁‖)` over converged runs.
fn worst_equivalence(runs: &[Run]) -> f64 {
    runs.iter()
        .filter(|r| r.result.converged())
        .map(|r| {
            let c = r.poly.companion_form().unwrap();
            let original = c.perturbed(r.e1).unwrap();
            let result = r.result.final_pencil(r.poly).unwrap();
            equivalence_residual(&r.result.u, &r.result.v, &original, &result).unwrap() / (1.0 + original.fro_norm())
        })
        .fold(0.0, f64::max)
}

/// `(checked, violations, worst ratio)` of `‖𝓔ˢ‖ ≤ ε(1+β)/(1−αε)` over
/// converged runs with `αε < 1`.
fn structured_bound(runs: &[Run]) -> (usize, usize, f64) {
    let (mut checked, mut violations, mut worst) = (0, 0, 0.0f64);
    for r in runs.iter().filter(|r| r.result.converged()) {
        let eps = r.e1.fro_norm();
        let bound = theorem3_bound(eps, r.result.alpha, r.result.beta);
        if !bound.is_finite() || eps == 0.0 {
            continue;
        }
        checked += 1;
        let es = r.result.final_split_norms().0;
        worst = worst.max(es / bound);
        if es > bound * (1.0 + 1e-8) {
            violations += 1;
        }
    }
    (checked, violations, worst)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn batch_line(b: &BatchOutcome, took: Duration) -> String {
    format!(
        "{}/{} converged, max {} iterations, median {}, {:.1}s",
        b.converged_count(),
        b.trials.len(),
        b.max_iterations(),
        b.median_iterations(),
        took.as_secs_f64()
    )
}

fn main() {
    let mut suite = Suite { failures: Vec::new() };
    let cfg = StructuringConfig { tol: 1e-14, ..StructuringConfig::default() };

    // Random batches.
    let (ex1, t1) = timed(|| run_random_batch(&BatchSpec { cfg, ..BatchSpec::example1(100, 1) }).unwrap());
    suite.check(
        "example 1 (3x3, degree 5, 100 trials)",
        ex1.converged_count() == 100 && ex1.max_iterations() <= 8 && ex1.median_iterations() <= 6 && t1 < Duration::from_secs(60),
        batch_line(&ex1, t1),
    );
    let (ex2, t2) = timed(|| run_random_batch(&BatchSpec { cfg, ..BatchSpec::example2(50, 2) }).unwrap());
    suite.check(
        "example 2 (8x8, degree 4, 50 trials)",
        ex2.converged_count() == 50 && ex2.max_iterations() <= 8 && t2 < Duration::from_secs(300),
        batch_line(&ex2, t2),
    );

    let mut random_runs = batch_runs(&ex1);
    random_runs.extend(batch_runs(&ex2));
    let steps: usize = random_runs.iter().filter(|r| r.result.converged()).map(|r| r.result.iterations).sum();
    let decay = worst_decay_ratio(&random_runs);
    suite.check(
        "quadratic decay",
        decay <= 1.0 + 1e-8,
        format!("{steps} steps, max ||E_(i+1)^u|| / (alpha_i ||E_i^u||^2) = {decay:.3e}"),
    );

    // Small perturbations, where alpha * eps < 1 can actually hold.
    let small = run_random_batch(&BatchSpec {
        pert_dist: EntryDist::Uniform { lo: 0.0, hi: 1e-5 },
        cfg,
        ..BatchSpec::example1(100, 3)
    })
    .unwrap();
    let small_runs = batch_runs(&small);

    // Manipulator.
    let mcfg = StructuringConfig::default();
    let manip = run_manipulator_experiment(0.01, 1, &mcfg).unwrap();
    let manip_runs: Vec<Run> =
        manip.iter().map(|m| Run { poly: &m.polynomial, e1: &m.perturbation, result: &m.result }).collect();

    // Scaling study on the 21x16 stand-in.
    let standin = camera_standin(1);
    let inv = 1.0 / standin.norm();
    let (unit_rows, ts) = timed(|| run_scaling_study(&standin, &[[inv; 3]], &[0.001], 1, &mcfg).unwrap());
    let (big_rows, tb) = timed(|| run_scaling_study(&standin, &[[1.0, 1.0, 10.0]], &[0.1], 1, &mcfg).unwrap());

    let mut all_runs: Vec<Run> = Vec::new();
    all_runs.extend(batch_runs(&ex1));
    all_runs.extend(batch_runs(&ex2));
    all_runs.extend(batch_runs(&small));
    all_runs.extend(manip_runs.iter().map(|r| Run { poly: r.poly, e1: r.e1, result: r.result }));
    let converged = all_runs.iter().filter(|r| r.result.converged()).count();
    let eq = worst_equivalence(&all_runs);
    suite.check(
        "equivalence residual",
        eq <= 1e-9,
        format!("{converged} converged runs, max residual / (1 + ||C + E1||) = {eq:.3e}"),
    );

    // Oracle.
    let mut oracle_worst = 0.0f64;
    let mut oracle_count = 0;
    let coeffs = EntryDist::Normal { mean: 0.0, std: 1.0 }.sampler().unwrap();
    for k in 0..24u64 {
        let (m, n, d) = (1 + (k % 2) as usize, 1 + ((k / 2) % 2) as usize, 1 + ((k / 4) % 3) as usize);
        let mut rng = trial_rng(500, k);
        let complex = k % 3 == 0;
        let poly = MatrixPolynomial::new(m, n, (0..=d).map(|_| normal(m, n, &coeffs, &mut rng, complex)).collect())
            .unwrap()
            .normalized();
        let e1 = random_perturbation_with(poly.block_grid().unwrap(), &EntryDist::Uniform { lo: 0.0, hi: 0.1 }, &mut rng).unwrap();
        let (xo, yo) = brute_force_first_step_oracle(&poly, &e1).unwrap();
        let pencil = poly.companion_form().unwrap();
        let (xs, ys, _) = CoupledSylvesterSystem::assemble(&pencil, &e1, &e1.mask()).unwrap().min_norm_solve().unwrap();
        let ex = fro_norm((&xs - &xo).as_ref()) / (1.0 + fro_norm(xo.as_ref()));
        let ey = fro_norm((&ys - &yo).as_ref()) / (1.0 + fro_norm(yo.as_ref()));
        oracle_worst = oracle_worst.max(ex).max(ey);
        oracle_count += 1;
    }
    suite.check(
        "first step matches entrywise oracle",
        oracle_worst <= 1e-8,
        format!("{oracle_count} instances, max relative difference {oracle_worst:.3e}"),
    );

    // Bound on ||X|| ||Y|| for unrestricted systems.
    let mut lemma_violations = 0;
    let mut lemma_worst = 0.0f64;
    let lemma_cases = 120u64;
    for k in 0..lemma_cases {
        let (p, q) = (1 + (k % 4) as usize, 1 + ((k / 4) % 4) as usize);
        let mut rng = trial_rng(600, k);
        let complex = k % 2 == 1;
        let m: Vec<CMat> = (0..6).map(|_| normal(p, q, &coeffs, &mut rng, complex)).collect();
        let sys = CoupledSylvesterSystem::new(m[0].clone(), m[1].clone(), m[2].clone(), m[3].clone(), &m[4], &m[5]).unwrap();
        let s = sys.solve().unwrap();
        let bound = sys.lemma_bound((fro_norm(m[4].as_ref()), fro_norm(m[5].as_ref()))).unwrap();
        let lhs = fro_norm(s.x.as_ref()) * fro_norm(s.y.as_ref());
        lemma_worst = lemma_worst.max(lhs / bound);
        if lhs > bound {
            lemma_violations += 1;
        }
    }
    suite.check(
        "product bound for coupled Sylvester solutions",
        lemma_violations == 0,
        format!("{lemma_cases} systems, {lemma_violations} violations, max ||X|| ||Y|| / bound = {lemma_worst:.3e}"),
    );

    // Structured perturbation bound.
    let (checked, violations, worst) = structured_bound(&all_runs);
    let (small_checked, _, _) = structured_bound(&small_runs);
    suite.check(
        "structured perturbation bound",
        violations == 0 && checked > 0,
        format!(
            "{checked} converged runs with alpha*eps < 1 ({small_checked} from the small-perturbation batch), {violations} violations, max ||E^s|| / bound = {worst:.3e}"
        ),
    );

    // Mask algebra.
    let mut mask_worst = 0.0f64;
    for k in 0..1000u64 {
        let mut rng = trial_rng(700, k);
        let grid = BlockGrid::new(1 + (k % 4) as usize, 1 + ((k / 4) % 4) as usize, 1 + ((k / 16) % 4) as usize).unwrap();
        let dist = if k % 2 == 0 { EntryDist::Normal { mean: 0.0, std: 3.0 } } else { EntryDist::Uniform { lo: -1.0, hi: 1.0 } };
        let e = random_perturbation_with(grid, &dist, &mut rng).unwrap();
        let total = e.fro_norm().powi(2);
        let (s, u) = e.split(&e.mask()).unwrap();
        let parts = s.fro_norm().powi(2) + u.fro_norm().powi(2);
        mask_worst = mask_worst.max((total - parts).abs() / total);
    }
    suite.check(
        "mask algebra",
        mask_worst <= 1e-14,
        format!("1000 perturbations, max | ||E||^2 - ||E^s||^2 - ||E^u||^2 | / ||E||^2 = {mask_worst:.3e}"),
    );

    // Manipulator.
    let two = |m: &CMat| matrix_two_norm(m.as_ref()).unwrap();
    let mut manip_detail = Vec::new();
    let mut manip_pass = true;
    for run in &manip {
        let r = &run.result;
        let (u2, v2) = (two(&r.u), two(&r.v));
        let roundtrip = run.polynomial.add(&r.delta_poly).unwrap().companion_form().unwrap();
        let fin = r.final_pencil(&run.polynomial).unwrap();
        let rt = fro_norm((roundtrip.lam_part() - fin.lam_part()).as_ref()) + fro_norm((roundtrip.const_part() - fin.const_part()).as_ref());
        let label = if run.normalized { "normalized" } else { "raw" };
        manip_detail.push(format!("{label}: {} in {}, ||U||2 {u2:.4}, ||V||2 {v2:.4}, round trip {rt:.1e}", r.status.as_str(), r.iterations));
        if run.normalized {
            manip_pass &= r.converged() && (0.9..=1.1).contains(&u2) && (0.9..=1.1).contains(&v2) && rt <= 1e-12;
        }
    }
    suite.check("manipulator (normalized, entries in (0, 0.01))", manip_pass, manip_detail.join("; "));

    // Scaling study.
    let unit = &unit_rows[0];
    suite.check(
        "scaling: unit norm, range (0, 0.001)",
        unit.converged && unit.ratio < 1.0,
        format!("{} in {}, ||E1|| {:.4}, ||E^s|| {:.4}, ratio {:.3}, {:.1}s", unit.status.as_str(), unit.iterations, unit.norm_e1, unit.norm_es, unit.ratio, ts.as_secs_f64()),
    );
    let big = &big_rows[0];
    let diverged = big.status == linstruct::Status::Diverged;
    suite.check(
        "scaling: alphas (10, 1, 1), range (0, 0.1)",
        diverged || big.ratio > 100.0,
        format!("{} in {}, ||E1|| {:.4}, ratio {:.3}, {:.1}s", big.status.as_str(), big.iterations, big.norm_e1, big.ratio, tb.as_secs_f64()),
    );
    let _ = default_alphas;

    // Perturbation threshold.
    let mut thr_worst = 0.0f64;
    for d in 1..=10usize {
        let poly = MatrixPolynomial::zeros(1, 1, d).unwrap();
        let (_, t) = theorem2_hypothesis(&poly, &PencilPerturbation::zeros(poly.block_grid().unwrap()));
        let direct = PI / (12.0 * (d as f64).powf(1.5));
        thr_worst = thr_worst.max((t - direct).abs());
    }
    suite.check("perturbation threshold", thr_worst <= 1e-15, format!("d = 1..10, max deviation {thr_worst:.1e}"));

    println!();
    if suite.failures.is_empty() {
        println!("all acceptance criteria passed");
    } else {
        println!("{} acceptance criteria failed: {}", suite.failures.len(), suite.failures.join(", "));
        std::process::exit(1);
    }
}
