//! `linstruct` command-line front end.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linstruct::experiments::{
    camera_standin, default_alphas, manipulator_polynomial, run_manipulator_experiment, run_random_batch,
    run_scaling_study, write_scaling_rows, BatchSpec, DEFAULT_RANGES,
};
use linstruct::io::{read_perturbation, read_polynomial, read_result, result_to_json, write_history_csv, write_perturbation, write_polynomial};
use linstruct::matrix::matrix_two_norm;
use linstruct::structurer::{theorem3_bound, Status};
use linstruct::{
    equivalence_residual, nonsingularity_report, random_perturbation, structure_linearization, EntryDist, MatrixPolynomial,
    PencilPerturbation, SolveStrategy, StructuringConfig,
};

const EXIT_ERROR: u8 = 1;
const EXIT_MAX_ITER: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_VERIFY_FAILED: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "linstruct", version, about = "Structure perturbations of companion linearizations of matrix polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reduce a pencil perturbation to a polynomial perturbation.
    Structure(StructureArgs),
    /// Reproduce the numerical experiments.
    #[command(subcommand)]
    Experiment(Experiment),
    /// Re-check a result file against its inputs.
    Verify(VerifyArgs),
    /// Write input files for `structure`.
    Generate(GenerateArgs),
}

#[derive(Args, Debug, Clone, Copy)]
struct SolverArgs {
    /// Stop once the unstructured part has Frobenius norm at most this.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Consecutive increases of the unstructured norm treated as divergence.
    #[arg(long, default_value_t = 3)]
    divergence_window: usize,
    #[arg(long, value_enum, default_value_t = Strategy::Auto)]
    strategy: Strategy,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Strategy {
    Auto,
    Svd,
}

impl SolverArgs {
    fn config(&self) -> StructuringConfig {
        StructuringConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            divergence_window: self.divergence_window,
            record_history: true,
            strategy: match self.strategy {
                Strategy::Auto => SolveStrategy::Auto,
                Strategy::Svd => SolveStrategy::Svd,
            },
        }
    }
}

#[derive(Args, Debug)]
struct StructureArgs {
    /// Polynomial JSON file.
    #[arg(long)]
    poly: PathBuf,
    /// Pencil perturbation JSON file.
    #[arg(long)]
    pert: PathBuf,
    /// Directory for result.json and history.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Subcommand, Debug)]
enum Experiment {
    /// Batches of random polynomials.
    Random(RandomArgs),
    /// The three-link mobile manipulator, with and without normalization.
    Manipulator(ManipulatorArgs),
    /// Coefficient scaling against perturbation size.
    Scaling(ScalingArgs),
}

#[derive(Args, Debug)]
struct RandomArgs {
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Run 1000 trials.
    #[arg(long, conflicts_with = "trials")]
    full_scale: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Standard deviation of the normal coefficient entries.
    #[arg(long, default_value_t = 10.0)]
    coeff_std: f64,
    /// Perturbation entries are uniform on (0, pert).
    #[arg(long, default_value_t = 0.1)]
    pert: f64,
    #[arg(long, overrides_with = "no_normalize")]
    normalize: bool,
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct ManipulatorArgs {
    /// Perturbation entries are uniform on (0, pert).
    #[arg(long, default_value_t = 0.01)]
    pert: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ScalingBase {
    Standin,
    Manipulator,
    Both,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ScalingBase::Both)]
    base: ScalingBase,
    /// Upper ends of the perturbation ranges.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RANGES)]
    ranges: Vec<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// result.json written by `structure`.
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    poly: PathBuf,
    #[arg(long)]
    pert: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum GenerateKind {
    Random,
    Manipulator,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = GenerateKind::Random)]
    kind: GenerateKind,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Perturbation entries are uniform on (0, pert).
    #[arg(long, default_value_t = 0.1)]
    pert: f64,
    /// Scale the polynomial to unit norm.
    #[arg(long)]
    normalize: bool,
    #[arg(long)]
    poly_out: PathBuf,
    #[arg(long)]
    pert_out: PathBuf,
}

type CmdResult = Result<u8, String>;

fn err<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{context}: {e}")
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, String> {
    fs::create_dir_all(dir).map_err(err(&format!("creating {}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| format!("creating {}: {e}", path.display()))
}

fn exit_code(status: Status) -> u8 {
    match status {
        Status::Converged => 0,
        Status::MaxIterations => EXIT_MAX_ITER,
        Status::Diverged => EXIT_DIVERGED,
    }
}

fn cmd_structure(a: &StructureArgs) -> CmdResult {
    let poly = read_polynomial(&a.poly).map_err(err(&format!("reading {}", a.poly.display())))?;
    let pert = read_perturbation(&a.pert).map_err(err(&format!("reading {}", a.pert.display())))?;
    let cfg = a.solver.config();
    let r = structure_linearization(&poly, &pert, &cfg).map_err(err("structuring"))?;

    let json = result_to_json(&r, &cfg).map_err(err("serializing result"))?;
    fs::create_dir_all(&a.out).map_err(err("creating output directory"))?;
    fs::write(a.out.join("result.json"), json).map_err(err("writing result.json"))?;
    write_history_csv(create(&a.out, "history.csv")?, r.history.iter().map(|h| (0, h))).map_err(err("writing history.csv"))?;

    let companion = poly.companion_form().map_err(err("companion form"))?;
    let original = companion.perturbed(&pert).map_err(err("perturbing"))?;
    let result = r.final_pencil(&poly).map_err(err("final pencil"))?;
    let residual = equivalence_residual(&r.u, &r.v, &original, &result).map_err(err("equivalence residual"))?;
    let (es, eu) = r.final_split_norms();
    println!("status              {}", r.status.as_str());
    if let Some(reason) = &r.reason {
        println!("reason              {reason}");
    }
    println!("iterations          {}", r.iterations);
    println!("||E1||              {:.6e}", pert.fro_norm());
    println!("||E^u|| final       {eu:.6e}");
    println!("||E^s|| final       {es:.6e}");
    println!("||delta_poly||      {:.6e}", r.delta_poly.norm());
    println!("||U||_2             {:.6e}", matrix_two_norm(r.u.as_ref()).unwrap_or(f64::NAN));
    println!("||V||_2             {:.6e}", matrix_two_norm(r.v.as_ref()).unwrap_or(f64::NAN));
    println!("alpha               {:.6e}", r.alpha);
    println!("equivalence residual {residual:.6e}");
    println!("wrote {}", a.out.join("result.json").display());
    Ok(exit_code(r.status))
}

fn cmd_random(a: &RandomArgs) -> CmdResult {
    let spec = BatchSpec {
        m: a.m,
        n: a.n,
        d: a.d,
        trials: if a.full_scale { 1000 } else { a.trials },
        coeff_dist: EntryDist::Normal { mean: 0.0, std: a.coeff_std },
        normalize: !a.no_normalize,
        pert_dist: EntryDist::Uniform { lo: 0.0, hi: a.pert },
        seed: a.seed,
        cfg: a.solver.config(),
    };
    let out = run_random_batch(&spec).map_err(err("random batch"))?;
    out.write_history_csv(create(&a.out, "random_history.csv")?).map_err(err("writing history"))?;
    out.write_summary_csv(create(&a.out, "random_summary.csv")?).map_err(err("writing summary"))?;
    println!("{}x{} degree {}: {} trials, seed {}", spec.m, spec.n, spec.d, spec.trials, spec.seed);
    println!("converged {}/{}", out.converged_count(), spec.trials);
    println!("iterations: max {}, median {}", out.max_iterations(), out.median_iterations());
    for (iters, count) in out.iteration_histogram() {
        println!("  {iters:>3} iterations: {count}");
    }
    Ok(0)
}

fn cmd_manipulator(a: &ManipulatorArgs) -> CmdResult {
    let runs = run_manipulator_experiment(a.pert, a.seed, &a.solver.config()).map_err(err("manipulator experiment"))?;
    fs::create_dir_all(&a.out).map_err(err("creating output directory"))?;
    write_polynomial(a.out.join("manipulator.json"), &runs[0].polynomial).map_err(err("writing manipulator.json"))?;
    write_perturbation(a.out.join("manipulator_pert.json"), &runs[0].perturbation).map_err(err("writing manipulator_pert.json"))?;
    for run in &runs {
        let name = if run.normalized { "manipulator_normalized_history.csv" } else { "manipulator_raw_history.csv" };
        run.write_history_csv(create(&a.out, name)?).map_err(err("writing history"))?;
        let r = &run.result;
        let two = |m: &linstruct::CMat| matrix_two_norm(m.as_ref()).unwrap_or(f64::NAN);
        println!(
            "{:<11} {} in {} iterations, ||E^s|| {:.4e}, ||U||_2 {:.4}, ||V||_2 {:.4}",
            if run.normalized { "normalized" } else { "raw" },
            r.status.as_str(),
            r.iterations,
            r.final_split_norms().0,
            two(&r.u),
            two(&r.v)
        );
    }
    Ok(0)
}

fn cmd_scaling(a: &ScalingArgs) -> CmdResult {
    let cfg = a.solver.config();
    let mut bases: Vec<(&str, MatrixPolynomial)> = Vec::new();
    if matches!(a.base, ScalingBase::Standin | ScalingBase::Both) {
        bases.push(("standin", camera_standin(a.seed)));
    }
    if matches!(a.base, ScalingBase::Manipulator | ScalingBase::Both) {
        bases.push(("manipulator", manipulator_polynomial()));
    }
    for (name, base) in bases {
        let rows = run_scaling_study(&base, &default_alphas(&base), &a.ranges, a.seed, &cfg).map_err(err("scaling study"))?;
        write_scaling_rows(create(&a.out, &format!("scaling_{name}.csv"))?, &rows).map_err(err("writing scaling csv"))?;
        println!("{name}: {}x{}, ||Q|| = {:.4e}", base.rows(), base.cols(), base.norm());
        println!("  {:>10} {:>10} {:>10} {:>8} {:>10} {:>10} {:>10} {:>8} {:>8}  status", "a2", "a1", "a0", "range", "||E1||", "||Es||", "ratio", "||U||2", "||V||2");
        for r in rows {
            println!(
                "  {:>10.4e} {:>10.4e} {:>10.4e} {:>8} {:>10.4e} {:>10.4e} {:>10.4e} {:>8.4} {:>8.4}  {}",
                r.alphas[2], r.alphas[1], r.alphas[0], r.range_hi, r.norm_e1, r.norm_es, r.ratio, r.norm_u2, r.norm_v2, r.status.as_str()
            );
        }
    }
    Ok(0)
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn cmd_verify(a: &VerifyArgs) -> CmdResult {
    let stored = read_result(&a.result).map_err(err(&format!("reading {}", a.result.display())))?;
    let poly = read_polynomial(&a.poly).map_err(err(&format!("reading {}", a.poly.display())))?;
    let pert = read_perturbation(&a.pert).map_err(err(&format!("reading {}", a.pert.display())))?;
    let companion = poly.companion_form().map_err(err("companion form"))?;
    let original = companion.perturbed(&pert).map_err(err("perturbing"))?;
    let result = companion.perturbed(&stored.final_perturbation).map_err(err("final pencil"))?;

    let mut checks = Vec::new();
    checks.push(Check { name: "converged", pass: stored.status == Status::Converged, detail: format!("status {:?}", stored.status) });

    let (es, eu) = stored.final_perturbation.split_norms();
    checks.push(Check { name: "structured", pass: eu <= stored.tol, detail: format!("||E^u|| = {eu:.3e}, tol {:.1e}", stored.tol) });

    let res = equivalence_residual(&stored.u, &stored.v, &original, &result).map_err(err("equivalence residual"))?;
    let limit = 1e-9 * (1.0 + original.fro_norm());
    checks.push(Check { name: "equivalence", pass: res <= limit, detail: format!("residual {res:.3e}, limit {limit:.3e}") });

    let roundtrip = poly.add(&stored.delta_poly).and_then(|p| p.companion_form()).map_err(err("round trip"))?;
    let diff = (roundtrip.lam_part() - result.lam_part()).norm_l2() + (roundtrip.const_part() - result.const_part()).norm_l2();
    let rt_limit = 1e-12 + 2.0 * eu;
    checks.push(Check { name: "delta_poly", pass: diff <= rt_limit, detail: format!("companion(P+E) mismatch {diff:.3e}") });

    for (name, m) in [("U nonsingular", &stored.u), ("V nonsingular", &stored.v)] {
        let (lo, hi) = nonsingularity_report(m).map_err(err("singular values"))?;
        let pass = lo > 0.0 && lo >= 1e-8 * hi;
        checks.push(Check { name, pass, detail: format!("sigma in [{lo:.3e}, {hi:.3e}]") });
    }

    let eps = pert.fro_norm();
    let bound = theorem3_bound(eps, stored.alpha, stored.beta);
    if bound.is_finite() {
        let limit = bound * (1.0 + 1e-8);
        checks.push(Check { name: "structured bound", pass: es <= limit, detail: format!("||E^s|| {es:.3e} <= {bound:.3e}") });
    } else {
        println!("SKIP structured bound: alpha*||E1|| = {:.3e} >= 1", stored.alpha * eps);
    }

    let mut all = true;
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        all &= c.pass;
    }
    Ok(if all { 0 } else { EXIT_VERIFY_FAILED })
}

fn cmd_generate(a: &GenerateArgs) -> CmdResult {
    let (poly, pert): (MatrixPolynomial, PencilPerturbation) = match a.kind {
        GenerateKind::Random => {
            let spec = BatchSpec {
                m: a.m,
                n: a.n,
                d: a.d,
                trials: 1,
                normalize: a.normalize,
                pert_dist: EntryDist::Uniform { lo: 0.0, hi: a.pert },
                seed: a.seed,
                ..BatchSpec::default()
            };
            spec.validate().map_err(err("generate"))?;
            spec.generate(0).map_err(err("generate"))?
        }
        GenerateKind::Manipulator => {
            let p = manipulator_polynomial();
            let p = if a.normalize { p.normalized() } else { p };
            let grid = p.block_grid().map_err(err("generate"))?;
            let e = random_perturbation(grid, &EntryDist::Uniform { lo: 0.0, hi: a.pert }, a.seed).map_err(err("generate"))?;
            (p, e)
        }
    };
    for path in [&a.poly_out, &a.pert_out] {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(err("creating output directory"))?;
        }
    }
    write_polynomial(&a.poly_out, &poly).map_err(err("writing polynomial"))?;
    write_perturbation(&a.pert_out, &pert).map_err(err("writing perturbation"))?;
    println!("wrote {} and {}", a.poly_out.display(), a.pert_out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Structure(a) => cmd_structure(a),
        Command::Experiment(Experiment::Random(a)) => cmd_random(a),
        Command::Experiment(Experiment::Manipulator(a)) => cmd_manipulator(a),
        Command::Experiment(Experiment::Scaling(a)) => cmd_scaling(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
