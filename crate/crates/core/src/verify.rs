//! Post-hoc checks that do not share code paths with the solver.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::matrix::{fro_norm, singular_value_range, CMat};
use crate::perturbation::{Part, PencilPerturbation};
use crate::poly::{MatrixPencil, MatrixPolynomial};

/// `‖U A V − A'‖_F + ‖U Ã V − Ã'‖_F` for pencils `λA + Ã` and `λA' + Ã'`.
pub fn equivalence_residual(u: &CMat, v: &CMat, original: &MatrixPencil, result: &MatrixPencil) -> Result<f64> {
    let (p, q) = (original.nrows(), original.ncols());
    if u.shape() != (p, p) || v.shape() != (q, q) || result.nrows() != p || result.ncols() != q {
        return Err(Error::Dimension("transformations and pencils disagree on dimensions".into()));
    }
    let lam = u * original.lam_part() * v - result.lam_part();
    let cst = u * original.const_part() * v - result.const_part();
    Ok(fro_norm(lam.as_ref()) + fro_norm(cst.as_ref()))
}

/// `(σ_min, σ_max)` of a transformation.
pub fn nonsingularity_report(u: &CMat) -> Result<(f64, f64)> {
    singular_value_range(u.as_ref())
}

/// Largest unknown count accepted by [`brute_force_first_step_oracle`].
pub const ORACLE_MAX_UNKNOWNS: usize = 200;

/// First-step `(X₁, Y₁)` for `C¹_P + 𝓔₁`, computed independently of the
/// solver: each unstructured entry of `(W+E)X + Y(W+E)` and
/// `(W̃+Ẽ)X + Y(W̃+Ẽ)` is written out as a linear equation over the entries
/// of `X` and `Y` (row-major, `Y` first), the Tikhonov-regularized system is
/// solved by Gaussian elimination for `ε, ε/2, ε/4`, and the three solutions
/// are Richardson-extrapolated to `ε → 0`.
pub fn brute_force_first_step_oracle(poly: &MatrixPolynomial, e1: &PencilPerturbation) -> Result<(CMat, CMat)> {
    let pencil = poly.companion_form()?;
    let grid = pencil.grid().expect("companion forms carry a block grid");
    if e1.grid() != grid {
        return Err(Error::Dimension("perturbation does not match the companion grid".into()));
    }
    let (p, q) = (grid.rows(), grid.cols());
    let unknowns = p * p + q * q;
    if unknowns > ORACLE_MAX_UNKNOWNS {
        return Err(Error::OracleTooLarge { unknowns, limit: ORACLE_MAX_UNKNOWNS });
    }
    let y_at = |i: usize, l: usize| i * p + l;
    let x_at = |l: usize, j: usize| p * p + l * q + j;
    let mask = e1.mask();

    let mut g: Vec<Vec<c64>> = Vec::new();
    let mut b: Vec<c64> = Vec::new();
    for part in [Part::Lam, Part::Const] {
        let base = match part {
            Part::Lam => pencil.lam_part(),
            Part::Const => pencil.const_part(),
        };
        let e = e1.part(part);
        for i in 0..p {
            for j in 0..q {
                if mask.is_structured(part, i, j) {
                    continue;
                }
                let mut row = vec![c64::new(0.0, 0.0); unknowns];
                // Σ_l a_il x_lj
                for l in 0..q {
                    row[x_at(l, j)] += base[(i, l)] + e[(i, l)];
                }
                // Σ_l y_il a_lj
                for l in 0..p {
                    row[y_at(i, l)] += base[(l, j)] + e[(l, j)];
                }
                g.push(row);
                b.push(-e[(i, j)]);
            }
        }
    }

    let scale: f64 = g.iter().flatten().map(|z| z.norm_sqr()).sum();
    let x = if scale == 0.0 || b.iter().all(|z| *z == c64::new(0.0, 0.0)) {
        vec![c64::new(0.0, 0.0); unknowns]
    } else {
        let eps = 1e-7 * scale;
        let sols: Vec<Vec<c64>> = [eps, eps / 2.0, eps / 4.0].iter().map(|&e| ridge_solve(&g, &b, e)).collect::<Result<_>>()?;
        // x(ε) = x₀ + c₁ε + c₂ε² + …
        (0..unknowns).map(|k| (sols[0][k] - sols[1][k] * 6.0 + sols[2][k] * 8.0) / 3.0).collect()
    };
    let y = Mat::from_fn(p, p, |i, l| x[y_at(i, l)]);
    let xm = Mat::from_fn(q, q, |l, j| x[x_at(l, j)]);
    Ok((xm, y))
}

/// Tikhonov solution `argmin ‖Gx − b‖² + ε‖x‖²`, through the smaller of the
/// two Gram systems.
fn ridge_solve(g: &[Vec<c64>], b: &[c64], eps: f64) -> Result<Vec<c64>> {
    let (rows, cols) = (g.len(), g.first().map_or(0, Vec::len));
    let dot = |a: &mut dyn Iterator<Item = (c64, c64)>| a.fold(c64::new(0.0, 0.0), |s, (x, y)| s + x * y);
    if rows <= cols {
        // x = Gᴴ (G Gᴴ + εI)⁻¹ b
        let mut gram: Vec<Vec<c64>> = (0..rows)
            .map(|i| (0..rows).map(|k| dot(&mut (0..cols).map(|j| (g[i][j], g[k][j].conj())))).collect())
            .collect();
        for (i, row) in gram.iter_mut().enumerate() {
            row[i] += eps;
        }
        let w = gauss_solve(gram, b.to_vec())?;
        Ok((0..cols).map(|j| dot(&mut (0..rows).map(|i| (g[i][j].conj(), w[i])))).collect())
    } else {
        // x = (Gᴴ G + εI)⁻¹ Gᴴ b
        let mut gram: Vec<Vec<c64>> = (0..cols)
            .map(|j| (0..cols).map(|k| dot(&mut (0..rows).map(|i| (g[i][j].conj(), g[i][k])))).collect())
            .collect();
        for (j, row) in gram.iter_mut().enumerate() {
            row[j] += eps;
        }
        let rhs = (0..cols).map(|j| dot(&mut (0..rows).map(|i| (g[i][j].conj(), b[i])))).collect();
        gauss_solve(gram, rhs)
    }
}

/// Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<c64>>, mut b: Vec<c64>) -> Result<Vec<c64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).expect("non-empty range");
        if a[piv][k].norm() == 0.0 || !a[piv][k].norm().is_finite() {
            return Err(Error::NonFinite);
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == c64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let t = a[k][j];
                a[i][j] -= f * t;
            }
            let t = b[k];
            b[i] -= f * t;
        }
    }
    let mut x = vec![c64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let s = (i + 1..n).fold(b[i], |s, j| s - a[i][j] * x[j]);
        x[i] = s / a[i][i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{from_real_rows, identity};
    use crate::perturbation::{random_perturbation, trial_rng, EntryDist};
    use crate::sylvester::CoupledSylvesterSystem;

    fn random_poly(m: usize, n: usize, d: usize, seed: u64) -> MatrixPolynomial {
        let mut rng = trial_rng(seed, 0);
        let s = EntryDist::Normal { mean: 0.0, std: 10.0 }.sampler().unwrap();
        MatrixPolynomial::new(m, n, (0..=d).map(|_| s.matrix(m, n, &mut rng)).collect()).unwrap().normalized()
    }

    fn solver_first_step(p: &MatrixPolynomial, e1: &PencilPerturbation) -> (CMat, CMat) {
        let pencil = p.companion_form().unwrap();
        let sys = CoupledSylvesterSystem::assemble(&pencil, e1, &e1.mask()).unwrap();
        let (x, y, _) = sys.min_norm_solve().unwrap();
        (x, y)
    }

    fn assert_oracle_match(p: &MatrixPolynomial, e1: &PencilPerturbation) {
        let (xo, yo) = brute_force_first_step_oracle(p, e1).unwrap();
        let (xs, ys) = solver_first_step(p, e1);
        let dx = fro_norm((&xs - &xo).as_ref());
        let dy = fro_norm((&ys - &yo).as_ref());
        assert!(dx <= 1e-8 * (1.0 + fro_norm(xo.as_ref())), "X mismatch {dx}");
        assert!(dy <= 1e-8 * (1.0 + fro_norm(yo.as_ref())), "Y mismatch {dy}");
    }

    #[test]
    fn identity_equivalence_is_exact() {
        let p = random_poly(2, 2, 2, 1);
        let c = p.companion_form().unwrap();
        assert_eq!(equivalence_residual(&identity(4), &identity(4), &c, &c).unwrap(), 0.0);
    }

    #[test]
    fn corrupted_transformation_is_detected() {
        let p = random_poly(2, 2, 2, 1);
        let c = p.companion_form().unwrap();
        let mut v = identity(4);
        v[(1, 2)] += c64::new(0.1, 0.0);
        assert!(equivalence_residual(&identity(4), &v, &c, &c).unwrap() > 1e-3);
        assert!(equivalence_residual(&identity(3), &v, &c, &c).is_err());
    }

    #[test]
    fn singular_value_reports() {
        assert_eq!(nonsingularity_report(&identity(3)).unwrap(), (1.0, 1.0));
        let (lo, hi) = nonsingularity_report(&from_real_rows(&[[1.0, 0.0], [0.0, 1e-8]])).unwrap();
        assert!((lo - 1e-8).abs() < 1e-22 && (hi - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_single_entry() {
        let p = random_poly(1, 1, 2, 3);
        let mut e1 = PencilPerturbation::zeros(p.block_grid().unwrap());
        let lam = from_real_rows(&[[0.0, 0.0], [0.0, 0.05]]);
        e1 = PencilPerturbation::new(e1.grid(), lam, e1.const_part().clone()).unwrap();
        assert_oracle_match(&p, &e1);
    }

    #[test]
    fn oracle_zero_perturbation() {
        let p = random_poly(1, 2, 2, 3);
        let (x, y) = brute_force_first_step_oracle(&p, &PencilPerturbation::zeros(p.block_grid().unwrap())).unwrap();
        assert_eq!(fro_norm(x.as_ref()) + fro_norm(y.as_ref()), 0.0);
    }

    #[test]
    fn oracle_rectangular_and_square() {
        for (m, n, d, seed) in [(1, 2, 2, 4), (2, 1, 2, 5), (2, 2, 3, 6), (1, 1, 3, 7)] {
            let p = random_poly(m, n, d, seed);
            let e1 = random_perturbation(p.block_grid().unwrap(), &EntryDist::Uniform { lo: 0.0, hi: 0.1 }, seed).unwrap();
            assert_oracle_match(&p, &e1);
        }
    }

    #[test]
    fn oracle_size_guard() {
        let p = random_poly(3, 3, 5, 1);
        let e1 = PencilPerturbation::zeros(p.block_grid().unwrap());
        assert!(matches!(brute_force_first_step_oracle(&p, &e1), Err(Error::OracleTooLarge { unknowns: 450, .. })));
    }

    #[test]
    fn gauss_solves_small_system() {
        let a = vec![vec![c64::new(0.0, 0.0), c64::new(1.0, 0.0)], vec![c64::new(2.0, 0.0), c64::new(0.0, 1.0)]];
        let x = gauss_solve(a, vec![c64::new(1.0, 0.0), c64::new(2.0, 1.0)]).unwrap();
        assert!((x[0] - c64::new(1.0, 0.0)).norm() < 1e-15 && (x[1] - c64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
