//! JSON and CSV file formats.
//!
//! Matrices are arrays of rows of `[re, im]` pairs. Polynomials store
//! `{"m", "n", "grade", "coeffs"}` with `coeffs[k]` the coefficient of `λᵏ`;
//! perturbations store `{"m", "n", "grade", "lam_part", "const_part"}`.
//! Every float is written with 17 significant digits, which round-trips
//! doubles exactly. Non-finite values become `null` in JSON.

use std::io::Write;
use std::path::Path;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{Error, Result};
use crate::experiments::{ScalingRow, SummaryRow};
use crate::matrix::CMat;
use crate::perturbation::PencilPerturbation;
use crate::poly::{BlockGrid, MatrixPolynomial};
use crate::structurer::{IterationRecord, Status, StructuringConfig, StructuringResult};

/// Rows of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialJson {
    pub m: usize,
    pub n: usize,
    pub grade: usize,
    pub coeffs: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationJson {
    pub m: usize,
    pub n: usize,
    pub grade: usize,
    pub lam_part: MatrixJson,
    pub const_part: MatrixJson,
}

pub const HISTORY_COLUMNS: [&str; 9] =
    ["trial", "iter", "norm_Eu", "norm_Es", "kappa_T", "alpha_i", "normU2", "normV2", "residual"];
pub const SUMMARY_COLUMNS: [&str; 7] = ["iter", "min", "q1", "median", "q3", "max", "count"];
pub const SCALING_COLUMNS: [&str; 10] =
    ["alpha2", "alpha1", "alpha0", "range_hi", "normE1", "normEs", "ratio", "normU2", "normV2", "converged"];

/// Columns of the `history` array in result files.
pub const RESULT_HISTORY_COLUMNS: [&str; 11] =
    ["iter", "norm_Eu", "norm_Es", "kappa_T", "alpha_i", "beta_i", "normU2", "normV2", "residual", "normX", "normY"];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultJson {
    pub status: String,
    pub iterations: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub reason: Option<String>,
    pub delta_poly: PolynomialJson,
    #[serde(rename = "U")]
    pub u: MatrixJson,
    #[serde(rename = "V")]
    pub v: MatrixJson,
    pub final_perturbation: PerturbationJson,
    pub history_columns: Vec<String>,
    pub history: Vec<Vec<Option<f64>>>,
}

/// Parsed result file.
#[derive(Clone, Debug)]
pub struct StoredResult {
    pub status: Status,
    pub iterations: usize,
    pub tol: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta_poly: MatrixPolynomial,
    pub u: CMat,
    pub v: CMat,
    pub final_perturbation: PencilPerturbation,
    pub history_columns: Vec<String>,
    pub history: Vec<Vec<Option<f64>>>,
}

/// Compact JSON with `{:.16e}` floats.
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Digits17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// 17 significant digits; `NaN` and `inf` spelled out.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn matrix_to_json(a: &CMat) -> MatrixJson {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson, nrows: usize, ncols: usize, what: &str) -> Result<CMat> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format(format!("{what}: expected a {nrows}x{ncols} matrix")));
    }
    Ok(Mat::from_fn(nrows, ncols, |i, j| c64::new(rows[i][j][0], rows[i][j][1])))
}

impl From<&MatrixPolynomial> for PolynomialJson {
    fn from(p: &MatrixPolynomial) -> Self {
        Self { m: p.rows(), n: p.cols(), grade: p.grade(), coeffs: p.coeffs().iter().map(matrix_to_json).collect() }
    }
}

impl PolynomialJson {
    pub fn to_polynomial(&self) -> Result<MatrixPolynomial> {
        if self.coeffs.len() != self.grade + 1 {
            return Err(Error::Format(format!("grade {} needs {} coefficients, got {}", self.grade, self.grade + 1, self.coeffs.len())));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| matrix_from_json(c, self.m, self.n, &format!("coeffs[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        MatrixPolynomial::new(self.m, self.n, coeffs)
    }
}

impl From<&PencilPerturbation> for PerturbationJson {
    fn from(e: &PencilPerturbation) -> Self {
        let g = e.grid();
        Self { m: g.m, n: g.n, grade: g.grade, lam_part: matrix_to_json(e.lam_part()), const_part: matrix_to_json(e.const_part()) }
    }
}

impl PerturbationJson {
    pub fn to_perturbation(&self) -> Result<PencilPerturbation> {
        let g = BlockGrid::new(self.m, self.n, self.grade)?;
        let lam = matrix_from_json(&self.lam_part, g.rows(), g.cols(), "lam_part")?;
        let cst = matrix_from_json(&self.const_part, g.rows(), g.cols(), "const_part")?;
        PencilPerturbation::new(g, lam, cst)
    }
}

pub fn polynomial_to_json(p: &MatrixPolynomial) -> Result<String> {
    to_json(&PolynomialJson::from(p))
}

pub fn polynomial_from_json(s: &str) -> Result<MatrixPolynomial> {
    serde_json::from_str::<PolynomialJson>(s)?.to_polynomial()
}

pub fn perturbation_to_json(e: &PencilPerturbation) -> Result<String> {
    to_json(&PerturbationJson::from(e))
}

pub fn perturbation_from_json(s: &str) -> Result<PencilPerturbation> {
    serde_json::from_str::<PerturbationJson>(s)?.to_perturbation()
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn result_history_row(r: &IterationRecord) -> Vec<Option<f64>> {
    let s = r.step;
    vec![
        Some(r.iter as f64),
        finite(r.norm_eu),
        finite(r.norm_es),
        s.and_then(|s| finite(s.kappa_t)),
        s.and_then(|s| finite(s.alpha)),
        s.and_then(|s| finite(s.beta)),
        finite(r.norm_u2),
        finite(r.norm_v2),
        s.and_then(|s| finite(s.residual)),
        s.and_then(|s| finite(s.norm_x)),
        s.and_then(|s| finite(s.norm_y)),
    ]
}

pub fn result_to_json(r: &StructuringResult, cfg: &StructuringConfig) -> Result<String> {
    to_json(&ResultJson {
        status: r.status.as_str().to_string(),
        iterations: r.iterations,
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        alpha: finite(r.alpha),
        beta: finite(r.beta),
        reason: r.reason.clone(),
        delta_poly: PolynomialJson::from(&r.delta_poly),
        u: matrix_to_json(&r.u),
        v: matrix_to_json(&r.v),
        final_perturbation: PerturbationJson::from(&r.final_perturbation),
        history_columns: RESULT_HISTORY_COLUMNS.iter().map(|c| c.to_string()).collect(),
        history: r.history.iter().map(result_history_row).collect(),
    })
}

pub fn result_from_json(s: &str) -> Result<StoredResult> {
    let raw: ResultJson = serde_json::from_str(s)?;
    let status = match raw.status.as_str() {
        "Converged" => Status::Converged,
        "MaxIterations" => Status::MaxIterations,
        "Diverged" => Status::Diverged,
        other => return Err(Error::Format(format!("unknown status {other:?}"))),
    };
    let final_perturbation = raw.final_perturbation.to_perturbation()?;
    let g = final_perturbation.grid();
    Ok(StoredResult {
        status,
        iterations: raw.iterations,
        tol: raw.tol,
        alpha: raw.alpha.unwrap_or(f64::INFINITY),
        beta: raw.beta.unwrap_or(f64::INFINITY),
        delta_poly: raw.delta_poly.to_polynomial()?,
        u: matrix_from_json(&raw.u, g.rows(), g.rows(), "U")?,
        v: matrix_from_json(&raw.v, g.cols(), g.cols(), "V")?,
        final_perturbation,
        history_columns: raw.history_columns,
        history: raw.history,
    })
}

pub fn read_polynomial(path: impl AsRef<Path>) -> Result<MatrixPolynomial> {
    polynomial_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_polynomial(path: impl AsRef<Path>, p: &MatrixPolynomial) -> Result<()> {
    Ok(std::fs::write(path, polynomial_to_json(p)?)?)
}

pub fn read_perturbation(path: impl AsRef<Path>) -> Result<PencilPerturbation> {
    perturbation_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_perturbation(path: impl AsRef<Path>, e: &PencilPerturbation) -> Result<()> {
    Ok(std::fs::write(path, perturbation_to_json(e)?)?)
}

pub fn read_result(path: impl AsRef<Path>) -> Result<StoredResult> {
    result_from_json(&std::fs::read_to_string(path)?)
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// One row per record; step columns are empty for terminal states.
pub fn write_history_csv<'a, W: Write>(
    w: W,
    rows: impl IntoIterator<Item = (usize, &'a IterationRecord)>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(HISTORY_COLUMNS)?;
    for (trial, r) in rows {
        let s = r.step;
        out.write_record([
            trial.to_string(),
            r.iter.to_string(),
            fmt_f64(r.norm_eu),
            fmt_f64(r.norm_es),
            opt(s.map(|s| s.kappa_t)),
            opt(s.map(|s| s.alpha)),
            fmt_f64(r.norm_u2),
            fmt_f64(r.norm_v2),
            opt(s.map(|s| s.residual)),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.iter.to_string(),
            fmt_f64(r.min),
            fmt_f64(r.q1),
            fmt_f64(r.median),
            fmt_f64(r.q3),
            fmt_f64(r.max),
            r.count.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_scaling_csv<W: Write>(w: W, rows: &[ScalingRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SCALING_COLUMNS)?;
    for r in rows {
        out.write_record([
            fmt_f64(r.alphas[2]),
            fmt_f64(r.alphas[1]),
            fmt_f64(r.alphas[0]),
            fmt_f64(r.range_hi),
            fmt_f64(r.norm_e1),
            fmt_f64(r.norm_es),
            fmt_f64(r.ratio),
            fmt_f64(r.norm_u2),
            fmt_f64(r.norm_v2),
            r.converged.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
