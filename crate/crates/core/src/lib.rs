//! Structured perturbations of companion linearizations.
//!
//! Given a matrix polynomial `P(λ) = Σ λᵏ Aₖ` and an arbitrary perturbation
//! `𝓔₁` of its first companion pencil `C¹_P = λW + W̃`, [`structure_linearization`]
//! finds nonsingular `U`, `V` and a polynomial perturbation `E(λ)` with
//!
//! ```text
//! U (C¹_P + 𝓔₁) V = C¹_{P+E}
//! ```
//!
//! by repeatedly solving a row-restricted coupled Sylvester least-squares
//! problem and applying the resulting strict equivalence.
//!
//! ```
//! use linstruct::{structure_linearization, random_perturbation, EntryDist, MatrixPolynomial, StructuringConfig};
//! use linstruct::matrix::from_real_rows;
//!
//! let p = MatrixPolynomial::new(1, 1, vec![
//!     from_real_rows(&[[2.0]]),
//!     from_real_rows(&[[-3.0]]),
//!     from_real_rows(&[[1.0]]),
//! ]).unwrap();
//! let e1 = random_perturbation(p.block_grid().unwrap(), &EntryDist::Uniform { lo: 0.0, hi: 0.01 }, 1).unwrap();
//! let r = structure_linearization(&p, &e1, &StructuringConfig::default()).unwrap();
//! assert!(r.converged());
//! let perturbed = p.add(&r.delta_poly).unwrap();
//! assert_eq!(perturbed.grade(), 2);
//! ```

pub mod error;
pub mod experiments;
pub mod io;
pub mod matrix;
pub mod perturbation;
pub mod poly;
pub mod structurer;
pub mod sylvester;
pub mod verify;

pub use error::{Error, Result};
pub use faer::c64;
pub use matrix::CMat;
pub use perturbation::{random_perturbation, EntryDist, PencilPerturbation, StructureMask, TOL_MASK};
pub use poly::{BlockGrid, MatrixPencil, MatrixPolynomial};
pub use structurer::{structure_linearization, Status, StructuringConfig, StructuringResult};
pub use sylvester::{CoupledSylvesterSystem, SolveStrategy, SylvesterSolution};
pub use verify::{brute_force_first_step_oracle, equivalence_residual, nonsingularity_report};
