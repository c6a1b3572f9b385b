//! Real Z- and H-eigenvalues of nonsymmetric tensors.
//!
//! Eigenvalues are computed from the smallest to the largest by solving
//! sequences of moment semidefinite relaxations. Each eigenvalue is accepted
//! only after a flat-truncation rank test, atom extraction, Newton polishing
//! and a residual check; the sweep stops on a certified infeasible relaxation.
//!
//! Module map:
//! - [`tensor`]: dense tensors, contractions, text format
//! - [`poly`]: sparse polynomials and the graded monomial order
//! - [`moment`]: moment/localizing matrices and relaxation assembly
//! - [`sdp`]: homogeneous self-dual interior-point solver
//! - [`extract`]: numerical rank, flat truncation, atom extraction
//! - [`eig`]: the eigenvalue sweeps
//! - [`oracle`]: brute-force n = 2 reference solver used for validation

pub mod eig;
pub mod error;
pub mod extract;
pub mod moment;
pub mod oracle;
pub mod poly;
pub mod sdp;
pub mod tensor;

pub use eig::{
    full_sweep, EigKind, Eigenpair, SmallestOutcome, Spectrum, SweepOptions, Termination,
};
pub use error::{Error, Result};
pub use poly::{Monomial, Polynomial};
pub use tensor::Tensor;
