//! Correlation functions of translation-invariant matrix product states (MPS)
//! and continuous MPS in the thermodynamic limit, their pole/residue structure,
//! and reconstruction of a gauge-fixed representative from two- and three-point
//! data.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: dense complex linear algebra (Kronecker products,
//!   biorthogonal eigendecomposition, genericity checks, similarity transforms).
//! * [`states`]: MPS / cMPS tensors, transfer matrix, Liouvillian, operator
//!   matrices and gauge transforms.
//! * [`channel`]: Lindblad generators, stationary states, trace preservation.
//! * [`correlators`]: direct contraction of N-point functions, residue tensors
//!   and their Z / Laplace transforms.
//! * [`polefit`]: matrix-pencil pole recovery, residue fitting and p-number
//!   certificates.
//! * [`wick`]: reconstruction of a representative and prediction of higher
//!   order coefficients and correlators from low-order data.

pub mod channel;
pub mod correlators;
pub mod error;
pub mod polefit;
pub mod spectral;
pub mod states;
pub mod tensor;
pub mod wick;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use spectral::ComplexMatrix;

/// Numerical thresholds shared by the pipeline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Relative eigenvalue separation below which two eigenvalues are degenerate.
    pub degeneracy: f64,
    /// Relative magnitude below which a residue counts as a structural zero.
    pub structural_zero: f64,
    /// Relative singular value above which a pencil direction counts as a mode.
    pub rank: f64,
    /// Relative deviation accepted by verification.
    pub verification: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            degeneracy: spectral::DEFAULT_DEGENERACY_TOL,
            structural_zero: 1e-10,
            rank: 1e-10,
            verification: 1e-7,
        }
    }
}
