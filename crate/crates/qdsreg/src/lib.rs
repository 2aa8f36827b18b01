//! Numerical engine for Markov master equations of quantum optics type on
//! truncated Fock spaces.
//!
//! The crate builds formal Lindblad generators
//!
//! ```text
//! L(B) = Φ(B) − G†B − BG,      G = ½Φ(I) + iH,      Φ(B) = Σ_k L_k† B L_k
//! ```
//!
//! from symbolic polynomial data (Hamiltonians and Kraus words in creation
//! and annihilation operators, with a finite spin factor), constructs the
//! minimal quantum dynamical semigroup by the monotone Picard iteration, and
//! runs numerical conservativity (unitality) certificates: reference
//! operators, Λ-pairs in the interaction representation, balance conditions,
//! deficiency-direction searches, and fixed-point witnesses, cross-checked by
//! Monte-Carlo jump unravelings with explosion detection.
//!
//! Everything lives on a hard-cutoff truncation. Operator inequalities that
//! only hold on the infinite space are always evaluated on an *interior
//! block* (basis states whose occupation numbers stay a buffer below every
//! cutoff) so that truncation-edge artifacts cannot fake or mask a verdict.

pub mod certify;
pub mod cli;
pub mod config;
pub mod fock;
pub mod linalg;
pub mod lindblad;
pub mod minimal;
pub mod report;
pub mod space;
pub mod trajectories;

pub use fock::{
    build_ladder, diagonal_lambda, eval_polynomial, fractional_power, CoeffBlock, ModeFactor,
    PolyTerm,
};
pub use lindblad::{assemble, CPMapSpec, KrausTerm, LindbladGenerator, Picture};
pub use space::{OperatorMatrix, SpaceSpec};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian: {0}")]
    NotHermitian(String),
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("truncation inadequate: {0}")]
    TruncationInadequate(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unbound parameter: {0}")]
    UnboundParameter(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
