//! Error type shared by the whole crate.

use alloc::string::String;
use core::fmt;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised while building meshes, models and bases or while assembling
/// and solving the discrete systems.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid construction input (counts, ranges, degrees, ...).
    InvalidInput(String),
    /// A mesh element violates convexity/orientation requirements.
    DegenerateElement { element: usize, detail: String },
    /// The random Young's modulus is non-positive at a sampled point.
    NonPositiveModulus { x: [f64; 2], detail: String },
    /// A covariance kernel produced eigenvalues that are negative beyond
    /// the clipping tolerance.
    IndefiniteKernel { eigenvalue: f64, threshold: f64 },
    /// A symmetric factorization failed (matrix not positive definite).
    SingularSystem(String),
    /// The assembled element coefficient matrix is unusable (for example the
    /// stress-mode coefficient ratios are undefined for this element shape).
    ElementAssembly { element: usize, detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::DegenerateElement { element, detail } => {
                write!(f, "degenerate element {element}: {detail}")
            }
            Error::NonPositiveModulus { x, detail } => {
                write!(
                    f,
                    "non-positive Young's modulus at x = ({}, {}): {detail}",
                    x[0], x[1]
                )
            }
            Error::IndefiniteKernel {
                eigenvalue,
                threshold,
            } => write!(
                f,
                "covariance kernel is not positive semidefinite: eigenvalue {eigenvalue:.3e} \
                 below clipping threshold {threshold:.3e}"
            ),
            Error::SingularSystem(msg) => write!(f, "singular system: {msg}"),
            Error::ElementAssembly { element, detail } => {
                write!(f, "element {element} assembly failed: {detail}")
            }
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
