use std::fmt;

/// Errors produced by the numerical kernels and the control-synthesis layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A pivot fell below the relative threshold during elimination.
    SingularMatrix { pivot: f64, threshold: f64 },
    /// An iterative scheme exhausted its iteration budget.
    ConvergenceFailure { what: &'static str },
    /// The matrix has an eigenvalue with real part ≥ the required margin.
    NotHurwitz { max_real: f64 },
    /// The primal-dual state matrix S is not Hurwitz.
    NotHurwitzS { max_real: f64 },
    /// A computed solution failed its residual post-check.
    ResidualTooLarge {
        what: &'static str,
        residual: f64,
        tol: f64,
    },
    /// The Hamiltonian has no n-dimensional stable invariant subspace.
    NoStabilizingSolution { reason: &'static str },
    /// The steady-state KKT matrix is rank deficient.
    SingularKkt,
    /// The pair (A, B) fails the Hautus stabilizability test at this mode.
    NotStabilizable { mode: (f64, f64) },
    /// The pair (A, Q) fails the detectability test at this mode.
    NotDetectable { mode: (f64, f64) },
    /// A simulated state exceeded the divergence guard.
    NonFiniteState { t: f64 },
    /// Two trajectories do not share a time grid.
    GridMismatch,
    /// Malformed input: dimensions, symmetry, definiteness, file contents.
    InvalidInput(String),
    /// File-system failure while writing experiment outputs.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SingularMatrix { pivot, threshold } => write!(
                f,
                "singular matrix: pivot {pivot:.3e} below threshold {threshold:.3e}"
            ),
            Error::ConvergenceFailure { what } => {
                write!(f, "iteration budget exhausted in {what}")
            }
            Error::NotHurwitz { max_real } => {
                write!(f, "matrix is not Hurwitz (max real part {max_real:.6e})")
            }
            Error::NotHurwitzS { max_real } => write!(
                f,
                "primal-dual state matrix S is not Hurwitz (max real part {max_real:.6e})"
            ),
            Error::ResidualTooLarge {
                what,
                residual,
                tol,
            } => write!(f, "{what}: residual {residual:.3e} exceeds {tol:.3e}"),
            Error::NoStabilizingSolution { reason } => {
                write!(f, "Riccati equation has no stabilizing solution: {reason}")
            }
            Error::SingularKkt => write!(f, "steady-state KKT system is singular"),
            Error::NotStabilizable { mode } => write!(
                f,
                "(A, B) is not stabilizable: uncontrollable mode at {:.6}{:+.6}i",
                mode.0, mode.1
            ),
            Error::NotDetectable { mode } => write!(
                f,
                "(A, Q) is not detectable: unobservable mode at {:.6}{:+.6}i",
                mode.0, mode.1
            ),
            Error::NonFiniteState { t } => {
                write!(f, "state diverged beyond guard at t = {t:.6}")
            }
            Error::GridMismatch => write!(f, "trajectories use different time grids"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
