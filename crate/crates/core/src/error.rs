use thiserror::Error;

use crate::algebra::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix must be symmetric: {0}")]
    Asymmetric(String),

    #[error("structure constants violate algebraic constraints: {0}")]
    InvalidConstants(ValidationReport),

    #[error("inadmissible structure constants: Tr(alpha) + |tau|^2/4 = {0} < 0")]
    Inadmissible(f64),

    #[error("alpha must be real for the quasilinear dynamics (max |Im alpha| = {0})")]
    ComplexAlpha(f64),

    #[error("number of field channels must be even, got m = {0}")]
    OddChannels(usize),

    #[error("matrix is not Hurwitz (spectral abscissa {0:e})")]
    NotHurwitz(f64),

    #[error("no stabilising Riccati solution: {0}")]
    DesignInfeasible(String),

    #[error("measurement matrix does not have full row rank: {0}")]
    RankDeficient(String),

    #[error("measurement channels do not commute: max |D J D^T| = {0:e}")]
    NonCommuting(f64),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("eigenvalue computation failed")]
    Eigen,

    #[error("step size underflow at t = {0} (problem too stiff for explicit integration)")]
    Stiffness(f64),

    #[error("non-finite state encountered at t = {0}")]
    NonFinite(f64),

    #[error("invalid time grid: {0}")]
    Grid(String),

    #[error("moment times must be nondecreasing")]
    TimeOrder,

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    /// Stable machine-readable identifier for each error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "DIMENSION_MISMATCH",
            Error::NotSquare { .. } => "NOT_SQUARE",
            Error::Asymmetric(_) => "ASYMMETRIC_INPUT",
            Error::InvalidConstants(_) => "INVALID_CONSTANTS",
            Error::Inadmissible(_) => "INADMISSIBLE_CONSTANTS",
            Error::ComplexAlpha(_) => "COMPLEX_ALPHA",
            Error::OddChannels(_) => "ODD_CHANNELS",
            Error::NotHurwitz(_) => "NOT_HURWITZ",
            Error::DesignInfeasible(_) => "DESIGN_INFEASIBLE",
            Error::RankDeficient(_) => "RANK_DEFICIENT",
            Error::NonCommuting(_) => "NON_COMMUTING_MEASUREMENT",
            Error::Singular(_) => "SINGULAR",
            Error::Eigen => "EIGEN_FAILURE",
            Error::Stiffness(_) => "STIFF",
            Error::NonFinite(_) => "NON_FINITE",
            Error::Grid(_) => "BAD_GRID",
            Error::TimeOrder => "TIME_ORDER",
            Error::Config(_) => "CONFIG",
        }
    }
}
