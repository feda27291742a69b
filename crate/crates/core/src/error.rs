use thiserror::Error;

use crate::domain::Point2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("degenerate surface normal (zero vector)")]
    DegenerateNormal,

    #[error("ray direction is not a unit vector (|d| = {0})")]
    NonUnitDirection(f64),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("point {point:?} lies outside the map support")]
    OutsideDomain { point: Point2 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("map is not a gradient: curl deficit {deficit:e} exceeds {tolerance:e}")]
    NotAGradient { deficit: f64, tolerance: f64 },

    #[error("map inversion diverged after {iterations} iterations (residual {residual:e})")]
    InversionFailure { iterations: usize, residual: f64 },

    #[error("singular Jacobian at {point:?}")]
    SingularJacobian { point: Point2 },

    #[error("entry and image domains overlap")]
    DomainsNotDisjoint,

    #[error("image domain is not convex")]
    ImageNotConvex,

    #[error("path constant c = {c} too small: {detail}")]
    PathConstantTooSmall { c: f64, detail: String },

    #[error("displacement field vanishes identically")]
    ZeroDisplacement,

    #[error("trace failed for entry label {label:?}: {detail}")]
    TraceFailure { label: Point2, detail: String },

    #[error(
        "mirror system is inconsistent with a gradient map: residual {residual:e}, path constant spread {spread:e}"
    )]
    InconsistentSystem { residual: f64, spread: f64 },

    #[error("pieces {first} and {second} overlap: {detail}")]
    PieceOverlap {
        first: usize,
        second: usize,
        detail: String,
    },

    #[error("extension check failed for piece {piece}: {detail}")]
    ExtensionViolation { piece: usize, detail: String },

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("singular matrix")]
    SingularMatrix,

    #[error("not hyperbolic at {point:?}: discriminant {discriminant:e} ({class})")]
    NotHyperbolic {
        point: Point2,
        discriminant: f64,
        class: String,
    },

    #[error("neighbourhood radius fell below {min_radius:e} without meeting tolerance (last residual {residual:e})")]
    RadiusUnderflow { min_radius: f64, residual: f64 },

    #[error("Hessian degenerate at {point:?}")]
    HessianDegenerate { point: Point2 },

    #[error("map does not support Taylor expansion: {0}")]
    NoTaylorExpansion(String),

    #[error("no translation found separating the intermediate domain")]
    NoValidShift,

    #[error("decomposition failed in cell {cell}: {source}")]
    CellDecomposition {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("partition too coarse after {refinements} refinements: {detail}")]
    PartitionTooCoarse { refinements: usize, detail: String },

    #[error("orientation is {found}, expected {expected}: {detail}")]
    WrongOrientation {
        expected: String,
        found: String,
        detail: String,
    },

    #[error("placement failure: {0}")]
    Placement(String),

    #[error("geometric inconsistency: {0}")]
    GeometricInconsistency(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::InversionFailure { .. }
                | Error::SingularJacobian { .. }
                | Error::RadiusUnderflow { .. }
                | Error::HessianDegenerate { .. }
                | Error::NotHyperbolic { .. }
                | Error::GeometricInconsistency(_)
        ) || matches!(self, Error::CellDecomposition { source, .. } if source.is_numerical())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
