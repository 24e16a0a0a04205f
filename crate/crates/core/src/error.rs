use alloc::string::String;

/// Errors raised by grid construction, spectral computations, synthesis and
/// simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unknown boundary scheme `{0}` (expected `ghost` or `one-sided`)")]
    UnknownScheme(String),

    #[error("field length mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("eigensolver did not converge after {iterations} iterations (worst relative residual {residual:e})")]
    EigenNoConvergence { iterations: usize, residual: f64 },

    #[error(
        "eigenvalues {i} and {j} coincide ({value}); the truncated modes need a simple spectrum, \
         use a rectangle whose squared aspect ratio is irrational (e.g. b = a/sqrt(2))"
    )]
    EigenTie { i: usize, j: usize, value: f64 },

    #[error("only {computed} eigenpairs computed and the last one (lambda = {last}) is not safely below -mu = {neg_mu}; compute more pairs")]
    InsufficientPairs { computed: usize, last: f64, neg_mu: f64 },

    #[error("shift {shift} resonates with eigenvalue {index} (lambda = {eigenvalue})")]
    Resonance { shift: f64, index: usize, eigenvalue: f64 },

    #[error("singular factorization: pivot {pivot} at row {row}")]
    Singular { row: usize, pivot: f64 },

    #[error("no unstable modes (N = 0): nothing to construct")]
    NoUnstableModes,

    #[error("shape function construction failed at mode {index}")]
    ShapeConstruction { index: usize },

    #[error("{what} certificate lost: entry {index} has magnitude {value:e}")]
    LostCertificate { what: &'static str, index: usize, value: f64 },

    #[error("mode {index} is uncontrollable (zero input coefficient)")]
    Uncontrollable { index: usize },

    #[error("diagonal entries {i} and {j} are repeated")]
    RepeatedDiagonal { i: usize, j: usize },

    #[error("invalid pole targets: {0}")]
    InvalidTargets(String),

    #[error("closed truncated matrix is not Hurwitz (spectral abscissa {abscissa})")]
    NotHurwitz { abscissa: f64 },

    #[error("state became non-finite at step {step}")]
    NonFinite { step: usize },

    #[error("decay-rate fit needs at least 5 samples, got {0}")]
    TooFewSamples(usize),

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;
