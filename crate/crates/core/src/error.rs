use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("degenerate spectrum: min gap {min_gap:.3e} below {threshold:.3e}")]
    DegenerateSpectrum { min_gap: f64, threshold: f64 },
    #[error("eigensolver failed to converge")]
    NumericalFailure,
    #[error("gauge matrix is numerically singular (condition estimate {0:.3e})")]
    SingularGauge(f64),
    #[error("state has vanishing norm (spectral radius {0:.3e})")]
    ZeroState(f64),
    #[error("leading Liouvillian eigenvalue has imaginary part {0:.3e}")]
    ImaginaryLeading(f64),
    #[error("operator kind `{0}` is not a cMPS field kind")]
    UnknownKind(String),
    #[error("no generic state found after {0} attempts")]
    GenericityFailure(usize),
    #[error("unknown operator label `{0}`")]
    UnknownLabel(String),
    #[error("invalid gap: {0}")]
    InvalidGap(String),
    #[error("system kind mismatch: {0}")]
    KindMismatch(String),
    #[error("evaluation point within {distance:.3e} of a pole")]
    PoleProximity { distance: f64 },
    #[error("window too short: {samples} samples, need at least {required}")]
    WindowTooShort { samples: usize, required: usize },
    #[error("inconsistent pole data: {0}")]
    Inconsistent(String),
    #[error("aliasing risk: recovered phase {phase:.4} too close to the branch cut")]
    AliasingRisk { phase: f64 },
    #[error("Vandermonde system ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("poles not distinct: minimum separation {0:.3e}")]
    PolesNotDistinct(f64),
    #[error("two-point residue for pole {0} vanishes")]
    ZeroCoefficient(usize),
    #[error("inconsistent shapes: {0}")]
    InconsistentShapes(String),
    #[error("witness coefficient for pole {0} vanishes")]
    ZeroWitness(usize),
    #[error("p-number infinite for the supplied data ({0} poles unwitnessed)")]
    InfinitePNumber(usize),
    #[error("no witness for pole {0}")]
    MissingWitness(usize),
    #[error("missing residue tensor for labels {0:?}")]
    MissingTensor(Vec<String>),
    #[error("Hamiltonian is not hermitian (deviation {0:.3e})")]
    NonHermitianH(f64),
    #[error("expected exactly one jump operator, found {0}")]
    MultipleJumpOps(usize),
    #[error("stationary eigenvalue 0 is degenerate ({0} eigenvalues near zero)")]
    DegenerateZero(usize),
    #[error("stationary state not positive (minimum eigenvalue {0:.3e})")]
    NonPositive(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
