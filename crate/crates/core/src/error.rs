use thiserror::Error;

/// Failure modes. Every variant carries a stable token used by the CLI.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("no-gap: {0}")]
    NoGap(String),
    #[error("not-chiral: {0}")]
    NotChiral(String),
    #[error("flux-mismatch: {0}")]
    FluxMismatch(String),
    #[error("range-too-large: {0}")]
    RangeTooLarge(String),
    #[error("boundary-depth: {0}")]
    BoundaryDepth(String),
    #[error("bloch-requires-zero-field")]
    BlochRequiresZeroField,
    #[error("bloch-requires-clean")]
    BlochRequiresClean,
    #[error("dirac-kernel: {0}")]
    DiracKernel(String),
    #[error("ach-violated: {0}")]
    AchViolated(String),
    #[error("ambiguous-kernel: {0}")]
    AmbiguousKernel(String),
    #[error("window-too-large: {0}")]
    WindowTooLarge(String),
    #[error("depth-cut-too-small: {0}")]
    DepthCutTooSmall(String),
    #[error("delta-in-spectrum: {0}")]
    DeltaInSpectrum(String),
    #[error("not-antisymmetric")]
    NotAntisymmetric,
    #[error("odd-dimension")]
    OddDimension,
    #[error("gap-closed-under-dB: {0}")]
    GapClosedUnderDb(String),
    #[error("gap-closed-on-loop: {0}")]
    GapClosedOnLoop(String),
    #[error("crossing-on-grid-node: {0}")]
    CrossingOnGridNode(String),
    #[error("eigensolver: {0}")]
    Eigensolver(String),
    #[error("invalid-input: {0}")]
    Invalid(String),
}

impl Error {
    pub fn token(&self) -> &'static str {
        match self {
            Error::NoGap(_) => "no-gap",
            Error::NotChiral(_) => "not-chiral",
            Error::FluxMismatch(_) => "flux-mismatch",
            Error::RangeTooLarge(_) => "range-too-large",
            Error::BoundaryDepth(_) => "boundary-depth",
            Error::BlochRequiresZeroField => "bloch-requires-zero-field",
            Error::BlochRequiresClean => "bloch-requires-clean",
            Error::DiracKernel(_) => "dirac-kernel",
            Error::AchViolated(_) => "ach-violated",
            Error::AmbiguousKernel(_) => "ambiguous-kernel",
            Error::WindowTooLarge(_) => "window-too-large",
            Error::DepthCutTooSmall(_) => "depth-cut-too-small",
            Error::DeltaInSpectrum(_) => "delta-in-spectrum",
            Error::NotAntisymmetric => "not-antisymmetric",
            Error::OddDimension => "odd-dimension",
            Error::GapClosedUnderDb(_) => "gap-closed-under-dB",
            Error::GapClosedOnLoop(_) => "gap-closed-on-loop",
            Error::CrossingOnGridNode(_) => "crossing-on-grid-node",
            Error::Eigensolver(_) => "eigensolver",
            Error::Invalid(_) => "invalid-input",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
