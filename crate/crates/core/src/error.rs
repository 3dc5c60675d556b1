use thiserror::Error;

/// Every failure mode of the engine. The variant name doubles as the
/// machine-readable error tag the CLI prints on exit code 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("level {level} is not an eigenvalue of the flat operator")]
    LevelNotInSpectrum { level: f64 },
    #[error("two points of the singular set coincide: {0}")]
    DegenerateConfiguration(String),
    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),
    #[error("boundary mismatch: t_max * beta = {0} < 3")]
    BoundaryMismatch(f64),
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("invalid connection path: {0}")]
    InvalidPath(String),
    #[error("no spectral gap around the kernel threshold: {0}")]
    NoSpectralGap(String),
    #[error("eigensolver hit its iteration limit ({0} iterations)")]
    IterationLimit(usize),
    #[error("weights are separated by {0} walls, not one")]
    NotAdjacent(usize),
    #[error("an eigenvalue of the end operator vanishes at t = {0}")]
    CrossingAtBoundary(f64),
    #[error("fit window has {0} grid points, need at least 8")]
    WindowTooShort(usize),
    #[error("no dominant eigencomponent (ratio {0:.3} < 3)")]
    NoDominantMode(f64),
    #[error("mode shift leaves the retained Fourier box")]
    ModeOverflow,
    #[error("wall hit along the flat path at s = {0}")]
    WallHit(f64),
    #[error("normal operator is not invertible: {0}")]
    NotInvertible(String),
    #[error("Krylov iteration did not converge, residual {0:e}")]
    NoConvergence(f64),
    #[error("twist lies within {0} of the singular set")]
    SingularTwist(f64),
    #[error("rank jumps from {from} to {to} at grid index {at:?}")]
    RankJump { from: usize, to: usize, at: [usize; 3] },
    #[error("plaquette product has an eigenvalue on the negative real axis")]
    BranchCut,
    #[error("eigenvalue clusters not separated by a factor 5 (ratio {0:.3})")]
    ClusterAmbiguous(f64),
    #[error("malformed data: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Variant name, used as the stable error tag.
    pub fn name(&self) -> &'static str {
        match self {
            Error::LevelNotInSpectrum { .. } => "LevelNotInSpectrum",
            Error::DegenerateConfiguration(_) => "DegenerateConfiguration",
            Error::ResolutionTooCoarse(_) => "ResolutionTooCoarse",
            Error::BoundaryMismatch(_) => "BoundaryMismatch",
            Error::InvalidDiscretization(_) => "InvalidDiscretization",
            Error::InvalidPath(_) => "InvalidPath",
            Error::NoSpectralGap(_) => "NoSpectralGap",
            Error::IterationLimit(_) => "IterationLimit",
            Error::NotAdjacent(_) => "NotAdjacent",
            Error::CrossingAtBoundary(_) => "CrossingAtBoundary",
            Error::WindowTooShort(_) => "WindowTooShort",
            Error::NoDominantMode(_) => "NoDominantMode",
            Error::ModeOverflow => "ModeOverflow",
            Error::WallHit(_) => "WallHit",
            Error::NotInvertible(_) => "NotInvertible",
            Error::NoConvergence(_) => "NoConvergence",
            Error::SingularTwist(_) => "SingularTwist",
            Error::RankJump { .. } => "RankJump",
            Error::BranchCut => "BranchCut",
            Error::ClusterAmbiguous(_) => "ClusterAmbiguous",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
