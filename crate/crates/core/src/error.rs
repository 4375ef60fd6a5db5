//! Error taxonomy shared by all modules.

/// Convenience alias for fallible operations in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type.
///
/// The variants map onto three broad classes used by callers to pick exit
/// codes: input validation (`Domain`, `Config`, `Trim`, `Shape`,
/// `InsufficientData`, `EmptySubsample`), I/O (`Io`, `Csv`), and numerical
/// failure (`DegenerateSample`, `Singularity`, `InfiniteEstimate`,
/// `DegenerateTarget`, `Collinear`).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument lies outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid run configuration (bandwidth, simulation size, ranges).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Too few observations for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Evaluation point outside the trimmed interval `[h, 1-h]`.
    #[error("trim violation: {0}")]
    Trim(String),

    /// A sample without variation where variation is required.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Division by a vanishing quantity, e.g. `A1'(u) = 0`.
    #[error("singularity: {0}")]
    Singularity(String),

    /// A reciprocal estimator hit a zero density estimate.
    #[error("infinite estimate: {0}")]
    InfiniteEstimate(String),

    /// A band shape function touches zero on the trimmed interval.
    #[error("shape function invalid: {0}")]
    Shape(String),

    /// The simulated process is identically zero, so no critical value
    /// exists; the caller should switch to the suggested alternative.
    #[error("degenerate simulation target: {0}")]
    DegenerateTarget(String),

    /// Rank-deficient regression design; lists the offending columns.
    #[error("collinear design, offending columns: {}", .0.join(", "))]
    Collinear(Vec<String>),

    /// A subsample selection matched no auctions.
    #[error("empty subsample: {0}")]
    EmptySubsample(String),

    /// Underlying file-system failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV input.
    #[error("csv error: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let message = err.to_string();
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => Error::Csv(message),
        }
    }
}

impl Error {
    /// True for errors caused by invalid arguments or configuration.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Config(_)
                | Error::InsufficientData(_)
                | Error::Trim(_)
                | Error::Shape(_)
                | Error::EmptySubsample(_)
        )
    }

    /// True for errors surfaced while reading or writing data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_))
    }
}
