use alloc::string::String;

/// Failure modes shared by every module of the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid basis index: family {family}, n1 {n1}, n2 {n2}")]
    InvalidBasisIndex { family: u8, n1: u32, n2: u32 },
    #[error("empty point set")]
    EmptyPointSet,
    #[error("grid of size {n} aliases modes up to cutoff {cutoff}")]
    Aliasing { n: usize, cutoff: u32 },
    #[error("grid spacing {spacing} does not resolve kernel radius {radius} (need spacing <= radius/4)")]
    KernelResolution { spacing: f64, radius: f64 },
    #[error("grid size mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: usize, found: usize },
    #[error("rejection sampling gave up after {attempts} proposals; density exceeds its declared bound")]
    RejectionCap { attempts: u64 },
    #[error("kernel-smoothed density {value:e} below the positivity floor")]
    DegenerateDenominator { value: f64 },
    #[error("density {value:e} below the negativity floor at t = {time}")]
    Negativity { value: f64, time: f64 },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
