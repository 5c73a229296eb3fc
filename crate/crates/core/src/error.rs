use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("microphone index {index} out of range (array has {count} microphones)")]
    MicIndexOutOfRange { index: usize, count: usize },
    #[error("invalid source box: {0}")]
    InvalidBox(String),
    #[error("position {0} lies outside the source box")]
    OutsideBox(String),
    #[error("invalid noise specification: {0}")]
    InvalidNoiseSpec(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("window [{offset}, {end}) exceeds clip of {len} samples")]
    WindowOutOfClip { offset: usize, end: usize, len: usize },
    #[error("zero-energy input in {0}")]
    ZeroEnergy(&'static str),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("invalid network specification: {0}")]
    InvalidNetwork(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("topology fingerprint mismatch: expected {expected:016x}, found {found:016x}")]
    FingerprintMismatch { expected: u64, found: u64 },
    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: u64 },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("sequences {0} appear in both the fine-tuning set and the test set")]
    Leak(String),
    #[error("corpus too small: {0}")]
    CorpusTooSmall(String),
    #[error("empty report")]
    EmptyReport,
    #[error("reference MOTP must be positive, got {0}")]
    ZeroReference(f64),
    #[error("invalid report: {0}")]
    InvalidReport(String),
    #[error("malformed checkpoint: {0}")]
    Corrupt(String),
    #[error("ground truth: {0}")]
    GroundTruth(String),
}

pub type Result<T> = core::result::Result<T, Error>;
