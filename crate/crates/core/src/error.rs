//! Crate-wide error type.

use crate::volume::VoxelDomain;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // ---- volume construction ----
    #[error("data length {len} does not match shape {shape:?} ({expected} voxels)")]
    ShapeDataMismatch {
        shape: [usize; 3],
        len: usize,
        expected: usize,
    },
    #[error("volume contains a non-finite value at linear index {index}")]
    NonFiniteData { index: usize },
    #[error("value {value} at linear index {index} is outside the {domain:?} range")]
    DomainRangeViolation {
        domain: VoxelDomain,
        value: f64,
        index: usize,
    },
    #[error("shape components must be positive, got {shape:?}")]
    EmptyShape { shape: [usize; 3] },
    #[error("voxel spacing must be positive, got {spacing:?}")]
    InvalidSpacing { spacing: [f64; 3] },

    // ---- file I/O ----
    #[error("malformed NIfTI-1 header: {reason}")]
    MalformedHeader { reason: String },
    #[error("unsupported NIfTI datatype code {code} (only 4 = int16 and 16 = float32)")]
    UnsupportedDatatype { code: i16 },
    #[error("file is big-endian; only little-endian NIfTI-1 is supported")]
    UnsupportedEndianness,
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("sidecar declares {declared} voxels but payload holds {actual}")]
    SidecarMismatch { declared: usize, actual: usize },
    #[error("malformed sidecar {path}: {reason}")]
    MalformedSidecar { path: String, reason: String },

    // ---- schedules ----
    #[error("invalid beta range [{beta_start}, {beta_end}]: need 0 < start <= end < 1")]
    InvalidBetaRange { beta_start: f64, beta_end: f64 },
    #[error("cannot respace a {base} step schedule to {requested} steps")]
    StepCountTooLarge { requested: usize, base: usize },
    #[error("step count must be positive")]
    ZeroSteps,

    // ---- diffusion ----
    #[error("grid shapes differ: {lhs:?} vs {rhs:?}")]
    ShapeMismatch { lhs: [usize; 3], rhs: [usize; 3] },
    #[error("step index {t} out of range for a {len} step schedule")]
    StepOutOfRange { t: usize, len: usize },
    #[error("sampler config expects T = {cfg_t} but the schedule has {schedule_t} steps")]
    SamplerConfigMismatch { cfg_t: usize, schedule_t: usize },
    #[error("clip range ({lo}, {hi}) is empty")]
    InvalidClipRange { lo: f64, hi: f64 },

    // ---- denoisers ----
    #[error("sigma must be positive, got {sigma}")]
    NonPositiveSigma { sigma: f64 },
    #[error("cannot fit a denoiser on an empty dataset")]
    EmptyDataset,
    #[error("degenerate least-squares design at step {t}: x_t has zero variance")]
    DegenerateDesign { t: usize },

    // ---- losses ----
    #[error("SSIM window {window} exceeds a volume dimension {shape:?}")]
    WindowTooLarge { window: usize, shape: [usize; 3] },
    #[error("{scales} scales are not supported for shape {shape:?} with window {window}")]
    TooManyScalesForShape {
        scales: usize,
        window: usize,
        shape: [usize; 3],
    },
    #[error("feature extractor outputs disagree: {reason}")]
    ExtractorShapeMismatch { reason: String },
    #[error("loss weights are tagged {found:?} but {expected} is required")]
    PhaseMismatch {
        expected: &'static str,
        found: String,
    },
    #[error("epoch {epoch} out of range 0..={total}")]
    EpochOutOfRange { epoch: usize, total: usize },

    // ---- planner / tiler ----
    #[error("window {window:?} larger than volume {volume:?}")]
    WindowLargerThanVolume {
        window: [usize; 3],
        volume: [usize; 3],
    },
    #[error("overlap fraction {p} outside [0, 1)")]
    InvalidOverlap { p: f64 },
    #[error(
        "budget allows at most {t_max:.2} steps, below the minimum trained step count {min_step}"
    )]
    BudgetInfeasible { t_max: f64, min_step: usize },
    #[error("plan infeasible even at the minimum overlap {p_min}")]
    InfeasibleAtMinimumOverlap { p_min: f64 },
    #[error("window index {index} out of range ({count} windows)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("expected {expected} window outputs, got {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("empty step set")]
    EmptyStepSet,
    #[error("step set must be strictly increasing, got {values:?}")]
    UnsortedStepSet { values: Vec<usize> },

    // ---- normalization ----
    #[error("expected a volume in the {expected:?} domain, got {found:?}")]
    DomainMismatch {
        expected: VoxelDomain,
        found: VoxelDomain,
    },
    #[error("cannot z-score: standard deviation is zero")]
    ZeroStd,
    #[error("statistics region is empty (no nonzero voxels)")]
    EmptyStatsRegion,
    #[error("mode requires externally computed statistics but none were supplied")]
    MissingGlobalStats,
    #[error("stats do not invert this volume: {reason}")]
    StatsMismatch { reason: String },

    // ---- metrics ----
    #[error("mask is empty")]
    EmptyMask,
    #[error("voxel spacings differ: {lhs:?} vs {rhs:?}")]
    SpacingMismatch { lhs: [f64; 3], rhs: [f64; 3] },
    #[error("distance tolerance must be non-negative, got {tolerance_mm}")]
    NegativeTolerance { tolerance_mm: f64 },

    // ---- augmentation ----
    #[error("rotation angle {angle} deg exceeds the configured maximum {max} deg")]
    AngleOutOfRange { angle: f64, max: f64 },
    #[error("affine factor {value} outside the configured range [{lo}, {hi}]")]
    FactorOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("sigma must be non-negative, got {sigma}")]
    NegativeSigma { sigma: f64 },
    #[error("bias field order {order} exceeds the maximum 3")]
    OrderTooHigh { order: usize },
}
