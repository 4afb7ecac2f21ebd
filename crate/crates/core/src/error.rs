//! Error type shared by the simulation and analysis kernels.

use thiserror::Error;

/// Errors surfaced by sequence construction, waveform rendering, spin
/// propagation, and the analysis routines.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    /// Requested pulse timing cannot be realized (overlapping envelope
    /// supports, negative delays, pulse extending before t = 0, ...).
    #[error("infeasible sequence: {0}")]
    InfeasibleSequence(String),

    /// A pulse asks for more drive amplitude than the rendering full scale.
    #[error(
        "pulse {pulse_index} requires a peak Rabi amplitude of {required_hz:.3e} Hz, \
         exceeding the full-scale setting of {full_scale_hz:.3e} Hz"
    )]
    RenderOverflow {
        pulse_index: usize,
        required_hz: f64,
        full_scale_hz: f64,
    },

    /// The operation is only defined for a restricted family of sequences
    /// (e.g. a modulation function of a pi-pulse train).
    #[error("unsupported sequence: {0}")]
    UnsupportedSequence(String),

    /// Sample rate too coarse to track the fastest rotation in a waveform.
    #[error(
        "sample rate {actual_hz:.3e} Hz resolves the fastest Rabi period by fewer than \
         {min_samples} samples (needs at least {required_hz:.3e} Hz)"
    )]
    ResolutionTooCoarse {
        actual_hz: f64,
        required_hz: f64,
        min_samples: u32,
    },

    /// A scalar argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Occupied bandwidth of an all-zero waveform is undefined.
    #[error("bandwidth is undefined for an all-zero waveform")]
    UndefinedBandwidth,

    /// The discrete argmax of a curve sits on the first or last grid point,
    /// so no interpolated peak can be reported.
    #[error("peak lies on the grid boundary at index {index}; widen the sweep range")]
    PeakAtBoundary { index: usize },

    /// Traces passed to a repeat-statistics reduction disagree on their grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A measured contrast cannot be inverted to a field amplitude.
    #[error(
        "contrast {value:.6e} is outside the invertible range [0, {max:.6e}] \
         of the signal model"
    )]
    InversionOutOfRange { value: f64, max: f64 },

    /// Input series is empty or too short for the requested operation.
    #[error("empty input: {0}")]
    EmptyInput(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;
