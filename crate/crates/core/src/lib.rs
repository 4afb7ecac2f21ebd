//! Simulation and analysis kernels for RF magnetometry with NV-center
//! ensembles.
//!
//! The crate models the full signal chain of a pulsed NV magnetometer:
//!
//! * [`physics`] — constants, ensemble parameters, resonance positions,
//!   coherence envelopes, pulse-induced decay rates;
//! * [`pulse`] — XY8 / Hahn sequence construction, timing validation, the
//!   ±1 modulation function, and rendering into quantized IQ waveforms;
//! * [`spin`] — the sensed response: accumulated phase (closed-form and
//!   quadrature routes), narrowband filter functions, Bloch-equation
//!   propagation against rendered waveforms, ODMR and echo-decay spectra;
//! * [`field`] — the strip-conductor field map and its projection onto the
//!   NV axis;
//! * [`analysis`] — model fitting (Lorentzian pairs, double exponentials),
//!   parameter extraction, and small statistics helpers.
//!
//! The same quantities are deliberately computable by more than one route
//! (analytic vs. quadrature vs. sample-level propagation); the test suite
//! leans on that redundancy to pin conventions down.

pub mod analysis;
pub mod error;
pub mod field;
pub mod physics;
pub mod pulse;
pub mod spin;

pub use error::{CoreError, Result};
