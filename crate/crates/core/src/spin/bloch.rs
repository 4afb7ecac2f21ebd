//! Sample-by-sample Bloch propagation against a rendered waveform.
//!
//! This is the slow, convention-free route to the sequence response: no
//! delta-pulse assumption, no modulation function. The two-level ms = 0 ↔
//! ms = −1 (or +1) subspace evolves in the frame rotating at the microwave
//! carrier; each waveform sample contributes a constant rotation vector
//!
//! ```text
//! ω = 2π·(Ω_I, Ω_Q, δ(t)),   δ(t) = detuning + gamma_e·B_rf(t)
//! ```
//!
//! applied exactly (Rodrigues' formula) for one sample interval. Transverse
//! relaxation advances only while the drive is silent — during a pulse the
//! drive dominates every other rate in the problem — by the ratio of the
//! coherence envelope across the interval, so the accumulated loss over the
//! free-evolution segments telescopes to the envelope at the total free time.
//! Longitudinal (T1) relaxation is neglected; it is orders of magnitude
//! slower than T2 for these ensembles over the timescales simulated here.

use crate::error::{CoreError, Result};
use crate::physics::{coherence_envelope, NVParams, PhysConsts};
use crate::pulse::WaveformIQ;
use crate::spin::RFField;
use std::f64::consts::PI;

/// Bloch vector of the driven two-level subspace. `z = +1` is the bright
/// (ms = 0) state; the bright-state probability is (1 + z)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochState {
    /// Fully polarized bright state, the initial condition after optical
    /// pumping.
    pub fn bright() -> Self {
        Self { x: 0.0, y: 0.0, z: 1.0 }
    }

    /// Bright-state return probability encoded by this vector.
    pub fn population(&self) -> f64 {
        0.5 * (1.0 + self.z)
    }

    fn rotate(&mut self, wx: f64, wy: f64, wz: f64, dt: f64) {
        let norm = (wx * wx + wy * wy + wz * wz).sqrt();
        if norm == 0.0 {
            return;
        }
        let (kx, ky, kz) = (wx / norm, wy / norm, wz / norm);
        let angle = norm * dt;
        let (s, c) = angle.sin_cos();
        let (x, y, z) = (self.x, self.y, self.z);
        let dot = kx * x + ky * y + kz * z;
        let (cx, cy, cz) = (ky * z - kz * y, kz * x - kx * z, kx * y - ky * x);
        self.x = x * c + cx * s + kx * dot * (1.0 - c);
        self.y = y * c + cy * s + ky * dot * (1.0 - c);
        self.z = z * c + cz * s + kz * dot * (1.0 - c);
    }
}

/// Minimum number of waveform samples per Rabi cycle accepted by
/// [`propagate_bloch`]. Below this the piecewise-constant rotation no longer
/// resolves the pulse envelope.
pub const MIN_SAMPLES_PER_RABI_CYCLE: u32 = 10;

/// Evolve the bright state through a rendered waveform and return the final
/// Bloch vector.
///
/// `detuning` is the static microwave detuning from the addressed resonance,
/// in Hz. `field`, when present, is the axis-projected RF tone; its `phase`
/// is referenced to `rf_origin` on the waveform time axis (pass the center
/// of the first π/2 pulse to match the closed-form phase convention, which
/// starts its clock at the opening of the sensing window).
pub fn propagate_bloch(
    consts: &PhysConsts,
    params: &NVParams,
    wf: &WaveformIQ,
    detuning: f64,
    field: Option<&RFField>,
    rf_origin: f64,
) -> Result<BlochState> {
    if !detuning.is_finite() {
        return Err(CoreError::Domain("detuning must be finite".into()));
    }
    if let Some(f) = field {
        f.validate()?;
    }
    let max_rabi = wf.max_rabi();
    let required = MIN_SAMPLES_PER_RABI_CYCLE as f64 * max_rabi;
    if max_rabi > 0.0 && wf.sample_rate < required {
        return Err(CoreError::ResolutionTooCoarse {
            actual_hz: wf.sample_rate,
            required_hz: required,
            min_samples: MIN_SAMPLES_PER_RABI_CYCLE,
        });
    }

    let h = 1.0 / wf.sample_rate;
    let mut state = BlochState::bright();
    for k in 0..wf.len() {
        let t = k as f64 * h;
        let (oi, oq) = wf.rabi_at(k);
        let b_rf = field.map_or(0.0, |f| {
            f.amplitude * (2.0 * PI * f.frequency * (t - rf_origin) + f.phase).cos()
        });
        let delta = detuning + consts.gamma_e * b_rf;
        if oi == 0.0 && oq == 0.0 {
            // Free evolution: precession about z plus transverse decay.
            let decay = coherence_envelope(params, t + h) / coherence_envelope(params, t);
            state.x *= decay;
            state.y *= decay;
            if delta != 0.0 {
                state.rotate(0.0, 0.0, 2.0 * PI * delta, h);
            }
        } else {
            state.rotate(2.0 * PI * oi, 2.0 * PI * oq, 2.0 * PI * delta, h);
        }
    }
    Ok(state)
}
