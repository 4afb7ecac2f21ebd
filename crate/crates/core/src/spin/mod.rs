//! Spin response of the NV ensemble under pulsed control.
//!
//! The fast path treats π pulses as instantaneous sign flips of a modulation
//! function y(t) ∈ {+1, −1} and accumulates the sensing phase
//!
//! ```text
//! φ = γ · B · ∫ y(t) · cos(2π·f·t + φ₀) dt        (γ in rad s⁻¹ T⁻¹)
//! ```
//!
//! analytically per constant-sign segment ([`phase_closed_form`]) or by
//! trapezoid quadrature ([`phase_numeric`]). The slow path integrates the
//! Bloch equations sample by sample against a rendered waveform (see
//! [`bloch`]); the two must agree in the delta-pulse limit, which is what the
//! cross-validation tests pin down.

mod bloch;

pub use bloch::{propagate_bloch, BlochState};

use std::f64::consts::PI;

use crate::error::{CoreError, Result};
use crate::physics::{coherence_envelope, instantaneous_diffusion_rate, NVParams, PhysConsts};
use crate::pulse::{modulation_function, ModulationFunction, SequenceSpec};

/// How the RF phase relates to the pulse sequence across repeated shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseMode {
    /// The RF carrier is locked to the sequence trigger; `phase` is used as
    /// given on every shot.
    #[default]
    Fixed,
    /// The carrier free-runs, so the per-shot phase is uniform in [0, 2π).
    /// The single-shot functions here still evaluate at the stored `phase`;
    /// [`phase_averaged_contrast`] computes the phase-averaged response.
    RandomAveraged,
}

/// A single-tone RF magnetic field along the NV axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RFField {
    /// Carrier frequency, in Hz.
    pub frequency: f64,
    /// Amplitude of the axis-projected field, in T.
    pub amplitude: f64,
    /// Carrier phase, in rad, referenced to the start of the sensing window
    /// (the center of the first π/2 pulse).
    pub phase: f64,
    pub phase_mode: PhaseMode,
}

impl RFField {
    pub fn new(frequency: f64, amplitude: f64, phase: f64) -> Self {
        Self {
            frequency,
            amplitude,
            phase,
            phase_mode: PhaseMode::Fixed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency.is_finite() && self.frequency >= 0.0) {
            return Err(CoreError::Domain(format!(
                "RF frequency must be finite and >= 0, got {}",
                self.frequency
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(CoreError::Domain("RF amplitude must be finite".into()));
        }
        if !self.phase.is_finite() {
            return Err(CoreError::Domain("RF phase must be finite".into()));
        }
        Ok(())
    }
}

/// ∫ cos(ω·t + φ₀) dt over [a, b], with the ω → 0 limit handled exactly.
fn cos_integral(omega: f64, phi0: f64, a: f64, b: f64) -> f64 {
    if omega == 0.0 {
        (b - a) * phi0.cos()
    } else {
        ((omega * b + phi0).sin() - (omega * a + phi0).sin()) / omega
    }
}

/// Sensing phase accumulated by the sequence in the field, by exact
/// integration over each constant-sign segment of the modulation function.
/// Time in the carrier argument is measured from the start of the sensing
/// window.
pub fn phase_closed_form(
    consts: &PhysConsts,
    seq: &SequenceSpec,
    field: &RFField,
) -> Result<f64> {
    field.validate()?;
    let m = modulation_function(seq)?;
    Ok(consts.gamma_angular() * field.amplitude * modulation_overlap(&m, field.frequency, field.phase))
}

/// ∫ y(t)·cos(2πf·(t − t_start) + φ₀) dt over the sensing window.
fn modulation_overlap(m: &ModulationFunction, frequency: f64, phi0: f64) -> f64 {
    let omega = 2.0 * PI * frequency;
    m.segments()
        .iter()
        .map(|&(a, b, s)| s * cos_integral(omega, phi0, a - m.t_start, b - m.t_start))
        .sum()
}

/// Result of trapezoid-quadrature phase accumulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEstimate {
    /// Accumulated phase, in rad.
    pub radians: f64,
    /// Set when the requested step exceeds τ/50 (falling back to the
    /// shortest modulation segment for custom sequences without a nominal
    /// spacing), where the quadrature error is no longer negligible against
    /// the closed form.
    pub step_warning: bool,
}

/// Sensing phase by composite trapezoid quadrature with the given time step,
/// applied per constant-sign segment so the integrand stays smooth.
pub fn phase_numeric(
    consts: &PhysConsts,
    seq: &SequenceSpec,
    field: &RFField,
    step: f64,
) -> Result<PhaseEstimate> {
    field.validate()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(CoreError::Domain(format!("integration step must be > 0, got {step}")));
    }
    let m = modulation_function(seq)?;
    let omega = 2.0 * PI * field.frequency;
    let spacing_ref = if seq.tau > 0.0 {
        seq.tau
    } else {
        m.segments()
            .iter()
            .map(|&(a, b, _)| b - a)
            .fold(f64::INFINITY, f64::min)
    };
    let mut integral = 0.0;
    for &(a, b, s) in &m.segments() {
        let n = ((b - a) / step).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        let f = |t: f64| (omega * (t - m.t_start) + field.phase).cos();
        let mut acc = 0.5 * (f(a) + f(b));
        for k in 1..n {
            acc += f(a + k as f64 * h);
        }
        integral += s * acc * h;
    }
    Ok(PhaseEstimate {
        radians: consts.gamma_angular() * field.amplitude * integral,
        step_warning: step > spacing_ref / 50.0,
    })
}

/// Resonant-phase shortcut for an XY8 train: at f = 1/(2τ) with the carrier
/// cosine-aligned to the window, φ = (2/π)·γ·B·N_p·τ.
pub fn xy8_resonant_phase(consts: &PhysConsts, b_rf: f64, n_pi: usize, tau: f64) -> f64 {
    (2.0 / PI) * consts.gamma_angular() * b_rf * n_pi as f64 * tau
}

/// Bright-state return probability after the sequence given an accumulated
/// phase φ: p = ½·(1 + env(T)·cos(φ − r)) where T is the sensing time, env
/// the coherence envelope, and r the readout phase (r = 0 reads the cosine
/// quadrature, r = π/2 the sine).
pub fn xy8_signal(params: &NVParams, seq: &SequenceSpec, phi: f64) -> Result<f64> {
    let t = seq.sensing_time()?;
    let env = coherence_envelope(params, t);
    Ok(0.5 * (1.0 + env * (phi - seq.readout_phase).cos()))
}

/// Default number of carrier-phase quadrature points for
/// [`phase_averaged_contrast`].
pub const RANDOM_PHASE_POINTS: usize = 32;

/// Expected contrast magnitude ⟨|p(B, φ₀) − p(0)|⟩ when the RF carrier
/// free-runs against the sequence trigger, so φ₀ is uniform over [0, 2π).
/// The average is an `n_points` uniform quadrature; a trapezoid rule on a
/// 2π-periodic integrand converges spectrally, so the default
/// [`RANDOM_PHASE_POINTS`] already sits at the floating-point floor for
/// sensing phases below a radian.
pub fn phase_averaged_contrast(
    consts: &PhysConsts,
    params: &NVParams,
    seq: &SequenceSpec,
    field: &RFField,
    n_points: usize,
) -> Result<f64> {
    if n_points == 0 {
        return Err(CoreError::Domain("phase averaging needs at least one point".into()));
    }
    let p_ref = xy8_signal(params, seq, 0.0)?;
    let mut acc = 0.0;
    for k in 0..n_points {
        let shot = RFField {
            phase: field.phase + 2.0 * PI * k as f64 / n_points as f64,
            ..field.clone()
        };
        let phi = phase_closed_form(consts, seq, &shot)?;
        acc += (xy8_signal(params, seq, phi)? - p_ref).abs();
    }
    Ok(acc / n_points as f64)
}

/// Narrowband filter response of the sequence at frequency `f`:
/// W(f) = |∫ y(t)·e^{−i·2πf·t} dt|² / (2T/π)², normalized so the peak is 1
/// at f₀ = 1/(2τ) in the many-pulse limit (T is the sensing-window length).
pub fn filter_function(seq: &SequenceSpec, f: f64) -> Result<f64> {
    if !(f.is_finite() && f >= 0.0) {
        return Err(CoreError::Domain(format!("filter frequency must be >= 0, got {f}")));
    }
    let m = modulation_function(seq)?;
    let t = m.t_end - m.t_start;
    if t <= 0.0 {
        return Err(CoreError::Domain("empty sensing window".into()));
    }
    let re = modulation_overlap(&m, f, 0.0);
    let im = modulation_overlap(&m, f, -0.5 * PI); // sin quadrature
    let norm = 2.0 * t / PI;
    Ok((re * re + im * im) / (norm * norm))
}

/// Peak frequency and full width at half maximum of the filter passband
/// around f₀ = 1/(2τ), in Hz: (f_peak, fwhm).
pub fn filter_fwhm(seq: &SequenceSpec) -> Result<(f64, f64)> {
    let m = modulation_function(seq)?;
    let n_flips = m.flip_times.len();
    if n_flips == 0 {
        return Err(CoreError::UnsupportedSequence(
            "filter width needs at least one π pulse".into(),
        ));
    }
    let t = m.t_end - m.t_start;
    let tau = t / n_flips as f64;
    let f0 = 0.5 / tau;
    // Locate the peak by scanning a band around f₀ that comfortably covers
    // the main lobe (width ~ f₀/N_p), then refining parabolically.
    let half_band = 2.5 * f0 / n_flips as f64;
    let n_scan = 2001;
    let df = 2.0 * half_band / (n_scan - 1) as f64;
    let mut best = (f0, filter_function(seq, f0)?);
    for k in 0..n_scan {
        let f = f0 - half_band + k as f64 * df;
        if f <= 0.0 {
            continue;
        }
        let w = filter_function(seq, f)?;
        if w > best.1 {
            best = (f, w);
        }
    }
    let (fp, wp) = best;
    let f_peak = {
        let (wl, wr) = (filter_function(seq, fp - df)?, filter_function(seq, fp + df)?);
        let denom = wl - 2.0 * wp + wr;
        if denom.abs() > 0.0 {
            fp + 0.5 * df * (wl - wr) / denom
        } else {
            fp
        }
    };
    let w_peak = filter_function(seq, f_peak)?;
    let half = 0.5 * w_peak;
    let crossing = |mut inside: f64, mut outside: f64| -> Result<f64> {
        for _ in 0..64 {
            let mid = 0.5 * (inside + outside);
            if filter_function(seq, mid)? >= half {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    };
    // Expand outward until the response falls below half maximum.
    let mut lo = f_peak;
    let mut step = df;
    while lo - step > 0.0 && filter_function(seq, lo - step)? >= half {
        lo -= step;
        step *= 1.5;
    }
    let left = crossing(lo, (lo - step).max(f64::MIN_POSITIVE))?;
    let mut hi = f_peak;
    step = df;
    while filter_function(seq, hi + step)? >= half {
        hi += step;
        step *= 1.5;
    }
    let right = crossing(hi, hi + step)?;
    Ok((f_peak, right - left))
}

/// ODMR spectrum: fluorescence (normalized to 1 far off resonance) across
/// `freqs` for a bias field `b_bias` along the NV axis. Each hyperfine line
/// is a unit-peak Lorentzian dip of depth contrast/2 and the given FWHM.
pub fn simulate_odmr(
    consts: &PhysConsts,
    params: &NVParams,
    b_bias: f64,
    freqs: &[f64],
    fwhm: (f64, f64),
) -> Result<Vec<f64>> {
    let (f_lo, f_hi) = crate::physics::resonance_frequencies(consts, params, b_bias);
    for (name, w) in [("lower", fwhm.0), ("upper", fwhm.1)] {
        if !(w.is_finite() && w > 0.0) {
            return Err(CoreError::Domain(format!("{name} linewidth must be > 0, got {w}")));
        }
    }
    let lorentz = |f: f64, f0: f64, w: f64| {
        let x = 2.0 * (f - f0) / w;
        1.0 / (1.0 + x * x)
    };
    Ok(freqs
        .iter()
        .map(|&f| {
            1.0 - 0.5
                * params.readout_contrast
                * (lorentz(f, f_lo, fwhm.0) + lorentz(f, f_hi, fwhm.1))
        })
        .collect())
}

/// Hahn-echo decay over a grid of half-spacings τ (pulse spacing τ between
/// π/2 and π): S(τ) = env(2τ)·exp(−R(θ)·τ), where env is the intrinsic
/// coherence envelope over the total sensing time 2τ and R(θ) the
/// instantaneous-diffusion rate for a refocusing pulse of angle θ.
pub fn simulate_hahn_decay(
    consts: &PhysConsts,
    params: &NVParams,
    tau_grid: &[f64],
    center_angle: f64,
) -> Result<Vec<f64>> {
    if !(center_angle.is_finite() && (0.0..=2.0 * PI).contains(&center_angle)) {
        return Err(CoreError::Domain(format!(
            "refocusing angle must be in [0, 2π], got {center_angle}"
        )));
    }
    let density = crate::physics::ppm_to_volume_density(consts, params.density_ppm);
    let rate = instantaneous_diffusion_rate(consts, params, density, center_angle);
    tau_grid
        .iter()
        .map(|&tau| {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(CoreError::Domain(format!("τ must be >= 0, got {tau}")));
            }
            Ok(coherence_envelope(params, 2.0 * tau) * (-rate * tau).exp())
        })
        .collect()
}
