//! Pulse sequences: construction, timing edits, and the spin-flip
//! modulation function.
//!
//! A sequence is an ordered list of shaped microwave pulses on a common time
//! axis, with t = 0 at the leading edge of the first pulse envelope. The
//! builders produce the two sequence families used throughout: XY8-N
//! dynamical decoupling (π/2 — [8N π pulses, phases X Y X Y Y X Y X] — π/2)
//! and the Hahn echo (π/2 — θ — π/2), both with τ/2 lead-in/out spacing for
//! the decoupling train and τ spacing between π-pulse centers.

mod render;

pub use render::{
    bandwidth_estimate, envelope_centroid, pulse_areas, render_waveform, render_waveform_with,
    RenderOptions, WaveformIQ,
};

use crate::error::{CoreError, Result};
use std::f64::consts::PI;

/// Drive envelope family of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Envelope {
    /// A(t) = A_peak·cos²(π(t − center)/duration) on the support, zero outside.
    /// Smooth turn-on/off concentrates the drive spectrum near the carrier.
    #[default]
    CosineSquare,
    /// Constant A_peak over the support.
    Rectangular,
}

impl Envelope {
    /// Ratio of envelope area to peak·duration: ∫A dt = A_peak·duration·factor.
    pub fn area_factor(self) -> f64 {
        match self {
            Envelope::CosineSquare => 0.5,
            Envelope::Rectangular => 1.0,
        }
    }
}

/// One shaped pulse. Times in seconds, phase in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    /// Envelope center on the sequence time axis.
    pub center_time: f64,
    /// Full envelope support length.
    pub duration: f64,
    /// Drive phase: 0 = X, π/2 = Y.
    pub phase: f64,
    /// Rotation angle the pulse implements, in (0, 2π]. A zero angle is not
    /// a pulse — drop it from the list instead of emitting silence.
    pub target_angle: f64,
    pub envelope: Envelope,
}

impl PulseSpec {
    /// Leading edge of the envelope support.
    pub fn start(&self) -> f64 {
        self.center_time - 0.5 * self.duration
    }

    /// Trailing edge of the envelope support.
    pub fn end(&self) -> f64 {
        self.center_time + 0.5 * self.duration
    }

    /// Peak drive amplitude in Rabi-frequency units (Hz) needed to reach
    /// `target_angle`: solves 2π·∫A(t)dt = target_angle for the continuous
    /// envelope. A cos² π pulse needs 1/duration, twice the rectangular value.
    pub fn peak_rabi(&self) -> f64 {
        self.target_angle / (2.0 * PI * self.duration * self.envelope.area_factor())
    }

    fn validate(&self, index: usize) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(CoreError::InfeasibleSequence(format!(
                "pulse {index}: duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.target_angle > 0.0 && self.target_angle <= 2.0 * PI) {
            return Err(CoreError::InfeasibleSequence(format!(
                "pulse {index}: target angle {} outside (0, 2π]",
                self.target_angle
            )));
        }
        if !self.phase.is_finite() || !self.center_time.is_finite() {
            return Err(CoreError::InfeasibleSequence(format!(
                "pulse {index}: non-finite phase or center time"
            )));
        }
        if self.start() < -1e-15 {
            return Err(CoreError::InfeasibleSequence(format!(
                "pulse {index}: envelope starts at {:.3e} s, before t = 0",
                self.start()
            )));
        }
        Ok(())
    }
}

/// What family a sequence was built as. Operations that only make sense for a
/// specific family (e.g. the modulation function of a π train) check the
/// pulse list itself, but the tag keeps downstream reporting readable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Xy8,
    Hahn,
    Custom,
}

/// An ordered pulse sequence on a common time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    /// Pulses ordered by center time with non-overlapping supports.
    pub pulses: Vec<PulseSpec>,
    /// Total duration of the sequence; rendering covers [0, total_time].
    pub total_time: f64,
    /// π-pulse center spacing (XY8) or π/2-to-center-pulse delay (Hahn).
    pub tau: f64,
    /// XY8 repetition count N (number of 8-pulse blocks); 0 for other kinds.
    pub n_reps: usize,
    /// Phase offset of the final projection π/2 relative to the phase that
    /// maps zero accumulated phase back to the bright state.
    pub readout_phase: f64,
    pub kind: SequenceKind,
}

/// Phase pattern of one XY8 block: X Y X Y Y X Y X.
pub const XY8_BLOCK_PHASES: [f64; 8] = [
    0.0,
    PI / 2.0,
    0.0,
    PI / 2.0,
    PI / 2.0,
    0.0,
    PI / 2.0,
    0.0,
];

impl SequenceSpec {
    /// Wrap an explicit pulse list (ordered, validated) as a custom sequence.
    pub fn custom(pulses: Vec<PulseSpec>, total_time: f64) -> Result<Self> {
        let seq = Self {
            pulses,
            total_time,
            tau: 0.0,
            n_reps: 0,
            readout_phase: 0.0,
            kind: SequenceKind::Custom,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Check ordering, support overlap, and that every envelope fits inside
    /// [0, total_time].
    pub fn validate(&self) -> Result<()> {
        if !(self.total_time.is_finite() && self.total_time >= 0.0) {
            return Err(CoreError::InfeasibleSequence(format!(
                "total_time must be finite and >= 0, got {}",
                self.total_time
            )));
        }
        for (i, p) in self.pulses.iter().enumerate() {
            p.validate(i)?;
            if p.end() > self.total_time + 1e-15 {
                return Err(CoreError::InfeasibleSequence(format!(
                    "pulse {i} ends at {:.6e} s, after total_time = {:.6e} s",
                    p.end(),
                    self.total_time
                )));
            }
        }
        for i in 1..self.pulses.len() {
            let (a, b) = (&self.pulses[i - 1], &self.pulses[i]);
            if b.center_time < a.center_time {
                return Err(CoreError::InfeasibleSequence(format!(
                    "pulses {} and {} are out of time order",
                    i - 1,
                    i
                )));
            }
            // Touching supports are fine; interpenetrating ones are not.
            if b.start() < a.end() - 1e-15 {
                return Err(CoreError::InfeasibleSequence(format!(
                    "pulses {} and {} overlap: {:.6e} s < {:.6e} s",
                    i - 1,
                    i,
                    b.start(),
                    a.end()
                )));
            }
        }
        Ok(())
    }

    /// Number of π pulses (target angle π) in the sequence.
    pub fn n_pi_pulses(&self) -> usize {
        self.pulses
            .iter()
            .filter(|p| (p.target_angle - PI).abs() < 1e-12)
            .count()
    }

    /// Centers of the first and last pulse: the free-evolution (sensing)
    /// window over which phase accumulates.
    pub fn sensing_window(&self) -> Result<(f64, f64)> {
        match (self.pulses.first(), self.pulses.last()) {
            (Some(a), Some(b)) => Ok((a.center_time, b.center_time)),
            _ => Err(CoreError::EmptyInput("sequence has no pulses".into())),
        }
    }

    /// Length of the sensing window (8Nτ for XY8-N, 2τ for Hahn).
    pub fn sensing_time(&self) -> Result<f64> {
        let (a, b) = self.sensing_window()?;
        Ok(b - a)
    }
}

/// Build an XY8-N decoupling sequence.
///
/// Layout on the time axis (centers): a π/2 whose envelope starts at t = 0,
/// the first π pulse τ/2 after the π/2 center, then 8N−1 further π pulses
/// spaced τ apart with block phases X Y X Y Y X Y X, and a closing π/2
/// another τ/2 after the last π pulse. The π/2 pulses run at the same peak
/// amplitude as the π pulses over half the duration (half the rotation
/// area), so the sequence stays feasible down to τ = 1.5·pi_len — the
/// lead-in τ/2 must clear pi_len/4 + pi_len/2 of envelope support. Total
/// sensing time is 8·n_reps·τ.
///
/// # Arguments
/// * `n_reps`: number of 8-pulse blocks (N ≥ 1)
/// * `tau`: π-pulse center spacing (s); must exceed `pi_len`, and the
///   validator additionally rejects τ < 1.5·pi_len where the lead-in
///   overlaps
/// * `pi_len`: π-pulse envelope duration (s)
/// * `readout_phase`: phase offset of the closing π/2 (rad); 0 reads out the
///   cosine of the accumulated phase, π/2 the sine
/// * `envelope`: envelope family for every pulse
pub fn build_xy8(
    n_reps: usize,
    tau: f64,
    pi_len: f64,
    readout_phase: f64,
    envelope: Envelope,
) -> Result<SequenceSpec> {
    if n_reps == 0 {
        return Err(CoreError::InfeasibleSequence("n_reps must be >= 1".into()));
    }
    if !(tau.is_finite() && pi_len.is_finite() && pi_len > 0.0) {
        return Err(CoreError::InfeasibleSequence(format!(
            "tau and pi_len must be finite, pi_len > 0 (tau = {tau}, pi_len = {pi_len})"
        )));
    }
    if tau <= pi_len {
        return Err(CoreError::InfeasibleSequence(format!(
            "tau = {tau:.4e} s must exceed the pi-pulse length {pi_len:.4e} s"
        )));
    }
    let n_pi = 8 * n_reps;
    let half_len = 0.5 * pi_len;
    let c0 = 0.5 * half_len;
    let mut pulses = Vec::with_capacity(n_pi + 2);
    pulses.push(PulseSpec {
        center_time: c0,
        duration: half_len,
        phase: 0.0,
        target_angle: PI / 2.0,
        envelope,
    });
    for k in 0..n_pi {
        pulses.push(PulseSpec {
            center_time: c0 + 0.5 * tau + k as f64 * tau,
            duration: pi_len,
            phase: XY8_BLOCK_PHASES[k % 8],
            target_angle: PI,
            envelope,
        });
    }
    pulses.push(PulseSpec {
        center_time: c0 + n_pi as f64 * tau,
        duration: half_len,
        // Phase π maps zero accumulated phase back onto the bright state;
        // readout_phase rotates the projection quadrature from there.
        phase: PI + readout_phase,
        target_angle: PI / 2.0,
        envelope,
    });
    let seq = SequenceSpec {
        pulses,
        total_time: n_pi as f64 * tau + half_len,
        tau,
        n_reps,
        readout_phase,
        kind: SequenceKind::Xy8,
    };
    seq.validate()?;
    Ok(seq)
}

/// Build a Hahn-echo sequence π/2 — τ — θ — τ — π/2 with `tau_half` the
/// center-to-center delay on each side of the refocusing pulse. The middle
/// pulse implements `center_angle` ∈ (0, 2π] at fixed duration `pi_len`
/// (its amplitude scales with the angle); the outer π/2 pulses run at half
/// that duration, matching the XY8 builder. Total sensing time is
/// 2·tau_half.
pub fn build_hahn(
    tau_half: f64,
    center_angle: f64,
    pi_len: f64,
    readout_phase: f64,
    envelope: Envelope,
) -> Result<SequenceSpec> {
    if !(tau_half.is_finite() && pi_len.is_finite() && pi_len > 0.0) {
        return Err(CoreError::InfeasibleSequence(format!(
            "tau_half and pi_len must be finite, pi_len > 0 (tau_half = {tau_half}, pi_len = {pi_len})"
        )));
    }
    if tau_half <= pi_len {
        return Err(CoreError::InfeasibleSequence(format!(
            "tau_half = {tau_half:.4e} s must exceed the pulse length {pi_len:.4e} s"
        )));
    }
    if !(center_angle > 0.0 && center_angle <= 2.0 * PI) {
        return Err(CoreError::InfeasibleSequence(format!(
            "center angle {center_angle} outside (0, 2π]"
        )));
    }
    let half_len = 0.5 * pi_len;
    let c0 = 0.5 * half_len;
    let pulses = vec![
        PulseSpec {
            center_time: c0,
            duration: half_len,
            phase: 0.0,
            target_angle: PI / 2.0,
            envelope,
        },
        PulseSpec {
            center_time: c0 + tau_half,
            duration: pi_len,
            phase: 0.0,
            target_angle: center_angle,
            envelope,
        },
        PulseSpec {
            center_time: c0 + 2.0 * tau_half,
            duration: half_len,
            phase: PI + readout_phase,
            target_angle: PI / 2.0,
            envelope,
        },
    ];
    let seq = SequenceSpec {
        pulses,
        total_time: 2.0 * tau_half + half_len,
        tau: tau_half,
        n_reps: 0,
        readout_phase,
        kind: SequenceKind::Hahn,
    };
    seq.validate()?;
    Ok(seq)
}

/// Return a copy of `seq` with pulse `index` moved by `delta` seconds.
/// The shifted sequence is re-validated, so a move that makes envelopes
/// collide or pushes a pulse outside [0, total_time] is rejected.
pub fn shift_pulse_center(seq: &SequenceSpec, index: usize, delta: f64) -> Result<SequenceSpec> {
    if index >= seq.pulses.len() {
        return Err(CoreError::Domain(format!(
            "pulse index {index} out of range for a sequence of {} pulses",
            seq.pulses.len()
        )));
    }
    if !delta.is_finite() {
        return Err(CoreError::Domain(format!("shift must be finite, got {delta}")));
    }
    let mut out = seq.clone();
    out.pulses[index].center_time += delta;
    out.validate()?;
    Ok(out)
}

/// Spin-flip modulation function y(t) of a decoupling sequence: +1 from the
/// sensing-window start, toggling sign at every π-pulse center.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationFunction {
    /// Sensing window start (center of the opening π/2).
    pub t_start: f64,
    /// Sensing window end (center of the closing π/2).
    pub t_end: f64,
    /// π-pulse centers, strictly increasing, inside (t_start, t_end).
    pub flip_times: Vec<f64>,
}

impl ModulationFunction {
    /// Sign of y at time `t` (+1 before the first flip). Outside the sensing
    /// window y is defined as 0: no phase accumulates there.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.t_start || t > self.t_end {
            return 0.0;
        }
        let flips_before = self.flip_times.partition_point(|&f| f <= t);
        if flips_before % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Constant-sign segments (start, end, sign) covering the sensing window.
    pub fn segments(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.flip_times.len() + 1);
        let mut a = self.t_start;
        let mut sign = 1.0;
        for &f in &self.flip_times {
            out.push((a, f, sign));
            a = f;
            sign = -sign;
        }
        out.push((a, self.t_end, sign));
        out
    }
}

/// Extract the modulation function of a sequence consisting of π/2 pulses at
/// both ends and only π pulses in between. Sequences with any other interior
/// rotation angle have no two-valued modulation function and are rejected.
pub fn modulation_function(seq: &SequenceSpec) -> Result<ModulationFunction> {
    if seq.pulses.len() < 2 {
        return Err(CoreError::UnsupportedSequence(
            "need at least an opening and closing π/2 pulse".into(),
        ));
    }
    let first = &seq.pulses[0];
    let last = &seq.pulses[seq.pulses.len() - 1];
    for (name, p) in [("first", first), ("last", last)] {
        if (p.target_angle - PI / 2.0).abs() > 1e-12 {
            return Err(CoreError::UnsupportedSequence(format!(
                "{name} pulse must be a π/2 projection pulse, got angle {}",
                p.target_angle
            )));
        }
    }
    let mut flip_times = Vec::with_capacity(seq.pulses.len() - 2);
    for (i, p) in seq.pulses[1..seq.pulses.len() - 1].iter().enumerate() {
        if (p.target_angle - PI).abs() > 1e-12 {
            return Err(CoreError::UnsupportedSequence(format!(
                "interior pulse {} has angle {}, only π pulses toggle the modulation sign",
                i + 1,
                p.target_angle
            )));
        }
        flip_times.push(p.center_time);
    }
    Ok(ModulationFunction {
        t_start: first.center_time,
        t_end: last.center_time,
        flip_times,
    })
}
