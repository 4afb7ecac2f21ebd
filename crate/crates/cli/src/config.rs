//! Scenario files: flat, sectioned TOML describing one bench configuration.
//!
//! Every key has a default, and the defaults reproduce the headline bench:
//! an XY8-16 sequence of 12.5 ns cosine-square π pulses sensing a 0.44 µT,
//! 19.23 MHz test field, read out through a 512×512 camera binned 16×16
//! with 100 averaged frames. A config file therefore only needs the keys it
//! wants to change, and an absent file means "run the reference scenario".
//!
//! Validation is collected, not short-circuited: every offending key is
//! reported in one message so a bad file can be fixed in one pass.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nvsim_core::field::WireGeometry;
use nvsim_core::physics::{NVParams, PhysConsts, ResonanceBranch};
use nvsim_core::pulse::Envelope;
use nvsim_core::spin::{PhaseMode, RFField};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Top-level scenario. Section structs below mirror the TOML sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Optional self-description of the file. When present it must match
    /// the experiment actually invoked — a cheap guard against pointing a
    /// verb at the wrong scenario file.
    pub experiment: Option<String>,
    /// Default RNG seed; the `--seed` flag overrides it.
    pub rng_seed: u64,
    pub nv: NvSection,
    pub sequence: SequenceSection,
    pub rf: RfSection,
    pub wire: WireSection,
    pub camera: CameraSection,
    pub odmr: OdmrSection,
    pub hahn: HahnSection,
    pub id: IdSection,
    pub rabi: RabiSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            rng_seed: 1,
            nv: NvSection::default(),
            sequence: SequenceSection::default(),
            rf: RfSection::default(),
            wire: WireSection::default(),
            camera: CameraSection::default(),
            odmr: OdmrSection::default(),
            hahn: HahnSection::default(),
            id: IdSection::default(),
            rabi: RabiSection::default(),
        }
    }
}

/// Ensemble and material constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NvSection {
    /// Gyromagnetic ratio, Hz/T (not angular).
    pub gamma_e_hz_per_t: f64,
    /// Zero-field splitting D, Hz.
    pub zero_field_splitting_hz: f64,
    /// Hyperfine splitting of the 15N pair, Hz.
    pub hyperfine_splitting_hz: f64,
    /// Fast and slow components of the echo coherence envelope, s.
    pub t2_fast_s: f64,
    pub t2_slow_s: f64,
    /// Weight of the fast component, in [0, 1].
    pub fast_weight: f64,
    /// NV concentration, ppm of carbon sites.
    pub density_ppm: f64,
    /// Fluorescence readout contrast, in (0, 1].
    pub readout_contrast: f64,
    /// NV symmetry axis, unit vector in the lab frame (x across the wire,
    /// y along it, z out of the surface).
    pub axis: [f64; 3],
    /// Hyperfine branch addressed by every drive: "lower" or "upper".
    pub branch: BranchChoice,
    /// Instantaneous-diffusion prefactor, T²·m³·s. Omit to use the dipolar
    /// default 4π·μ0·ħ/(9√3).
    pub a_id: Option<f64>,
}

impl Default for NvSection {
    fn default() -> Self {
        let p = NVParams::default();
        let c = PhysConsts::default();
        Self {
            gamma_e_hz_per_t: c.gamma_e,
            zero_field_splitting_hz: c.zero_field_splitting,
            hyperfine_splitting_hz: p.hyperfine_splitting,
            t2_fast_s: p.t2_fast,
            t2_slow_s: p.t2_slow,
            fast_weight: p.fast_weight,
            density_ppm: p.density_ppm,
            readout_contrast: p.readout_contrast,
            axis: p.nv_axis,
            branch: BranchChoice::Lower,
            a_id: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchChoice {
    Lower,
    Upper,
}

/// Decoupling-sequence geometry and rendering parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSection {
    /// Number of 8-pulse XY8 blocks (N of XY8-N).
    pub n_reps: usize,
    /// π-pulse envelope duration, s. π/2 pulses run at half this duration.
    pub pi_length_s: f64,
    /// Envelope family: "cosine-square" or "rectangular".
    pub envelope: EnvelopeChoice,
    /// Single-sequence π spacing, s — used by `xy8-image` and
    /// `compile-waveform`. The default is the resonant spacing 1/(2·f_s)
    /// for the default RF frequency.
    pub tau_s: f64,
    /// Sweep grid for `xy8-sweep`, s.
    pub tau_start_s: f64,
    pub tau_stop_s: f64,
    pub tau_step_s: f64,
    /// Waveform synthesis: sample rate, Hz, and the Rabi frequency mapped
    /// to full-scale DAC amplitude, Hz.
    pub sample_rate_hz: f64,
    pub full_scale_rabi_hz: f64,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            n_reps: 16,
            pi_length_s: 12.5e-9,
            envelope: EnvelopeChoice::CosineSquare,
            tau_s: 26e-9,
            tau_start_s: 20e-9,
            tau_stop_s: 32e-9,
            tau_step_s: 100e-12,
            sample_rate_hz: 1e9,
            full_scale_rabi_hz: 90e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeChoice {
    CosineSquare,
    Rectangular,
}

/// The applied AC test field, as projected onto the NV axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfSection {
    pub frequency_hz: f64,
    pub amplitude_t: f64,
    /// Carrier phase at the sensing-window start, rad.
    pub phase_rad: f64,
    /// "fixed" for a carrier synchronized to the sequence trigger,
    /// "random-averaged" for a free-running source (contrast is then the
    /// mean magnitude over the carrier phase).
    pub phase_mode: PhaseModeChoice,
}

impl Default for RfSection {
    fn default() -> Self {
        Self {
            frequency_hz: 19.23e6,
            amplitude_t: 0.44e-6,
            phase_rad: 0.0,
            phase_mode: PhaseModeChoice::Fixed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseModeChoice {
    Fixed,
    RandomAveraged,
}

/// The current-carrying strip under the imaging field of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WireSection {
    pub width_m: f64,
    /// Conductor-plane to NV-plane distance, m.
    pub standoff_m: f64,
    /// AC current amplitude, A. The default puts the strongest projected
    /// field near the single-sequence dynamic range (≈0.48 µT at the strip
    /// edges for the default geometry).
    pub current_a: f64,
    /// Strip center offset along the across direction, m.
    pub lateral_offset_m: f64,
    /// Unit vector along the strip, in-plane.
    pub axis: [f64; 3],
}

impl Default for WireSection {
    fn default() -> Self {
        Self {
            width_m: 10e-6,
            standoff_m: 2e-6,
            current_a: 25e-6,
            lateral_offset_m: 0.0,
            axis: [0.0, 1.0, 0.0],
        }
    }
}

/// Camera readout and shot-noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraSection {
    /// Sensor size in raw pixels.
    pub nx: usize,
    pub ny: usize,
    /// Raw pixel pitch in the object plane, m.
    pub pixel_pitch_m: f64,
    /// Pixels are summed in `binning`×`binning` blocks; must divide both
    /// sensor dimensions.
    pub binning: usize,
    /// Exposure per frame, s (documentation of the photon budget below;
    /// the model works in photons per frame directly).
    pub exposure_s: f64,
    /// Frames averaged per measurement.
    pub frames: usize,
    /// Expected photons per raw pixel per frame at full fluorescence.
    /// Calibrated, not derived: 43200 ≈ 800 kcounts/s × 54 ms, chosen so
    /// the scatter of the recovered field at the τ-sweep peak over ten
    /// seeded repeats is ≈50 nT with the default binning and frame count.
    pub photons_per_pixel: f64,
    /// Skip the shot-noise draw and return exact expectations. Fits on
    /// noiseless data define the round-trip accuracy checks.
    pub noiseless: bool,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            nx: 512,
            ny: 512,
            pixel_pitch_m: 100e-9,
            binning: 16,
            exposure_s: 54e-3,
            frames: 100,
            photons_per_pixel: 43200.0,
            noiseless: false,
        }
    }
}

/// Continuous-wave resonance scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdmrSection {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub f_step_hz: f64,
    /// Bias field along the NV axis, T. The default places the hyperfine
    /// pair of the lower branch at 2.7556 and 2.7586 GHz.
    pub b_bias_t: f64,
    /// FWHM of the lower and upper hyperfine line, Hz.
    pub linewidth_lower_hz: f64,
    pub linewidth_upper_hz: f64,
}

impl Default for OdmrSection {
    fn default() -> Self {
        Self {
            f_start_hz: 2.752e9,
            f_stop_hz: 2.762e9,
            f_step_hz: 20e3,
            b_bias_t: 4.02856e-3,
            linewidth_lower_hz: 0.31e6,
            linewidth_upper_hz: 0.34e6,
        }
    }
}

/// Echo-decay sweep (also the τ grid reused by `id-sweep` at every angle).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HahnSection {
    /// Grid of echo half-spacings τ (total evolution time is 2τ), s.
    pub tau_start_s: f64,
    pub tau_stop_s: f64,
    pub tau_step_s: f64,
    /// Refocusing-pulse angle, rad.
    pub center_angle_rad: f64,
}

impl Default for HahnSection {
    fn default() -> Self {
        Self {
            tau_start_s: 0.5e-6,
            tau_stop_s: 60e-6,
            tau_step_s: 0.5e-6,
            center_angle_rad: PI,
        }
    }
}

/// Refocusing-angle sweep for the density regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdSection {
    /// Angle grid, rad; `angle_count` points evenly spaced over
    /// [`angle_min_rad`, `angle_max_rad`].
    pub angle_min_rad: f64,
    pub angle_max_rad: f64,
    pub angle_count: usize,
    /// Synthetic distortion of the fast channel only: adds a decay rate
    /// α·R(π)·sin⁴(θ/2) to the fast component, where R(π) is the
    /// full-refocusing pulsed-spin rate. The linear regression of fast
    /// rates against sin²(θ/2) then fails its residual test, exercising
    /// the nonlinearity diagnostic. 0 disables the distortion.
    pub fast_excess_nonlinearity: f64,
}

impl Default for IdSection {
    fn default() -> Self {
        Self {
            angle_min_rad: PI / 4.0,
            angle_max_rad: PI,
            angle_count: 9,
            fast_excess_nonlinearity: 0.0,
        }
    }
}

/// Drive-duration sweep for pulse calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiSection {
    /// Drive amplitude as a Rabi frequency, Hz.
    pub rabi_frequency_hz: f64,
    /// Drive-duration grid, s.
    pub duration_start_s: f64,
    pub duration_stop_s: f64,
    pub duration_step_s: f64,
}

impl Default for RabiSection {
    fn default() -> Self {
        Self {
            rabi_frequency_hz: 40e6,
            duration_start_s: 0.0,
            duration_stop_s: 100e-9,
            duration_step_s: 1e-9,
        }
    }
}

impl ScenarioConfig {
    /// Parse a TOML scenario file. Unknown keys are rejected (TOML errors
    /// name the key and its location); value-level checks are a separate
    /// pass via [`ScenarioConfig::validate`].
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    /// The effective configuration as canonical TOML — what gets hashed
    /// into provenance and what `--dump-config`-style tooling would print.
    pub fn canonical_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes to TOML")
    }

    /// FNV-1a hash of the canonical form. Stable across runs and platforms
    /// for identical effective configurations.
    pub fn hash(&self) -> u64 {
        const OFFSET: u64 = 0xcbf29ce484222325;
        const PRIME: u64 = 0x100000001b3;
        let mut h = OFFSET;
        for b in self.canonical_toml().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
        h
    }

    /// Check every value constraint, returning all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        let mut err = |key: &str, msg: String| {
            let mut line = String::new();
            let _ = write!(line, "  {key}: {msg}");
            bad.push(line);
        };

        let nv = &self.nv;
        for (key, v) in [
            ("nv.gamma_e_hz_per_t", nv.gamma_e_hz_per_t),
            ("nv.zero_field_splitting_hz", nv.zero_field_splitting_hz),
            ("nv.hyperfine_splitting_hz", nv.hyperfine_splitting_hz),
            ("nv.t2_fast_s", nv.t2_fast_s),
            ("nv.t2_slow_s", nv.t2_slow_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                err(key, format!("must be finite and > 0, got {v}"));
            }
        }
        if nv.t2_fast_s > nv.t2_slow_s {
            err(
                "nv.t2_fast_s",
                format!(
                    "fast component {} s exceeds slow component {} s; the names fix the order",
                    nv.t2_fast_s, nv.t2_slow_s
                ),
            );
        }
        if !(0.0..=1.0).contains(&nv.fast_weight) {
            err("nv.fast_weight", format!("must lie in [0, 1], got {}", nv.fast_weight));
        }
        if !(nv.density_ppm.is_finite() && nv.density_ppm >= 0.0) {
            err("nv.density_ppm", format!("must be >= 0, got {}", nv.density_ppm));
        }
        if !(nv.readout_contrast > 0.0 && nv.readout_contrast <= 1.0) {
            err(
                "nv.readout_contrast",
                format!("must lie in (0, 1], got {}", nv.readout_contrast),
            );
        }
        let norm = nv.axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            err("nv.axis", format!("must be a unit vector, |axis| = {norm}"));
        }
        if let Some(a) = nv.a_id {
            if !(a.is_finite() && a > 0.0) {
                err("nv.a_id", format!("must be finite and > 0 when given, got {a}"));
            }
        }

        let sq = &self.sequence;
        if sq.n_reps == 0 {
            err("sequence.n_reps", "must be >= 1".into());
        }
        if !(sq.pi_length_s.is_finite() && sq.pi_length_s > 0.0) {
            err("sequence.pi_length_s", format!("must be > 0, got {}", sq.pi_length_s));
        }
        if !(sq.tau_s.is_finite() && sq.tau_s >= 1.5 * sq.pi_length_s) {
            err(
                "sequence.tau_s",
                format!(
                    "must be >= 1.5×pi_length so pulse envelopes fit, got {} (pi_length {})",
                    sq.tau_s, sq.pi_length_s
                ),
            );
        }
        check_grid(
            &mut err,
            "sequence.tau_start_s",
            sq.tau_start_s,
            sq.tau_stop_s,
            sq.tau_step_s,
            false,
        );
        if sq.tau_start_s.is_finite() && sq.tau_start_s < 1.5 * sq.pi_length_s {
            err(
                "sequence.tau_start_s",
                format!(
                    "sweep start {} is below 1.5×pi_length = {}; pulse envelopes would overlap",
                    sq.tau_start_s,
                    1.5 * sq.pi_length_s
                ),
            );
        }
        if !(sq.sample_rate_hz.is_finite() && sq.sample_rate_hz > 0.0) {
            err("sequence.sample_rate_hz", format!("must be > 0, got {}", sq.sample_rate_hz));
        }
        let peak = match sq.envelope {
            // Peak Rabi needed by a π pulse: area ∫Ω dt = 1/2 cycle.
            EnvelopeChoice::CosineSquare => 1.0 / sq.pi_length_s,
            EnvelopeChoice::Rectangular => 0.5 / sq.pi_length_s,
        };
        if !(sq.full_scale_rabi_hz.is_finite() && sq.full_scale_rabi_hz >= peak) {
            err(
                "sequence.full_scale_rabi_hz",
                format!(
                    "full scale {} Hz is below the π-pulse peak {peak:.3e} Hz",
                    sq.full_scale_rabi_hz
                ),
            );
        }

        let rf = &self.rf;
        if !(rf.frequency_hz.is_finite() && rf.frequency_hz > 0.0) {
            err("rf.frequency_hz", format!("must be > 0, got {}", rf.frequency_hz));
        }
        if !(rf.amplitude_t.is_finite() && rf.amplitude_t >= 0.0) {
            err("rf.amplitude_t", format!("must be >= 0, got {}", rf.amplitude_t));
        }
        if !rf.phase_rad.is_finite() {
            err("rf.phase_rad", "must be finite".into());
        }

        let w = &self.wire;
        for (key, v) in [("wire.width_m", w.width_m), ("wire.standoff_m", w.standoff_m)] {
            if !(v.is_finite() && v > 0.0) {
                err(key, format!("must be finite and > 0, got {v}"));
            }
        }
        if !w.current_a.is_finite() || !w.lateral_offset_m.is_finite() {
            err("wire.current_a", "current and lateral offset must be finite".into());
        }
        let wnorm = w.axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !wnorm.is_finite() || (wnorm - 1.0).abs() > 1e-6 || w.axis[2].abs() > 1e-9 {
            err("wire.axis", format!("must be an in-plane unit vector, got {:?}", w.axis));
        }

        let cam = &self.camera;
        if cam.nx == 0 || cam.ny == 0 {
            err("camera.nx", "sensor dimensions must be >= 1".into());
        }
        if cam.binning == 0 {
            err("camera.binning", "must be >= 1".into());
        } else if cam.nx % cam.binning != 0 || cam.ny % cam.binning != 0 {
            err(
                "camera.binning",
                format!(
                    "binning {} must divide both sensor dimensions {}×{}",
                    cam.binning, cam.nx, cam.ny
                ),
            );
        }
        if cam.frames == 0 {
            err("camera.frames", "must be >= 1".into());
        }
        if !(cam.photons_per_pixel.is_finite() && cam.photons_per_pixel > 0.0) {
            err(
                "camera.photons_per_pixel",
                format!("must be > 0, got {}", cam.photons_per_pixel),
            );
        }
        if !(cam.pixel_pitch_m.is_finite() && cam.pixel_pitch_m > 0.0) {
            err("camera.pixel_pitch_m", format!("must be > 0, got {}", cam.pixel_pitch_m));
        }
        if !(cam.exposure_s.is_finite() && cam.exposure_s > 0.0) {
            err("camera.exposure_s", format!("must be > 0, got {}", cam.exposure_s));
        }

        let o = &self.odmr;
        check_grid(&mut err, "odmr.f_start_hz", o.f_start_hz, o.f_stop_hz, o.f_step_hz, false);
        if !(o.b_bias_t.is_finite() && o.b_bias_t >= 0.0) {
            err("odmr.b_bias_t", format!("must be >= 0, got {}", o.b_bias_t));
        }
        for (key, v) in [
            ("odmr.linewidth_lower_hz", o.linewidth_lower_hz),
            ("odmr.linewidth_upper_hz", o.linewidth_upper_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                err(key, format!("must be > 0, got {v}"));
            }
        }

        let h = &self.hahn;
        check_grid(&mut err, "hahn.tau_start_s", h.tau_start_s, h.tau_stop_s, h.tau_step_s, false);
        if h.tau_start_s <= 0.0 {
            err("hahn.tau_start_s", format!("must be > 0, got {}", h.tau_start_s));
        }
        if !(h.center_angle_rad > 0.0 && h.center_angle_rad <= 2.0 * PI) {
            err(
                "hahn.center_angle_rad",
                format!("must lie in (0, 2π], got {}", h.center_angle_rad),
            );
        }

        let id = &self.id;
        if !(id.angle_min_rad > 0.0 && id.angle_min_rad <= id.angle_max_rad) {
            err(
                "id.angle_min_rad",
                format!("need 0 < angle_min <= angle_max, got {} / {}", id.angle_min_rad, id.angle_max_rad),
            );
        }
        if !(id.angle_max_rad <= 2.0 * PI) {
            err("id.angle_max_rad", format!("must be <= 2π, got {}", id.angle_max_rad));
        }
        if id.angle_count < 3 {
            err(
                "id.angle_count",
                format!("regression needs at least 3 angles, got {}", id.angle_count),
            );
        }
        if !(id.fast_excess_nonlinearity.is_finite() && id.fast_excess_nonlinearity >= 0.0) {
            err(
                "id.fast_excess_nonlinearity",
                format!("must be >= 0, got {}", id.fast_excess_nonlinearity),
            );
        }

        let r = &self.rabi;
        if !(r.rabi_frequency_hz.is_finite() && r.rabi_frequency_hz > 0.0) {
            err("rabi.rabi_frequency_hz", format!("must be > 0, got {}", r.rabi_frequency_hz));
        }
        check_grid(
            &mut err,
            "rabi.duration_start_s",
            r.duration_start_s,
            r.duration_stop_s,
            r.duration_step_s,
            true,
        );

        if bad.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(bad.join("\n")))
        }
    }

    // ---- conversions into core types -----------------------------------

    pub fn consts(&self) -> PhysConsts {
        PhysConsts {
            gamma_e: self.nv.gamma_e_hz_per_t,
            zero_field_splitting: self.nv.zero_field_splitting_hz,
            ..PhysConsts::default()
        }
    }

    pub fn nv_params(&self) -> NVParams {
        NVParams {
            hyperfine_splitting: self.nv.hyperfine_splitting_hz,
            t2_fast: self.nv.t2_fast_s,
            t2_slow: self.nv.t2_slow_s,
            fast_weight: self.nv.fast_weight,
            density_ppm: self.nv.density_ppm,
            nv_axis: self.nv.axis,
            readout_contrast: self.nv.readout_contrast,
            a_id: self.nv.a_id.unwrap_or_else(nvsim_core::physics::default_a_id),
            branch: match self.nv.branch {
                BranchChoice::Lower => ResonanceBranch::Lower,
                BranchChoice::Upper => ResonanceBranch::Upper,
            },
        }
    }

    pub fn wire(&self) -> WireGeometry {
        WireGeometry {
            width: self.wire.width_m,
            standoff: self.wire.standoff_m,
            current: self.wire.current_a,
            axis: self.wire.axis,
            lateral_offset: self.wire.lateral_offset_m,
        }
    }

    pub fn envelope(&self) -> Envelope {
        match self.sequence.envelope {
            EnvelopeChoice::CosineSquare => Envelope::CosineSquare,
            EnvelopeChoice::Rectangular => Envelope::Rectangular,
        }
    }

    pub fn rf_field(&self) -> RFField {
        RFField {
            frequency: self.rf.frequency_hz,
            amplitude: self.rf.amplitude_t,
            phase: self.rf.phase_rad,
            phase_mode: match self.rf.phase_mode {
                PhaseModeChoice::Fixed => PhaseMode::Fixed,
                PhaseModeChoice::RandomAveraged => PhaseMode::RandomAveraged,
            },
        }
    }

    /// τ sweep grid for `xy8-sweep`.
    pub fn tau_grid(&self) -> Vec<f64> {
        uniform_grid(
            self.sequence.tau_start_s,
            self.sequence.tau_stop_s,
            self.sequence.tau_step_s,
        )
    }

    /// Frequency grid for `odmr`.
    pub fn odmr_grid(&self) -> Vec<f64> {
        uniform_grid(self.odmr.f_start_hz, self.odmr.f_stop_hz, self.odmr.f_step_hz)
    }

    /// Echo-delay grid shared by `hahn` and `id-sweep`.
    pub fn hahn_grid(&self) -> Vec<f64> {
        uniform_grid(self.hahn.tau_start_s, self.hahn.tau_stop_s, self.hahn.tau_step_s)
    }

    /// Drive-duration grid for `rabi`.
    pub fn rabi_grid(&self) -> Vec<f64> {
        uniform_grid(
            self.rabi.duration_start_s,
            self.rabi.duration_stop_s,
            self.rabi.duration_step_s,
        )
    }

    /// Refocusing angles for `id-sweep`.
    pub fn id_angles(&self) -> Vec<f64> {
        let n = self.id.angle_count;
        let (lo, hi) = (self.id.angle_min_rad, self.id.angle_max_rad);
        if n == 1 {
            return vec![lo];
        }
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Inclusive uniform grid start..=stop in steps of `step`. The endpoint is
/// included when it lands within half a step of the last point, so grids
/// specified as (start, stop, step) round-trip without float-edge surprises.
pub fn uniform_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize + 1;
    (0..n).map(|i| start + i as f64 * step).collect()
}

/// Shared validation for (start, stop, step) triples; `key` names the start
/// key and the messages cover the triple.
fn check_grid(
    err: &mut impl FnMut(&str, String),
    key: &str,
    start: f64,
    stop: f64,
    step: f64,
    allow_zero_start: bool,
) {
    let floor_ok = if allow_zero_start { start >= 0.0 } else { start > 0.0 };
    if !(start.is_finite() && floor_ok) {
        err(
            key,
            format!(
                "must be finite and {} 0, got {start}",
                if allow_zero_start { ">=" } else { ">" }
            ),
        );
    }
    if !(stop.is_finite() && stop > start) {
        err(key, format!("stop {stop} must exceed start {start}"));
    }
    if !(step.is_finite() && step > 0.0) {
        err(key, format!("step must be > 0, got {step}"));
    } else if stop.is_finite() && (stop - start) / step > 5e6 {
        err(key, format!("grid from {start} to {stop} in steps of {step} is unreasonably large"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_validate_and_describe_the_reference_bench() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.tau_grid().len(), 121);
        assert_relative_eq!(cfg.tau_grid()[60], 26e-9, max_relative = 1e-12);
        assert_eq!(cfg.camera.nx / cfg.camera.binning, 32);
        // The default bias puts the lower-branch pair at the textbook scan
        // positions.
        let (lo, hi) = nvsim_core::physics::resonance_frequencies(
            &cfg.consts(),
            &cfg.nv_params(),
            cfg.odmr.b_bias_t,
        );
        assert_relative_eq!(lo, 2.7556e9, epsilon = 100.0);
        assert_relative_eq!(hi, 2.7586e9, epsilon = 100.0);
    }

    #[test]
    fn toml_round_trip_preserves_the_config_and_the_hash() {
        let cfg = ScenarioConfig::default();
        let text = cfg.canonical_toml();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn partial_files_override_only_what_they_name() {
        let cfg = ScenarioConfig::from_toml(
            "[rf]\namplitude_t = 1.0e-6\n\n[sequence]\nn_reps = 4\n",
        )
        .unwrap();
        assert_eq!(cfg.sequence.n_reps, 4);
        assert_relative_eq!(cfg.rf.amplitude_t, 1.0e-6);
        // Untouched sections keep their defaults.
        assert_eq!(cfg.camera, CameraSection::default());
        assert_ne!(cfg.hash(), ScenarioConfig::default().hash());
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let e = ScenarioConfig::from_toml("[rf]\namplitude_gauss = 4.4\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("amplitude_gauss"), "message should name the key: {msg}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn validation_lists_every_offending_key_at_once() {
        let mut cfg = ScenarioConfig::default();
        cfg.nv.fast_weight = 1.5;
        cfg.camera.binning = 7; // does not divide 512
        cfg.rabi.rabi_frequency_hz = -1.0;
        let msg = cfg.validate().unwrap_err().to_string();
        for key in ["nv.fast_weight", "camera.binning", "rabi.rabi_frequency_hz"] {
            assert!(msg.contains(key), "expected {key} in:\n{msg}");
        }
    }

    #[test]
    fn sweep_floor_guards_pulse_overlap() {
        let mut cfg = ScenarioConfig::default();
        cfg.sequence.tau_start_s = 15e-9; // < 1.5 × 12.5 ns
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("tau_start_s"));
    }

    #[test]
    fn grids_are_inclusive_and_exact_under_rounding() {
        let g = uniform_grid(20e-9, 32e-9, 100e-12);
        assert_eq!(g.len(), 121);
        assert_relative_eq!(g[120], 32e-9, max_relative = 1e-12);
        let g = uniform_grid(0.0, 100e-9, 1e-9);
        assert_eq!(g.len(), 101);
    }
}
