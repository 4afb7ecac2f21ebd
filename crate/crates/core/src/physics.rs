//! Physical constants and material parameters of the NV ensemble.
//!
//! Everything downstream (pulse timing, accumulated phase, decay envelopes,
//! field projections) pulls its numbers from [`PhysConsts`] and [`NVParams`],
//! so a scenario file can retarget the whole toolchain to a different sample
//! without touching code.

use crate::error::{CoreError, Result};

/// Fundamental constants, in SI units except where noted.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysConsts {
    /// Electron gyromagnetic ratio of the NV center, in Hz/T (not angular).
    pub gamma_e: f64,
    /// Vacuum permeability, in T·m/A.
    pub mu0: f64,
    /// Zero-field splitting D of the ground-state spin triplet, in Hz.
    pub zero_field_splitting: f64,
    /// Number density of carbon atoms in diamond, in 1/m^3. Used to convert
    /// defect concentrations between ppm and volume density.
    pub n_carbon: f64,
}

impl Default for PhysConsts {
    fn default() -> Self {
        Self {
            gamma_e: 28.0249e9,
            mu0: 1.256_637_062_12e-6,
            zero_field_splitting: 2.870e9,
            n_carbon: 1.76e29,
        }
    }
}

impl PhysConsts {
    /// Angular gyromagnetic ratio 2π·gamma_e, in rad/(s·T).
    pub fn gamma_angular(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.gamma_e
    }

    /// Sanity-check the constants against their physical values.
    ///
    /// `gamma_e` is pinned to within 1% of 28.02 GHz/T: a scenario that
    /// drifts further than that is almost certainly a unit mistake (GHz vs
    /// Hz, angular vs plain) rather than an intentional retarget.
    pub fn validate(&self) -> Result<()> {
        let nominal = 28.02e9;
        if !(self.gamma_e / nominal - 1.0).abs().is_finite()
            || (self.gamma_e / nominal - 1.0).abs() > 0.01
        {
            return Err(CoreError::Domain(format!(
                "gamma_e = {:.6e} Hz/T is more than 1% away from 28.02 GHz/T",
                self.gamma_e
            )));
        }
        for (name, v) in [
            ("mu0", self.mu0),
            ("zero_field_splitting", self.zero_field_splitting),
            ("n_carbon", self.n_carbon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::Domain(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which ms = 0 ↔ ms = ±1 branch the microwave drive addresses. The lower
/// branch moves down in frequency with increasing bias field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResonanceBranch {
    #[default]
    Lower,
    Upper,
}

/// Sample-specific parameters of the NV ensemble under study.
#[derive(Debug, Clone, PartialEq)]
pub struct NVParams {
    /// Hyperfine splitting between the two 15N sublevels, in Hz. Each ODMR
    /// line splits into a pair separated by this energy.
    pub hyperfine_splitting: f64,
    /// Fast component of the spin-echo coherence time, in s.
    pub t2_fast: f64,
    /// Slow component of the spin-echo coherence time, in s.
    pub t2_slow: f64,
    /// Weight of the fast component in the double-exponential envelope, in [0, 1].
    pub fast_weight: f64,
    /// NV concentration in ppm of carbon sites.
    pub density_ppm: f64,
    /// Unit vector along the NV symmetry axis, in the lab frame used by the
    /// field-geometry module (x across the wire, y along it, z normal to the
    /// diamond surface).
    pub nv_axis: [f64; 3],
    /// Optically detected readout contrast between the ms = 0 and ms = ±1
    /// fluorescence levels, in (0, 1].
    pub readout_contrast: f64,
    /// Instantaneous-diffusion prefactor A_id in T^2·m^3·s, paired with the
    /// angular gyromagnetic ratio: the echo decay rate contributed by pulsed
    /// like spins is (A_id/4)·(2π·gamma_e)^2·n_nv·sin^2(θ/2). The default is
    /// the dipolar value 4π·mu0·ħ/(9·√3).
    pub a_id: f64,
    /// Microwave branch addressed by all drives.
    pub branch: ResonanceBranch,
}

impl Default for NVParams {
    fn default() -> Self {
        Self {
            hyperfine_splitting: 3.0e6,
            t2_fast: 33e-6,
            t2_slow: 77e-6,
            fast_weight: 0.5,
            density_ppm: 0.05,
            // Default frame: axis tilted off the surface normal with
            // cos α = 1/√3, lying in the y-z plane.
            nv_axis: [0.0, 0.816_496_580_927_726, 0.577_350_269_189_625_8],
            readout_contrast: 0.03,
            a_id: default_a_id(),
            branch: ResonanceBranch::Lower,
        }
    }
}

/// Dipolar instantaneous-diffusion prefactor 4π·mu0·ħ/(9√3), in T^2·m^3·s.
pub fn default_a_id() -> f64 {
    const HBAR: f64 = 1.054_571_817e-34; // J·s
    let mu0 = PhysConsts::default().mu0;
    4.0 * std::f64::consts::PI * mu0 * HBAR / (9.0 * 3.0f64.sqrt())
}

impl NVParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hyperfine_splitting", self.hyperfine_splitting),
            ("t2_fast", self.t2_fast),
            ("t2_slow", self.t2_slow),
            ("a_id", self.a_id),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CoreError::Domain(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.t2_fast > self.t2_slow {
            return Err(CoreError::Domain(format!(
                "t2_fast = {:.3e} s exceeds t2_slow = {:.3e} s; the components are named by speed",
                self.t2_fast, self.t2_slow
            )));
        }
        if !(0.0..=1.0).contains(&self.fast_weight) {
            return Err(CoreError::Domain(format!(
                "fast_weight must lie in [0, 1], got {}",
                self.fast_weight
            )));
        }
        if !(self.density_ppm.is_finite() && self.density_ppm >= 0.0) {
            return Err(CoreError::Domain(format!(
                "density_ppm must be finite and >= 0, got {}",
                self.density_ppm
            )));
        }
        if !(self.readout_contrast > 0.0 && self.readout_contrast <= 1.0) {
            return Err(CoreError::Domain(format!(
                "readout_contrast must lie in (0, 1], got {}",
                self.readout_contrast
            )));
        }
        let norm = self.nv_axis.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(CoreError::Domain(format!(
                "nv_axis must be a unit vector (|n| = {norm:.12})"
            )));
        }
        Ok(())
    }
}

/// Microwave transition frequencies (f_low, f_high) of the hyperfine pair,
/// in Hz, at a bias field `b_bias` (T) along the NV axis.
///
/// The pair straddles the Zeeman-shifted branch center by ±hyperfine/2;
/// the lower branch center is D − gamma_e·B, the upper D + gamma_e·B.
pub fn resonance_frequencies(
    consts: &PhysConsts,
    params: &NVParams,
    b_bias: f64,
) -> (f64, f64) {
    let zeeman = consts.gamma_e * b_bias;
    let center = match params.branch {
        ResonanceBranch::Lower => consts.zero_field_splitting - zeeman,
        ResonanceBranch::Upper => consts.zero_field_splitting + zeeman,
    };
    let half = 0.5 * params.hyperfine_splitting;
    (center - half, center + half)
}

/// π-pulse length 1/(2Ω) in s for a rectangular drive at Rabi frequency
/// `rabi_hz` (Hz). Errors on a non-positive or non-finite Rabi frequency.
pub fn pi_length_from_rabi(rabi_hz: f64) -> Result<f64> {
    if !(rabi_hz.is_finite() && rabi_hz > 0.0) {
        return Err(CoreError::Domain(format!(
            "Rabi frequency must be finite and > 0, got {rabi_hz}"
        )));
    }
    Ok(1.0 / (2.0 * rabi_hz))
}

/// Double-exponential coherence envelope at total evolution time `t` (s):
///
/// w·exp(−t/T2fast) + (1−w)·exp(−t/T2slow)
///
/// Equals 1 at t = 0 and decreases strictly monotonically.
pub fn coherence_envelope(params: &NVParams, t: f64) -> f64 {
    let w = params.fast_weight;
    w * (-t / params.t2_fast).exp() + (1.0 - w) * (-t / params.t2_slow).exp()
}

/// Convert a defect concentration in ppm of carbon sites to a volume density
/// in 1/m^3.
pub fn ppm_to_volume_density(consts: &PhysConsts, ppm: f64) -> f64 {
    ppm * 1e-6 * consts.n_carbon
}

/// Extra echo-decay rate (1/s) caused by refocusing pulses flipping the
/// like-spin bath along with the probe spins (instantaneous diffusion):
///
/// R(θ) = (A_id/4)·(2π·gamma_e)²·n·sin²(θ/2)
///
/// where `density` is the flipped-spin volume density in 1/m^3 and θ the
/// refocusing-pulse angle. R vanishes for θ = 0 and is maximal at θ = π.
pub fn instantaneous_diffusion_rate(
    consts: &PhysConsts,
    params: &NVParams,
    density: f64,
    angle: f64,
) -> f64 {
    let g = consts.gamma_angular();
    let s = (0.5 * angle).sin();
    0.25 * params.a_id * g * g * density * s * s
}
