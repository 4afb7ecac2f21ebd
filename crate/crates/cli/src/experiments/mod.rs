//! The experiment registry.
//!
//! Each bench experiment implements [`Experiment`] and registers itself in
//! [`registry`]; the CLI (or any embedding caller) picks one by name at
//! runtime. Adding an experiment means adding a module and one line in the
//! registry — nothing else in the harness changes.
//!
//! All experiments share the measurement convention of this module's
//! helpers: a spin population `p` is read out as the fluorescence factor
//! `1 − contrast·(1 − p)`, drawn through the shot-noise camera, and the
//! population (or a two-arm contrast) is re-estimated from the noisy
//! factor. Reference arms use a separate RNG stream so signal and
//! reference are independent measurements, as on the bench.

mod hahn;
mod id_sweep;
mod odmr;
mod rabi;
mod waveform;
mod xy8_image;
mod xy8_sweep;

use crate::camera::CameraModel;
use crate::config::ScenarioConfig;
use crate::error::{CliError, Result};
use crate::export::{Provenance, RunResult};

pub use hahn::HahnSweep;
pub use id_sweep::IdSweep;
pub use odmr::Odmr;
pub use rabi::Rabi;
pub use waveform::CompileWaveform;
pub use xy8_image::Xy8Image;
pub use xy8_sweep::Xy8Sweep;

/// One runnable bench experiment, selected by name.
pub trait Experiment: Sync {
    /// Registry key; doubles as the CLI verb and the optional `experiment`
    /// tag in scenario files.
    fn name(&self) -> &'static str;
    /// One-line description for listings.
    fn summary(&self) -> &'static str;
    /// Run against a validated configuration. Deterministic in
    /// (config, seed).
    fn run(&self, cfg: &ScenarioConfig, seed: u64) -> Result<RunResult>;
}

/// All experiments, in CLI listing order.
pub fn registry() -> &'static [&'static (dyn Experiment + Sync)] {
    static REGISTRY: [&(dyn Experiment + Sync); 7] = [
        &Odmr,
        &Rabi,
        &HahnSweep,
        &IdSweep,
        &Xy8Sweep,
        &Xy8Image,
        &CompileWaveform,
    ];
    &REGISTRY
}

/// Find an experiment by its registry key.
pub fn lookup(name: &str) -> Option<&'static (dyn Experiment + Sync)> {
    registry().iter().copied().find(|e| e.name() == name)
}

/// Validate and dispatch: the single entry point used by the CLI and by
/// tests. Rejects configs whose `experiment` tag names a different
/// pipeline than the one requested.
pub fn run_scenario(cfg: &ScenarioConfig, name: &str, seed: u64) -> Result<RunResult> {
    let exp = lookup(name).ok_or_else(|| {
        let known: Vec<&str> = registry().iter().map(|e| e.name()).collect();
        CliError::Validation(format!(
            "  experiment: unknown kind {name:?}; expected one of {}",
            known.join(", ")
        ))
    })?;
    cfg.validate()?;
    if let Some(tag) = &cfg.experiment {
        if tag != name {
            return Err(CliError::Validation(format!(
                "  experiment: scenario file is tagged for {tag:?} but {name:?} was invoked"
            )));
        }
    }
    exp.run(cfg, seed)
}

// ---- shared measurement plumbing ---------------------------------------

/// RNG stream of the signal arm.
pub(crate) const SIGNAL_STREAM: u64 = 0;
/// RNG stream of the reference arm (acquired separately on the bench).
pub(crate) const REFERENCE_STREAM: u64 = 1;
/// First stream available for per-group acquisitions (e.g. one per
/// refocusing angle).
pub(crate) const GROUP_STREAM_BASE: u64 = 2;

/// Fluorescence factor for bright-state population `p` at the given
/// readout contrast.
pub(crate) fn population_factor(contrast: f64, p: f64) -> f64 {
    1.0 - contrast * (1.0 - p)
}

/// Measure a bright-state population through the camera: expose, then
/// invert the factor map. Exact in noiseless mode.
pub(crate) fn measure_population(
    cam: &CameraModel,
    contrast: f64,
    p: f64,
    seed: u64,
    stream: u64,
    pixel: u64,
) -> f64 {
    let g = cam.measure_factor(population_factor(contrast, p), seed, stream, pixel);
    1.0 - (1.0 - g) / contrast
}

/// 1σ of a population estimate at true population `p` (zero when
/// noiseless).
pub(crate) fn population_sigma(cam: &CameraModel, contrast: f64, p: f64) -> f64 {
    cam.sigma_factor(population_factor(contrast, p)) / contrast
}

pub(crate) fn provenance(cfg: &ScenarioConfig, name: &str, seed: u64) -> Provenance {
    Provenance {
        experiment: name.into(),
        config_hash: cfg.hash(),
        seed,
        version: env!("CARGO_PKG_VERSION"),
    }
}

/// Attach per-point measurement sigmas to a curve when they are usable
/// (noisy data with finite positive σ); otherwise return the bare curve so
/// fits fall back to unweighted least squares.
pub(crate) fn curve_with_optional_sigma(
    x: Vec<f64>,
    y: Vec<f64>,
    sigma: Vec<f64>,
) -> Result<nvsim_core::analysis::SweepCurve> {
    let usable = !sigma.is_empty() && sigma.iter().all(|s| s.is_finite() && *s > 0.0);
    let curve = if usable {
        nvsim_core::analysis::SweepCurve::with_sigma(x, y, sigma)?
    } else {
        nvsim_core::analysis::SweepCurve::new(x, y)?
    };
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_resolvable() {
        let mut names: Vec<&str> = registry().iter().map(|e| e.name()).collect();
        assert_eq!(names.len(), 7);
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 7, "duplicate registry keys");
        for name in ["odmr", "rabi", "hahn-sweep", "id-sweep", "xy8-sweep", "xy8-image", "compile-waveform"] {
            assert!(lookup(name).is_some(), "missing {name}");
        }
        assert!(lookup("tomography").is_none());
    }

    #[test]
    fn mismatched_experiment_tag_is_a_validation_error() {
        let mut cfg = ScenarioConfig::default();
        cfg.experiment = Some("odmr".into());
        let err = run_scenario(&cfg, "rabi", 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("tagged for"));
    }

    #[test]
    fn unknown_experiment_name_lists_the_registry() {
        let err = run_scenario(&ScenarioConfig::default(), "nope", 1).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("xy8-sweep"));
    }

    #[test]
    fn population_round_trip_is_exact_in_noiseless_mode() {
        let mut cam = CameraModel::from_config(&crate::config::CameraSection::default());
        cam.noiseless = true;
        for p in [0.0, 0.4, 0.9973, 1.0] {
            let est = measure_population(&cam, 0.03, p, 1, 0, 0);
            approx::assert_relative_eq!(est, p, epsilon = 1e-12);
        }
    }
}
