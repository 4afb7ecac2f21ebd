//! Drive-duration sweep for pulse calibration: the spin nutates at the
//! drive's Rabi frequency, the camera reads the oscillating population,
//! and a cosine fit recovers the frequency — and with it the π length.

use nvsim_core::analysis::fit_cosine;
use nvsim_core::physics::pi_length_from_rabi;

use crate::camera::CameraModel;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::experiments::{
    curve_with_optional_sigma, measure_population, population_sigma, provenance, Experiment,
    SIGNAL_STREAM,
};
use crate::export::{RunResult, Table};

pub struct Rabi;

impl Experiment for Rabi {
    fn name(&self) -> &'static str {
        "rabi"
    }

    fn summary(&self) -> &'static str {
        "resonant nutation sweep with a cosine fit for the pi length"
    }

    fn run(&self, cfg: &ScenarioConfig, seed: u64) -> Result<RunResult> {
        let params = cfg.nv_params();
        let cam = CameraModel::from_config(&cfg.camera);
        let omega = cfg.rabi.rabi_frequency_hz;
        let durations = cfg.rabi_grid();

        // Resonant nutation from the bright state: the dark population is
        // ½(1 − cos(2πΩt)); the camera sees its contrast dip.
        let mut dark = Vec::with_capacity(durations.len());
        let mut sigma = Vec::with_capacity(durations.len());
        for (i, &t) in durations.iter().enumerate() {
            let d = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * omega * t).cos());
            let p = measure_population(
                &cam,
                params.readout_contrast,
                1.0 - d,
                seed,
                SIGNAL_STREAM,
                i as u64,
            );
            dark.push(1.0 - p);
            sigma.push(population_sigma(&cam, params.readout_contrast, 1.0 - d));
        }

        let curve = curve_with_optional_sigma(durations.clone(), dark.clone(), sigma)?;
        let fit = fit_cosine(&curve)?;
        let pi_len = pi_length_from_rabi(fit.frequency)?;

        let mut out = RunResult::new(provenance(cfg, self.name(), seed));
        out.tables.push(Table::xy(
            "rabi_curve",
            "duration_s",
            "dark_population",
            &durations,
            &dark,
        ));
        out.note("rabi_frequency_hz", format!("{:.12e}", fit.frequency));
        out.note("rabi_frequency_sigma_hz", format!("{:.12e}", fit.frequency_sigma));
        out.note("pi_length_s", format!("{:.12e}", pi_len));
        out.note("oscillation_amplitude", format!("{:.12e}", fit.amplitude));
        out.note("converged", fit.fit.converged);
        Ok(out)
    }
}
