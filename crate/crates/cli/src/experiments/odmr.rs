//! Continuous-wave resonance scan: sweep the drive frequency across the
//! hyperfine pair, read the fluorescence dip spectrum through the camera,
//! and fit the two Lorentzians back out.

use nvsim_core::analysis::fit_lorentzian_pair;
use nvsim_core::spin::simulate_odmr;

use crate::camera::CameraModel;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::experiments::{curve_with_optional_sigma, provenance, Experiment, SIGNAL_STREAM};
use crate::export::{RunResult, Table};

pub struct Odmr;

impl Experiment for Odmr {
    fn name(&self) -> &'static str {
        "odmr"
    }

    fn summary(&self) -> &'static str {
        "frequency scan over the hyperfine pair with a two-Lorentzian fit"
    }

    fn run(&self, cfg: &ScenarioConfig, seed: u64) -> Result<RunResult> {
        let consts = cfg.consts();
        let params = cfg.nv_params();
        let cam = CameraModel::from_config(&cfg.camera);
        let freqs = cfg.odmr_grid();

        // simulate_odmr already yields normalized fluorescence factors, so
        // the spectrum goes through the camera as-is.
        let truth = simulate_odmr(
            &consts,
            &params,
            cfg.odmr.b_bias_t,
            &freqs,
            (cfg.odmr.linewidth_lower_hz, cfg.odmr.linewidth_upper_hz),
        )?;
        let measured = cam.measure_curve(&truth, seed, SIGNAL_STREAM);
        let sigma: Vec<f64> = truth.iter().map(|&g| cam.sigma_factor(g)).collect();

        let curve = curve_with_optional_sigma(freqs.clone(), measured.clone(), sigma)?;
        let fit = fit_lorentzian_pair(&curve)?;

        let mut out = RunResult::new(provenance(cfg, self.name(), seed));
        out.tables.push(Table::xy(
            "odmr_spectrum",
            "frequency_hz",
            "fluorescence_norm",
            &freqs,
            &measured,
        ));
        out.note("center_lower_hz", format!("{:.12e}", fit.dips[0].center));
        out.note("center_upper_hz", format!("{:.12e}", fit.dips[1].center));
        out.note("fwhm_lower_hz", format!("{:.12e}", fit.dips[0].fwhm));
        out.note("fwhm_upper_hz", format!("{:.12e}", fit.dips[1].fwhm));
        out.note("splitting_hz", format!("{:.12e}", fit.splitting()));
        out.note("center_mean_hz", format!("{:.12e}", fit.center()));
        out.note("amplitude_lower", format!("{:.12e}", fit.dips[0].amplitude));
        out.note("amplitude_upper", format!("{:.12e}", fit.dips[1].amplitude));
        out.note("converged", fit.fit.converged);
        out.note("degenerate", fit.degenerate);
        Ok(out)
    }
}
