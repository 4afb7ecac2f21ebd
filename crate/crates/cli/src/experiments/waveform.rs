//! Compile the configured XY8 program into a quantized IQ waveform and
//! report its synthesis figures (peak Rabi, occupied bandwidth).

use nvsim_core::pulse::{bandwidth_estimate, build_xy8, render_waveform};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::experiments::{provenance, Experiment};
use crate::export::RunResult;

pub struct CompileWaveform;

impl Experiment for CompileWaveform {
    fn name(&self) -> &'static str {
        "compile-waveform"
    }

    fn summary(&self) -> &'static str {
        "render the XY8 program into quantized IQ samples"
    }

    fn run(&self, cfg: &ScenarioConfig, seed: u64) -> Result<RunResult> {
        let seq = build_xy8(
            cfg.sequence.n_reps,
            cfg.sequence.tau_s,
            cfg.sequence.pi_length_s,
            0.0,
            cfg.envelope(),
        )?;
        let wf = render_waveform(
            &seq,
            cfg.sequence.sample_rate_hz,
            cfg.sequence.full_scale_rabi_hz,
        )?;
        let bw = bandwidth_estimate(&wf)?;

        let mut out = RunResult::new(provenance(cfg, self.name(), seed));
        out.note("samples", wf.len());
        out.note("sample_rate_hz", format!("{:.12e}", wf.sample_rate));
        out.note("full_scale_rabi_hz", format!("{:.12e}", wf.full_scale_rabi));
        out.note("peak_rabi_hz", format!("{:.12e}", wf.max_rabi()));
        out.note("occupied_bandwidth_hz", format!("{:.12e}", bw));
        out.note("pi_pulses", seq.n_pi_pulses());
        out.note("total_time_s", format!("{:.12e}", seq.total_time));
        out.waveforms.push(("xy8_waveform".into(), wf));
        Ok(out)
    }
}
