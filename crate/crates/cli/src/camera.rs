//! Shot-noise camera readout.
//!
//! A measurement exposes the sensor for `frames` frames; each raw pixel
//! collects Poisson-distributed photons at an expected rate of
//! `photons_per_pixel · g`, where `g ∈ (0, 1]` is the local fluorescence
//! factor (1 = fully bright, dips encode spin contrast). Raw pixels are
//! summed in `binning`×`binning` blocks and the result normalized back to
//! an estimate ĝ of the factor, so the estimator is unbiased with variance
//! g / (frames · binning² · photons_per_pixel).
//!
//! Within one binned block every raw pixel shares the same true factor, so
//! the block-and-frame sum of independent Poisson draws is itself Poisson
//! with the summed rate. The implementation draws once per (binned pixel,
//! frame) from that aggregated distribution — statistically identical to
//! the per-raw-pixel draw, and 256× fewer samples at the default binning.
//!
//! Randomness is counter-based: each (seed, stream, pixel, frame) tuple is
//! hashed into an independent generator key, so any evaluation order —
//! including a parallel one — produces byte-identical results, and distinct
//! experiment arms (streams) never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::CameraSection;

/// The readout model; copy of the validated `[camera]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub nx: usize,
    pub ny: usize,
    pub binning: usize,
    pub frames: usize,
    pub photons_per_pixel: f64,
    pub noiseless: bool,
}

impl CameraModel {
    pub fn from_config(cam: &CameraSection) -> Self {
        Self {
            nx: cam.nx,
            ny: cam.ny,
            binning: cam.binning,
            frames: cam.frames,
            photons_per_pixel: cam.photons_per_pixel,
            noiseless: cam.noiseless,
        }
    }

    /// Binned sensor width (columns of super-pixels).
    pub fn binned_nx(&self) -> usize {
        self.nx / self.binning
    }

    /// Binned sensor height.
    pub fn binned_ny(&self) -> usize {
        self.ny / self.binning
    }

    /// Photons collected per binned block per frame at g = 1.
    fn block_rate(&self) -> f64 {
        self.photons_per_pixel * (self.binning * self.binning) as f64
    }

    /// Measure one fluorescence factor on one binned pixel. `stream`
    /// separates logically independent acquisitions (experiment arms,
    /// sweep repeats); `pixel` indexes the binned pixel or sweep point.
    pub fn measure_factor(&self, g: f64, seed: u64, stream: u64, pixel: u64) -> f64 {
        if self.noiseless {
            return g;
        }
        let lambda = self.block_rate() * g.max(0.0);
        if lambda == 0.0 {
            return 0.0;
        }
        let pois = Poisson::new(lambda).expect("positive finite Poisson rate");
        let mut total = 0.0;
        for frame in 0..self.frames as u64 {
            let mut rng = ChaCha8Rng::from_seed(draw_key(seed, stream, pixel, frame));
            total += pois.sample(&mut rng);
        }
        total / (self.frames as f64 * self.block_rate())
    }

    /// Measure a whole curve of factors, one binned pixel per point.
    pub fn measure_curve(&self, gs: &[f64], seed: u64, stream: u64) -> Vec<f64> {
        gs.iter()
            .enumerate()
            .map(|(i, &g)| self.measure_factor(g, seed, stream, i as u64))
            .collect()
    }

    /// Model standard deviation of ĝ at true factor `g`; zero when
    /// noiseless. Used to attach honest weights to fits on measured data.
    pub fn sigma_factor(&self, g: f64) -> f64 {
        if self.noiseless {
            0.0
        } else {
            (g.max(0.0) / (self.frames as f64 * self.block_rate())).sqrt()
        }
    }
}

/// SplitMix64 finalizer: the standard avalanche mix for counter keys.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Expand (seed, stream, pixel, frame) into a 256-bit generator key. Each
/// counter word is absorbed with a golden-ratio offset before mixing, so
/// tuples differing in any single component produce unrelated keys.
fn draw_key(seed: u64, stream: u64, pixel: u64, frame: u64) -> [u8; 32] {
    const GOLDEN: u64 = 0x9e3779b97f4a7c15;
    let mut state = seed;
    for word in [stream, pixel, frame] {
        state = mix64(state.wrapping_add(GOLDEN).wrapping_add(word));
    }
    let mut key = [0u8; 32];
    for (chunk, i) in key.chunks_exact_mut(8).zip(1u64..) {
        chunk.copy_from_slice(&mix64(state.wrapping_add(i.wrapping_mul(GOLDEN))).to_le_bytes());
    }
    key
}
