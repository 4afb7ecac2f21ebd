//! Parameter extraction from simulated (or measured) sweeps: spectral dip
//! fitting, decay-constant fitting, linear regression for density
//! extraction, and the small helpers the experiment harness leans on.

mod lm;

pub use lm::FitResult;

use crate::error::{CoreError, Result};
use crate::physics::{coherence_envelope, NVParams, PhysConsts};
use crate::pulse::SequenceSpec;

/// A sampled sweep: ordinates `y` over a strictly monotone abscissa `x`,
/// optionally with a per-point 1σ uncertainty. This is the common currency
/// between the simulation pipelines and the fitters.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl SweepCurve {
    /// A curve without per-point uncertainties.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let curve = Self { x, y, sigma: None };
        curve.validate()?;
        Ok(curve)
    }

    /// A curve carrying a 1σ uncertainty for every point; fitters use them
    /// as inverse-variance weights.
    pub fn with_sigma(x: Vec<f64>, y: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let curve = Self { x, y, sigma: Some(sigma) };
        curve.validate()?;
        Ok(curve)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if n != self.y.len() {
            return Err(CoreError::GridMismatch(format!(
                "{n} abscissae vs {} ordinates",
                self.y.len()
            )));
        }
        if let Some(s) = &self.sigma {
            if s.len() != n {
                return Err(CoreError::GridMismatch(format!(
                    "{n} abscissae vs {} uncertainties",
                    s.len()
                )));
            }
            if !s.iter().all(|v| v.is_finite() && *v > 0.0) {
                return Err(CoreError::Domain(
                    "per-point uncertainties must be finite and > 0".into(),
                ));
            }
        }
        if n == 0 {
            return Err(CoreError::EmptyInput("sweep curve has no points".into()));
        }
        if !(self.x.iter().all(|v| v.is_finite()) && self.y.iter().all(|v| v.is_finite())) {
            return Err(CoreError::Domain("sweep curve contains non-finite values".into()));
        }
        let ascending = self.x.windows(2).all(|w| w[1] > w[0]);
        let descending = self.x.windows(2).all(|w| w[1] < w[0]);
        if n > 1 && !(ascending || descending) {
            return Err(CoreError::Domain("sweep abscissa must be strictly monotone".into()));
        }
        Ok(())
    }

    /// Inverse-variance weights when uncertainties are attached.
    fn weights(&self) -> Option<Vec<f64>> {
        self.sigma
            .as_ref()
            .map(|s| s.iter().map(|v| 1.0 / (v * v)).collect())
    }
}

/// One fitted absorption dip: depth `amplitude` below the baseline, centered
/// at `center` (Hz) with full width at half maximum `fwhm` (Hz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianDip {
    pub amplitude: f64,
    pub center: f64,
    pub fwhm: f64,
    /// 1σ uncertainty of the center position.
    pub center_sigma: f64,
}

/// Result of fitting a two-dip Lorentzian spectrum, dips sorted by center.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianPairFit {
    pub baseline: f64,
    pub dips: [LorentzianDip; 2],
    /// Set when the two fitted centers sit within one linewidth of each
    /// other, i.e. the spectrum does not actually resolve two dips and only
    /// their merged position is meaningful.
    pub degenerate: bool,
    pub fit: FitResult,
}

impl LorentzianPairFit {
    /// Separation of the two dip centers, in Hz.
    pub fn splitting(&self) -> f64 {
        self.dips[1].center - self.dips[0].center
    }

    /// Midpoint of the two dip centers, in Hz.
    pub fn center(&self) -> f64 {
        0.5 * (self.dips[0].center + self.dips[1].center)
    }
}

/// Fit `spectrum` (fluorescence vs frequency) as a flat baseline minus two
/// Lorentzian dips. Initial dip positions come from the two deepest local
/// minima of a lightly smoothed copy; linewidths are fitted in log space so
/// they stay positive.
///
/// A spectrum with no resolvable dip structure (flat, or dips buried below
/// the residual scatter) comes back with the convergence flag unset rather
/// than as an error — the optimizer has nothing to anchor to, and the
/// parameters are not meaningful.
pub fn fit_lorentzian_pair(spectrum: &SweepCurve) -> Result<LorentzianPairFit> {
    spectrum.validate()?;
    let (freqs, ys) = (&spectrum.x, &spectrum.y);
    let n = freqs.len();
    if n < 9 {
        return Err(CoreError::EmptyInput(format!(
            "{n} points are too few to fit a two-dip spectrum"
        )));
    }
    // Work in centered, scaled coordinates so the normal equations stay
    // well-conditioned despite GHz-scale abscissae.
    let x0 = 0.5 * (freqs[0] + freqs[n - 1]);
    let span = freqs[n - 1] - freqs[0];
    let xs: Vec<f64> = freqs.iter().map(|f| (f - x0) / span).collect();

    // Smooth with a short boxcar, then pick the two deepest local minima
    // that are decently separated.
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            ys[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let baseline0 = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut minima: Vec<usize> = (1..n - 1)
        .filter(|&i| smooth[i] <= smooth[i - 1] && smooth[i] <= smooth[i + 1])
        .collect();
    minima.sort_by(|&a, &b| smooth[a].partial_cmp(&smooth[b]).unwrap());
    // A monotone spectrum has no interior minimum; seed blindly and let the
    // signal check below withhold the convergence flag.
    let first = minima.first().copied().unwrap_or(n / 3);
    let min_sep = (n / 20).max(3);
    let second = minima
        .iter()
        .copied()
        .find(|&i| i.abs_diff(first) >= min_sep)
        .unwrap_or(if first + min_sep < n { first + min_sep } else { first - min_sep });

    let seed_dip = |i: usize| -> (f64, f64, f64) {
        let depth = (baseline0 - ys[i]).max(1e-6);
        // Walk outward to the half-depth points for a width seed.
        let half = baseline0 - 0.5 * depth;
        let mut lo = i;
        while lo > 0 && ys[lo] < half {
            lo -= 1;
        }
        let mut hi = i;
        while hi < n - 1 && ys[hi] < half {
            hi += 1;
        }
        let w = ((xs[hi] - xs[lo]).abs()).max(2.0 / n as f64);
        (depth, xs[i], w)
    };
    let (a1, c1, w1) = seed_dip(first.min(second));
    let (a2, c2, w2) = seed_dip(first.max(second));

    // Parameters: [baseline, a1, c1, ln w1, a2, c2, ln w2] in scaled units.
    let p0 = [baseline0, a1, c1, w1.ln(), a2, c2, w2.ln()];
    let model = |x: f64, p: &[f64], g: &mut [f64]| -> f64 {
        g[0] = 1.0;
        let mut y = p[0];
        for off in [1usize, 4] {
            let (a, c, w) = (p[off], p[off + 1], p[off + 2].exp());
            let s = 2.0 * (x - c) / w;
            let l = 1.0 / (1.0 + s * s);
            y -= a * l;
            g[off] = -l;
            g[off + 1] = -a * 4.0 * s * l * l / w;
            g[off + 2] = -a * 2.0 * s * s * l * l;
        }
        y
    };
    let weights = spectrum.weights();
    let mut fit = lm::lm_fit(&xs, ys, weights.as_deref(), &p0, &model)?;

    // Signal check: each dip must stand clear of the residual scatter,
    // otherwise the "fit" is just noise chasing (or a flat spectrum) and the
    // convergence flag comes back unset.
    let mut grad = [0.0; 7];
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (y - model(x, &fit.params, &mut grad)).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let floor = (3.0 * rms).max(1e-9 * (1.0 + fit.params[0].abs()));
    if !(fit.params[1] > floor && fit.params[4] > floor) {
        fit.converged = false;
    }

    let dip = |off: usize| LorentzianDip {
        amplitude: fit.params[off],
        center: x0 + fit.params[off + 1] * span,
        fwhm: fit.params[off + 2].exp() * span.abs(),
        center_sigma: fit.uncertainties[off + 1] * span.abs(),
    };
    let (da, db) = (dip(1), dip(4));
    let dips = if da.center <= db.center { [da, db] } else { [db, da] };
    let degenerate = (dips[1].center - dips[0].center) < dips[0].fwhm.max(dips[1].fwhm);
    Ok(LorentzianPairFit {
        baseline: fit.params[0],
        dips,
        degenerate,
        fit,
    })
}

/// Result of fitting y = a·(w·e^(−t/T_fast) + (1−w)·e^(−t/T_slow)), with
/// `t_fast ≤ t_slow` by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleExpFit {
    pub amplitude: f64,
    pub fast_weight: f64,
    pub t_fast: f64,
    pub t_slow: f64,
    pub t_fast_sigma: f64,
    pub t_slow_sigma: f64,
    /// Set when the two components are indistinguishable (nearly equal times
    /// or a vanishing weight on one of them), in which case only the
    /// dominant time constant is meaningful.
    pub effectively_single: bool,
    pub fit: FitResult,
}

impl DoubleExpFit {
    /// Decay rate 1/T of the slow component, in 1/s.
    pub fn slow_rate(&self) -> f64 {
        1.0 / self.t_slow
    }

    /// 1σ uncertainty of [`Self::slow_rate`].
    pub fn slow_rate_sigma(&self) -> f64 {
        self.t_slow_sigma / (self.t_slow * self.t_slow)
    }
}

/// Fit a double-exponential decay. The weight is fitted through a logistic
/// transform and the time constants in log space, so the result is always a
/// proper mixture with positive times.
///
/// Ordinates are expected to be positive (they seed the log-slope estimates;
/// isolated noise excursions below zero are tolerated) and the abscissa
/// should span at least two slow time constants or the slow tail is
/// unconstrained.
pub fn fit_double_exponential(decay: &SweepCurve) -> Result<DoubleExpFit> {
    decay.validate()?;
    let (ts, ys) = (&decay.x, &decay.y);
    let n = ts.len();
    if n < 6 {
        return Err(CoreError::EmptyInput(format!(
            "{n} points are too few for a double-exponential fit"
        )));
    }
    let t_char = ts.iter().fold(0.0f64, |m, &t| m.max(t.abs()));
    if t_char <= 0.0 {
        return Err(CoreError::Domain("time grid has zero extent".into()));
    }
    let xs: Vec<f64> = ts.iter().map(|t| t / t_char).collect();

    // Seed the slow rate from the tail, the fast rate from the head.
    let log_slope = |lo: usize, hi: usize| -> Option<f64> {
        let pts: Vec<(f64, f64)> = (lo..hi)
            .filter(|&i| ys[i] > 0.0)
            .map(|i| (xs[i], ys[i].ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = m * sxx - sx * sx;
        (denom.abs() > 1e-30).then(|| (m * sxy - sx * sy) / denom)
    };
    let rate_slow0 = (-log_slope(2 * n / 3, n).unwrap_or(-1.0)).max(1e-3);
    let rate_head = (-log_slope(0, n / 3).unwrap_or(-rate_slow0)).max(1e-3);
    let t_slow0 = 1.0 / rate_slow0;
    let t_fast0 = if rate_head > 1.2 * rate_slow0 {
        1.0 / rate_head
    } else {
        t_slow0 / 3.0
    };
    let a0 = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(1e-12);

    // Parameters: [a, logit(w), ln T_fast, ln T_slow] in scaled time.
    let p0 = [a0, 0.0, t_fast0.ln(), t_slow0.ln()];
    let model = |x: f64, p: &[f64], g: &mut [f64]| -> f64 {
        let w = 1.0 / (1.0 + (-p[1]).exp());
        let (tf, ts) = (p[2].exp(), p[3].exp());
        let (e1, e2) = ((-x / tf).exp(), (-x / ts).exp());
        g[0] = w * e1 + (1.0 - w) * e2;
        g[1] = p[0] * w * (1.0 - w) * (e1 - e2);
        g[2] = p[0] * w * e1 * (x / tf);
        g[3] = p[0] * (1.0 - w) * e2 * (x / ts);
        p[0] * g[0]
    };
    let weights = decay.weights();
    let fit = lm::lm_fit(&xs, ys, weights.as_deref(), &p0, &model)?;
    let w = 1.0 / (1.0 + (-fit.params[1]).exp());
    let w_sigma = w * (1.0 - w) * fit.uncertainties[1];
    let tf = fit.params[2].exp() * t_char;
    let ts_ = fit.params[3].exp() * t_char;
    let tf_sigma = tf * fit.uncertainties[2];
    let ts_sigma = ts_ * fit.uncertainties[3];
    // Normalize the component order: fast means shorter.
    let (fast_weight, t_fast, t_slow, t_fast_sigma, t_slow_sigma) = if tf <= ts_ {
        (w, tf, ts_, tf_sigma, ts_sigma)
    } else {
        (1.0 - w, ts_, tf, ts_sigma, tf_sigma)
    };
    let effectively_single =
        t_slow / t_fast < 1.2 || !(0.02..=0.98).contains(&fast_weight) || w_sigma > 0.5;
    Ok(DoubleExpFit {
        amplitude: fit.params[0],
        fast_weight,
        t_fast,
        t_slow,
        t_fast_sigma,
        t_slow_sigma,
        effectively_single,
        fit,
    })
}

/// Result of fitting y = offset + amplitude·cos(2π·frequency·t + phase),
/// normalized to `amplitude ≥ 0` and `phase ∈ (−π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineFit {
    pub offset: f64,
    pub amplitude: f64,
    /// Oscillation frequency, in Hz.
    pub frequency: f64,
    pub frequency_sigma: f64,
    pub phase: f64,
    pub fit: FitResult,
}

/// Fit a plain cosine, seeding the frequency from a coarse periodogram scan
/// up to the Nyquist limit of the grid.
pub fn fit_cosine(signal: &SweepCurve) -> Result<CosineFit> {
    signal.validate()?;
    let (ts, ys) = (&signal.x, &signal.y);
    let n = ts.len();
    if n < 8 {
        return Err(CoreError::EmptyInput(format!("{n} points are too few for a cosine fit")));
    }
    let t0 = ts[0];
    let span = ts[n - 1] - t0;
    let xs: Vec<f64> = ts.iter().map(|t| (t - t0) / span).collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let amp0 = 0.5
        * (ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - ys.iter().copied().fold(f64::INFINITY, f64::min));

    // Periodogram over cycle counts across the span; the grid's Nyquist
    // limit is n/2 cycles.
    let mut best = (1.0, f64::NEG_INFINITY, 0.0);
    let max_cycles = 0.5 * n as f64;
    let mut cycles = 0.25;
    while cycles <= max_cycles {
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..n {
            let th = 2.0 * std::f64::consts::PI * cycles * xs[i];
            re += (ys[i] - mean) * th.cos();
            im -= (ys[i] - mean) * th.sin();
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (cycles, power, im.atan2(re));
        }
        cycles += 0.05;
    }
    let p0 = [mean, amp0.max(1e-12), best.0, best.2];
    let model = |x: f64, p: &[f64], g: &mut [f64]| -> f64 {
        let arg = 2.0 * std::f64::consts::PI * p[2] * x + p[3];
        let (s, c) = arg.sin_cos();
        g[0] = 1.0;
        g[1] = c;
        g[2] = -p[1] * s * 2.0 * std::f64::consts::PI * x;
        g[3] = -p[1] * s;
        p[0] + p[1] * c
    };
    let weights = signal.weights();
    let fit = lm::lm_fit(&xs, ys, weights.as_deref(), &p0, &model)?;
    let (mut amplitude, mut phase) = (fit.params[1], fit.params[3]);
    if amplitude < 0.0 {
        amplitude = -amplitude;
        phase += std::f64::consts::PI;
    }
    // The fitted phase is referenced to t0; shift it back to t = 0.
    phase -= 2.0 * std::f64::consts::PI * fit.params[2] * t0 / span;
    phase = phase.rem_euclid(2.0 * std::f64::consts::PI);
    if phase > std::f64::consts::PI {
        phase -= 2.0 * std::f64::consts::PI;
    }
    Ok(CosineFit {
        offset: fit.params[0],
        amplitude,
        frequency: fit.params[2] / span,
        frequency_sigma: fit.uncertainties[2] / span,
        phase,
        fit,
    })
}

/// Weighted straight-line fit y = intercept + slope·x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_sigma: f64,
    pub intercept_sigma: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
}

/// Closed-form weighted linear regression; `weights` are 1/σ² when given.
pub fn fit_line_weighted(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || weights.is_some_and(|w| w.len() != n) {
        return Err(CoreError::GridMismatch("line fit input lengths differ".into()));
    }
    if n < 3 {
        return Err(CoreError::EmptyInput(format!("{n} points are too few for a line fit")));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    if !(sw > 0.0) {
        return Err(CoreError::Domain("weights sum to zero".into()));
    }
    let sx: f64 = (0..n).map(|i| w(i) * xs[i]).sum();
    let sy: f64 = (0..n).map(|i| w(i) * ys[i]).sum();
    let sxx: f64 = (0..n).map(|i| w(i) * xs[i] * xs[i]).sum();
    let sxy: f64 = (0..n).map(|i| w(i) * xs[i] * ys[i]).sum();
    let denom = sw * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(CoreError::Domain("abscissae do not span a line".into()));
    }
    let slope = (sw * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / sw;

    let ss_res: f64 = (0..n)
        .map(|i| {
            let r = ys[i] - intercept - slope * xs[i];
            w(i) * r * r
        })
        .sum();
    let y_mean = sy / sw;
    let ss_tot: f64 = (0..n).map(|i| w(i) * (ys[i] - y_mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    // With unit weights, scale the covariance by the residual variance.
    let scale = if weights.is_some() {
        1.0
    } else {
        ss_res / (n - 2) as f64
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_sigma: (scale * sw / denom).sqrt(),
        intercept_sigma: (scale * sxx / denom).sqrt(),
        r_squared,
    })
}

/// Density extracted from the pulse-angle dependence of the slow echo-decay
/// rate.
#[derive(Debug, Clone, PartialEq)]
pub struct IdDensityFit {
    /// Spin density, in 1/m³.
    pub density: f64,
    pub density_sigma: f64,
    /// Same density expressed in ppm of carbon sites.
    pub density_ppm: f64,
    /// Rate at zero pulse angle, in 1/s: the intrinsic 2/T2_slow.
    pub intrinsic_rate: f64,
    pub line: LineFit,
    /// Set when the rate-vs-sin²(θ/2) relation is measurably curved
    /// (R² < 0.999), meaning some rate other than the pulse-driven dipolar
    /// channel contaminates the sweep.
    pub nonlinear: bool,
    /// Set when the fitted slope is indistinguishable from zero (within 2σ):
    /// the sweep carries no density information and `density` is only an
    /// upper-bound-style estimate.
    pub consistent_with_zero: bool,
}

/// Regress slow decay rates against sin²(θ/2) of the refocusing angle and
/// convert the slope to a spin density via the dipolar interaction strength
/// `a_id`: R(θ) = (a_id/4)·γ²·n·sin²(θ/2), so n = 4·slope/(a_id·γ²).
///
/// `rates.x` must already be sin²(θ/2) values in [0, 1]; `rates.y` the slow
/// rates in 1/s. A slope that is negative beyond its 2σ uncertainty has no
/// physical density reading and is rejected.
pub fn nv_density_from_id(
    consts: &PhysConsts,
    a_id: f64,
    rates: &SweepCurve,
) -> Result<IdDensityFit> {
    if !(a_id.is_finite() && a_id > 0.0) {
        return Err(CoreError::Domain(format!("a_id must be > 0, got {a_id}")));
    }
    rates.validate()?;
    if rates.x.iter().any(|&s| !(0.0..=1.0 + 1e-12).contains(&s)) {
        return Err(CoreError::Domain(
            "abscissa must be sin²(θ/2) values in [0, 1]; got a value outside that range".into(),
        ));
    }
    let weights = rates.weights();
    let line = fit_line_weighted(&rates.x, &rates.y, weights.as_deref())?;
    let consistent_with_zero = line.slope.abs() <= 2.0 * line.slope_sigma;
    if line.slope < 0.0 && !consistent_with_zero {
        return Err(CoreError::Domain(format!(
            "decay rate falls with pulse angle (slope {:.3e} ± {:.3e} 1/s); no physical density",
            line.slope, line.slope_sigma
        )));
    }
    let g = consts.gamma_angular();
    let scale = 4.0 / (a_id * g * g);
    let density = line.slope * scale;
    Ok(IdDensityFit {
        density,
        density_sigma: line.slope_sigma * scale,
        density_ppm: density / (1e-6 * consts.n_carbon),
        intrinsic_rate: line.intercept,
        nonlinear: line.r_squared < 0.999,
        consistent_with_zero,
        line,
    })
}

/// Spectral step of a τ-sweep at spacing `tau`: moving the pulse spacing by
/// `dtau` moves the passband center 1/(2τ) by dtau/(2τ²) Hz.
pub fn frequency_resolution(tau: f64, dtau: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0 && dtau.is_finite() && dtau > 0.0) {
        return Err(CoreError::Domain(format!(
            "tau and dtau must be > 0, got {tau}, {dtau}"
        )));
    }
    Ok(dtau / (2.0 * tau * tau))
}

/// An interpolated sweep maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    /// Abscissa of the interpolated maximum.
    pub tau: f64,
    /// Ordinate of the interpolated maximum (parabola vertex value).
    pub amplitude: f64,
    /// Position uncertainty: a quarter grid step, the resolution credit for
    /// interpolating between samples.
    pub uncertainty: f64,
    /// Set when the maximum ordinate occurs at more than one grid point; the
    /// earliest abscissa is the one reported.
    pub ambiguous: bool,
}

/// Peak position on a uniform grid by three-point parabolic interpolation.
/// Exact ties are broken toward the earliest abscissa value and flagged as
/// ambiguous. A maximum on the first or last point is an error (the sweep
/// did not bracket the peak).
pub fn find_peak_tau(sweep: &SweepCurve) -> Result<PeakEstimate> {
    sweep.validate()?;
    let (taus, response) = (&sweep.x, &sweep.y);
    let n = taus.len();
    if n < 5 {
        return Err(CoreError::EmptyInput(format!(
            "{n} points are too few to localize a peak"
        )));
    }
    let step = taus[1] - taus[0];
    for i in 1..n - 1 {
        if ((taus[i + 1] - taus[i]) / step - 1.0).abs() > 1e-6 {
            return Err(CoreError::GridMismatch(
                "peak interpolation needs a uniform grid".into(),
            ));
        }
    }
    let y_max = response.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let at_max: Vec<usize> = (0..n).filter(|&i| response[i] == y_max).collect();
    let ambiguous = at_max.len() > 1;
    // Earliest abscissa wins the tie; on a descending grid that is the last
    // listed index.
    let imax = at_max
        .iter()
        .copied()
        .min_by(|&a, &b| taus[a].partial_cmp(&taus[b]).unwrap())
        .unwrap();
    if imax == 0 || imax == n - 1 {
        return Err(CoreError::PeakAtBoundary { index: imax });
    }
    let (ym, y0, yp) = (response[imax - 1], response[imax], response[imax + 1]);
    let denom = ym - 2.0 * y0 + yp;
    let (tau, amplitude) = if denom.abs() > 0.0 {
        (
            taus[imax] + 0.5 * step * (ym - yp) / denom,
            y0 - (ym - yp) * (ym - yp) / (8.0 * denom),
        )
    } else {
        (taus[imax], y0)
    };
    Ok(PeakEstimate {
        tau,
        amplitude,
        uncertainty: 0.25 * step.abs(),
        ambiguous,
    })
}

/// Mean and sample standard deviation (n − 1 denominator) of the ordinates
/// of repeated traces, read off at the grid point nearest `at`. All traces
/// must share the same abscissa grid.
pub fn repeat_statistics(traces: &[SweepCurve], at: f64) -> Result<(f64, f64)> {
    if traces.len() < 2 {
        return Err(CoreError::EmptyInput(format!(
            "{} traces cannot yield a spread estimate",
            traces.len()
        )));
    }
    for t in traces {
        t.validate()?;
    }
    let grid = &traces[0].x;
    for (k, t) in traces.iter().enumerate().skip(1) {
        let same = t.x.len() == grid.len()
            && t.x
                .iter()
                .zip(grid)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
        if !same {
            return Err(CoreError::GridMismatch(format!(
                "trace {k} is not on the shared abscissa grid"
            )));
        }
    }
    let idx = (0..grid.len())
        .min_by(|&a, &b| {
            (grid[a] - at)
                .abs()
                .partial_cmp(&(grid[b] - at).abs())
                .unwrap()
        })
        .unwrap();
    let spacing = if grid.len() > 1 {
        (grid[1] - grid[0]).abs()
    } else {
        f64::INFINITY
    };
    if (grid[idx] - at).abs() > 0.5 * spacing + 1e-12 * at.abs() {
        return Err(CoreError::Domain(format!(
            "abscissa {at} lies outside the shared grid"
        )));
    }
    let samples: Vec<f64> = traces.iter().map(|t| t.y[idx]).collect();
    Ok(mean_std(&samples))
}

/// Mean and n−1 standard deviation of a plain sample.
fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Invert a cosine-quadrature contrast Δ = p(0) − p(B) = ½·env·(1 − cos φ)
/// into the field amplitude, with the coherence envelope and phase-per-field
/// slope taken from the sequence itself. Valid on the principal branch
/// φ ∈ [0, π]; a contrast beyond the envelope ceiling is reported as out of
/// range.
pub fn contrast_to_field(
    consts: &PhysConsts,
    params: &NVParams,
    seq: &SequenceSpec,
    delta: f64,
) -> Result<f64> {
    let (envelope, n_pi, tau) = inversion_context(params, seq)?;
    let u = 1.0 - 2.0 * delta / envelope;
    if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&u) {
        return Err(CoreError::InversionOutOfRange {
            value: delta,
            max: envelope,
        });
    }
    let phi = u.clamp(-1.0, 1.0).acos();
    Ok(phase_to_field(consts, phi, n_pi, tau))
}

/// Invert a sine-quadrature contrast Δ = p(B) − p(0) = ½·env·sin φ into a
/// signed field amplitude, valid on |φ| ≤ π/2.
pub fn quadrature_to_field(
    consts: &PhysConsts,
    params: &NVParams,
    seq: &SequenceSpec,
    delta: f64,
) -> Result<f64> {
    let (envelope, n_pi, tau) = inversion_context(params, seq)?;
    let s = 2.0 * delta / envelope;
    if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&s) {
        return Err(CoreError::InversionOutOfRange {
            value: delta,
            max: 0.5 * envelope,
        });
    }
    let phi = s.clamp(-1.0, 1.0).asin();
    Ok(phase_to_field(consts, phi, n_pi, tau))
}

/// Envelope, π count, and spacing for a contrast inversion.
fn inversion_context(params: &NVParams, seq: &SequenceSpec) -> Result<(f64, usize, f64)> {
    let envelope = coherence_envelope(params, seq.sensing_time()?);
    if !(envelope > 0.0) {
        return Err(CoreError::Domain(format!(
            "coherence envelope underflowed to {envelope}; the sensing window is too long to invert"
        )));
    }
    let n_pi = seq.n_pi_pulses();
    if n_pi == 0 || !(seq.tau.is_finite() && seq.tau > 0.0) {
        return Err(CoreError::Domain(format!(
            "contrast inversion needs a periodic decoupling sequence; got {} π pulses, τ = {}",
            n_pi, seq.tau
        )));
    }
    Ok((envelope, n_pi, seq.tau))
}

/// B = φ·π/(2·γ·N_p·τ), the inverse of the resonant phase relation.
fn phase_to_field(consts: &PhysConsts, phi: f64, n_pi: usize, tau: f64) -> f64 {
    phi * std::f64::consts::PI / (2.0 * consts.gamma_angular() * n_pi as f64 * tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{
        instantaneous_diffusion_rate, ppm_to_volume_density, NVParams, PhysConsts,
    };
    use crate::pulse::{build_xy8, Envelope};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    /// Deterministic standard-normal stream (Box–Muller over splitmix64).
    struct Gauss(u64);

    impl Gauss {
        fn next_u64(&mut self) -> u64 {
            self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = self.0;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^ (z >> 31)
        }

        fn uniform(&mut self) -> f64 {
            (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
        }

        fn normal(&mut self) -> f64 {
            let u = self.uniform().max(f64::MIN_POSITIVE);
            let v = self.uniform();
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        }
    }

    fn pair_spectrum(freqs: &[f64], b: f64, dips: [(f64, f64, f64); 2]) -> Vec<f64> {
        freqs
            .iter()
            .map(|&f| {
                let mut y = b;
                for (a, c, w) in dips {
                    let s = 2.0 * (f - c) / w;
                    y -= a / (1.0 + s * s);
                }
                y
            })
            .collect()
    }

    #[test]
    fn sweep_curve_validation_catches_malformed_grids() {
        assert!(SweepCurve::new(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]).is_ok());
        // Descending is monotone too.
        assert!(SweepCurve::new(vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 3.0]).is_ok());
        assert!(SweepCurve::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(SweepCurve::new(vec![0.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(SweepCurve::new(vec![0.0, 2.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(SweepCurve::new(vec![], vec![]).is_err());
        assert!(SweepCurve::new(vec![0.0, f64::NAN], vec![1.0, 2.0]).is_err());
        assert!(
            SweepCurve::with_sigma(vec![0.0, 1.0], vec![1.0, 2.0], vec![0.1, 0.0]).is_err(),
            "non-positive uncertainties must be rejected"
        );
    }

    #[test]
    fn lorentzian_pair_recovers_clean_dips() {
        let freqs: Vec<f64> = (0..801).map(|k| 2.747e9 + k as f64 * 25e3).collect();
        let truth = [(0.015, 2.7556e9, 1.0e6), (0.015, 2.7586e9, 1.2e6)];
        let spec = pair_spectrum(&freqs, 1.0, truth);
        let curve = SweepCurve::new(freqs, spec).unwrap();
        let fit = fit_lorentzian_pair(&curve).unwrap();
        assert!(fit.fit.converged);
        assert!(!fit.degenerate);
        assert_relative_eq!(fit.baseline, 1.0, max_relative = 1e-8);
        assert_abs_diff_eq!(fit.dips[0].center, 2.7556e9, epsilon = 10.0);
        assert_abs_diff_eq!(fit.dips[1].center, 2.7586e9, epsilon = 10.0);
        assert_relative_eq!(fit.dips[0].fwhm, 1.0e6, max_relative = 1e-6);
        assert_relative_eq!(fit.dips[1].fwhm, 1.2e6, max_relative = 1e-6);
        assert_abs_diff_eq!(fit.splitting(), 3.0e6, epsilon = 20.0);
        assert_abs_diff_eq!(fit.center(), 2.7571e9, epsilon = 10.0);
    }

    #[test]
    fn lorentzian_pair_survives_photon_scale_noise() {
        let freqs: Vec<f64> = (0..801).map(|k| 2.747e9 + k as f64 * 25e3).collect();
        let truth = [(0.015, 2.7556e9, 1.0e6), (0.015, 2.7586e9, 1.0e6)];
        let mut rng = Gauss(7);
        let spec: Vec<f64> = pair_spectrum(&freqs, 1.0, truth)
            .into_iter()
            .map(|y| y + 1e-3 * rng.normal())
            .collect();
        let curve = SweepCurve::new(freqs, spec).unwrap();
        let fit = fit_lorentzian_pair(&curve).unwrap();
        assert!(fit.fit.converged);
        assert_abs_diff_eq!(fit.splitting(), 3.0e6, epsilon = 60e3);
        assert_abs_diff_eq!(fit.center(), 2.7571e9, epsilon = 30e3);
        // The reported center uncertainty should be in the tens-of-kHz class,
        // not wildly off in either direction.
        assert!(fit.dips[0].center_sigma > 1e3 && fit.dips[0].center_sigma < 1e5);
    }

    #[test]
    fn flat_spectrum_fails_with_flag_unset_not_an_error() {
        let freqs: Vec<f64> = (0..101).map(|k| 2.75e9 + k as f64 * 1e5).collect();
        let flat = vec![1.0; freqs.len()];
        let fit = fit_lorentzian_pair(&SweepCurve::new(freqs, flat).unwrap()).unwrap();
        assert!(
            !fit.fit.converged,
            "flat input has no dips, so the fit must not claim convergence"
        );
    }

    #[test]
    fn merged_dips_raise_the_degeneracy_flag() {
        // One dip only: forcing a two-component fit must flag that the two
        // centers landed on top of each other.
        let freqs: Vec<f64> = (0..801).map(|k| 2.747e9 + k as f64 * 25e3).collect();
        let spec = pair_spectrum(&freqs, 1.0, [(0.01, 2.757e9, 1.0e6), (0.01, 2.757e9, 1.0e6)]);
        let fit = fit_lorentzian_pair(&SweepCurve::new(freqs, spec).unwrap()).unwrap();
        assert!(fit.degenerate, "splitting {} Hz", fit.splitting());
        assert!(fit.splitting().abs() < fit.dips[0].fwhm.max(fit.dips[1].fwhm));
    }

    #[test]
    fn double_exponential_recovers_both_time_constants() {
        let ts: Vec<f64> = (1..=75).map(|k| k as f64 * 2e-6).collect();
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| 0.9 * (0.5 * (-t / 33e-6).exp() + 0.5 * (-t / 77e-6).exp()))
            .collect();
        let fit = fit_double_exponential(&SweepCurve::new(ts, ys).unwrap()).unwrap();
        assert!(fit.fit.converged);
        assert_relative_eq!(fit.amplitude, 0.9, max_relative = 1e-4);
        assert_relative_eq!(fit.t_fast, 33e-6, max_relative = 1e-4);
        assert_relative_eq!(fit.t_slow, 77e-6, max_relative = 1e-4);
        assert_relative_eq!(fit.fast_weight, 0.5, max_relative = 1e-4);
        assert!(!fit.effectively_single);
        assert_relative_eq!(fit.slow_rate(), 1.0 / 77e-6, max_relative = 1e-4);
    }

    #[test]
    fn component_order_is_normalized_and_degenerate_fits_are_flagged() {
        let ts: Vec<f64> = (1..=60).map(|k| k as f64 * 2e-6).collect();
        // Unequal weights, fast component in the minority.
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| 0.3 * (-t / 10e-6).exp() + 0.7 * (-t / 80e-6).exp())
            .collect();
        let fit = fit_double_exponential(&SweepCurve::new(ts.clone(), ys).unwrap()).unwrap();
        assert!(fit.t_fast < fit.t_slow);
        assert_relative_eq!(fit.t_fast, 10e-6, max_relative = 1e-3);
        assert_relative_eq!(fit.fast_weight, 0.3, max_relative = 1e-3);
        // A pure single exponential cannot support two components.
        let ys: Vec<f64> = ts.iter().map(|&t| (-t / 50e-6).exp()).collect();
        let fit = fit_double_exponential(&SweepCurve::new(ts, ys).unwrap()).unwrap();
        assert!(fit.effectively_single);
        assert_relative_eq!(fit.t_slow, 50e-6, max_relative = 0.05);
    }

    #[test]
    fn cosine_fit_recovers_oscillation_parameters() {
        let ts: Vec<f64> = (0..=200).map(|k| k as f64 * 1e-9).collect();
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| 0.5 + 0.45 * (2.0 * std::f64::consts::PI * 40e6 * t + 0.7).cos())
            .collect();
        let fit = fit_cosine(&SweepCurve::new(ts, ys).unwrap()).unwrap();
        assert_relative_eq!(fit.frequency, 40e6, max_relative = 1e-7);
        assert_relative_eq!(fit.amplitude, 0.45, max_relative = 1e-7);
        assert_relative_eq!(fit.offset, 0.5, max_relative = 1e-7);
        assert_abs_diff_eq!(fit.phase, 0.7, epsilon = 1e-6);
    }

    #[test]
    fn cosine_fit_handles_noise_and_negative_amplitude_normalization() {
        let ts: Vec<f64> = (0..=200).map(|k| k as f64 * 1e-9).collect();
        let mut rng = Gauss(11);
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| {
                0.5 - 0.4 * (2.0 * std::f64::consts::PI * 25e6 * t).cos() + 0.01 * rng.normal()
            })
            .collect();
        let fit = fit_cosine(&SweepCurve::new(ts, ys).unwrap()).unwrap();
        assert!(fit.amplitude > 0.0);
        assert_relative_eq!(fit.frequency, 25e6, max_relative = 1e-3);
        // −cos ≡ cos with a π phase.
        assert_abs_diff_eq!(fit.phase.abs(), std::f64::consts::PI, epsilon = 0.05);
    }

    #[test]
    fn weighted_line_fit_matches_hand_computation() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = fit_line_weighted(&xs, &ys, None).unwrap();
        assert_relative_eq!(fit.slope, 2.0, max_relative = 1e-12);
        assert_relative_eq!(fit.intercept, 1.0, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
        // Down-weighting a corrupted point restores the clean line.
        let ys = [1.0, 3.0, 5.0, 27.0];
        let w = [1.0, 1.0, 1.0, 1e-9];
        let fit = fit_line_weighted(&xs, &ys, Some(&w)).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-6);
    }

    fn id_curve(consts: &PhysConsts, params: &NVParams, n_true: f64) -> SweepCurve {
        let angles: Vec<f64> = (1..=8).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect();
        let xs: Vec<f64> = angles.iter().map(|&t| (0.5 * t).sin().powi(2)).collect();
        let rates: Vec<f64> = angles
            .iter()
            .map(|&th| 2.0 / 77e-6 + instantaneous_diffusion_rate(consts, params, n_true, th))
            .collect();
        SweepCurve::new(xs, rates).unwrap()
    }

    #[test]
    fn density_regression_round_trips_the_forward_model() {
        let consts = PhysConsts::default();
        let params = NVParams::default();
        let n_true = ppm_to_volume_density(&consts, 0.05);
        let curve = id_curve(&consts, &params, n_true);
        let fit = nv_density_from_id(&consts, params.a_id, &curve).unwrap();
        assert_relative_eq!(fit.density, n_true, max_relative = 1e-9);
        assert_relative_eq!(fit.density_ppm, 0.05, max_relative = 1e-9);
        assert_relative_eq!(fit.intrinsic_rate, 2.0 / 77e-6, max_relative = 1e-9);
        assert!(!fit.nonlinear);
        assert!(!fit.consistent_with_zero);
        assert!(fit.line.r_squared > 0.999999);
    }

    #[test]
    fn density_regression_flags_zero_slope_and_rejects_negative() {
        let consts = PhysConsts::default();
        let xs: Vec<f64> = (1..=8).map(|k| k as f64 / 8.0).collect();
        // Angle-independent rates: no dipolar channel, zero density.
        let flat = SweepCurve::new(xs.clone(), vec![2.6e4; xs.len()]).unwrap();
        let fit = nv_density_from_id(&consts, 1.0684e-40, &flat).unwrap();
        assert_abs_diff_eq!(fit.density, 0.0, epsilon = 1e-30);
        assert!(fit.consistent_with_zero);
        // A clearly falling rate cannot be a density.
        let falling: Vec<f64> = xs.iter().map(|&s| 2.6e4 - 1.0e4 * s).collect();
        let curve = SweepCurve::new(xs.clone(), falling).unwrap();
        assert!(nv_density_from_id(&consts, 1.0684e-40, &curve).is_err());
        // Raw angles instead of sin²(θ/2) values are caught by the domain
        // check (angles exceed 1).
        let angles: Vec<f64> = (1..=8).map(|k| k as f64 * std::f64::consts::PI / 8.0).collect();
        let curve = SweepCurve::new(angles, vec![2.6e4; 8]).unwrap();
        assert!(nv_density_from_id(&consts, 1.0684e-40, &curve).is_err());
    }

    #[test]
    fn curved_rate_dependence_raises_the_nonlinearity_flag() {
        let consts = PhysConsts::default();
        let xs: Vec<f64> = (1..=8).map(|k| (k as f64 * std::f64::consts::PI / 16.0).sin().powi(2)).collect();
        // A rate with a strong quadratic term in sin²(θ/2) is not the
        // pulse-driven dipolar channel.
        let rates: Vec<f64> = xs.iter().map(|&s2| 2.6e4 + 7.3e3 * s2 + 2.0e4 * s2 * s2).collect();
        let curve = SweepCurve::new(xs, rates).unwrap();
        let fit = nv_density_from_id(&consts, 1.0684e-40, &curve).unwrap();
        assert!(fit.nonlinear, "R² = {}", fit.line.r_squared);
    }

    #[test]
    fn spectral_step_of_a_tau_sweep() {
        // 100 ps steps at τ = 26 ns move the passband by ~74 kHz per step.
        let df = frequency_resolution(26e-9, 100e-12).unwrap();
        assert_relative_eq!(df, 73_964.497, max_relative = 1e-6);
        assert!(frequency_resolution(0.0, 1e-12).is_err());
    }

    #[test]
    fn peak_interpolation_is_exact_on_a_parabola() {
        let taus: Vec<f64> = (0..25).map(|k| 20e-9 + k as f64 * 0.5e-9).collect();
        let ys: Vec<f64> = taus.iter().map(|&t| 1.0 - ((t - 26.3e-9) / 5e-9).powi(2)).collect();
        let peak = find_peak_tau(&SweepCurve::new(taus.clone(), ys).unwrap()).unwrap();
        assert_abs_diff_eq!(peak.tau, 26.3e-9, epsilon = 1e-15);
        assert_relative_eq!(peak.amplitude, 1.0, max_relative = 1e-12);
        assert_relative_eq!(peak.uncertainty, 0.125e-9, max_relative = 1e-12);
        assert!(!peak.ambiguous);
        // A response still climbing at the edge cannot be interpolated.
        let ys: Vec<f64> = taus.iter().map(|&t| t).collect();
        match find_peak_tau(&SweepCurve::new(taus, ys).unwrap()) {
            Err(CoreError::PeakAtBoundary { index }) => assert_eq!(index, 24),
            other => panic!("expected boundary error, got {other:?}"),
        }
    }

    #[test]
    fn equal_peaks_resolve_to_the_earliest_and_are_flagged() {
        let taus: Vec<f64> = (0..9).map(|k| k as f64).collect();
        let mut ys = vec![0.0; 9];
        ys[2] = 1.0;
        ys[6] = 1.0;
        let peak = find_peak_tau(&SweepCurve::new(taus, ys).unwrap()).unwrap();
        assert!(peak.ambiguous);
        assert_abs_diff_eq!(peak.tau, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn repeat_statistics_uses_the_sample_denominator() {
        let grid: Vec<f64> = (0..5).map(|k| 20e-9 + k as f64 * 1e-9).collect();
        let trace = |v: f64| SweepCurve::new(grid.clone(), vec![v; 5]).unwrap();
        // Two traces differing by a constant: σ = |a − b|/√2 at every point.
        let (mean, std) = repeat_statistics(&[trace(1.0), trace(2.0)], 22e-9).unwrap();
        assert_relative_eq!(mean, 1.5, max_relative = 1e-12);
        assert_relative_eq!(std, 1.0 / 2.0f64.sqrt(), max_relative = 1e-12);
        // Identical traces have zero spread.
        let (_, std) = repeat_statistics(&[trace(3.0), trace(3.0), trace(3.0)], 20e-9).unwrap();
        assert_abs_diff_eq!(std, 0.0, epsilon = 1e-300);
        // Four-sample check against the hand value.
        let traces: Vec<SweepCurve> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| trace(v)).collect();
        let (mean, std) = repeat_statistics(&traces, 24e-9).unwrap();
        assert_relative_eq!(mean, 2.5, max_relative = 1e-12);
        assert_relative_eq!(std, (5.0f64 / 3.0).sqrt(), max_relative = 1e-12);
        // A single trace, an off-grid abscissa, and a mismatched grid are
        // all rejected.
        assert!(repeat_statistics(&[trace(1.0)], 20e-9).is_err());
        assert!(repeat_statistics(&[trace(1.0), trace(2.0)], 40e-9).is_err());
        let other = SweepCurve::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![0.0; 5]).unwrap();
        assert!(repeat_statistics(&[trace(1.0), other], 20e-9).is_err());
    }

    #[test]
    fn field_inversions_round_trip_and_reject_overrange() {
        let consts = PhysConsts::default();
        let params = NVParams::default();
        let tau = 26e-9;
        let seq = build_xy8(2, tau, 12.5e-9, 0.0, Envelope::CosineSquare).unwrap();
        let n_pi = seq.n_pi_pulses();
        assert_eq!(n_pi, 16);
        let env = coherence_envelope(&params, seq.sensing_time().unwrap());
        for b in [1e-9, 0.44e-6, 2e-6] {
            let phi = (2.0 / std::f64::consts::PI) * consts.gamma_angular() * b * n_pi as f64 * tau;
            let delta = 0.5 * env * (1.0 - phi.cos());
            let back = contrast_to_field(&consts, &params, &seq, delta).unwrap();
            assert_relative_eq!(back, b, max_relative = 1e-9);
            let dq = 0.5 * env * phi.sin();
            let back = quadrature_to_field(&consts, &params, &seq, dq).unwrap();
            assert_relative_eq!(back, b, max_relative = 1e-9);
            // The sine quadrature keeps the sign.
            let back = quadrature_to_field(&consts, &params, &seq, -dq).unwrap();
            assert_relative_eq!(back, -b, max_relative = 1e-9);
        }
        // Contrasts beyond the envelope ceiling (here env ≈ 1 for a µs-scale
        // window) cannot be inverted.
        assert!(contrast_to_field(&consts, &params, &seq, 0.55 * env + 0.5).is_err());
        assert!(quadrature_to_field(&consts, &params, &seq, 0.51 * env).is_err());
    }
}
