//! Damped least-squares (Levenberg–Marquardt) fitting for the handful of
//! small, fixed models this crate needs.
//!
//! The solver works on unconstrained parameters with analytic gradients;
//! models that need positivity (linewidths, decay times) or boundedness
//! (mixture weights) fit in a transformed space (log, logistic) and convert
//! back afterwards, which keeps the normal equations well-conditioned
//! without ad-hoc clamping inside the iteration.

use crate::error::{CoreError, Result};

/// Outcome of a nonlinear fit, in the caller-facing parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Best-fit parameters.
    pub params: Vec<f64>,
    /// 1σ uncertainties from the curvature at the optimum. For unweighted
    /// fits these are scaled by the reduced χ²; entries are NaN when the
    /// curvature matrix is singular.
    pub uncertainties: Vec<f64>,
    /// Weighted sum of squared residuals at the optimum.
    pub chi2: f64,
    /// Residual degrees of freedom (points − parameters).
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
}

/// Model evaluated at one abscissa: returns the value and writes ∂y/∂p into
/// `grad`.
pub(crate) trait GradModel {
    fn eval_grad(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64;
}

impl<F> GradModel for F
where
    F: Fn(f64, &[f64], &mut [f64]) -> f64,
{
    fn eval_grad(&self, x: f64, p: &[f64], grad: &mut [f64]) -> f64 {
        self(x, p, grad)
    }
}

const MAX_ITER: usize = 200;
const STEP_TOL: f64 = 1e-10;
const CHI2_TOL: f64 = 1e-12;

/// Minimize Σ w·(y − f(x; p))² starting from `p0`.
///
/// `weights` are 1/σ² when supplied; `None` means equal weights and a
/// reduced-χ² rescaling of the reported uncertainties.
pub(crate) fn lm_fit<M: GradModel>(
    xs: &[f64],
    ys: &[f64],
    weights: Option<&[f64]>,
    p0: &[f64],
    model: &M,
) -> Result<FitResult> {
    let n = xs.len();
    let k = p0.len();
    if n != ys.len() {
        return Err(CoreError::GridMismatch(format!(
            "{} abscissae vs {} ordinates",
            n,
            ys.len()
        )));
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(CoreError::GridMismatch(format!(
                "{} weights vs {} points",
                w.len(),
                n
            )));
        }
        if w.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(CoreError::Domain("weights must be finite and >= 0".into()));
        }
    }
    if n < k {
        return Err(CoreError::EmptyInput(format!(
            "{n} points cannot constrain {k} parameters"
        )));
    }
    let wt = |i: usize| weights.map_or(1.0, |w| w[i]);

    let mut p = p0.to_vec();
    let mut grad = vec![0.0; k];
    let chi2_of = |p: &[f64], grad: &mut [f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            let r = ys[i] - model.eval_grad(xs[i], p, grad);
            s += wt(i) * r * r;
        }
        s
    };
    let mut chi2 = chi2_of(&p, &mut grad);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    let mut jtj = vec![0.0; k * k];
    let mut jtr = vec![0.0; k];
    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        jtj.iter_mut().for_each(|v| *v = 0.0);
        jtr.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let r = ys[i] - model.eval_grad(xs[i], &p, &mut grad);
            let w = wt(i);
            for a in 0..k {
                jtr[a] += w * grad[a] * r;
                for b in a..k {
                    jtj[a * k + b] += w * grad[a] * grad[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                jtj[a * k + b] = jtj[b * k + a];
            }
        }

        // Damped step: (JᵀWJ + λ·diag(JᵀWJ))·δ = JᵀW·r, retried with a
        // larger λ until χ² improves.
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = jtj.clone();
            for a in 0..k {
                let d = damped[a * k + a];
                damped[a * k + a] = d + lambda * d.max(1e-300);
            }
            let Some(step) = solve(&mut damped, &jtr, k) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, d)| a + d).collect();
            let trial_chi2 = chi2_of(&trial, &mut grad);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let rel_step = step
                    .iter()
                    .zip(&p)
                    .map(|(d, a)| (d / a.abs().max(1e-12)).abs())
                    .fold(0.0, f64::max);
                let improvement = (chi2 - trial_chi2) / chi2.max(1e-300);
                p = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_step < STEP_TOL || improvement < CHI2_TOL {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !accepted {
            // No acceptable step at any damping: the current point is as
            // good as this landscape allows.
            converged = converged || !accepted;
            break;
        }
    }

    // Curvature → covariance at the optimum.
    jtj.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        model.eval_grad(xs[i], &p, &mut grad);
        let w = wt(i);
        for a in 0..k {
            for b in a..k {
                jtj[a * k + b] += w * grad[a] * grad[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            jtj[a * k + b] = jtj[b * k + a];
        }
    }
    let dof = n - k;
    let scale = if weights.is_some() || dof == 0 {
        1.0
    } else {
        chi2 / dof as f64
    };
    let uncertainties = match invert(&jtj, k) {
        Some(cov) => (0..k).map(|a| (cov[a * k + a] * scale).max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; k],
    };

    Ok(FitResult {
        params: p,
        uncertainties,
        chi2,
        dof,
        iterations,
        converged,
    })
}

/// Solve A·x = b for small dense A (destroys A). Returns None when singular.
fn solve(a: &mut [f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    for col in 0..k {
        let pivot = (col..k).max_by(|&p, &q| {
            a[p * k + col].abs().partial_cmp(&a[q * k + col].abs()).unwrap()
        })?;
        if a[pivot * k + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..k {
                a.swap(col * k + j, pivot * k + j);
            }
            x.swap(col, pivot);
        }
        let d = a[col * k + col];
        for row in col + 1..k {
            let f = a[row * k + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..k {
                a[row * k + j] -= f * a[col * k + j];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..k).rev() {
        let mut s = x[col];
        for j in col + 1..k {
            s -= a[col * k + j] * x[j];
        }
        x[col] = s / a[col * k + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Invert a small symmetric matrix by Gauss–Jordan with partial pivoting.
fn invert(m: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; k * k];
    for i in 0..k {
        inv[i * k + i] = 1.0;
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|&p, &q| {
            a[p * k + col].abs().partial_cmp(&a[q * k + col].abs()).unwrap()
        })?;
        if a[pivot * k + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..k {
                a.swap(col * k + j, pivot * k + j);
                inv.swap(col * k + j, pivot * k + j);
            }
        }
        let d = a[col * k + col];
        for j in 0..k {
            a[col * k + j] /= d;
            inv[col * k + j] /= d;
        }
        for row in 0..k {
            if row == col {
                continue;
            }
            let f = a[row * k + col];
            if f == 0.0 {
                continue;
            }
            for j in 0..k {
                a[row * k + j] -= f * a[col * k + j];
                inv[row * k + j] -= f * inv[col * k + j];
            }
        }
    }
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}
