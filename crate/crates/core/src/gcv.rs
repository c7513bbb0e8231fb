//! Generalized cross-validation over `nλ` and the θ's.
//!
//! The score is `G = n⁻¹‖(I − A)y‖² / [n⁻¹ tr(I − A)]²`. For fixed θ it is
//! minimized over `log10(nλ)` by a coarse scan followed by golden-section
//! refinement. The skip algorithm produces θ in one pass; the full method then
//! runs coordinate-wise quasi-Newton steps on `log10 θ_δ`, profiling `nλ` out
//! at every trial point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{Design, PenalizedSystem, Projection, SmoothingParams};

/// Search bracket for `log10(nλ)`.
pub const LOG10_N_LAMBDA_MIN: f64 = -12.0;
pub const LOG10_N_LAMBDA_MAX: f64 = 3.0;
/// Absolute tolerance of the line search in `log10(nλ)`.
pub const LOG10_N_LAMBDA_TOL: f64 = 1e-4;
/// Spacing of the coarse scan that brackets the global minimum.
const SCAN_STEP: f64 = 0.25;
/// θ's are kept within this many decades of the largest one.
const LOG10_THETA_FLOOR: f64 = -10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvResult {
    pub params: SmoothingParams,
    pub score: f64,
    pub iterations: usize,
    /// False when the minimum in `nλ` sits on the bracket edge or the θ
    /// iterations ran out before the score settled.
    pub converged: bool,
    /// Score after initialization and after every θ sweep.
    pub score_trace: Vec<f64>,
    /// Penalized terms whose skip estimate was zero and had to be floored.
    pub floored_terms: Vec<usize>,
}

/// Outcome of a one-dimensional minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    pub x: f64,
    pub value: f64,
    pub at_boundary: bool,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimizes `f` over `log10(nλ) ∈ [lo, hi]`: a scan with step 0.25 locates
/// the best cell, golden-section search refines it to `tol`.
pub fn minimize_log_lambda<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<LineMinimum> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("empty search bracket [{lo}, {hi}]")));
    }
    let steps = ((hi - lo) / SCAN_STEP).ceil() as usize;
    let step = (hi - lo) / steps as f64;
    let mut best = (f64::NAN, f64::INFINITY);
    for i in 0..=steps {
        let x = lo + step * i as f64;
        let v = f(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::numerical(
            "GCV score is infinite over the whole search bracket",
        ));
    }
    let a = (best.0 - step).max(lo);
    let b = (best.0 + step).min(hi);
    let (x, v) = golden_section(&mut f, a, b, tol);
    let (x, value) = if v <= best.1 { (x, v) } else { best };
    let at_boundary = x - lo <= tol || hi - x <= tol;
    Ok(LineMinimum { x, value, at_boundary })
}

/// GCV score of a factorized system at `nλ`.
pub fn gcv_score(system: &PenalizedSystem, proj: &Projection, n_lambda: f64) -> f64 {
    system.gcv(proj, n_lambda)
}

/// Minimizes the GCV score over `nλ` with θ held fixed.
pub fn minimize_lambda(system: &PenalizedSystem, proj: &Projection, log10_theta: &[f64]) -> Result<GcvResult> {
    let line = minimize_log_lambda(
        |x| system.gcv(proj, 10f64.powf(x)),
        LOG10_N_LAMBDA_MIN,
        LOG10_N_LAMBDA_MAX,
        LOG10_N_LAMBDA_TOL,
    )?;
    Ok(GcvResult {
        params: SmoothingParams::new(line.x, log10_theta.to_vec())?,
        score: line.value,
        iterations: 1,
        converged: !line.at_boundary,
        score_trace: vec![line.value],
        floored_terms: Vec::new(),
    })
}

/// Shifts `log10 θ` so the largest entry is 0. Only `λ/θ_δ` matters, and the
/// search over `nλ` absorbs the shift.
fn normalize(log_theta: &mut [f64]) {
    let top = log_theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for t in log_theta.iter_mut() {
        *t = (*t - top).max(LOG10_THETA_FLOOR);
    }
}

fn profile(design: &Design, y: &[f64], log_theta: &[f64]) -> Result<GcvResult> {
    let theta: Vec<f64> = log_theta.iter().map(|t| 10f64.powf(*t)).collect();
    let system = design.system(&theta)?;
    let proj = system.project(y)?;
    minimize_lambda(&system, &proj, log_theta)
}

/// First step of the skip algorithm: `θ_δ = 1/tr(R_δ)`, the GCV-optimal `nλ`
/// at those θ's and the coefficients `c` of that fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipStage {
    pub theta: Vec<f64>,
    pub n_lambda: f64,
    pub c: Vec<f64>,
}

pub fn skip_first_stage(design: &Design, y: &[f64]) -> Result<SkipStage> {
    let traces = design.kernel_traces();
    if let Some(i) = traces.iter().position(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::numerical(format!(
            "penalized term {} has zero kernel trace on the sample",
            i + 1
        )));
    }
    let theta: Vec<f64> = traces.iter().map(|t| 1.0 / t).collect();
    let log_theta: Vec<f64> = theta.iter().map(|t| t.log10()).collect();
    let system = design.system(&theta)?;
    let proj = system.project(y)?;
    let first = minimize_lambda(&system, &proj, &log_theta)?;
    let n_lambda = first.params.n_lambda();
    let (_, c) = system.coefficients(&proj, n_lambda)?;
    Ok(SkipStage { theta, n_lambda, c: c.as_slice().to_vec() })
}

/// The skip algorithm: fit with `θ_δ = 1/tr(R_δ)`, then set
/// `θ_δ0 = θ_δ² cᵀ Q_δ c` and minimize over `nλ` once more.
pub fn skip_select(design: &Design, y: &[f64]) -> Result<GcvResult> {
    let stage = skip_first_stage(design, y)?;
    let (theta0, floored) = skip_theta(&stage.theta, design.q_parts(), &stage.c)?;
    let mut log_theta0: Vec<f64> = theta0.iter().map(|t| t.log10()).collect();
    normalize(&mut log_theta0);
    let mut result = profile(design, y, &log_theta0)?;
    result.floored_terms = floored;
    Ok(result)
}

/// `θ_δ0 = θ_δ² cᵀ Q_δ c`, with zero entries floored at `10⁻¹² · max θ_δ0`.
pub fn skip_theta(theta: &[f64], q_parts: &[nalgebra::DMatrix<f64>], c: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
    let c = nalgebra::DVector::from_column_slice(c);
    let mut out: Vec<f64> = theta
        .iter()
        .zip(q_parts)
        .map(|(th, q)| th * th * c.dot(&(q * &c)))
        .collect();
    let top = out.iter().cloned().fold(0.0f64, f64::max);
    if !(top.is_finite() && top > 0.0) {
        return Err(Error::numerical("all skip-algorithm θ estimates are zero"));
    }
    let mut floored = Vec::new();
    for (i, t) in out.iter_mut().enumerate() {
        if !(*t > 0.0) {
            *t = 1e-12 * top;
            floored.push(i);
        }
    }
    Ok((out, floored))
}

/// Iterative multi-θ GCV, started from the skip algorithm.
///
/// Each sweep takes a Newton step on every `log10 θ_δ` in turn, with gradient
/// and curvature from central differences of the profiled score and the step
/// clamped to one decade. Steps that do not lower the score are rejected.
pub fn full_gcv(design: &Design, y: &[f64], max_iter: usize, tol: f64) -> Result<GcvResult> {
    let init = skip_select(design, y)?;
    let s = design.n_penalized();
    if s == 1 || max_iter == 0 {
        return Ok(init);
    }
    const H: f64 = 0.1;

    let mut best = init.clone();
    let mut trace = vec![best.score];
    let mut iterations = 0;
    let mut settled = false;
    while iterations < max_iter {
        iterations += 1;
        let before = best.score;
        for delta in 0..s {
            let x0 = best.params.log10_theta.clone();
            let shifted = |offset: f64| {
                let mut x = x0.clone();
                x[delta] += offset;
                normalize(&mut x);
                x
            };
            let plus = profile(design, y, &shifted(H))?;
            let minus = profile(design, y, &shifted(-H))?;
            let f0 = best.score;
            let grad = (plus.score - minus.score) / (2.0 * H);
            let curv = (plus.score - 2.0 * f0 + minus.score) / (H * H);
            let step = if curv > 0.0 && grad.is_finite() {
                (-grad / curv).clamp(-1.0, 1.0)
            } else if grad != 0.0 && grad.is_finite() {
                -grad.signum()
            } else {
                0.0
            };
            let mut candidates = vec![plus, minus];
            if step.abs() > 1e-3 {
                let trial = profile(design, y, &shifted(step))?;
                if trial.score >= f0 && step.abs() > 2.0 * H {
                    candidates.push(profile(design, y, &shifted(step / 2.0))?);
                }
                candidates.push(trial);
            }
            for cand in candidates {
                if cand.score < best.score {
                    best = cand;
                }
            }
        }
        trace.push(best.score);
        if before - best.score <= tol * before.abs() {
            settled = true;
            break;
        }
    }
    Ok(GcvResult {
        converged: settled && best.converged,
        iterations,
        score_trace: trace,
        floored_terms: init.floored_terms,
        ..best
    })
}
