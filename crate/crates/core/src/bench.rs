//! Simulation scenarios, accuracy metrics and risk oracles.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{enumerate_terms, ModelSpec, PredictorDomain};
use crate::solver::{demmler_reinsch, PenalizedSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    U1,
    U2,
    U3,
    M1,
    M2,
    M3,
    M4,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::U1,
        Scenario::U2,
        Scenario::U3,
        Scenario::M1,
        Scenario::M2,
        Scenario::M3,
        Scenario::M4,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::U1 => "u1",
            Scenario::U2 => "u2",
            Scenario::U3 => "u3",
            Scenario::M1 => "m1",
            Scenario::M2 => "m2",
            Scenario::M3 => "m3",
            Scenario::M4 => "m4",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Scenario::U1 | Scenario::U2 | Scenario::U3 => 1,
            Scenario::M1 => 2,
            Scenario::M2 | Scenario::M3 => 3,
            Scenario::M4 => 18,
        }
    }

    /// Effects of the model fitted to this scenario, zero-based.
    pub fn effects(self) -> Vec<Vec<usize>> {
        match self {
            Scenario::U1 | Scenario::U2 | Scenario::U3 => vec![vec![0]],
            Scenario::M1 => vec![vec![0], vec![1], vec![0, 1]],
            Scenario::M2 => vec![vec![0], vec![1], vec![2]],
            Scenario::M3 => vec![vec![1], vec![1, 2], vec![0, 1]],
            Scenario::M4 => {
                let mut e: Vec<Vec<usize>> = (0..18).map(|j| vec![j]).collect();
                e.extend((0..9).map(|j| vec![2 * j, 2 * j + 1]));
                e.extend((0..6).map(|j| vec![3 * j, 3 * j + 1, 3 * j + 2]));
                e
            }
        }
    }

    pub fn spec(self) -> Result<ModelSpec> {
        enumerate_terms(&self.effects(), vec![PredictorDomain::unit(); self.dim()])
    }

    /// The true regression function at a point of `[0,1]^d`.
    pub fn eval(self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "scenario {} takes {} predictors, got {}",
                self.id(),
                self.dim(),
                x.len()
            )));
        }
        if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("scenario input {v} outside [0, 1]")));
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(self, x: &[f64]) -> f64 {
        match self {
            Scenario::U1 => {
                (beta_density(20.0, 5.0, x[0]) + beta_density(12.0, 12.0, x[0]) + beta_density(7.0, 30.0, x[0]))
                    / 3.0
            }
            Scenario::U2 => {
                if x[0] <= 0.5 {
                    10.0 * (2.0 * PI * x[0]).sin().powi(2)
                } else {
                    0.0
                }
            }
            Scenario::U3 => {
                let t = x[0];
                let a = if t >= 0.25 { 10.0 * (-t + 2.0 * (t - 0.25)) } else { 0.0 };
                let b = if t >= 0.75 { 2.0 * (-t + 0.75) } else { 0.0 };
                a + b
            }
            Scenario::M1 => {
                let (s1, s2) = (0.3, 0.4);
                let bump = |w: f64, c1: f64, c2: f64| {
                    w / (PI * s1 * s2)
                        * (-(x[0] - c1).powi(2) / (s1 * s1) - (x[1] - c2).powi(2) / (s2 * s2)).exp()
                };
                bump(0.75, 0.2, 0.3) + bump(0.45, 0.7, 0.8)
            }
            Scenario::M2 => {
                10.0 * (PI * x[0]).sin() + (3.0 * x[1]).exp() + g1(x[2]) + 1e4 * x[2].powi(3) * (1.0 - x[2]).powi(10)
            }
            Scenario::M3 => {
                10.0 * x[1] + 10.0 * (PI * (x[2] - x[1])).sin() + 5.0 * (2.0 * PI * (x[0] - x[1])).cos()
            }
            Scenario::M4 => {
                let mains: f64 = x.iter().map(|&v| g1(v)).sum();
                let pairs: f64 = (0..9).map(|j| (3.0 * x[2 * j] * x[2 * j + 1]).exp()).sum();
                let triples: f64 = (0..6)
                    .map(|j| {
                        15.0 * (2.0 * PI * x[3 * j]).sin() / (2.0 - (2.0 * PI * x[3 * j + 1] * x[3 * j + 2]).sin())
                    })
                    .sum();
                mains + pairs + triples
            }
        }
    }
}

fn g1(x: f64) -> f64 {
    1e6 * x.powi(11) * (1.0 - x).powi(6)
}

fn beta_density(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()).exp()
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.id() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown scenario '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub scenario: Scenario,
    pub dataset: Dataset,
    pub eta: Vec<f64>,
    pub sigma: f64,
    pub snr: f64,
    pub seed: u64,
}

/// Sample standard deviation.
pub fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Uniform design on `[0,1]^d`, `y = η(x) + N(0, σ²)` with `σ = sd(η)/snr`.
pub fn gen_data(scenario: Scenario, n: usize, snr: f64, seed: u64) -> Result<SimulatedData> {
    if n < 10 {
        return Err(Error::invalid(format!("need n >= 10, got {n}")));
    }
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::invalid(format!("SNR must be positive, got {snr}")));
    }
    let d = scenario.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let eta: Vec<f64> = rows.iter().map(|r| scenario.eval_unchecked(r)).collect();
    let sigma = sample_sd(&eta) / snr;
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::numerical(e.to_string()))?;
    let y = eta.iter().map(|e| e + noise.sample(&mut rng)).collect();
    let dataset = Dataset::new(rows, y, vec![PredictorDomain::unit(); d])?;
    Ok(SimulatedData { scenario, dataset, eta, sigma, snr, seed })
}

/// Mean squared difference between fitted and true values.
pub fn loss(fitted: &[f64], truth: &[f64]) -> Result<f64> {
    if fitted.len() != truth.len() || fitted.is_empty() {
        return Err(Error::invalid(format!(
            "loss needs equal nonempty lengths, got {} and {}",
            fitted.len(),
            truth.len()
        )));
    }
    Ok(sse(fitted, truth) / truth.len() as f64)
}

fn sse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Ratio of squared-error sums of a candidate and a benchmark fit, and its
/// natural log.
pub fn relative_efficacy(candidate: &[f64], benchmark: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    loss(candidate, truth)?;
    let denom = loss(benchmark, truth)?;
    if denom <= 0.0 {
        return Err(Error::numerical("benchmark fit has zero loss; relative efficacy undefined"));
    }
    let re = sse(candidate, truth) / sse(benchmark, truth);
    Ok((re, re.ln()))
}

/// `count` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1).max(1) as f64).exp())
        .collect()
}

/// Risk curve over a λ grid and its minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub lambda: f64,
    pub risk: f64,
    pub index: usize,
    /// The minimum sits at either end of the grid.
    pub at_boundary: bool,
    pub grid: Vec<f64>,
    pub risks: Vec<f64>,
}

/// Smallest grid size accepted by the oracles.
pub const MIN_ORACLE_GRID: usize = 200;

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < MIN_ORACLE_GRID {
        return Err(Error::invalid(format!(
            "risk grid needs at least {MIN_ORACLE_GRID} points, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("risk grid must be positive and increasing"));
    }
    Ok(())
}

fn argmin(grid: &[f64], risks: Vec<f64>) -> OracleResult {
    let (index, risk) = risks
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, r)| if r < a.1 { (i, r) } else { a });
    OracleResult {
        lambda: grid[index],
        risk,
        index,
        at_boundary: index == 0 || index + 1 == grid.len(),
        grid: grid.to_vec(),
        risks,
    }
}

/// Grid minimizer of `n⁻¹‖(I − A(λ))η‖² + n⁻¹σ² tr A(λ)²` for the full-basis
/// estimator, evaluated through the Demmler–Reinsch decomposition.
pub fn oracle_lambda(
    t: &DMatrix<f64>,
    k_full: &DMatrix<f64>,
    eta: &[f64],
    sigma: f64,
    grid: &[f64],
) -> Result<OracleResult> {
    check_grid(grid)?;
    let n = t.nrows();
    if eta.len() != n {
        return Err(Error::invalid("η must have one value per observation"));
    }
    let eig = demmler_reinsch(t, k_full)?;
    let zt_eta = eig.z.transpose() * DVector::from_column_slice(eta);
    let nf = n as f64;
    let risks = grid
        .iter()
        .map(|&l| {
            let (bias, tr_a2) = eig.risk_terms(&zt_eta, t.ncols(), nf * l);
            (bias + sigma * sigma * tr_a2) / nf
        })
        .collect();
    Ok(argmin(grid, risks))
}

/// The same risk oracle for a reduced-basis estimator, for samples too large
/// for the full decomposition.
pub fn oracle_lambda_reduced(system: &PenalizedSystem, eta: &[f64], sigma: f64, grid: &[f64]) -> Result<OracleResult> {
    check_grid(grid)?;
    let proj = system.project(eta)?;
    let nf = system.n() as f64;
    let risks = grid
        .iter()
        .map(|&l| {
            let (bias, tr_a2) = system.risk_terms(&proj, nf * l);
            (bias + sigma * sigma * tr_a2) / nf
        })
        .collect();
    Ok(argmin(grid, risks))
}

/// `(1/π) ∫₀^∞ (1 + t^{2m})^{-2} dt`.
pub fn k_tilde(m: u32) -> Result<f64> {
    if !(1..=3).contains(&m) {
        return Err(Error::invalid(format!("periodic spline order m must be 1, 2 or 3, got {m}")));
    }
    let p = 2 * m as i32;
    // t = u/(1-u) maps [0, 1) onto [0, ∞)
    let f = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let t = u / (1.0 - u);
        1.0 / ((1.0 + t.powi(p)).powi(2) * (1.0 - u).powi(2))
    };
    Ok(adaptive_simpson(&f, 0.0, 1.0, 1e-13) / PI)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 50)
}

/// Asymptotically optimal λ of a periodic spline of order `m`:
/// `{(k̃_m/4m) σ²/‖η^{(2m)}‖²}^{2m/(4m+1)} n^{-2m/(4m+1)}`.
pub fn analytic_lambda_periodic(m: u32, sigma2: f64, eta_norm_sq: f64, n: usize) -> Result<f64> {
    if !(eta_norm_sq > 0.0 && eta_norm_sq.is_finite()) {
        return Err(Error::invalid("‖η^(2m)‖² must be positive"));
    }
    if !(sigma2 >= 0.0) || n == 0 {
        return Err(Error::invalid("need σ² >= 0 and n >= 1"));
    }
    let kt = k_tilde(m)?;
    let mf = m as f64;
    let expo = 2.0 * mf / (4.0 * mf + 1.0);
    Ok((kt / (4.0 * mf) * sigma2 / eta_norm_sq).powf(expo) * (n as f64).powf(-expo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_values() {
        assert_eq!(Scenario::U2.eval(&[0.75]).unwrap(), 0.0);
        assert!((Scenario::U2.eval(&[0.25]).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(Scenario::U3.eval(&[0.2]).unwrap(), 0.0);
        assert!((Scenario::M2.eval(&[0.5, 0.0, 0.0]).unwrap() - 11.0).abs() < 1e-12);
        // -x + 2(x - 1/4) = x - 1/2, so u3(1) = 10·0.5 + 2·(-0.25)
        assert!((Scenario::U3.eval(&[1.0]).unwrap() - 4.5).abs() < 1e-12);
        assert!(Scenario::U1.eval(&[1.5]).is_err());
        assert!(Scenario::M1.eval(&[0.5]).is_err());
    }

    #[test]
    fn beta_mixture_integrates_to_one() {
        let k = 20000;
        let h = 1.0 / k as f64;
        let total: f64 = (0..k).map(|i| Scenario::U1.eval(&[(i as f64 + 0.5) * h]).unwrap() * h).sum();
        assert!((total - 1.0).abs() < 1e-6);
        // B(12,12) peak: Γ(24)/Γ(12)² 0.5^22
        let peak = beta_density(12.0, 12.0, 0.5);
        let exact = (1..=23).map(|i| i as f64).product::<f64>()
            / (1..=11).map(|i| i as f64).product::<f64>().powi(2)
            * 0.5f64.powi(22);
        assert!((peak / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn m1_bumps_and_m4_structure() {
        let v = Scenario::M1.eval(&[0.2, 0.3]).unwrap();
        let expected = 0.75 / (PI * 0.12) + 0.45 / (PI * 0.12) * (-(0.25f64) / 0.09 - 0.25 / 0.16).exp();
        assert!((v - expected).abs() < 1e-12);
        let zeros = vec![0.0; 18];
        // g1(0) = 0, g2 = e^0 = 1 nine times, g3 = 0
        assert!((Scenario::M4.eval(&zeros).unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(Scenario::M3.spec().unwrap().n_penalized(), 7);
        assert_eq!(Scenario::M4.spec().unwrap().n_penalized(), 87);
        assert_eq!(Scenario::M1.spec().unwrap().n_penalized(), 5);
        assert_eq!(Scenario::M2.spec().unwrap().n_penalized(), 3);
    }

    #[test]
    fn scenario_ids_parse() {
        for s in Scenario::ALL {
            assert_eq!(s.id().parse::<Scenario>().unwrap(), s);
        }
        assert!("m5".parse::<Scenario>().is_err());
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(loss(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!((loss(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!(loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn relative_efficacy_examples() {
        let truth = [0.0, 1.0, 2.0];
        let bench = [0.5, 0.5, 2.5];
        assert_eq!(relative_efficacy(&bench, &bench, &truth).unwrap(), (1.0, 0.0));
        let doubled = [1.0, 0.0, 3.0];
        let (re, lre) = relative_efficacy(&doubled, &bench, &truth).unwrap();
        assert!((re - 4.0).abs() < 1e-12 && (lre - 4f64.ln()).abs() < 1e-12);
        let better = [0.1, 0.9, 2.1];
        assert!(relative_efficacy(&better, &bench, &truth).unwrap().1 < 0.0);
        assert!(relative_efficacy(&bench, &truth, &truth).is_err());
    }

    #[test]
    fn k_tilde_closed_form() {
        assert!((k_tilde(2).unwrap() - 3.0 / (8.0 * 2f64.sqrt())).abs() < 1e-10);
        // m = 1: ∫ (1+t²)^{-2} = π/4
        assert!((k_tilde(1).unwrap() - 0.25).abs() < 1e-10);
        assert!(k_tilde(4).is_err());
    }

    #[test]
    fn analytic_lambda_homogeneity() {
        let norm = (2.0 * PI).powi(8) / 2.0;
        let a = analytic_lambda_periodic(2, 0.25, norm, 4096).unwrap();
        let b = analytic_lambda_periodic(2, 0.5, norm, 4096).unwrap();
        assert!((b / a - 2f64.powf(4.0 / 9.0)).abs() < 1e-12);
        let c = analytic_lambda_periodic(2, 0.25, norm, 8192).unwrap();
        assert!(a > 0.0 && c < a);
        assert!(analytic_lambda_periodic(2, 0.25, 0.0, 10).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-8, 1.0, 201);
        assert_eq!(g.len(), 201);
        assert!((g[0] - 1e-8).abs() < 1e-20 && (g[200] - 1.0).abs() < 1e-12);
        assert!((g[100] - 1e-4).abs() < 1e-15);
    }
}
