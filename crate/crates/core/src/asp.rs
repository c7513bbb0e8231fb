//! Asympirical smoothing-parameter selection.
//!
//! GCV is run on small uniform subsamples of size `b`, and the selected
//! `λ_GCV(b)` is carried to the full sample by the rate law
//! `λ(n) = λ_GCV(b) (n/b)^{-r/(pr+1)}`. The θ's are taken from the subsample
//! unchanged. The asymptotic-sampling variant fits the constant and the rate
//! from GCV selections at several subsample sizes instead of fixing `r`, `p`.

use std::time::Instant;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gcv::full_gcv;
use crate::kernel::ModelSpec;
use crate::solver::{basis_count, select_basis, Design, SmoothingParams};

/// Smoothing-parameter selection strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gcv")]
    Gcv,
    #[serde(rename = "skip")]
    Skip,
    #[serde(rename = "asp-u")]
    AspUniform,
    #[serde(rename = "asp-a")]
    AspAsymptotic,
    #[serde(rename = "order")]
    Order,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Gcv,
        Method::Skip,
        Method::AspUniform,
        Method::AspAsymptotic,
        Method::Order,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Gcv => "gcv",
            Method::Skip => "skip",
            Method::AspUniform => "asp-u",
            Method::AspAsymptotic => "asp-a",
            Method::Order => "order",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method '{s}' (expected gcv, skip, asp-u, asp-a or order)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspConfig {
    /// `b = round(b_coef · n^{1/4})`.
    pub b_coef: f64,
    /// Largest subsample size coefficient for asymptotic sampling.
    pub b_max_coef: f64,
    /// Number of subsample sizes for asymptotic sampling.
    pub n_sizes: usize,
    pub r: f64,
    /// Fixed `p`; `None` estimates it from a subsample of size `B`.
    pub p: Option<f64>,
    /// Used when `p` is not estimated and as the fallback if estimation fails.
    pub p_default: f64,
    pub n_subsamples: usize,
    /// `B = round(b_factor · b)`.
    pub b_factor: f64,
    /// Basis-count rule `round(coef · size^exp)` used on every subsample.
    pub basis_coef: f64,
    pub basis_exp: f64,
    pub gcv_max_iter: usize,
    pub gcv_tol: f64,
    pub seed: u64,
}

impl Default for AspConfig {
    fn default() -> Self {
        AspConfig {
            b_coef: 50.0,
            b_max_coef: 120.0,
            n_sizes: 10,
            r: 3.0,
            p: None,
            p_default: 1.0,
            n_subsamples: 5,
            b_factor: 2.0,
            basis_coef: 10.0,
            basis_exp: 2.0 / 9.0,
            gcv_max_iter: 30,
            gcv_tol: 1e-5,
            seed: 0,
        }
    }
}

impl AspConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.b_coef > 0.0
            && self.b_max_coef >= self.b_coef
            && self.n_sizes >= 2
            && self.r > 1.0
            && (1.0..=2.0).contains(&self.p_default)
            && self.p.is_none_or(|p| (1.0..=2.0).contains(&p))
            && self.n_subsamples >= 1
            && self.b_factor >= 1.0
            && self.basis_coef > 0.0
            && self.basis_exp > 0.0
            && self.basis_exp < 1.0
            && self.gcv_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid ASP configuration: {self:?}")))
        }
    }
}

/// GCV selection on one subsample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleFit {
    pub b: usize,
    /// `λ_GCV(b)`, i.e. the selected `nλ` divided by `b`.
    pub lambda: f64,
    pub log10_theta: Vec<f64>,
    pub converged: bool,
}

/// Fitted rate law `λ(b) = C b^{-γ}` with a representative `(r, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub c: f64,
    pub gamma: f64,
    pub r: f64,
    pub p: f64,
    /// Residual sum of squares of the fit on the log scale.
    pub rss: f64,
    /// True when the least-squares γ fell outside `[1/3, 1)` and was clamped.
    pub clamped: bool,
}

/// Outcome of any selection method, in a form the final fit can consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    /// Selected `λ` for the full sample.
    pub lambda: f64,
    pub log10_theta: Vec<f64>,
    /// Subsample size the extrapolation starts from.
    pub b: Option<usize>,
    /// Aggregated `λ_GCV(b)`.
    pub lambda_b: Option<f64>,
    pub r: Option<f64>,
    pub p: Option<f64>,
    /// Rate exponent used for extrapolation.
    pub gamma: Option<f64>,
    pub rate: Option<RateFit>,
    pub subsamples: Vec<SubsampleFit>,
    /// Minimized GCV score, for the methods that run GCV on the full sample.
    pub gcv_score: Option<f64>,
    pub converged: bool,
    pub seconds: f64,
}

impl SelectionResult {
    /// Smoothing parameters for a fit on `n` observations.
    pub fn params(&self, n: usize) -> Result<SmoothingParams> {
        SmoothingParams::new((n as f64 * self.lambda).log10(), self.log10_theta.clone())
    }
}

/// Mixes a master seed with stream indices into an independent seed.
pub fn derive_seed(master: u64, stream: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    stream.iter().fold(splitmix(master), |acc, &s| splitmix(acc ^ splitmix(s)))
}

/// `r / (p r + 1)`.
pub fn rate_exponent(r: f64, p: f64) -> Result<f64> {
    if !(r > 1.0 && (1.0..=2.0).contains(&p)) {
        return Err(Error::invalid(format!("rate parameters need r > 1 and p in [1, 2], got r = {r}, p = {p}")));
    }
    Ok(r / (p * r + 1.0))
}

/// `b = round(b_coef · n^{1/4})`, clamped to `[null_dim + 10, n]`.
pub fn subsample_size(n: usize, null_dim: usize, config: &AspConfig) -> Result<usize> {
    scaled_size(n, null_dim, config.b_coef)
}

fn scaled_size(n: usize, null_dim: usize, coef: f64) -> Result<usize> {
    let lo = null_dim + 10;
    if n < lo {
        return Err(Error::invalid(format!(
            "n = {n} is too small for subsampling (need at least {lo})"
        )));
    }
    let b = (coef * (n as f64).powf(0.25)).round() as usize;
    Ok(b.clamp(lo, n))
}

/// `λ_GCV(b) · (n/b)^{-γ}`.
pub fn extrapolate(lambda_b: f64, b: usize, n: usize, gamma: f64) -> f64 {
    lambda_b * (n as f64 / b as f64).powf(-gamma)
}

/// `C · n^{-r/(pr+1)}`.
pub fn order_based(n: usize, r: f64, p: f64, c: f64) -> Result<f64> {
    if n == 0 || !(c > 0.0) {
        return Err(Error::invalid("order-based rule needs n >= 1 and C > 0"));
    }
    Ok(c * (n as f64).powf(-rate_exponent(r, p)?))
}

/// Order-based selection, with `θ_δ = 1/tr(R_δ)` from the full-sample kernel
/// traces.
pub fn order_selection(n: usize, kernel_traces: &[f64], r: f64, p: f64, c: f64) -> Result<SelectionResult> {
    let start = Instant::now();
    let lambda = order_based(n, r, p, c)?;
    let log10_theta = trace_theta(kernel_traces)?;
    Ok(SelectionResult {
        method: Method::Order,
        lambda,
        log10_theta,
        b: None,
        lambda_b: None,
        r: Some(r),
        p: Some(p),
        gamma: Some(rate_exponent(r, p)?),
        rate: None,
        subsamples: Vec::new(),
        gcv_score: None,
        converged: true,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// `log10(1/tr R_δ)`, shifted so the largest entry is 0.
pub fn trace_theta(kernel_traces: &[f64]) -> Result<Vec<f64>> {
    if kernel_traces.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::numerical("a penalized term has zero kernel trace"));
    }
    let logs: Vec<f64> = kernel_traces.iter().map(|t| -t.log10()).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(logs.iter().map(|l| l - top).collect())
}

/// Median of `log(values)`, exponentiated.
pub fn log_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() || values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::numerical("log-median needs positive finite values"));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    Ok(median(logs).exp())
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Aggregates subsample fits: log-median of λ and per-term median of log θ.
pub fn aggregate(fits: &[SubsampleFit]) -> Result<(f64, Vec<f64>)> {
    if fits.is_empty() {
        return Err(Error::numerical("no subsample fits to aggregate"));
    }
    let lambdas: Vec<f64> = fits.iter().map(|f| f.lambda).collect();
    let s = fits[0].log10_theta.len();
    let theta = (0..s)
        .map(|delta| median(fits.iter().map(|f| f.log10_theta[delta]).collect()))
        .collect();
    Ok((log_median(&lambdas)?, theta))
}

fn draw(n: usize, size: usize, seed: u64) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, size).into_vec();
    idx.sort_unstable();
    idx
}

fn subsample_design(dataset: &Dataset, spec: &ModelSpec, size: usize, config: &AspConfig, seed: u64) -> Result<(Dataset, Design)> {
    let sub = dataset.subset(&draw(dataset.len(), size, seed));
    let q = basis_count(size, config.basis_coef, config.basis_exp, spec.null_dim()).min(size);
    let basis = select_basis(size, q, spec.null_dim(), derive_seed(seed, &[1]))?;
    let design = Design::new(&sub, spec, &basis)?;
    Ok((sub, design))
}

/// Full GCV on one uniform subsample of size `b`.
pub fn subsample_gcv(dataset: &Dataset, spec: &ModelSpec, b: usize, config: &AspConfig, seed: u64) -> Result<SubsampleFit> {
    let (sub, design) = subsample_design(dataset, spec, b, config, seed)?;
    let result = full_gcv(&design, sub.response(), config.gcv_max_iter, config.gcv_tol)?;
    Ok(SubsampleFit {
        b,
        lambda: result.params.lambda(b),
        log10_theta: result.params.log10_theta,
        converged: result.converged,
    })
}

/// Runs `config.n_subsamples` subsample fits of size `b`, dropping failures.
fn subsample_fits(dataset: &Dataset, spec: &ModelSpec, b: usize, config: &AspConfig, stream: u64) -> Result<Vec<SubsampleFit>> {
    let fits: Vec<SubsampleFit> = (0..config.n_subsamples as u64)
        .into_par_iter()
        .map(|k| subsample_gcv(dataset, spec, b, config, derive_seed(config.seed, &[stream, k])))
        .collect::<Vec<_>>()
        .into_iter()
        .filter_map(|r| match r {
            Ok(f) => Some(f),
            Err(e) => {
                warn!("dropping subsample of size {b}: {e}");
                None
            }
        })
        .collect();
    let needed = config.n_subsamples.min(2);
    if fits.len() < needed {
        return Err(Error::numerical(format!(
            "only {} of {} subsample fits of size {b} succeeded",
            fits.len(),
            config.n_subsamples
        )));
    }
    Ok(fits)
}

/// The two candidate λ's for `p = 1` and `p = 2` at subsample size `big_b`.
pub fn p_candidates(lambda_b: f64, b: usize, big_b: usize, r: f64) -> Result<[f64; 2]> {
    Ok([
        extrapolate(lambda_b, b, big_b, rate_exponent(r, 1.0)?),
        extrapolate(lambda_b, b, big_b, rate_exponent(r, 2.0)?),
    ])
}

/// Outcome of the `p` rule: the chosen `p` and the GCV scores for `p = 1, 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PChoice {
    pub p: f64,
    pub scores: [f64; 2],
}

/// Picks `p ∈ {1, 2}` by comparing GCV on a subsample of size `B` at the two
/// extrapolated λ's, with θ fixed. Ties go to `p = 1`.
pub fn estimate_p(
    dataset: &Dataset,
    spec: &ModelSpec,
    lambda_b: f64,
    log10_theta: &[f64],
    b: usize,
    config: &AspConfig,
) -> Result<PChoice> {
    let n = dataset.len();
    let big_b = ((config.b_factor * b as f64).round() as usize).min(n);
    let (sub, design) = subsample_design(dataset, spec, big_b, config, derive_seed(config.seed, &[u64::MAX]))?;
    let theta: Vec<f64> = log10_theta.iter().map(|t| 10f64.powf(*t)).collect();
    let system = design.system(&theta)?;
    let proj = system.project(sub.response())?;
    let lambdas = p_candidates(lambda_b, b, big_b, config.r)?;
    let scores = lambdas.map(|l| system.gcv(&proj, big_b as f64 * l));
    let p = if scores[1] < scores[0] { 2.0 } else { 1.0 };
    debug!("p rule at B = {big_b}: G(p=1) = {}, G(p=2) = {} -> p = {p}", scores[0], scores[1]);
    Ok(PChoice { p, scores })
}

/// Asympirical selection with uniform subsampling.
pub fn asp_uniform(dataset: &Dataset, spec: &ModelSpec, config: &AspConfig) -> Result<SelectionResult> {
    config.validate()?;
    let start = Instant::now();
    let n = dataset.len();
    let b = subsample_size(n, spec.null_dim(), config)?;
    let fits = subsample_fits(dataset, spec, b, config, 0)?;
    let (lambda_b, log10_theta) = aggregate(&fits)?;
    let p = match config.p {
        Some(p) => p,
        None => match estimate_p(dataset, spec, lambda_b, &log10_theta, b, config) {
            Ok(choice) => choice.p,
            Err(e) => {
                warn!("p estimation failed ({e}); using p = {}", config.p_default);
                config.p_default
            }
        },
    };
    let gamma = rate_exponent(config.r, p)?;
    let lambda = extrapolate(lambda_b, b, n, gamma);
    Ok(SelectionResult {
        method: Method::AspUniform,
        lambda,
        log10_theta,
        b: Some(b),
        lambda_b: Some(lambda_b),
        r: Some(config.r),
        p: Some(p),
        gamma: Some(gamma),
        rate: None,
        converged: fits.iter().all(|f| f.converged),
        subsamples: fits,
        gcv_score: None,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// A representative `(r, p)` with `r/(pr+1) = γ`: `r = r_default` when the
/// matching `p` lies in `[1, 2]`, otherwise `p` on the nearer bound.
pub fn representative_rp(gamma: f64, r_default: f64) -> (f64, f64) {
    let p = 1.0 / gamma - 1.0 / r_default;
    if (1.0..=2.0).contains(&p) {
        (r_default, p)
    } else if p < 1.0 {
        (gamma / (1.0 - gamma), 1.0)
    } else {
        (gamma / (1.0 - 2.0 * gamma), 2.0)
    }
}

/// Least-squares fit of `log λ = log C − γ log b`, with γ clamped to
/// `[1/3, 1 − 10⁻⁶]` and `C` refitted when the clamp binds.
pub fn fit_rate(sizes: &[usize], lambdas: &[f64], r_default: f64) -> Result<RateFit> {
    if sizes.len() != lambdas.len() {
        return Err(Error::invalid("rate fit needs one λ per subsample size"));
    }
    if sizes.len() < 2 {
        return Err(Error::numerical("rate fit needs at least two subsample sizes"));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::numerical("rate fit needs positive λ values"));
    }
    let xs: Vec<f64> = sizes.iter().map(|&b| (b as f64).ln()).collect();
    let ys: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::numerical("rate fit needs distinct subsample sizes"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let raw = -sxy / sxx;
    let gamma = raw.clamp(1.0 / 3.0, 1.0 - 1e-6);
    let clamped = gamma != raw;
    if clamped {
        warn!("fitted rate exponent {raw} clamped to {gamma}");
    }
    let log_c = my + gamma * mx;
    let rss = xs.iter().zip(&ys).map(|(x, y)| (y - log_c + gamma * x).powi(2)).sum();
    let (r, p) = representative_rp(gamma, r_default);
    Ok(RateFit { c: log_c.exp(), gamma, r, p, rss, clamped })
}

/// Log-spaced subsample sizes from `round(b_coef n^{1/4})` to
/// `round(b_max_coef n^{1/4})`.
pub fn asymptotic_sizes(n: usize, null_dim: usize, config: &AspConfig) -> Result<Vec<usize>> {
    let lo = scaled_size(n, null_dim, config.b_coef)?;
    let hi = scaled_size(n, null_dim, config.b_max_coef)?;
    if hi >= n {
        return Err(Error::invalid(format!(
            "largest subsample size {hi} is not below n = {n}"
        )));
    }
    let k = config.n_sizes;
    let (a, z) = ((lo as f64).ln(), (hi as f64).ln());
    let mut sizes: Vec<usize> = (0..k)
        .map(|i| (a + (z - a) * i as f64 / (k - 1) as f64).exp().round() as usize)
        .collect();
    sizes.dedup();
    if sizes.len() < 2 {
        return Err(Error::invalid("subsample size range is degenerate"));
    }
    Ok(sizes)
}

/// Asympirical selection with asymptotic sampling.
pub fn asp_asymptotic(dataset: &Dataset, spec: &ModelSpec, config: &AspConfig) -> Result<SelectionResult> {
    config.validate()?;
    let start = Instant::now();
    let n = dataset.len();
    let sizes = asymptotic_sizes(n, spec.null_dim(), config)?;
    let mut used_sizes = Vec::new();
    let mut medians = Vec::new();
    let mut all_fits = Vec::new();
    let mut last = None;
    for (k, &b) in sizes.iter().enumerate() {
        match subsample_fits(dataset, spec, b, config, k as u64 + 1) {
            Ok(fits) => {
                let (lambda_b, theta) = aggregate(&fits)?;
                used_sizes.push(b);
                medians.push(lambda_b);
                last = Some((b, lambda_b, theta));
                all_fits.extend(fits);
            }
            Err(e) => warn!("subsample size {b} dropped: {e}"),
        }
    }
    let rate = fit_rate(&used_sizes, &medians, config.r)?;
    let (b_top, lambda_top, log10_theta) = last.expect("fit_rate requires survivors");
    Ok(SelectionResult {
        method: Method::AspAsymptotic,
        lambda: rate.c * (n as f64).powf(-rate.gamma),
        log10_theta,
        b: Some(b_top),
        lambda_b: Some(lambda_top),
        r: Some(rate.r),
        p: Some(rate.p),
        gamma: Some(rate.gamma),
        converged: !rate.clamped && all_fits.iter().all(|f| f.converged),
        rate: Some(rate),
        subsamples: all_fits,
        gcv_score: None,
        seconds: start.elapsed().as_secs_f64(),
    })
}
