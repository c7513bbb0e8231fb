//! Selection followed by the full-sample fit, and the simulation benchmark.

use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asp::{asp_asymptotic, asp_uniform, derive_seed, order_selection, AspConfig, Method, SelectionResult};
use crate::bench::{gen_data, loss, relative_efficacy, Scenario};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gcv::{full_gcv, skip_select, GcvResult};
use crate::kernel::ModelSpec;
use crate::solver::{basis_count, fit_at, select_basis, Design, FitResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub asp: AspConfig,
    /// Basis-count rule `q = round(basis_coef · n^basis_exp)` for the full fit.
    pub basis_coef: f64,
    pub basis_exp: f64,
    pub order_r: f64,
    pub order_p: f64,
    pub order_c: f64,
    pub gcv_max_iter: usize,
    pub gcv_tol: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::AspUniform,
            asp: AspConfig::default(),
            basis_coef: 10.0,
            basis_exp: 2.0 / 9.0,
            order_r: 3.0,
            order_p: 1.0,
            order_c: 1.0,
            gcv_max_iter: 30,
            gcv_tol: 1e-5,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.basis_coef > 0.0 && self.basis_exp > 0.0 && self.basis_exp < 1.0) {
            return Err(Error::invalid("basis rule needs coef > 0 and 0 < exp < 1"));
        }
        if !(self.order_c > 0.0) {
            return Err(Error::invalid("order-based constant must be positive"));
        }
        self.asp.validate()
    }

    /// The ASP settings with the run seed mixed in.
    fn asp_config(&self) -> AspConfig {
        AspConfig {
            seed: derive_seed(self.seed, &[0xA5]),
            ..self.asp.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub selection: SelectionResult,
    pub fit: FitResult,
    /// Number of basis functions of the full fit.
    pub q: usize,
    pub select_seconds: f64,
    pub fit_seconds: f64,
}

fn gcv_selection(method: Method, result: GcvResult, n: usize, seconds: f64) -> SelectionResult {
    SelectionResult {
        method,
        lambda: result.params.lambda(n),
        log10_theta: result.params.log10_theta,
        b: None,
        lambda_b: None,
        r: None,
        p: None,
        gamma: None,
        rate: None,
        subsamples: Vec::new(),
        gcv_score: Some(result.score),
        converged: result.converged,
        seconds,
    }
}

/// Builds the full-sample design with `q = round(coef · n^exp)` random basis
/// functions.
pub fn full_design(dataset: &Dataset, spec: &ModelSpec, config: &RunConfig) -> Result<Design> {
    let n = dataset.len();
    let q = basis_count(n, config.basis_coef, config.basis_exp, spec.null_dim()).min(n);
    let basis = select_basis(n, q, spec.null_dim(), derive_seed(config.seed, &[0xB0]))?;
    Design::new(dataset, spec, &basis)
}

/// Selects smoothing parameters with `config.method` and fits the full sample.
///
/// Building the full-sample design counts as selection time for the methods
/// that select on the full sample, and as fit time for the subsample methods.
pub fn select_and_fit(dataset: &Dataset, spec: &ModelSpec, config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let n = dataset.len();
    let build = Instant::now();
    let design = full_design(dataset, spec, config)?;
    let build_seconds = build.elapsed().as_secs_f64();

    let start = Instant::now();
    let selection = match config.method {
        Method::Gcv => {
            let r = full_gcv(&design, dataset.response(), config.gcv_max_iter, config.gcv_tol)?;
            gcv_selection(Method::Gcv, r, n, start.elapsed().as_secs_f64())
        }
        Method::Skip => {
            let r = skip_select(&design, dataset.response())?;
            gcv_selection(Method::Skip, r, n, start.elapsed().as_secs_f64())
        }
        Method::AspUniform => asp_uniform(dataset, spec, &config.asp_config())?,
        Method::AspAsymptotic => asp_asymptotic(dataset, spec, &config.asp_config())?,
        Method::Order => order_selection(
            n,
            design.kernel_traces(),
            config.order_r,
            config.order_p,
            config.order_c,
        )?,
    };
    let mut select_seconds = start.elapsed().as_secs_f64();

    let fit_start = Instant::now();
    let fit = fit_at(&design, dataset, &selection.params(n)?)?;
    let mut fit_seconds = fit_start.elapsed().as_secs_f64();
    if matches!(config.method, Method::AspUniform | Method::AspAsymptotic) {
        fit_seconds += build_seconds;
    } else {
        select_seconds += build_seconds;
    }
    info!(
        "{}: λ = {:.4e}, tr A = {:.2}, select {:.3}s, fit {:.3}s",
        config.method, selection.lambda, fit.trace_a, select_seconds, fit_seconds
    );
    Ok(RunOutput {
        q: design.basis().len(),
        selection,
        fit,
        select_seconds,
        fit_seconds,
    })
}

/// How many θ sweeps the GCV benchmark may take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GcvCap {
    /// One sweep for the 18-predictor scenario, the full budget otherwise.
    Auto,
    Full,
    OneIteration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenarios: Vec<Scenario>,
    pub ns: Vec<usize>,
    pub snrs: Vec<f64>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    pub run: RunConfig,
    pub gcv_cap: GcvCap,
}

/// One candidate fit on one simulated replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: Scenario,
    pub n: usize,
    pub snr: f64,
    pub method: Method,
    pub replicate: usize,
    pub loss: f64,
    /// Log relative efficacy against the GCV fit on the same replicate.
    pub log_re: f64,
    pub wall_time_seconds: f64,
    pub select_seconds: f64,
}

/// Median log relative efficacy of one method in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub scenario: Scenario,
    pub n: usize,
    pub snr: f64,
    pub method: Method,
    pub replicates: usize,
    pub median_log_re: f64,
    pub median_select_seconds: f64,
}

/// Seed of one replicate, independent of execution order.
pub fn replicate_seed(master: u64, scenario: Scenario, n: usize, snr: f64, replicate: usize) -> u64 {
    let sc = Scenario::ALL.iter().position(|s| *s == scenario).unwrap_or(0) as u64;
    derive_seed(master, &[sc, n as u64, snr.to_bits(), replicate as u64])
}

fn run_replicate(
    config: &BenchConfig,
    scenario: Scenario,
    spec: &ModelSpec,
    n: usize,
    snr: f64,
    replicate: usize,
) -> Result<Vec<BenchRow>> {
    let seed = replicate_seed(config.seed, scenario, n, snr, replicate);
    let sim = gen_data(scenario, n, snr, seed)?;
    let gcv_iter = match config.gcv_cap {
        GcvCap::Full => config.run.gcv_max_iter,
        GcvCap::OneIteration => 1,
        GcvCap::Auto if scenario == Scenario::M4 => 1,
        GcvCap::Auto => config.run.gcv_max_iter,
    };
    let base = RunConfig {
        seed,
        gcv_max_iter: gcv_iter,
        ..config.run.clone()
    };
    let benchmark = select_and_fit(&sim.dataset, spec, &RunConfig { method: Method::Gcv, ..base.clone() })?;
    let mut rows = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let out = if method == Method::Gcv {
            benchmark.clone()
        } else {
            select_and_fit(&sim.dataset, spec, &RunConfig { method, ..base.clone() })?
        };
        let (_, log_re) = relative_efficacy(&out.fit.fitted, &benchmark.fit.fitted, &sim.eta)?;
        rows.push(BenchRow {
            scenario,
            n,
            snr,
            method,
            replicate,
            loss: loss(&out.fit.fitted, &sim.eta)?,
            log_re,
            wall_time_seconds: out.select_seconds + out.fit_seconds,
            select_seconds: out.select_seconds,
        });
    }
    Ok(rows)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        f64::NAN
    } else if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Per-cell medians over replicates.
pub fn summarize(rows: &[BenchRow]) -> Vec<BenchSummary> {
    let mut out: Vec<BenchSummary> = Vec::new();
    for row in rows {
        let key = (row.scenario, row.n, row.snr.to_bits(), row.method);
        if out.iter().any(|s| (s.scenario, s.n, s.snr.to_bits(), s.method) == key) {
            continue;
        }
        let cell: Vec<&BenchRow> = rows
            .iter()
            .filter(|r| (r.scenario, r.n, r.snr.to_bits(), r.method) == key)
            .collect();
        out.push(BenchSummary {
            scenario: row.scenario,
            n: row.n,
            snr: row.snr,
            method: row.method,
            replicates: cell.len(),
            median_log_re: median(cell.iter().map(|r| r.log_re).collect()),
            median_select_seconds: median(cell.iter().map(|r| r.select_seconds).collect()),
        });
    }
    out
}

/// Runs every (scenario, n, SNR, replicate) cell. Replicates run in parallel
/// and rows come back in a fixed order.
pub fn run_bench(config: &BenchConfig) -> Result<(Vec<BenchRow>, Vec<BenchSummary>)> {
    config.run.validate()?;
    if config.replicates == 0 || config.methods.is_empty() {
        return Err(Error::invalid("benchmark needs at least one replicate and one method"));
    }
    let mut rows = Vec::new();
    for &scenario in &config.scenarios {
        let spec = scenario.spec()?;
        for &n in &config.ns {
            for &snr in &config.snrs {
                let cell: Vec<Vec<BenchRow>> = (0..config.replicates)
                    .into_par_iter()
                    .map(|rep| run_replicate(config, scenario, &spec, n, snr, rep))
                    .collect::<Result<_>>()?;
                rows.extend(cell.into_iter().flatten());
                info!("finished {scenario} n = {n} snr = {snr}");
            }
        }
    }
    let summary = summarize(&rows);
    Ok((rows, summary))
}
