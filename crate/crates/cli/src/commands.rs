//! The subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use ssanova::bench::{gen_data, Scenario};
use ssanova::kernel::enumerate_terms;
use ssanova::pipeline::{run_bench, BenchConfig, GcvCap};
use ssanova::solver::predict;
use ssanova::{select_and_fit, AspConfig, FitResult, Method, ModelSpec, RunConfig, SelectionResult};

use crate::cli::{BenchArgs, Command, FitArgs, GcvCapArg, PChoice, PredictArgs, SelectionArgs, SimulateArgs};
use crate::error::{CliError, CliResult, Stage};
use crate::ingest::{ingest, read_table, DomainOverrides, Predictor};
use crate::model::parse_model;

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate(args) => simulate(&args),
        Command::Fit(args) => fit(&args).map(|_| ()),
        Command::Predict(args) => predict_cmd(&args),
        Command::Bench(args) => bench(&args),
    }
}

fn parse_method(s: &str) -> CliResult<Method> {
    s.parse().map_err(|e: ssanova::Error| CliError::input(e.to_string()))
}

fn parse_scenario(s: &str) -> CliResult<Scenario> {
    s.parse().map_err(|e: ssanova::Error| CliError::input(e.to_string()))
}

/// `path` with its extension replaced, e.g. `fit.json` to `fit.fitted.csv`.
fn sibling(path: &Path, extension: &str) -> PathBuf {
    path.with_extension(extension)
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))
}

fn run_config(sel: &SelectionArgs, method: Method, seed: u64) -> CliResult<RunConfig> {
    let p = match sel.p {
        PChoice::Auto => None,
        PChoice::Fixed(p) => Some(p as f64),
    };
    let asp = AspConfig {
        b_coef: sel.b_coef,
        b_max_coef: sel.b_max_coef,
        n_sizes: sel.sizes,
        r: sel.r,
        p,
        n_subsamples: sel.subsamples,
        basis_coef: sel.basis_coef,
        basis_exp: sel.basis_exp,
        gcv_max_iter: sel.gcv_max_iter,
        gcv_tol: sel.gcv_tol,
        ..AspConfig::default()
    };
    let config = RunConfig {
        method,
        order_p: p.unwrap_or(asp.p_default),
        asp,
        basis_coef: sel.basis_coef,
        basis_exp: sel.basis_exp,
        order_r: sel.r,
        order_c: sel.order_c,
        gcv_max_iter: sel.gcv_max_iter,
        gcv_tol: sel.gcv_tol,
        seed,
    };
    config.validate().stage("config")?;
    Ok(config)
}

fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let scenario = parse_scenario(&args.scenario)?;
    let sim = gen_data(scenario, args.n, args.snr, args.seed).stage("simulate")?;
    let d = scenario.dim();
    let mut w = csv_writer(&args.out)?;
    let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(|e| CliError::csv(&args.out, e))?;
    for i in 0..sim.dataset.len() {
        let mut rec: Vec<String> = sim.dataset.row(i).iter().map(f64::to_string).collect();
        rec.push(sim.dataset.response()[i].to_string());
        w.write_record(&rec).map_err(|e| CliError::csv(&args.out, e))?;
    }
    w.flush().map_err(|e| CliError::io(&args.out, e))?;
    if let Some(path) = &args.truth {
        let mut w = csv_writer(path)?;
        w.write_record(["row", "eta"]).map_err(|e| CliError::csv(path, e))?;
        for (i, eta) in sim.eta.iter().enumerate() {
            w.write_record([(i + 1).to_string(), eta.to_string()])
                .map_err(|e| CliError::csv(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    info!("simulated {} rows of {scenario} with σ = {:.4}", args.n, sim.sigma);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub select_seconds: f64,
    pub fit_seconds: f64,
}

/// Everything `fit` records. All timings are collected under `timings`, so
/// the rest of the document depends only on the data and configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub method: Method,
    pub n: usize,
    pub lambda: f64,
    pub log10_theta: Vec<f64>,
    pub gamma: Option<f64>,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub b: Option<usize>,
    pub q: usize,
    pub trace_a: f64,
    pub gcv: f64,
    pub timings: Timings,
    pub response: String,
    pub predictors: Vec<Predictor>,
    pub model: String,
    pub config: RunConfig,
    pub selection: SelectionResult,
    pub spec: ModelSpec,
    pub fit: FitResult,
}

pub fn fit(args: &FitArgs) -> CliResult<FitDocument> {
    let method = parse_method(&args.method)?;
    let config = run_config(&args.selection, method, args.seed)?;
    let table = read_table(&args.data)?;
    let overrides = DomainOverrides {
        discrete: args.discrete.clone(),
        continuous: args.continuous.clone(),
    };
    let ing = ingest(&table, &args.response, args.predictors.as_deref(), &overrides)?;
    let names: Vec<String> = ing.predictors.iter().map(|p| p.name.clone()).collect();
    let effects = parse_model(&args.model, &names)?;
    let domains = ing.dataset.domains().to_vec();
    let spec = enumerate_terms(&effects, domains).stage("model")?;
    let out = select_and_fit(&ing.dataset, &spec, &config).stage("fit")?;

    let mut selection = out.selection;
    selection.seconds = 0.0;
    let doc = FitDocument {
        method,
        n: ing.dataset.len(),
        lambda: selection.lambda,
        log10_theta: selection.log10_theta.clone(),
        gamma: selection.gamma,
        r: selection.r,
        p: selection.p,
        b: selection.b,
        q: out.q,
        trace_a: out.fit.trace_a,
        gcv: out.fit.gcv,
        timings: Timings {
            select_seconds: out.select_seconds,
            fit_seconds: out.fit_seconds,
        },
        response: ing.response.clone(),
        predictors: ing.predictors,
        model: args.model.clone(),
        config,
        selection,
        spec,
        fit: out.fit,
    };

    let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::json(&args.out, e))?;
    fs::write(&args.out, json + "\n").map_err(|e| CliError::io(&args.out, e))?;

    let fitted_path = args.fitted.clone().unwrap_or_else(|| sibling(&args.out, "fitted.csv"));
    let mut w = csv_writer(&fitted_path)?;
    w.write_record(["row", "response", "fitted", "residual"])
        .map_err(|e| CliError::csv(&fitted_path, e))?;
    for (i, (y, f)) in ing.dataset.response().iter().zip(&doc.fit.fitted).enumerate() {
        w.write_record([(i + 1).to_string(), y.to_string(), f.to_string(), (y - f).to_string()])
            .map_err(|e| CliError::csv(&fitted_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&fitted_path, e))?;
    info!(
        "{method}: n = {}, q = {}, λ = {:.4e}, tr A = {:.3}, GCV = {:.5e}",
        doc.n, doc.q, doc.lambda, doc.trace_a, doc.gcv
    );
    Ok(doc)
}

pub fn load_fit(path: &Path) -> CliResult<FitDocument> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::json(path, e))
}

fn predict_cmd(args: &PredictArgs) -> CliResult<()> {
    let doc = load_fit(&args.fit)?;
    let table = read_table(&args.data)?;
    let mut w = csv_writer(&args.out)?;
    w.write_record(["row", "prediction", "out_of_range"])
        .map_err(|e| CliError::csv(&args.out, e))?;
    if !table.rows.is_empty() {
        let cols = doc
            .predictors
            .iter()
            .map(|p| {
                table.column_index(&p.name).ok_or_else(|| {
                    CliError::input(format!("column '{}' of the fitted model is missing", p.name))
                })
            })
            .collect::<CliResult<Vec<usize>>>()?;
        let rows = table
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                cols.iter()
                    .zip(&doc.predictors)
                    .map(|(&j, p)| {
                        p.code(r[j]).ok_or_else(|| {
                            CliError::input(format!(
                                "row {}: level {} of '{}' was not seen in training",
                                i + 1,
                                r[j],
                                p.name
                            ))
                        })
                    })
                    .collect::<CliResult<Vec<f64>>>()
            })
            .collect::<CliResult<Vec<_>>>()?;
        let pred = predict(&doc.fit, &doc.spec, &rows).stage("predict")?;
        for (i, (v, c)) in pred.values.iter().zip(&pred.clamped).enumerate() {
            w.write_record([(i + 1).to_string(), v.to_string(), c.to_string()])
                .map_err(|e| CliError::csv(&args.out, e))?;
        }
        let flagged = pred.clamped.iter().filter(|c| **c).count();
        if flagged > 0 {
            log::warn!("{flagged} rows fall outside the training range and were clamped");
        }
    }
    w.flush().map_err(|e| CliError::io(&args.out, e))
}

fn bench(args: &BenchArgs) -> CliResult<()> {
    let scenarios = args.scenario.iter().map(|s| parse_scenario(s)).collect::<CliResult<Vec<_>>>()?;
    let methods = args.methods.iter().map(|s| parse_method(s)).collect::<CliResult<Vec<_>>>()?;
    let gcv_cap = match args.gcv_cap {
        GcvCapArg::Auto => GcvCap::Auto,
        GcvCapArg::Full => GcvCap::Full,
        GcvCapArg::One => GcvCap::OneIteration,
    };
    let config = BenchConfig {
        scenarios,
        ns: args.n.clone(),
        snrs: args.snr.clone(),
        methods,
        replicates: args.replicates,
        seed: args.seed,
        run: run_config(&args.selection, Method::Gcv, args.seed)?,
        gcv_cap,
    };
    let (rows, summary) = run_bench(&config).stage("bench")?;

    let mut w = csv_writer(&args.out)?;
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::csv(&args.out, e))?;
    }
    w.flush().map_err(|e| CliError::io(&args.out, e))?;
    let summary_path = args.summary.clone().unwrap_or_else(|| sibling(&args.out, "summary.csv"));
    let mut w = csv_writer(&summary_path)?;
    for s in &summary {
        w.serialize(s).map_err(|e| CliError::csv(&summary_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&summary_path, e))
}
