//! The five subcommands. Each reads its inputs, writes its artifacts into the
//! output directory and records a manifest entry there.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tuner_core::kernel_selection::{build_reduced_kernel, fit_forest, rank_additive_kernels, NystromConfig, OrderScore};
use tuner_core::quad_env::{scaled_reward, PidGains, Termination, GAIN_NAMES, N_GAINS};
use tuner_core::safe_bo::{run_linebo, run_safe_bo, run_unconstrained_bo, standard_kernel_baseline, BoTrace};
use tuner_core::sampling::{latin_hypercube, RngStream};
use tuner_core::{Dataset, KernelSpec};

use crate::config::{Config, Method};
use crate::error::{config_err, CliError, Result};
use crate::io;
use crate::manifest::{input_path, run_id, timestamp, Manifest, RunRecord, MANIFEST_FILE};

pub const STREAM_PRIOR: u64 = 1;
pub const STREAM_RANKING: u64 = 2;
pub const STREAM_FOREST: u64 = 3;
pub const STREAM_TUNING: u64 = 4;

pub const PRIOR_FILE: &str = "prior.csv";
pub const SELECTION_FILE: &str = "selection.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const BEST_FILE: &str = "best.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

/// Settings shared by every command after flags override the config.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: Config,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

impl Context {
    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }

    fn record(&self, command: &str, method: Option<Method>, started: String, streams: &[(&str, u64)], inputs: &[&Path], artifacts: &[&str]) -> Result<()> {
        let method = method.map(Method::name);
        Manifest::record(
            &self.out,
            RunRecord {
                run_id: run_id(command, method, self.seed, &self.config),
                command: command.into(),
                method: method.map(String::from),
                seed: self.seed,
                streams: streams.iter().map(|&(n, id)| (n.to_string(), (self.seed, id))).collect(),
                threads: self.threads,
                started,
                finished: timestamp(),
                inputs: inputs.iter().map(|p| input_path(&self.out, p)).collect(),
                artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
                config: self.config.clone(),
            },
        )
    }
}

fn numerical(msg: String) -> CliError {
    CliError::Numerical(msg)
}

/// Latin-hypercube design of `cli.n_prior` points, each evaluated on the
/// benchmark.
pub fn build_prior(config: &Config, seed: u64) -> Result<Dataset> {
    let bench = config.benchmark();
    let xs = latin_hypercube(config.cli.n_prior, N_GAINS, RngStream::new(seed, STREAM_PRIOR))?;
    let ys = xs
        .par_iter()
        .map(|x| bench.objective(x).map_err(numerical))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Dataset::from_rows(xs, ys)?)
}

pub fn cmd_prior(ctx: &Context) -> Result<Dataset> {
    let started = timestamp();
    ctx.prepare_out()?;
    let prior = build_prior(&ctx.config, ctx.seed)?;
    io::write_prior(&ctx.out.join(PRIOR_FILE), &prior)?;
    ctx.record("prior", None, started, &[("prior_lhs", STREAM_PRIOR)], &[], &[PRIOR_FILE])?;
    Ok(prior)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimImportance {
    pub gain: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub nystrom: NystromConfig,
    /// Average regularized empirical error per order, orders ascending.
    pub orders: Vec<OrderScore>,
    /// Orders by increasing average error.
    pub ranked: Vec<usize>,
    pub selected: Vec<usize>,
    pub importance: Vec<DimImportance>,
    pub dim_keep: usize,
    /// Reduced kernel with unit-variance base kernels; tuning rescales it to
    /// `kernel.prior_variance`.
    pub kernel: KernelSpec,
}

pub fn select_kernel(config: &Config, prior: &Dataset, seed: u64) -> Result<Selection> {
    let k = &config.kernel;
    let base = k.base(N_GAINS)?;
    let nystrom = config.nystrom.resolve(prior.len());
    let ranking = rank_additive_kernels(prior, N_GAINS, &base, &nystrom, k.top_m, RngStream::new(seed, STREAM_RANKING))?;
    let forest = fit_forest(prior, k.forest_trees, k.forest_min_leaf, RngStream::new(seed, STREAM_FOREST))?;
    let kernel = build_reduced_kernel(&ranking, &forest, N_GAINS, &base, k.dim_keep)?;
    Ok(Selection {
        nystrom,
        orders: ranking.scores,
        ranked: ranking.ranked,
        selected: ranking.selected,
        importance: GAIN_NAMES
            .iter()
            .zip(&forest.importance)
            .map(|(g, &v)| DimImportance {
                gain: g.to_string(),
                importance: v,
            })
            .collect(),
        dim_keep: k.dim_keep,
        kernel,
    })
}

pub fn cmd_select(ctx: &Context, prior_path: &Path) -> Result<Selection> {
    let started = timestamp();
    let prior = io::read_prior(prior_path)?;
    ctx.prepare_out()?;
    let selection = select_kernel(&ctx.config, &prior, ctx.seed)?;
    io::write_json(&ctx.out.join(SELECTION_FILE), &selection)?;
    ctx.record(
        "select",
        None,
        started,
        &[("ranking", STREAM_RANKING), ("forest", STREAM_FOREST)],
        &[prior_path],
        &[SELECTION_FILE],
    )?;
    Ok(selection)
}

pub fn read_selection(path: &Path) -> Result<Selection> {
    let value = io::read_json(path)?;
    let selection: Selection =
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    selection
        .kernel
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if selection.kernel.dim() != N_GAINS {
        return config_err(format!("{}: kernel must cover {N_GAINS} dimensions", path.display()));
    }
    Ok(selection)
}

/// Where the optimization kernel of `ours` / `unconstrained` comes from.
#[derive(Debug, Clone)]
pub enum KernelSource {
    Orders(Vec<usize>),
    Spec(KernelSpec),
}

/// The kernel a method optimizes with, scaled to the configured prior
/// variance.
pub fn method_kernel(config: &Config, method: Method, source: Option<&KernelSource>) -> Result<KernelSpec> {
    let k = &config.kernel;
    let spec = match method {
        Method::Standard => standard_kernel_baseline(N_GAINS, &k.base(N_GAINS)?)?,
        Method::Linebo => KernelSpec::full(k.base(1)?, vec![1])?,
        Method::Ours | Method::Unconstrained => match source {
            Some(KernelSource::Orders(orders)) => KernelSpec::full(k.base(N_GAINS)?, orders.clone())?,
            Some(KernelSource::Spec(spec)) => spec.clone(),
            None => {
                return config_err(format!(
                    "method `{}` needs a selection file or --kernel-orders",
                    method.name()
                ))
            }
        },
    };
    Ok(spec.with_prior_variance(k.prior_variance)?)
}

/// The prior plus, if configured, the default controller as safe seed.
pub fn campaign_prior(config: &Config, prior: &Dataset) -> Result<Dataset> {
    let mut data = prior.clone();
    if config.cli.include_default_seed {
        let x = config.default_point();
        let y = config.benchmark().objective(&x).map_err(numerical)?;
        data.push(x, y)?;
    }
    Ok(data)
}

pub fn run_method(config: &Config, prior: &Dataset, method: Method, kernel: &KernelSpec, iterations: usize, seed: u64) -> Result<BoTrace> {
    let bench = config.benchmark();
    let data = campaign_prior(config, prior)?;
    let mut bo = config.bo.clone();
    bo.iterations = iterations;
    let objective = |x: &[f64]| bench.objective(x);
    let stream = RngStream::new(seed, STREAM_TUNING);
    let trace = match method {
        Method::Ours | Method::Standard => run_safe_bo(objective, &data, kernel, &bo, stream),
        Method::Unconstrained => run_unconstrained_bo(objective, &data, kernel, &bo, stream),
        Method::Linebo => run_linebo(objective, &data, kernel, &bo, stream),
    }?;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub method: String,
    pub performance: f64,
    /// Normalized parameters.
    pub params: Vec<f64>,
    pub gain_names: Vec<String>,
    /// Physical gains, in the order of `gain_names`.
    pub gains: Vec<f64>,
}

pub struct TuneArgs<'a> {
    pub prior: &'a Path,
    pub selection: Option<&'a Path>,
    pub method: Method,
    pub iterations: Option<usize>,
    pub kernel_orders: Option<Vec<usize>>,
}

pub fn cmd_tune(ctx: &Context, args: &TuneArgs) -> Result<BoTrace> {
    let started = timestamp();
    let config = &ctx.config;
    let prior = io::read_prior(args.prior)?;
    let mut inputs = vec![args.prior];
    let orders = args.kernel_orders.clone().or_else(|| config.cli.kernel_orders.clone());
    let source = match (args.method, orders) {
        (Method::Standard | Method::Linebo, _) => None,
        (_, Some(orders)) => Some(KernelSource::Orders(orders)),
        (_, None) => {
            let path = args.selection.ok_or_else(|| {
                CliError::Config(format!(
                    "method `{}` needs --selection or --kernel-orders",
                    args.method.name()
                ))
            })?;
            inputs.push(path);
            Some(KernelSource::Spec(read_selection(path)?.kernel))
        }
    };
    let kernel = method_kernel(config, args.method, source.as_ref())?;
    let iterations = args.iterations.unwrap_or(config.bo.iterations);
    ctx.prepare_out()?;
    let trace = run_method(config, &prior, args.method, &kernel, iterations, ctx.seed)?;

    io::write_trace(&ctx.out.join(TRACE_FILE), &trace)?;
    let gains = config
        .gains_bounds
        .denormalize(&trace.best_params)
        .map_err(numerical)?
        .to_array();
    let best = Best {
        method: args.method.name().into(),
        performance: trace.best_performance,
        params: trace.best_params.clone(),
        gain_names: GAIN_NAMES.iter().map(|s| s.to_string()).collect(),
        gains: gains.to_vec(),
    };
    io::write_json(&ctx.out.join(BEST_FILE), &best)?;
    ctx.record(
        "tune",
        Some(args.method),
        started,
        &[("tuning", STREAM_TUNING)],
        &inputs,
        &[TRACE_FILE, BEST_FILE],
    )?;
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub gain_names: Vec<String>,
    pub gains: Vec<f64>,
    pub j_q: f64,
    pub j_r: f64,
    pub j_r_scaled: f64,
    pub steps: usize,
    pub l_expected: usize,
    pub performance: f64,
    pub terminated_early: bool,
    pub termination: Termination,
    pub rmse_x: f64,
    pub rmse_z: f64,
}

/// Reads gains given inline as nine comma-separated physical values, or from
/// a JSON file holding either a `gains` array (as in `best.json`) or a bare
/// array.
pub fn parse_gains(spec: &str) -> Result<([f64; N_GAINS], Option<PathBuf>)> {
    let to_array = |v: Vec<f64>, what: &str| -> Result<[f64; N_GAINS]> {
        <[f64; N_GAINS]>::try_from(v).map_err(|v| CliError::Config(format!("{what}: expected {N_GAINS} gains, got {}", v.len())))
    };
    if spec.contains(',') && !Path::new(spec).exists() {
        let values = spec
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("invalid gain `{}`", s.trim()))))
            .collect::<Result<Vec<f64>>>()?;
        return Ok((to_array(values, "--gains")?, None));
    }
    let path = PathBuf::from(spec);
    let value = io::read_json(&path)?;
    let gains = value.get("gains").cloned().unwrap_or(value);
    let values: Vec<f64> =
        serde_json::from_value(gains).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((to_array(values, &path.display().to_string())?, Some(path)))
}

pub fn simulate(config: &Config, gains: [f64; N_GAINS]) -> Result<(Summary, tuner_core::quad_env::EpisodeResult)> {
    let pid = PidGains::from_array(gains);
    config.gains_bounds.normalize(&pid).map_err(CliError::Config)?;
    let bench = config.benchmark();
    let result = bench.run(&pid);
    let (rmse_x, rmse_z) = result.tracking_rmse(config.episode.warmup_steps);
    let summary = Summary {
        gain_names: GAIN_NAMES.iter().map(|s| s.to_string()).collect(),
        gains: gains.to_vec(),
        j_q: result.j_q,
        j_r: -result.j_q,
        j_r_scaled: scaled_reward(&result, &config.episode),
        steps: result.steps,
        l_expected: config.episode.l_expected,
        performance: bench.performance(&result),
        terminated_early: result.terminated_early(),
        termination: result.termination,
        rmse_x,
        rmse_z,
    };
    Ok((summary, result))
}

pub fn cmd_simulate(ctx: &Context, gains: Option<&str>) -> Result<Summary> {
    let started = timestamp();
    let (gains, source) = match gains {
        Some(spec) => parse_gains(spec)?,
        None => (ctx.config.cli.default_gains, None),
    };
    let (summary, result) = simulate(&ctx.config, gains)?;
    ctx.prepare_out()?;
    io::write_trajectory(&ctx.out.join(TRAJECTORY_FILE), &result)?;
    io::write_json(&ctx.out.join(SUMMARY_FILE), &summary)?;
    let inputs: Vec<&Path> = source.iter().map(PathBuf::as_path).collect();
    ctx.record("simulate", None, started, &[], &inputs, &[TRAJECTORY_FILE, SUMMARY_FILE])?;
    Ok(summary)
}

/// Per-run aggregate of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub dir: String,
    pub method: String,
    pub seed: u64,
    pub iterations: usize,
    pub final_best: f64,
    /// First iteration whose best-so-far reaches 90% of the final best;
    /// `None` when the final best is not positive.
    pub iterations_to_90: Option<usize>,
    pub unsafe_evaluations: usize,
}

pub struct Report {
    pub runs: Vec<RunSummary>,
    pub warnings: Vec<String>,
    pub table: String,
}

/// Loads the tuning trace a directory's manifest lists.
fn load_run(dir: &Path) -> Result<(RunRecord, Vec<io::TraceRow>)> {
    let path = dir.join(MANIFEST_FILE);
    let manifest = Manifest::load(dir)?
        .ok_or_else(|| CliError::io(&path, std::io::Error::new(std::io::ErrorKind::NotFound, "no manifest")))?;
    let run = manifest
        .latest("tune")
        .filter(|r| r.artifacts.iter().any(|a| a == TRACE_FILE))
        .ok_or_else(|| CliError::Config(format!("{}: manifest lists no tuning trace", dir.display())))?
        .clone();
    let rows = io::read_trace(&dir.join(TRACE_FILE))?;
    Ok((run, rows))
}

/// Config with the per-run fields blanked, for consistency checks.
fn comparable(config: &Config) -> String {
    let mut c = config.clone();
    c.cli.seed = 0;
    c.cli.threads = 0;
    c.cli.method = Method::Ours;
    c.cli.kernel_orders = None;
    c.to_json()
}

pub fn build_report(dirs: &[PathBuf]) -> Result<(Report, Vec<Vec<String>>)> {
    if dirs.is_empty() {
        return config_err("report needs at least one run directory");
    }
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut reference: Option<(String, String)> = None;
    for dir in dirs {
        let (run, trace) = load_run(dir)?;
        let method = run.method.clone().unwrap_or_else(|| "unknown".into());
        let key = comparable(&run.config);
        match &reference {
            None => reference = Some((dir.display().to_string(), key)),
            Some((first, k)) if *k != key => warnings.push(format!(
                "configuration of {} differs from {first} beyond seed and method",
                dir.display()
            )),
            _ => {}
        }
        let mut unsafe_count = 0;
        for r in &trace {
            unsafe_count += usize::from(!r.safe);
            rows.push(vec![
                method.clone(),
                dir.display().to_string(),
                r.iter.to_string(),
                r.best_so_far.to_string(),
                unsafe_count.to_string(),
            ]);
        }
        let final_best = trace.last().map_or(f64::NAN, |r| r.best_so_far);
        let iterations_to_90 = (final_best > 0.0)
            .then(|| trace.iter().find(|r| r.best_so_far >= 0.9 * final_best).map(|r| r.iter))
            .flatten();
        runs.push(RunSummary {
            dir: dir.display().to_string(),
            method,
            seed: run.seed,
            iterations: trace.len(),
            final_best,
            iterations_to_90,
            unsafe_evaluations: unsafe_count,
        });
    }

    let mut table = String::new();
    table.push_str(&format!(
        "{:<14} {:>6} {:>6} {:>12} {:>10} {:>8}  {}\n",
        "method", "seed", "iters", "final_best", "iter_to_90", "unsafe", "dir"
    ));
    for r in &runs {
        table.push_str(&format!(
            "{:<14} {:>6} {:>6} {:>12.4} {:>10} {:>8}  {}\n",
            r.method,
            r.seed,
            r.iterations,
            r.final_best,
            r.iterations_to_90.map_or("-".into(), |i| i.to_string()),
            r.unsafe_evaluations,
            r.dir
        ));
    }
    let mut by_method: BTreeMap<&str, Vec<&RunSummary>> = BTreeMap::new();
    for r in &runs {
        by_method.entry(&r.method).or_default().push(r);
    }
    if runs.len() > by_method.len() {
        table.push_str("\nper method (median final best, total unsafe):\n");
        for (m, rs) in &by_method {
            let mut finals: Vec<f64> = rs.iter().map(|r| r.final_best).collect();
            finals.sort_by(f64::total_cmp);
            let unsafe_total: usize = rs.iter().map(|r| r.unsafe_evaluations).sum();
            table.push_str(&format!("{m:<14} {:>12.4} {:>8}\n", median(&finals), unsafe_total));
        }
    }
    for w in &warnings {
        table.push_str(&format!("\nwarning: {w}\n"));
    }
    Ok((Report { runs, warnings, table }, rows))
}

pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn cmd_report(dirs: &[PathBuf], out: &Path) -> Result<Report> {
    let (report, rows) = build_report(dirs)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let header = ["method", "run", "iteration", "best_so_far", "unsafe_count"].map(String::from);
    io::write_rows(&out.join(REPORT_CSV), &header, rows.into_iter())?;
    let txt = out.join(REPORT_TXT);
    fs::write(&txt, &report.table).map_err(|e| CliError::io(&txt, e))?;
    Ok(report)
}
