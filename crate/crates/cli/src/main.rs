use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tuner_cli::commands::{self, Context, TuneArgs, PRIOR_FILE, SELECTION_FILE};
use tuner_cli::config::{parse_orders, Config, Method};
use tuner_cli::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "tuner", version, about = "Safe Bayesian tuning of a cascaded quadrotor PID controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Master seed; overrides `cli.seed`.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides `cli.threads`.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a Latin-hypercube prior design and write prior.csv.
    Prior,
    /// Rank additive kernels and input dimensions; write selection.json.
    Select {
        /// Prior observations [default: OUT/prior.csv].
        #[arg(long, value_name = "PATH")]
        prior: Option<PathBuf>,
    },
    /// Run a tuning campaign; write trace.csv and best.json.
    Tune {
        /// Prior observations [default: OUT/prior.csv].
        #[arg(long, value_name = "PATH")]
        prior: Option<PathBuf>,
        /// Kernel selection [default: OUT/selection.json].
        #[arg(long, value_name = "PATH")]
        selection: Option<PathBuf>,
        /// Overrides `cli.method`.
        #[arg(long, value_enum, value_name = "NAME")]
        method: Option<Method>,
        /// Overrides `bo.iterations`.
        #[arg(long, value_name = "N")]
        iterations: Option<usize>,
        /// Comma-separated additive orders over all dimensions, e.g. `1,2,3`.
        #[arg(long, value_name = "LIST")]
        kernel_orders: Option<String>,
    },
    /// Run one episode; write trajectory.csv and summary.json.
    Simulate {
        /// Nine comma-separated physical gains, or a JSON file such as best.json
        /// [default: `cli.default_gains`].
        #[arg(long, value_name = "PATH|LIST")]
        gains: Option<String>,
    },
    /// Compare tuning runs; write report.csv and report.txt.
    Report {
        /// Directories holding a tuning run.
        #[arg(required = true, value_name = "DIR")]
        runs: Vec<PathBuf>,
    },
}

fn or_default(given: Option<PathBuf>, out: &Path, name: &str) -> PathBuf {
    given.unwrap_or_else(|| out.join(name))
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let ctx = Context {
        seed: cli.seed.unwrap_or(config.cli.seed),
        threads: cli.threads.unwrap_or(config.cli.threads),
        out: cli.out,
        config,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} threads: {e}", ctx.threads)))?;

    pool.install(|| match cli.command {
        Command::Prior => {
            let prior = commands::cmd_prior(&ctx)?;
            let safe = prior.ys().iter().filter(|&&y| y >= ctx.config.bo.p_min).count();
            println!("prior: {} points, {safe} safe -> {}", prior.len(), ctx.out.join(PRIOR_FILE).display());
            Ok(())
        }
        Command::Select { prior } => {
            let prior = or_default(prior, &ctx.out, PRIOR_FILE);
            let s = commands::cmd_select(&ctx, &prior)?;
            println!("select: orders ranked {:?}, selected {:?}", s.ranked, s.selected);
            Ok(())
        }
        Command::Tune {
            prior,
            selection,
            method,
            iterations,
            kernel_orders,
        } => {
            let prior = or_default(prior, &ctx.out, PRIOR_FILE);
            let selection = or_default(selection, &ctx.out, SELECTION_FILE);
            let kernel_orders = kernel_orders.as_deref().map(parse_orders).transpose()?;
            let method = method.unwrap_or(ctx.config.cli.method);
            let trace = commands::cmd_tune(
                &ctx,
                &TuneArgs {
                    prior: &prior,
                    selection: Some(&selection),
                    method,
                    iterations,
                    kernel_orders,
                },
            )?;
            println!(
                "tune ({}): {} iterations, best P = {}, unsafe = {}, stalls = {}",
                method.name(),
                trace.records.len(),
                trace.best_performance,
                trace.unsafe_count(),
                trace.stall_count()
            );
            Ok(())
        }
        Command::Simulate { gains } => {
            let s = commands::cmd_simulate(&ctx, gains.as_deref())?;
            println!(
                "simulate: P = {}, J^Q = {}, steps = {}/{}, terminated early = {}",
                s.performance, s.j_q, s.steps, s.l_expected, s.terminated_early
            );
            Ok(())
        }
        Command::Report { runs } => {
            let report = commands::cmd_report(&runs, &ctx.out)?;
            print!("{}", report.table);
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tuner: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
