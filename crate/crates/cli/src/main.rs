//! `boundary-walk`: run stopping-time transforms, verification bundles,
//! table comparisons and entropy diagnostics from a JSON config.

mod config;
mod error;
mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use boundary_walk::verify::bundle::run_bundle;
use boundary_walk::verify::entropy_diagnostic;
use boundary_walk::{ArithmeticMode, CheckStatus, Rational, SeededStream, Weight};
use clap::{Args, Parser, Subcommand};

use config::{Loaded, Method, RawGroup};
use error::{exit, CliError};
use output::{ReportRecord, Summary};

#[derive(Debug, Parser)]
#[command(name = "boundary-walk", version, about = "Stopping-time transforms of random walks on groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Threads for Monte Carlo sampling (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides config `output` and BOUNDARY_WALK_OUT).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ArithmeticMode>,
}

fn parse_mode(s: &str) -> Result<ArithmeticMode, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute μ_T and write mu_t.csv and mu_t.json.
    Transform(RunArgs),
    /// Run a check bundle (identities, doob, transfer, all) and write report.json.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        bundle: Option<String>,
    },
    /// Total variation between two result tables.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
    },
    /// Entropies of convolution powers of the configured measure.
    Entropy {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        max_n: Option<usize>,
    },
}

fn load(path: Option<&Path>) -> Result<Loaded, CliError> {
    match path {
        Some(p) => Loaded::from_path(p),
        None => Ok(Loaded::empty()),
    }
}

fn require_config(args: &RunArgs) -> Result<Loaded, CliError> {
    let path = args.config.as_deref().ok_or_else(|| CliError::usage("--config is required"))?;
    Loaded::from_path(path)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::internal(format!("cannot create {}: {e}", dir.display())))
}

fn transform<S: Weight>(cfg: &Loaded, args: &RunArgs) -> Result<u8, CliError> {
    let group = cfg.group()?;
    let mu = cfg.measure::<S>(group)?;
    if let Some(warning) = mu.generation_warning(4) {
        eprintln!("warning: {warning}");
    }
    let transform = cfg.transform(&mu)?;
    let method = cfg.method()?;
    let seed = cfg.seed(args.seed);
    let epsilon = cfg.epsilon::<S>()?;
    let max_horizon = cfg.max_horizon();
    let result = match method {
        Method::Exact => transform.exact(&mu, &epsilon, max_horizon),
        Method::MonteCarlo => transform.monte_carlo(&mu, cfg.samples(), max_horizon, SeededStream::new(seed, 0)),
    }
    .map_err(|e| CliError::usage(format!("cannot run transform: {e}")))?;

    let dir = cfg.output_dir(args.out.as_deref());
    prepare_dir(&dir)?;
    output::write_table(&dir.join(output::TABLE_FILE), &result.measure)?;
    let summary = Summary {
        group: RawGroup::from_spec(group),
        group_name: group.to_string(),
        mode: S::MODE.as_str().to_string(),
        rule: transform.describe(),
        method: method.as_str().to_string(),
        seed,
        samples: (method == Method::MonteCarlo).then(|| cfg.samples()),
        epsilon: epsilon.to_literal(),
        max_horizon,
        horizon: result.horizon,
        stopped_mass: result.measure.mass().to_literal(),
        mass_deficit: result.mass_deficit.to_literal(),
        mass_deficit_decimal: result.mass_deficit.as_f64(),
        mean_stopping_time: result.mean_stopping_time,
        truncated: result.truncated,
        support_size: result.measure.len(),
        table: output::TABLE_FILE.to_string(),
    };
    output::write_json(&dir.join(output::SUMMARY_FILE), &summary)?;

    println!("{} on {group}: {} atoms, mass deficit {}", summary.rule, summary.support_size, summary.mass_deficit);
    println!("wrote {}", dir.join(output::TABLE_FILE).display());
    if result.truncated {
        eprintln!("truncated at horizon {} with unstopped mass {} above epsilon", result.horizon, summary.mass_deficit);
        return Ok(exit::TRUNCATED);
    }
    Ok(exit::OK)
}

fn verify<S: Weight>(cfg: &Loaded, args: &RunArgs, bundle: Option<&str>) -> Result<u8, CliError> {
    let bundle = cfg.bundle(bundle)?;
    let config = cfg.bundle_config::<S>(args.seed)?;
    let reports = run_bundle(bundle, &config).map_err(|e| CliError::internal(format!("bundle {bundle}: {e}")))?;
    let dir = cfg.output_dir(args.out.as_deref());
    prepare_dir(&dir)?;
    let records: Vec<ReportRecord> = reports.iter().map(ReportRecord::from).collect();
    output::write_json(&dir.join(output::REPORT_FILE), &records)?;

    for r in &reports {
        println!("{r}");
    }
    let count = |s| reports.iter().filter(|r| r.status == s).count();
    let (fail, inconclusive) = (count(CheckStatus::Fail), count(CheckStatus::Inconclusive));
    println!("{bundle}: {} passed, {fail} failed, {inconclusive} inconclusive", count(CheckStatus::Pass));
    Ok(if fail > 0 {
        exit::FAILURE
    } else if inconclusive > 0 {
        exit::INCONCLUSIVE
    } else {
        exit::OK
    })
}

fn total_variation<S: Weight>(a: (&Path, &Summary), b: (&Path, &Summary)) -> Result<f64, CliError> {
    let group = a.1.group.spec()?;
    let ma = output::read_table::<S>(a.0, group)?;
    let mb = output::read_table::<S>(b.0, group)?;
    Ok(ma.total_variation(&mb).map_err(|e| CliError::usage(e.to_string()))?.as_f64())
}

fn compare(first: &Path, second: &Path, tolerance: f64) -> Result<u8, CliError> {
    let (ta, sa) = output::result_paths(first);
    let (tb, sb) = output::result_paths(second);
    let (a, b) = (output::read_summary(&sa)?, output::read_summary(&sb)?);
    if a.group != b.group {
        return Err(CliError::usage(format!("group mismatch: {} vs {}", a.group_name, b.group_name)));
    }
    let exact = a.mode()? == ArithmeticMode::Exact && b.mode()? == ArithmeticMode::Exact;
    let tv = if exact {
        total_variation::<Rational>((&ta, &a), (&tb, &b))?
    } else {
        total_variation::<f64>((&ta, &a), (&tb, &b))?
    };
    println!("total variation {tv}");
    Ok(if tv <= tolerance { exit::OK } else { exit::FAILURE })
}

fn entropy<S: Weight>(cfg: &Loaded, args: &RunArgs, max_n: Option<usize>) -> Result<u8, CliError> {
    let group = cfg.group()?;
    let mu = cfg.measure::<S>(group)?;
    let max_n = max_n.or(cfg.raw.max_n).unwrap_or(6);
    let cap = cfg.raw.support_cap.unwrap_or(1_000_000);
    let table = entropy_diagnostic(&mu, max_n, cap).map_err(|e| CliError::internal(format!("entropy: {e}")))?;
    let dir = cfg.output_dir(args.out.as_deref());
    prepare_dir(&dir)?;
    let path = dir.join(output::ENTROPY_FILE);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(|e| CliError::internal(e.to_string()))?;
    w.write_record(["n", "entropy", "increment"]).map_err(|e| CliError::internal(e.to_string()))?;
    let mut previous = 0.0;
    for (n, h) in &table {
        println!("{n:>4}  {h:.12}  {:+.12}", h - previous);
        w.write_record([n.to_string(), h.to_string(), (h - previous).to_string()]).map_err(|e| CliError::internal(e.to_string()))?;
        previous = *h;
    }
    w.flush()?;
    Ok(exit::OK)
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Transform(args) => {
            let cfg = require_config(args)?;
            match cfg.mode(args.mode)? {
                ArithmeticMode::Exact => transform::<Rational>(&cfg, args),
                ArithmeticMode::Float => transform::<f64>(&cfg, args),
            }
        }
        Command::Verify { run, bundle } => {
            let cfg = load(run.config.as_deref())?;
            match cfg.mode(run.mode)? {
                ArithmeticMode::Exact => verify::<Rational>(&cfg, run, bundle.as_deref()),
                ArithmeticMode::Float => verify::<f64>(&cfg, run, bundle.as_deref()),
            }
        }
        Command::Compare { first, second, tolerance } => compare(first, second, *tolerance),
        Command::Entropy { run, max_n } => {
            let cfg = require_config(run)?;
            match cfg.mode(run.mode)? {
                ArithmeticMode::Exact => entropy::<Rational>(&cfg, run, *max_n),
                ArithmeticMode::Float => entropy::<f64>(&cfg, run, *max_n),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.workers {
        Some(0) => Err(CliError::usage("--workers must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(CliError::internal(format!("cannot start {n} workers: {e}"))),
        },
        None => dispatch(&cli),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
