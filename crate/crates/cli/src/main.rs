//! `pathwise`: generate paths, compute quadratic variation and run integral experiments.
//!
//! Exit codes: 0 on success, 1 on domain or convergence-gate failures, 2 on I/O,
//! parse or configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pathwise_core::experiment::{run, write_path, write_qv_csv, write_qv_to, ExperimentConfig, RunDirs, Section};
use pathwise_core::paths::{read_csv, write_csv_to, PartitionSequence};
use pathwise_core::{generate, Error, GeneratorKind, GeneratorSpec, Interpolation};

const OUT_DIR_ENV: &str = "PATHWISE_OUT_DIR";

#[derive(Parser)]
#[command(name = "pathwise", version, about = "Pathwise Itô integration along dyadic partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic path as CSV.
    Gen(GenArgs),
    /// Dyadic quadratic variation of a CSV path, with level differences.
    Qv(QvArgs),
    /// Run the `integrate` section of a config.
    Integrate(ConfigArgs),
    /// Run the `ito_check` section of a config.
    ItoCheck(ConfigArgs),
    /// Run the `assoc_check` section of a config.
    AssocCheck(ConfigArgs),
    /// Run every section of a config.
    Run(ConfigArgs),
}

#[derive(Args)]
struct GenArgs {
    /// brownian, smooth, monotone-bv, takagi-like or constant.
    #[arg(long)]
    kind: String,
    /// Number of increments (a power of two); the CSV has n + 1 rows.
    #[arg(long)]
    n: usize,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Expression in `t` for `smooth`.
    #[arg(long, default_value = "t")]
    expression: String,
    /// Nonnegative slope expression in `t` for `monotone-bv`.
    #[arg(long, default_value = "1")]
    slope: String,
    /// Number of tent layers for `takagi-like`.
    #[arg(long)]
    terms: Option<u32>,
    /// Value for `constant`.
    #[arg(long, default_value_t = 0.0)]
    value: f64,
    /// Exponentiate the generated values.
    #[arg(long)]
    exp: bool,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct QvArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Finest level; defaults to the base grid.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value_t = 0)]
    min_level: usize,
    /// Absolute tolerance on the last level difference.
    #[arg(long, default_value_t = 5e-2)]
    tol: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Directory for relative output paths; defaults to $PATHWISE_OUT_DIR, then the working directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the worker thread count of the config.
    #[arg(long)]
    threads: Option<usize>,
}

enum Outcome {
    Ok,
    GateFailed(Vec<String>),
}

fn kind(args: &GenArgs) -> Result<GeneratorKind, Error> {
    Ok(match args.kind.as_str() {
        "brownian" => GeneratorKind::Brownian { drift: args.drift, scale: args.scale },
        "smooth" => GeneratorKind::Smooth { expression: args.expression.clone() },
        "monotone-bv" => GeneratorKind::MonotoneBv { slope: args.slope.clone() },
        "takagi-like" => GeneratorKind::TakagiLike { terms: args.terms },
        "constant" => GeneratorKind::Constant { value: args.value },
        other => return Err(Error::Config(format!("unknown generator kind `{other}`"))),
    })
}

fn gen(args: GenArgs) -> Result<Outcome, Error> {
    let spec = GeneratorSpec {
        kind: kind(&args)?,
        seed: args.seed,
        n: args.n,
        horizon: args.horizon,
        dim: args.dim,
        x0: args.x0,
        exp: args.exp,
    };
    let path = generate(&spec)?;
    match &args.output {
        Some(out) => write_path(&path, out)?,
        None => write_csv_to(&path, "x", std::io::stdout().lock())?,
    }
    Ok(Outcome::Ok)
}

fn qv(args: QvArgs) -> Result<Outcome, Error> {
    let x = read_csv(&args.input, Interpolation::Linear)?;
    let max = args
        .levels
        .unwrap_or_else(|| PartitionSequence::dyadic(x.shared_times().clone()).max_level());
    let converged = match &args.output {
        Some(out) => write_qv_csv(&x, args.min_level, max, args.tol, out)?,
        None => write_qv_to(&x, args.min_level, max, args.tol, std::io::stdout().lock())?,
    };
    if converged {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::GateFailed(vec!["quadratic variation did not converge".into()]))
    }
}

fn run_config(args: ConfigArgs, sections: &[Section]) -> Result<Outcome, Error> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(t) = args.threads {
        if t == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        cfg.threads = Some(t);
    }
    let input = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let output = args
        .out_dir
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_default();
    let summary = run(&cfg, &RunDirs { input, output }, sections)?;
    for out in &summary.outputs {
        eprintln!("wrote {}", out.display());
    }
    if summary.failures.is_empty() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::GateFailed(summary.failures))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Qv(a) => qv(a),
        Command::Integrate(a) => run_config(a, &[Section::Integrate]),
        Command::ItoCheck(a) => run_config(a, &[Section::ItoCheck]),
        Command::AssocCheck(a) => run_config(a, &[Section::AssocCheck]),
        Command::Run(a) => run_config(a, &Section::ALL),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::GateFailed(msgs)) => {
            for m in msgs {
                eprintln!("pathwise: {m}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("pathwise: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
