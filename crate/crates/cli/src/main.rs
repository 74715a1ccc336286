use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lpcoreset_cli::commands;
use lpcoreset_cli::config::{RawConfig, RunConfig};
use lpcoreset_cli::CliError;

/// Row-sampling toolkit for lp subspace embeddings.
#[derive(Parser)]
#[command(name = "lpcoreset", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-row scores (sensitivities, leverage, or Lewis weights)
    Scores(CommonArgs),
    /// Apply a norm-preserving row-splitting transform
    Flatten(CommonArgs),
    /// Build a sampling plan, draw, and emit the sampled matrix
    Sample(CommonArgs),
    /// Measure the sampling error of a draw against eps (exit 1 on failure)
    Verify(CommonArgs),
    /// Sample-complexity scaling study over an eps grid
    Bench(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key=value config file; command-line flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,

    /// Input matrix CSV (one row per line, comma-separated)
    #[arg(long)]
    input: Option<PathBuf>,

    /// Generator family: gaussian | vandermonde | lowranksparse | perturbed
    #[arg(long)]
    gen: Option<String>,

    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    s: Option<usize>,

    /// Norm exponent p >= 1
    #[arg(long)]
    p: Option<f64>,

    /// Target sampling error in (0,1)
    #[arg(long)]
    eps: Option<f64>,

    #[arg(long)]
    delta: Option<f64>,

    /// sensitivity | rootlev | lewis | half
    #[arg(long)]
    method: Option<String>,

    /// Oversampling parameter, or "auto" to calibrate
    #[arg(long)]
    alpha: Option<String>,

    /// Flattening parameter C >= 1
    #[arg(long = "C")]
    c: Option<f64>,

    /// Flatten transform: sens | uniform | senslev
    #[arg(long)]
    transform: Option<String>,

    /// Row target for lewis plans
    #[arg(long)]
    m_target: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    trials: Option<usize>,

    /// Comma-separated eps grid for bench
    #[arg(long)]
    eps_grid: Option<String>,

    #[arg(long)]
    probes: Option<usize>,

    #[arg(long)]
    restarts: Option<usize>,

    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        macro_rules! merge {
            ($key:literal, $field:expr) => {
                if let Some(v) = &$field {
                    raw.set($key, v.to_string());
                }
            };
        }
        merge!("input", self.input.as_ref().map(|p| p.display()));
        merge!("gen", self.gen);
        merge!("n", self.n);
        merge!("d", self.d);
        merge!("k", self.k);
        merge!("q", self.q);
        merge!("s", self.s);
        merge!("p", self.p);
        merge!("eps", self.eps);
        merge!("delta", self.delta);
        merge!("method", self.method);
        merge!("alpha", self.alpha);
        merge!("c", self.c);
        merge!("transform", self.transform);
        merge!("m_target", self.m_target);
        merge!("seed", self.seed);
        merge!("trials", self.trials);
        merge!("eps_grid", self.eps_grid);
        merge!("probes", self.probes);
        merge!("restarts", self.restarts);
        merge!("out", self.out.as_ref().map(|p| p.display()));
        raw.resolve()
    }
}

fn run() -> Result<bool, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Scores(args) => {
            let cfg = args.resolve()?;
            let record = commands::cmd_scores(&cfg)?;
            println!(
                "scores: kind {:?}, n {}, total {:.6}",
                record.kind,
                record.values.len(),
                record.total
            );
            Ok(true)
        }
        Command::Flatten(args) => {
            let cfg = args.resolve()?;
            let (rows_in, rows_out) = commands::cmd_flatten(&cfg)?;
            println!("flatten: {rows_in} rows -> {rows_out} rows");
            Ok(true)
        }
        Command::Sample(args) => {
            let cfg = args.resolve()?;
            let draw = commands::cmd_sample(&cfg)?;
            println!("sample: kept {} rows (seed {})", draw.kept.len(), draw.seed);
            Ok(true)
        }
        Command::Verify(args) => {
            let cfg = args.resolve()?;
            let (pass, report) = commands::cmd_verify(&cfg)?;
            println!(
                "verify: lambda_est {:.6} vs eps {} -> {}",
                report.lambda_est,
                cfg.eps,
                if pass { "PASS" } else { "FAIL" }
            );
            Ok(pass)
        }
        Command::Bench(args) => {
            let cfg = args.resolve()?;
            let result = commands::cmd_bench_scaling(&cfg)?;
            for run in &result.runs {
                println!(
                    "bench: eps {} -> median rows {} (lambda {:.4}{})",
                    run.eps,
                    run.median_rows,
                    run.median_lambda,
                    if run.budget_exhausted {
                        ", budget exhausted"
                    } else {
                        ""
                    }
                );
            }
            if let Some(slope) = result.slope {
                println!("bench: fitted slope {slope:.3}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
