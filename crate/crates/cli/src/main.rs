use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mpl_cli::{run, CliError, Command, MethodChoice, Overrides};

#[derive(Parser)]
#[command(name = "mpl", version, about = "Mutual pressure of potentials with fixed marginals")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Entropies, mutual information and relative entropy of a joint measure.
    Entropy(RunArgs),
    /// Pressure of a potential.
    Pressure(RunArgs),
    /// Gibbs measure, its marginals and marginal potentials.
    Gibbs(RunArgs),
    /// Mutual pressure by exact enumeration, Monte Carlo or the limit dual.
    MutualPressure(RunArgs),
    /// Pressure against mutual pressure plus marginal entropies.
    Duality(RunArgs),
    /// Legendre transform of mutual pressure at a joint measure.
    Legendre(RunArgs),
    /// Checks whether a joint measure is a mutual equilibrium.
    Equilibrium(RunArgs),
    /// Typical-set probabilities and their large-deviation rate.
    Sanov(RunArgs),
    /// Potentials on a box: quadrature pressure and discretized mutual pressure.
    Continuous(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    method: Option<MethodChoice>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report.json and report.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
    /// Show entropy-like quantities in bits.
    #[arg(long)]
    bits: bool,
}

fn split(sub: Sub) -> (Command, RunArgs) {
    match sub {
        Sub::Entropy(a) => (Command::Entropy, a),
        Sub::Pressure(a) => (Command::Pressure, a),
        Sub::Gibbs(a) => (Command::Gibbs, a),
        Sub::MutualPressure(a) => (Command::MutualPressure, a),
        Sub::Duality(a) => (Command::Duality, a),
        Sub::Legendre(a) => (Command::Legendre, a),
        Sub::Equilibrium(a) => (Command::Equilibrium, a),
        Sub::Sanov(a) => (Command::Sanov, a),
        Sub::Continuous(a) => (Command::Continuous, a),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MPL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("MPL_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::Validation(first).line());
            return ExitCode::from(2);
        }
    };
    let (cmd, args) = split(cli.command);
    let overrides = Overrides {
        method: args.method,
        seed: args.seed,
        tol: args.tol,
        out: args.out,
        bits: args.bits,
    };
    let result = configure_threads().and_then(|()| run(cmd, &args.config, &overrides));
    match result {
        Ok((report, dir)) => {
            if !args.quiet {
                print!("{}", report.summary());
                println!("wrote {}", dir.join("report.json").display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
