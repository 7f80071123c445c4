//! Benchmark driver: runs one experiment family over a list of problem
//! sizes and writes a CSV mirroring the solver reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mlqs::bench::{self, Experiment, ExperimentConfig};

#[derive(Parser, Debug)]
#[command(
    name = "mlqs-bench",
    about = "Structured-solver benchmarks for 2D elliptic and optimal control problems",
    after_help = "Experiments: laplace-direct | laplace-pcg | control | rank-growth"
)]
struct Args {
    /// Experiment to run.
    experiment: String,

    /// Problem sizes (total unknowns, perfect squares), comma separated.
    #[arg(long = "n", value_delimiter = ',', default_value = "4096")]
    n: Vec<usize>,

    /// Order cap of the factorization / preconditioner.
    #[arg(long, default_value_t = 4)]
    r: usize,

    /// Truncation tolerance; the epsilon of the rank-growth study.
    #[arg(long, default_value_t = 1e-6)]
    tau: f64,

    /// Regularization weight of the control problem.
    #[arg(long, default_value_t = 1e-2)]
    beta: f64,

    /// Relative residual target of the PCG solves.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,

    /// Seed for randomized inputs (recorded; the bundled experiments are
    /// deterministic).
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// CSV output path.
    #[arg(long, default_value = "mlqs-bench.csv")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let experiment = match Experiment::parse(&args.experiment) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let config = ExperimentConfig {
        experiment,
        sizes: args.n,
        order_cap: args.r,
        tau: args.tau,
        beta: args.beta,
        tol_pcg: args.tol,
        seed: args.seed,
        out: args.out,
    };
    if let Err(e) = config.validate() {
        eprintln!("configuration error: {e}");
        return ExitCode::from(2);
    }
    match bench::run(&config) {
        Ok(summary) => {
            print!("{}", bench::render_table(&summary));
            for note in &summary.scaling_notes {
                eprintln!("{note}");
            }
            println!("wrote {}", config.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("solver error: {e}");
            ExitCode::from(3)
        }
    }
}
