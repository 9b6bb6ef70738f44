//! `leadopt`: benchmarks, spec runs and the verification suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use leadopt_core::bench::{
    cmd_mc_bench, cmd_run, cmd_sinc_demo, cmd_verify, BenchError, ExperimentSpec, McBenchOptions,
    SINC_MAX_ITERATIONS,
};
use leadopt_core::sim::{fmt_float, SimError};
use leadopt_core::theory::{Status, REPORT_HEADER, VERIFY_SEED};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "leadopt", version)]
#[command(about = "Leader gradient descent on a simulated cluster")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare LGD and EAGD on random low-rank matrix completion
    McBench {
        /// Matrix side length (defaults: 1000, or 100 with --desk)
        #[arg(long)]
        d: Option<usize>,
        /// Comma-separated ranks (defaults: 1,10,50,100, or 1,10 with --desk)
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
        #[arg(long, default_value_t = 10)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Gradient steps per worker
        #[arg(long, default_value_t = 20_000)]
        steps: u64,
        /// Keep every n-th step in curves.csv
        #[arg(long, default_value_t = 1)]
        stride: u64,
        /// Desk-scale protocol instead of the full one
        #[arg(long)]
        desk: bool,
        #[arg(long, default_value = "mc-bench")]
        out: PathBuf,
    },
    /// Four-worker EAGD and LGD on the radial sinc
    SincDemo {
        #[arg(long, default_value = "sinc-demo")]
        out: PathBuf,
        /// Iteration cap; runs stop earlier once every step is below 1e-10
        #[arg(long, default_value_t = SINC_MAX_ITERATIONS)]
        iterations: u64,
    },
    /// Execute an experiment spec file
    Run {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Run the bound checks and print one CSV line per check
    Verify {
        /// Only checks whose name contains this text
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = VERIFY_SEED)]
        seed: u64,
    },
}

fn exit_for(err: &BenchError) -> u8 {
    match err {
        BenchError::Parse { .. } | BenchError::Syntax { .. } | BenchError::Usage(_) => EXIT_USAGE,
        BenchError::Sim(SimError::Config(_)) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn mc_bench(
    d: Option<usize>,
    ranks: Option<Vec<usize>>,
    trials: u64,
    seed: u64,
    steps: u64,
    stride: u64,
    desk: bool,
    out: PathBuf,
) -> Result<u8, BenchError> {
    let mut opts = if desk {
        McBenchOptions::desk(out)
    } else {
        McBenchOptions::full(out)
    };
    if let Some(d) = d {
        opts.d = d;
    }
    if let Some(r) = ranks {
        opts.ranks = r;
    }
    opts.trials = trials;
    opts.seed = seed;
    opts.steps = steps;
    opts.curve_stride = stride;
    let results = cmd_mc_bench(&opts)?;
    println!("rank trial       f0            lgd_final      eagd_final     init_sha256");
    for r in &results {
        println!(
            "{:>4} {:>5} {:>14.6e} {:>14.6e} {:>14.6e} {}",
            r.rank,
            r.trial,
            r.f0,
            r.lgd_final,
            r.eagd_final,
            &r.init_hash[..16]
        );
    }
    for &rank in &opts.ranks {
        let rows: Vec<_> = results.iter().filter(|r| r.rank == rank).collect();
        let wins = rows.iter().filter(|r| r.lgd_final < r.eagd_final).count();
        println!(
            "rank {rank}: lgd below eagd in {wins}/{} trials",
            rows.len()
        );
    }
    println!("wrote {}", opts.out.display());
    Ok(0)
}

fn sinc_demo(out: PathBuf, iterations: u64) -> Result<u8, BenchError> {
    let results = cmd_sinc_demo(&out, iterations)?;
    println!("method iterations converged best_L x y max_grad_norm");
    for r in &results {
        println!(
            "{} {} {} {} {} {} {}",
            r.method,
            r.iterations,
            r.converged,
            fmt_float(r.best_value),
            fmt_float(r.best_point[0]),
            fmt_float(r.best_point[1]),
            fmt_float(r.max_grad_norm)
        );
    }
    println!("elastic coefficient per worker: 0.43 / 4 = 0.1075");
    Ok(0)
}

fn run_spec(path: PathBuf) -> Result<u8, BenchError> {
    let text = std::fs::read_to_string(&path).map_err(|source| BenchError::Io {
        path: path.clone(),
        source,
    })?;
    let spec = ExperimentSpec::parse(&text)?;
    if spec.config.method == leadopt_core::sim::Method::Downpour {
        eprintln!("note: downpour is a minimal baseline (push gradients, pull parameters)");
    }
    for s in cmd_run(&spec)? {
        println!("{} trace={}", s.line(), s.trace_path.display());
    }
    Ok(0)
}

fn verify(filter: Option<String>, seed: u64) -> Result<u8, BenchError> {
    let reports = cmd_verify(filter.as_deref(), seed)?;
    println!("{REPORT_HEADER}");
    for r in &reports {
        println!("{}", r.csv_line());
    }
    let failed: Vec<_> = reports
        .iter()
        .filter(|r| r.status == Status::Fail)
        .collect();
    for r in &failed {
        eprintln!("FAILED {}: {}", r.name, r.note.as_deref().unwrap_or(""));
    }
    Ok(if failed.is_empty() {
        0
    } else {
        EXIT_CHECK_FAILED
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::McBench {
            d,
            ranks,
            trials,
            seed,
            steps,
            stride,
            desk,
            out,
        } => mc_bench(d, ranks, trials, seed, steps, stride, desk, out),
        Command::SincDemo { out, iterations } => sinc_demo(out, iterations),
        Command::Run { spec } => run_spec(spec),
        Command::Verify { filter, seed } => verify(filter, seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_for(&err))
        }
    }
}
