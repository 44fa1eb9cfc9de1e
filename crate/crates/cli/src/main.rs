use arenkit::arch_file::to_json_string;
use arenkit::pipeline::{
    self, bench_csv, run_arch, run_bench, run_verify, CheckStatus, PipelineError,
};
use arenkit_core::ordering::HyperplaneCounting;
use arenkit::spec_file::{parse_spec_str, ParsedSpec};
use arenkit::sweep::parse_sweep;
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_PARSE: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;
const EXIT_UNAVAILABLE: u8 = 4;
const EXIT_VERIFY_FAILED: u8 = 5;

#[derive(Parser)]
#[command(
    name = "arenkit",
    version,
    about = "Region-count estimation and assured ReLU architecture synthesis for linear MPC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the piece counts and emit a sufficient ReLU architecture.
    Arch {
        /// Problem instance (JSON spec file).
        #[arg(long)]
        spec: PathBuf,
        /// Output architecture file.
        #[arg(long)]
        out: PathBuf,
        /// Strict-feasibility margin override.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Wall-clock budget in seconds for the enumeration.
        #[arg(long)]
        budget: Option<f64>,
        /// Size the unique-order bound with one hyperplane per local
        /// function instead of one per pair (smaller, for comparison).
        #[arg(long)]
        uo_literal: bool,
    },
    /// Cross-check the bounds and the network construction against the
    /// brute-force explicit law (small instances only).
    Verify {
        #[arg(long)]
        spec: PathBuf,
        /// Number of feasible verification samples.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Seed for all sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep benchmark instances and write a CSV of counts and timings.
    Bench {
        /// Sweep descriptor, e.g. "n=2..100,Nc=2" (empty for no rows).
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        out: PathBuf,
        /// Parallel worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Per-row wall-clock budget in seconds.
        #[arg(long)]
        budget: Option<f64>,
    },
    /// Region-count estimate only.
    Count {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        budget: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ARENKIT_LOG")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Arch {
            spec,
            out,
            epsilon,
            budget,
            uo_literal,
        } => cmd_arch(&spec, &out, epsilon, budget, uo_literal),
        Command::Verify { spec, samples, seed } => cmd_verify(&spec, samples, seed),
        Command::Bench {
            sweep,
            out,
            workers,
            epsilon,
            budget,
        } => cmd_bench(&sweep, &out, workers, epsilon, budget),
        Command::Count { spec, epsilon, budget } => cmd_count(&spec, epsilon, budget),
    };
    ExitCode::from(code)
}

fn load_spec(path: &Path) -> Result<ParsedSpec, u8> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(EXIT_PARSE);
        }
    };
    parse_spec_str(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        if e.is_solver_error() {
            EXIT_SOLVER
        } else {
            EXIT_PARSE
        }
    })
}

fn solver_exit(e: &PipelineError) -> u8 {
    eprintln!("error: {e}");
    EXIT_SOLVER
}

fn cmd_arch(spec: &Path, out: &Path, epsilon: Option<f64>, budget: Option<f64>, uo_literal: bool) -> u8 {
    let parsed = match load_spec(spec) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let counting = if uo_literal {
        HyperplaneCounting::LocalFunctionCount
    } else {
        HyperplaneCounting::PairwiseEquality
    };
    let outcome = match pipeline::run_arch_with(&parsed, epsilon, budget, counting) {
        Ok(o) => o,
        Err(e) => return solver_exit(&e),
    };
    let text = to_json_string(&outcome.file);
    if let Err(e) = std::fs::write(out, &text) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return EXIT_SOLVER;
    }
    let md = &outcome.file.metadata;
    println!(
        "instance: n={} m={} l={} Nc={}  (omega={}, rho={})",
        md.n, md.m, md.l, md.nc, md.omega, md.rho
    );
    println!(
        "region count: n_est = {} ({}{})  2^rho = {}  ratio 2^rho/n_est = {:.3}",
        md.n_est,
        if md.exact_union { "exact union" } else { "sum bound" },
        if md.complete { "" } else { ", INCOMPLETE" },
        md.two_pow_rho,
        md.ratio_two_pow_rho_over_n_est
    );
    println!(
        "unique-order bound: m_est = {}  (pairwise hyperplanes in R^{})",
        md.m_est, md.n
    );
    println!(
        "architecture: {} layers, parameter count {}{}",
        outcome.file.layers.len(),
        md.parameter_count,
        if md.resource_warning { "  [resource warning]" } else { "" }
    );
    println!(
        "solver calls: {} LP, {} SAT; total {} ms; wrote {}",
        md.lp_calls,
        md.sat_calls,
        md.timing_ms.total,
        out.display()
    );
    if !md.complete {
        eprintln!("warning: budget exhausted; the written file is a partial result");
        return EXIT_TIMEOUT;
    }
    0
}

fn cmd_verify(spec: &Path, samples: usize, seed: u64) -> u8 {
    let parsed = match load_spec(spec) {
        Ok(p) => p,
        Err(code) => return code,
    };
    match pipeline::oracle_available(&parsed) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!(
                "verification unavailable: rho exceeds the brute-force oracle limit ({})",
                arenkit_core::oracle::ORACLE_LIMIT
            );
            return EXIT_UNAVAILABLE;
        }
        Err(e) => return solver_exit(&e),
    }
    let outcome = match run_verify(&parsed, samples, seed) {
        Ok(o) => o,
        Err(e) => return solver_exit(&e),
    };
    for check in &outcome.checks {
        let tag = match check.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        };
        println!("{tag} {}: {}", check.name, check.detail);
    }
    if outcome.all_passed() {
        println!(
            "verified: exact laws {} <= n_est {} <= 2^rho {}",
            outcome.exact_count, outcome.report.n_est, outcome.report.two_pow_rho
        );
        0
    } else {
        EXIT_VERIFY_FAILED
    }
}

fn cmd_bench(sweep: &str, out: &Path, workers: usize, epsilon: Option<f64>, budget: Option<f64>) -> u8 {
    let points = match parse_sweep(sweep) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: sweep descriptor: {e}");
            return EXIT_PARSE;
        }
    };
    let rows = run_bench(&points, epsilon, budget, workers);
    let csv = bench_csv(&rows);
    if let Err(e) = std::fs::write(out, csv) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return EXIT_SOLVER;
    }
    println!(
        "wrote {} rows ({} requested) to {}",
        rows.len(),
        points.len(),
        out.display()
    );
    0
}

fn cmd_count(spec: &Path, epsilon: Option<f64>, budget: Option<f64>) -> u8 {
    let parsed = match load_spec(spec) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let outcome = match run_arch(&parsed, epsilon, budget) {
        Ok(o) => o,
        Err(e) => return solver_exit(&e),
    };
    let r = &outcome.report;
    println!(
        "rho = {}, n_est = {} ({}{}), 2^rho = {}, ratio = {:.3}",
        outcome.qp.rho,
        r.n_est,
        if r.exact_union { "exact union" } else { "sum bound" },
        if r.complete { "" } else { ", INCOMPLETE" },
        r.two_pow_rho,
        outcome.file.metadata.ratio_two_pow_rho_over_n_est
    );
    println!(
        "maximal sets: {}; epsilon = {}; {} LP calls, {} SAT calls, {} ms",
        r.maximal_sets.len(),
        r.epsilon,
        r.lp_calls,
        r.sat_calls,
        r.wall_time.as_millis()
    );
    if !r.complete {
        return EXIT_TIMEOUT;
    }
    0
}
