use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abrsim::consolidation::AlgorithmId;
use abrsim::metrics::{
    brm_frm_ratio, DEFAULT_CONVERGENCE_TOL, DEFAULT_NOISE_EPS, DEFAULT_NOISE_WINDOW_S,
};
use abrsim::output::run_and_emit;
use abrsim::{check, load_scenario};

#[derive(Parser)]
#[command(
    name = "abrsim",
    version,
    about = "ABR point-to-multipoint flow control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write CSV traces.
    Run {
        scenario: PathBuf,
        /// Consolidation algorithm, overriding the scenario (A1..A7).
        #[arg(long = "alg")]
        algorithm: Option<AlgorithmId>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Simulated time in seconds.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay random branch-point input sequences through both the
    /// consolidation module and the reference interpreter.
    Check {
        #[arg(long, default_value_t = 10_000)]
        cases: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            algorithm,
            alpha,
            horizon,
            out,
        } => run(scenario, algorithm, alpha, horizon, out),
        Command::Check { cases, seed } => check_cmd(cases, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(
    path: PathBuf,
    algorithm: Option<AlgorithmId>,
    alpha: Option<f64>,
    horizon: Option<f64>,
    out: PathBuf,
) -> Result<(), Box<dyn std::error::Error>> {
    let mut scenario = load_scenario(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(a) = algorithm {
        scenario.set_algorithm(a);
    }
    if let Some(a) = alpha {
        scenario.set_alpha(a)?;
    }
    if let Some(h) = horizon {
        scenario.set_horizon(h)?;
    }
    let (bundle, files) = run_and_emit(&scenario, &out)?;

    println!(
        "{} {} horizon={}s events={}",
        bundle.scenario, scenario.algorithm, bundle.horizon_s, bundle.events_processed
    );
    for src in bundle.sources.iter().filter(|s| s.abr) {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let ratio = bundle
            .rm_counts
            .get(&src.vc)
            .and_then(brm_frm_ratio)
            .map(|r| r.at_root);
        println!(
            "{}: final_acr={} fair={} noise={} convergence_s={} brm_frm={}",
            src.name,
            fmt(src.acr.last().map(|s| s.1)),
            fmt(src.reference_rate),
            fmt(bundle.noise(&src.name, DEFAULT_NOISE_EPS, DEFAULT_NOISE_WINDOW_S)),
            fmt(bundle.convergence(&src.name, DEFAULT_CONVERGENCE_TOL)),
            fmt(ratio),
        );
    }
    println!("max_queue_cells={}", bundle.max_queue());
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn check_cmd(cases: u64, seed: u64) -> Result<(), Box<dyn std::error::Error>> {
    let report = check::random_equivalence(cases, seed);
    println!(
        "{} sequences, {} events, {} mismatches",
        report.sequences, report.events, report.mismatch_count
    );
    if let Some(m) = report.mismatches.first() {
        return Err(format!("first mismatch: {m}").into());
    }
    Ok(())
}
