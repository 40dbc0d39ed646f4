use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use safe_explore::checks::{all_pass, run_suite};
use safe_explore::experiment::{report_command, run_experiment, ExperimentConfig, OUTPUT_ROOT_VAR};
use safe_explore::gp::nstar::DEFAULT_LIMIT;
use safe_explore::gp::{
    sample_complexity_n_star, sample_complexity_n_star_monotone, BetaSchedule, ConstantReading, GammaSchedule,
    SampleComplexityInputs,
};
use safe_explore::Error;

const USAGE_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 1;

#[derive(Parser)]
#[command(
    name = "safe-explore",
    version,
    about = "Safe exploration experiments with GP dynamics models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config and write its artifacts.
    #[command(after_help = format!("Without --out or `output_dir`, results go to ${OUTPUT_ROOT_VAR}/<env>-<mode> (default root: runs)."))]
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seeds run in parallel on this many threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Summarize the runs in a directory into summary.csv.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Run a check suite and print one JSON object per check.
    Check {
        /// gp-oracle, calibration, lemmas, planner-props or all.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Smallest episode count satisfying the sample-complexity inequality.
    Nstar(NstarArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Reading {
    Theorem,
    Appendix,
}

#[derive(clap::Args)]
struct NstarArgs {
    #[arg(long)]
    eps: f64,
    /// Number of safe-set expansions.
    #[arg(long = "H")]
    expansions: u64,
    /// Episode horizon.
    #[arg(long = "T")]
    horizon: u64,
    #[arg(long, default_value_t = 1.0)]
    cost_max: f64,
    #[arg(long, default_value_t = 1.0)]
    reward_max: f64,
    #[arg(long, default_value_t = 1.0)]
    signal_std: f64,
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    #[arg(long, default_value_t = 1)]
    state_dim: u64,
    #[arg(long, value_enum, default_value_t = Reading::Theorem)]
    reading: Reading,
    /// Use this value of C instead of computing it.
    #[arg(long)]
    constant: Option<f64>,
    /// Constant confidence scale β.
    #[arg(long, default_value_t = 2.0)]
    beta: f64,
    /// γ_n = gamma_scale · ln(1 + n)^gamma_power.
    #[arg(long, default_value_t = 1.0)]
    gamma_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma_power: f64,
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    limit: u64,
    /// Use the bisection search, valid for nondecreasing ratios.
    #[arg(long)]
    monotone: bool,
}

fn is_usage_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. } | Error::Config(_) | Error::InvalidInput(_) | Error::Dimension { .. }
    )
}

fn fail(e: &Error, usage: bool) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if usage { USAGE_ERROR } else { RUNTIME_ERROR })
}

fn run(config: PathBuf, out: Option<PathBuf>, jobs: usize) -> ExitCode {
    let cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}:", config.display());
            return fail(&e, true);
        }
    };
    let dir = cfg.output_path(out.as_deref());
    match run_experiment(&cfg, &dir, jobs.max(1)) {
        Ok(outcome) => {
            println!("wrote {} rows to {}", outcome.rows, outcome.dir.display());
            if outcome.succeeded() {
                ExitCode::SUCCESS
            } else {
                for f in &outcome.failures {
                    eprintln!("seed {}: {}", f.seed, f.message);
                }
                ExitCode::from(RUNTIME_ERROR)
            }
        }
        Err(e) => fail(&e, false),
    }
}

fn report(dir: PathBuf) -> ExitCode {
    match report_command(&dir) {
        Ok(r) => {
            print!("{}", r.render());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, false),
    }
}

fn check(suite: &str, seed: u64) -> ExitCode {
    match run_suite(suite, seed) {
        Ok(reports) => {
            for r in &reports {
                println!("{}", serde_json::to_string(r).expect("reports serialize"));
            }
            if all_pass(&reports) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(RUNTIME_ERROR)
            }
        }
        Err(e) => fail(&e, is_usage_error(&e)),
    }
}

fn nstar(a: NstarArgs) -> ExitCode {
    let inputs = SampleComplexityInputs {
        expansions: a.expansions,
        horizon: a.horizon,
        cost_max: a.cost_max,
        reward_max: a.reward_max,
        signal_std: a.signal_std,
        noise_std: a.noise_std,
        state_dim: a.state_dim,
        epsilon: a.eps,
        reading: match a.reading {
            Reading::Theorem => ConstantReading::Theorem,
            Reading::Appendix => ConstantReading::Appendix,
        },
        constant_override: a.constant,
    };
    let beta = BetaSchedule::Constant { value: a.beta };
    let gamma = GammaSchedule::Logarithmic {
        scale: a.gamma_scale,
        power: a.gamma_power,
    };
    let b = |n: u64| beta.value(n, 0.1);
    let g = |n: u64| gamma.value(n);
    let found = if a.monotone {
        sample_complexity_n_star_monotone(&inputs, &b, &g, a.limit)
    } else {
        sample_complexity_n_star(&inputs, &b, &g, a.limit)
    };
    match found {
        Ok(n) => {
            let line = serde_json::json!({
                "n_star": n,
                "threshold": inputs.threshold(),
                "constant": inputs.constant(),
            });
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, is_usage_error(&e)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, jobs } => run(config, out, jobs),
        Command::Report { dir } => report(dir),
        Command::Check { suite, seed } => check(&suite, seed),
        Command::Nstar(args) => nstar(args),
    }
}
