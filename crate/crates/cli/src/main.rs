use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use linkforge_cli::commands::{self, EvalArgs, TrainArgs};
use linkforge_cli::error::{CliError, Result};
use linkforge_core::ScenarioSet;
use linkforge_train::Method;

/// Preference-driven link strategy selection: simulate, train, evaluate and
/// query.
#[derive(Parser)]
#[command(name = "linkforge", version)]
struct Cli {
    /// TOML file of `[[scenario]]` profiles replacing the built-in Urban,
    /// Rural and Highway set.
    #[arg(long, global = true, value_name = "FILE")]
    scenarios: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a stratified dataset of decision states (one TSV line each).
    GenData {
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
        /// Dataset seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Collect greedy-expert decisions, then run behavior cloning and
    /// policy-gradient fine-tuning.
    ///
    /// The metrics log has one line per update with the columns
    /// step, stage, L_BC, L_pref, J, mean_reward, pref_acc, lambda.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training config (TOML); defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's seed (default 0).
        #[arg(long)]
        seed: Option<u64>,
        /// Metrics log path [default: <out>.log.tsv].
        #[arg(long)]
        log: Option<PathBuf>,
        /// Also save `<out>.step<N>` every N updates; 0 disables.
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
    },
    /// Score selection methods on every state and write a CSV table.
    Eval {
        #[arg(long)]
        ckpt: Option<PathBuf>,
        /// Comma-separated subset of random, greedy, beam3, policy.
        #[arg(long, value_delimiter = ',', default_value = "random,greedy,beam3,policy")]
        methods: Vec<Method>,
        #[arg(long)]
        out: PathBuf,
        /// States to evaluate [default: the full scenario x SNR x class grid].
        #[arg(long)]
        data: Option<PathBuf>,
        /// Seed of the evaluation grid's channels and intents.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte-Carlo seeds per reported row.
        #[arg(long, default_value_t = 100)]
        report_seeds: usize,
        /// Record per-decision wall time (makes the output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Median per-decision latency of each method on identical states.
    Bench {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 50)]
        reps: usize,
        /// Seed of the benchmark states.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Read `<scenario> <snr_db> <intent text>` lines and explain the
    /// policy's choice; `quit` exits.
    Interact {
        #[arg(long)]
        ckpt: PathBuf,
        /// Channel seed for the queried states.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the strategy catalog with costs and its fingerprint.
    Catalog,
    /// Export templated intents as `class<TAB>scenario<TAB>text` lines.
    Corpus {
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("LINKFORGE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("LINKFORGE_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let scenarios = match &cli.scenarios {
        Some(p) => ScenarioSet::from_file(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => ScenarioSet::default(),
    };
    match cli.command {
        Command::GenData { samples, out, seed } => commands::gen_data(&scenarios, samples, &out, seed),
        Command::Train {
            data,
            out,
            config,
            seed,
            log,
            checkpoint_every,
        } => {
            let mut config = commands::load_config(config.as_deref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let log = log.unwrap_or_else(|| PathBuf::from(format!("{}.log.tsv", out.display())));
            commands::run_train(
                &scenarios,
                TrainArgs {
                    data: &data,
                    out: &out,
                    config,
                    log,
                    checkpoint_every,
                },
            )
        }
        Command::Eval {
            ckpt,
            methods,
            out,
            data,
            seed,
            report_seeds,
            timing,
        } => {
            if report_seeds == 0 {
                return Err(CliError::Config("--report-seeds must be >= 1".into()));
            }
            commands::run_eval(
                &scenarios,
                EvalArgs {
                    ckpt: ckpt.as_deref(),
                    methods,
                    out: &out,
                    data: data.as_deref(),
                    seed,
                    report_seeds,
                    timing,
                },
            )
        }
        Command::Bench { ckpt, reps, seed } => {
            if reps == 0 {
                return Err(CliError::Config("--reps must be >= 1".into()));
            }
            let policy = commands::load_policy(&ckpt)?;
            let rows = commands::bench(&scenarios, &policy, reps, seed)?;
            commands::print_bench(&rows, &mut std::io::stdout()).map_err(|e| CliError::Data(e.to_string()))
        }
        Command::Interact { ckpt, seed } => {
            let policy = commands::load_policy(&ckpt)?;
            commands::interact(&scenarios, &policy, seed)
        }
        Command::Catalog => commands::catalog(&mut std::io::stdout()).map_err(|e| CliError::Data(e.to_string())),
        Command::Corpus { n, seed, out } => commands::corpus(&scenarios, n, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
