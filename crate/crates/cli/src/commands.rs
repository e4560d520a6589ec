use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use linkforge_core::action::{catalog_fingerprint, catalog_manifest, Module};
use linkforge_core::intent::{export_corpus, generate_corpus, tokenize};
use linkforge_core::search::evaluate_config;
use linkforge_core::{csi_features, generate_channel, pref_to_weights, ScenarioSet, SearchBudget};
use linkforge_policy::{Policy, PolicyInput, PolicyOutput};
use linkforge_train::eval::{decide, eval_grid, median};
use linkforge_train::{collect_expert, evaluate, generate_dataset, train, EvalOptions, LogRecord, Method, TrainConfig};

use crate::error::{CliError, Result};
use crate::formats::{parse_dataset, write_dataset, write_eval_csv};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn load_policy(path: &Path) -> Result<Policy> {
    Policy::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn gen_data(scenarios: &ScenarioSet, samples: usize, out: &Path, seed: u64) -> Result<()> {
    let data = generate_dataset(samples, scenarios, seed)?;
    let mut w = create(out)?;
    write_dataset(&data, &mut w).map_err(|e| CliError::io(out, e))?;
    w.flush().map_err(|e| CliError::io(out, e))
}

pub fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::from_toml_str(&read_text(p)?)
            .map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
        None => Ok(TrainConfig::default()),
    }
}

pub struct TrainArgs<'a> {
    pub data: &'a Path,
    pub out: &'a Path,
    pub config: TrainConfig,
    pub log: PathBuf,
    pub checkpoint_every: usize,
}

pub fn run_train(scenarios: &ScenarioSet, args: TrainArgs<'_>) -> Result<()> {
    let records = parse_dataset(&read_text(args.data)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.data.display())))?;
    if records.is_empty() {
        return Err(CliError::Data(format!("{}: no records", args.data.display())));
    }
    args.config.validate()?;
    eprintln!("collecting expert decisions for {} states", records.len());
    let buffer = collect_expert(&records, scenarios, &args.config.expert_budget)?;

    let mut log = create(&args.log)?;
    let mut io_error = None;
    let every = args.checkpoint_every;
    let out = args.out.to_path_buf();
    let outcome = train(&args.config, &buffer, scenarios, &mut |policy, rec: &LogRecord| {
        if io_error.is_some() {
            return;
        }
        if let Err(e) = writeln!(log, "{}", rec.to_tsv()) {
            io_error = Some(CliError::io(&args.log, e));
        }
        if every > 0 && (rec.step + 1) % every == 0 {
            let path = PathBuf::from(format!("{}.step{}", out.display(), rec.step + 1));
            if let Err(e) = policy.save(&path) {
                io_error = Some(CliError::Data(format!("{}: {e}", path.display())));
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    log.flush().map_err(|e| CliError::io(&args.log, e))?;
    outcome
        .policy
        .save(args.out)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    if let Some(last) = outcome.log.last() {
        eprintln!(
            "trained {} steps; last L_BC {:.4}, L_pref {:.4}, pref_acc {:.3}",
            outcome.log.len(),
            last.bc_loss,
            last.pref_loss,
            last.pref_acc
        );
    }
    Ok(())
}

pub struct EvalArgs<'a> {
    pub ckpt: Option<&'a Path>,
    pub methods: Vec<Method>,
    pub out: &'a Path,
    pub data: Option<&'a Path>,
    pub seed: u64,
    pub report_seeds: usize,
    pub timing: bool,
}

pub fn run_eval(scenarios: &ScenarioSet, args: EvalArgs<'_>) -> Result<()> {
    let policy = match args.ckpt {
        Some(p) => Some(load_policy(p)?),
        None if args.methods.contains(&Method::Policy) => {
            return Err(CliError::Config("method `policy` needs --ckpt".into()))
        }
        None => None,
    };
    let records = match args.data {
        Some(p) => parse_dataset(&read_text(p)?).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        None => eval_grid(scenarios, args.seed)?,
    };
    let mut opts = EvalOptions {
        timing: args.timing,
        ..EvalOptions::default()
    };
    opts.report_budget.mc_seeds = args.report_seeds;
    let rows = evaluate(&records, &args.methods, policy.as_ref(), scenarios, &opts)?;
    let mut w = create(args.out)?;
    write_eval_csv(&rows, &mut w).map_err(|e| CliError::Data(format!("{}: {e}", args.out.display())))?;
    w.flush().map_err(|e| CliError::io(args.out, e))?;
    for m in &args.methods {
        let rs: Vec<f64> = rows.iter().filter(|r| r.method == *m).map(|r| r.reward).collect();
        eprintln!("{m:>7}: mean reward {:.4} over {} states", rs.iter().sum::<f64>() / rs.len().max(1) as f64, rs.len());
    }
    Ok(())
}

/// Median decision time per method over the same sequence of states.
pub struct BenchRow {
    pub method: Method,
    pub median_s: f64,
}

pub fn bench(scenarios: &ScenarioSet, policy: &Policy, reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let states = eval_grid(scenarios, seed)?;
    let budget = SearchBudget::default();
    let mut rows = Vec::new();
    for method in [Method::Random, Method::Policy, Method::Greedy, Method::Beam3] {
        let mut times = Vec::with_capacity(reps);
        for r in 0..reps {
            // Stride through the grid so that every method sees the same
            // spread of scenarios, SNRs and classes.
            let state = &states[(r * 37) % states.len()];
            let start = Instant::now();
            let config = decide(method, state, scenarios, Some(policy), &budget)?;
            times.push(start.elapsed().as_secs_f64());
            std::hint::black_box(config);
        }
        rows.push(BenchRow {
            method,
            median_s: median(&mut times),
        });
    }
    Ok(rows)
}

pub fn print_bench(rows: &[BenchRow], w: &mut impl Write) -> std::io::Result<()> {
    let policy = rows.iter().find(|r| r.method == Method::Policy).map(|r| r.median_s);
    writeln!(w, "{:<8} {:>14} {:>12}", "method", "median_s", "x_policy")?;
    for r in rows {
        let ratio = policy.map_or(f64::NAN, |p| r.median_s / p);
        writeln!(w, "{:<8} {:>14.6e} {:>12.2}", r.method.label(), r.median_s, ratio)?;
    }
    Ok(())
}

fn rationale(out: &PolicyOutput) -> &'static str {
    let p = out.p_hat.as_array();
    if (p[0] - p[1]).abs() < 0.1 && (p[1] - p[2]).abs() < 0.1 {
        return "No axis dominates, so the strategy balances error rate, throughput and processing cost.";
    }
    match out.p_hat.dominant_axis() {
        0 => "Reliability dominates: strong coding, spreading and robust modulation trade rate for a low error rate.",
        1 => "Throughput dominates: light coding and dense modulation maximize delivered bits per channel use.",
        _ => "Complexity dominates: the cheapest receiver options are preferred where performance allows.",
    }
}

/// Handles one REPL line; `Ok(false)` means quit.
pub fn interact_line(
    line: &str,
    scenarios: &ScenarioSet,
    policy: &Policy,
    seed: u64,
    out: &mut impl Write,
) -> std::io::Result<bool> {
    let line = line.trim();
    if line.is_empty() {
        return Ok(true);
    }
    if line.eq_ignore_ascii_case("quit") || line.eq_ignore_ascii_case("exit") {
        return Ok(false);
    }
    let mut parts = line.splitn(3, char::is_whitespace);
    let (Some(scenario), Some(snr), Some(text)) = (parts.next(), parts.next(), parts.next()) else {
        writeln!(out, "usage: <scenario> <snr_db> <intent text>   (or `quit`)")?;
        return Ok(true);
    };
    let sc = match scenarios.get(scenario) {
        Ok(s) => s,
        Err(_) => {
            writeln!(out, "unknown scenario `{scenario}`; choose one of: {}", scenarios.names().join(", "))?;
            return Ok(true);
        }
    };
    let ch = match snr.parse::<f64>().map_err(|e| e.to_string()).and_then(|s| {
        generate_channel(sc, s, seed).map_err(|e| e.to_string())
    }) {
        Ok(ch) => ch,
        Err(e) => {
            writeln!(out, "bad SNR `{snr}`: {e}")?;
            return Ok(true);
        }
    };
    let input = PolicyInput {
        csi: csi_features(&ch),
        tokens: tokenize(text),
    };
    let res = match policy.infer_one(&input) {
        Ok(r) => r,
        Err(e) => {
            writeln!(out, "inference failed: {e}")?;
            return Ok(true);
        }
    };
    let p = res.p_hat.as_array();
    let class = res.predicted_class();
    writeln!(
        out,
        "preference: reliability {:.3}  throughput {:.3}  complexity {:.3}  -> {} ({:.3})",
        p[0],
        p[1],
        p[2],
        class,
        res.class_probs[class.index()]
    )?;
    let config = res.greedy_action();
    writeln!(out, "strategy:")?;
    for (m, label) in Module::ALL.iter().zip(config.labels()) {
        writeln!(out, "  {:<13} {}", m.name(), label)?;
    }
    let budget = SearchBudget {
        mc_seeds: 20,
        eval_seed_base: 0,
        payload_bits: 256,
    };
    match evaluate_config(&config, &ch, &pref_to_weights(&res.p_hat), &budget) {
        Ok(ev) => writeln!(
            out,
            "predicted: BER {:.3e}  goodput {:.3}  complexity {}  reward {:.3}",
            ev.ber, ev.goodput, ev.complexity, ev.reward
        )?,
        Err(e) => writeln!(out, "predicted: simulation failed: {e}")?,
    }
    writeln!(out, "rationale: {}", rationale(&res))?;
    Ok(true)
}

pub fn interact(scenarios: &ScenarioSet, policy: &Policy, seed: u64) -> Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let io = |e: std::io::Error| CliError::Data(format!("terminal: {e}"));
    eprint!("> ");
    for line in stdin.lock().lines() {
        let line = line.map_err(io)?;
        if !interact_line(&line, scenarios, policy, seed, &mut out).map_err(io)? {
            break;
        }
        out.flush().map_err(io)?;
        eprint!("> ");
    }
    Ok(())
}

pub fn catalog(w: &mut impl Write) -> std::io::Result<()> {
    write!(w, "{}", catalog_manifest())?;
    writeln!(w, "fingerprint\t{:016x}", catalog_fingerprint())
}

pub fn corpus(scenarios: &ScenarioSet, n: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let names = scenarios.names();
    let text = export_corpus(&generate_corpus(n, &names, seed));
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}
