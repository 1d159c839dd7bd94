//! The `bct` command line.
//!
//! Exit codes: 0 success, 1 invalid configuration or I/O failure, 2 malformed
//! input data, 3 non-ergodic chain under `--require-ergodic`, 4 failed hard
//! assertion in `verify`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bct_core::chain_sim::{ergodicity, generate, ChainSpec, ChainSpecDocument};
use bct_core::ctw::{ctw_mix_log, map_tree, model_posterior_log};
use bct_core::inference::{full_conditional, posterior_moments};
use bct_core::seed::replicate_rng;
use bct_core::theory::SuiteThresholds;
use bct_core::verify::{self, VerifyConfig};
use bct_core::{Alphabet, BctError, CountTrie, CtwState, SymbolSequence};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub mod format;

use format::{float, parse_symbols, to_document, write_symbols};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    NotErgodic(String),
    #[error("{0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Parse { .. } | CliError::Data(_) => 2,
            CliError::NotErgodic(_) => 3,
            CliError::VerifyFailed(_) => 4,
        }
    }
}

impl From<BctError> for CliError {
    fn from(e: BctError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "bct",
    version,
    about = "Bayesian context trees for discrete time series"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Find the MAP context tree, its posterior probability and the leaf
    /// parameter posteriors.
    Fit(ModelArgs),
    /// Write the posterior predictive before every symbol as CSV.
    Predict(ModelArgs),
    /// Sequential log-loss summary.
    Eval(ModelArgs),
    /// Simulate a chain described by a JSON spec.
    Simulate(SimulateArgs),
    /// Run the self-checks.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    /// Symbol file: whitespace-separated integers in 0..m.
    pub input: PathBuf,
    #[arg(short = 'm', long = "alphabet-size", default_value_t = 2)]
    pub alphabet_size: usize,
    /// Maximum context depth D.
    #[arg(short = 'D', long = "depth")]
    pub depth: usize,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// `peel` takes the first D symbols of the file as the initial context;
    /// anything else is read as the D symbols preceding the file, oldest
    /// first, separated by spaces or commas.
    #[arg(long, default_value = "peel")]
    pub context: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Chain spec document.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(short = 'n', long = "length")]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Initial context, oldest first; defaults to D zeros.
    #[arg(long)]
    pub context: Option<String>,
    #[arg(long)]
    pub require_ergodic: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smaller sweeps, no simulation suites.
    #[arg(long)]
    pub quick: bool,
    /// Misread beta as 1 - beta inside the mixture to demonstrate a failure.
    #[arg(long)]
    pub inject_bug: bool,
    /// Suite threshold override, `key=value`; keys are recovery,
    /// posterior_mass and deviation.
    #[arg(long = "threshold")]
    pub thresholds: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{e}")
            } else {
                write!(stderr, "{e}")
            };
            return code;
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Applies `BCT_THREADS` to the global thread pool.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("BCT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| {
            CliError::Config(format!(
                "BCT_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    // A pool may already exist when running inside tests; that is fine.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn dispatch(
    command: Command,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    configure_threads()?;
    match command {
        Command::Fit(args) => cmd_fit(&args, stdout, stderr),
        Command::Predict(args) => cmd_predict(&args, stdout),
        Command::Eval(args) => cmd_eval(&args, stdout),
        Command::Simulate(args) => cmd_simulate(&args, stdout),
        Command::Verify(args) => cmd_verify(&args, stdout, stderr),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Config(format!("cannot write output: {e}"))),
    }
}

/// An explicit context: digits, or symbols separated by spaces or commas.
fn parse_context(text: &str, m: usize) -> Result<Vec<usize>, CliError> {
    let tokens: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect();
    let tokens: Vec<String> = if tokens.len() == 1 && m <= 10 {
        tokens[0].chars().map(String::from).collect()
    } else {
        tokens.into_iter().map(String::from).collect()
    };
    tokens
        .iter()
        .map(|t| match t.parse::<usize>() {
            Ok(s) if s < m => Ok(s),
            _ => Err(CliError::Config(format!(
                "context symbol {t:?} is not in 0..{m}"
            ))),
        })
        .collect()
}

/// Validated model configuration plus the input sequence.
fn load(args: &ModelArgs) -> Result<SymbolSequence, CliError> {
    let alphabet = Alphabet::new(args.alphabet_size)?;
    if !(args.beta > 0.0 && args.beta < 1.0) {
        return Err(CliError::Config(format!(
            "beta must lie in (0, 1), got {}",
            args.beta
        )));
    }
    let explicit = match args.context.as_str() {
        "peel" => None,
        text => {
            let context = parse_context(text, args.alphabet_size)?;
            if context.len() != args.depth {
                return Err(CliError::Config(format!(
                    "--context has {} symbols but the depth is {}",
                    context.len(),
                    args.depth
                )));
            }
            Some(context)
        }
    };
    let text = read_text(&args.input)?;
    let symbols = parse_symbols(&args.input.display().to_string(), &text, args.alphabet_size)?;
    match explicit {
        Some(context) => Ok(SymbolSequence::new(alphabet, context, symbols)?),
        None => {
            if symbols.len() < args.depth {
                return Err(CliError::Data(format!(
                    "{} holds {} symbols, fewer than the {} needed for the initial context",
                    args.input.display(),
                    symbols.len(),
                    args.depth
                )));
            }
            Ok(SymbolSequence::peel(alphabet, symbols, args.depth)?)
        }
    }
}

#[derive(Serialize)]
struct LeafReport {
    context: String,
    counts: Vec<u64>,
    dirichlet: Vec<f64>,
    posterior_mean: Vec<f64>,
    posterior_variance: Vec<f64>,
}

#[derive(Serialize)]
struct FitReport {
    n: usize,
    alphabet_size: usize,
    depth: usize,
    beta: f64,
    map_tree: String,
    leaves: usize,
    log_posterior: f64,
    posterior: f64,
    log_prior_predictive: f64,
    leaf_posteriors: Vec<LeafReport>,
}

fn cmd_fit(
    args: &ModelArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let start = Instant::now();
    let seq = load(args)?;
    let trie = CountTrie::build(&seq);
    let map = map_tree(&trie, args.beta, args.depth)?;
    let log_posterior = model_posterior_log(&map.tree, &trie, args.beta)?;
    let post = full_conditional(&trie, &map.tree)?;
    let moments = posterior_moments(&post);
    let leaf_posteriors = map
        .tree
        .leaves()
        .iter()
        .enumerate()
        .map(|(i, s)| LeafReport {
            context: s.to_string(),
            counts: trie.counts_for(s),
            dirichlet: post.alphas[i].clone(),
            posterior_mean: moments.mean.row(i).to_vec(),
            posterior_variance: moments.variance[i].clone(),
        })
        .collect();
    let report = FitReport {
        n: seq.len(),
        alphabet_size: args.alphabet_size,
        depth: args.depth,
        beta: args.beta,
        map_tree: map.tree.to_canonical(),
        leaves: map.tree.leaf_count(),
        log_posterior,
        posterior: log_posterior.exp(),
        log_prior_predictive: ctw_mix_log(&trie, args.beta)?,
        leaf_posteriors,
    };
    emit(&args.out, &to_document(&report), stdout)?;
    let _ = writeln!(
        stderr,
        "fit: n={} D={} contexts={} wall={:.3}s",
        seq.len(),
        args.depth,
        trie.node_count(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn cmd_predict(args: &ModelArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let seq = load(args)?;
    let m = args.alphabet_size;
    let mut state = CtwState::new(m, args.depth, args.beta, seq.context())?;
    let mut csv = String::from("t,symbol");
    for j in 0..m {
        csv.push_str(&format!(",p{j}"));
    }
    csv.push_str(",log_loss\n");
    for (t, &s) in seq.body().iter().enumerate() {
        let p = state.predictive();
        let loss = -state.update(s)?;
        csv.push_str(&format!("{},{s}", t + 1));
        for q in p {
            csv.push(',');
            csv.push_str(&float(q));
        }
        csv.push(',');
        csv.push_str(&float(loss));
        csv.push('\n');
    }
    emit(&args.out, &csv, stdout)
}

#[derive(Serialize)]
struct EvalReport {
    n: usize,
    alphabet_size: usize,
    depth: usize,
    beta: f64,
    total_log_loss: f64,
    log_loss_per_symbol: f64,
    bits_per_symbol: f64,
    batch_log_prior_predictive: f64,
    telescoping_gap: f64,
    contexts: usize,
}

fn cmd_eval(args: &ModelArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let seq = load(args)?;
    let mut state = CtwState::new(args.alphabet_size, args.depth, args.beta, seq.context())?;
    for &s in seq.body() {
        state.update(s)?;
    }
    let total = -state.log_prob();
    let batch = ctw_mix_log(state.trie(), args.beta)?;
    let n = seq.len();
    let per_symbol = if n > 0 { total / n as f64 } else { 0.0 };
    let report = EvalReport {
        n,
        alphabet_size: args.alphabet_size,
        depth: args.depth,
        beta: args.beta,
        total_log_loss: total,
        log_loss_per_symbol: per_symbol,
        bits_per_symbol: per_symbol / std::f64::consts::LN_2,
        batch_log_prior_predictive: batch,
        telescoping_gap: (total + batch).abs(),
        contexts: state.trie().node_count(),
    };
    emit(&args.out, &to_document(&report), stdout)
}

fn cmd_simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let path = args.spec.display().to_string();
    let text = read_text(&args.spec)?;
    let doc: ChainSpecDocument = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.clone(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let spec =
        ChainSpec::from_document(&doc).map_err(|e| CliError::Data(format!("{path}: {e}")))?;
    if args.require_ergodic {
        let erg = ergodicity(&spec)?;
        if !erg.is_ergodic() {
            return Err(CliError::NotErgodic(format!(
                "{path}: lifted chain has {} closed classes and period {}",
                erg.closed_classes, erg.period
            )));
        }
    }
    let m = spec.alphabet_size();
    let context = match &args.context {
        Some(text) => parse_context(text, m)?,
        None => vec![0; spec.depth()],
    };
    if context.len() < spec.depth() {
        return Err(CliError::Config(format!(
            "--context has {} symbols, the chain needs {}",
            context.len(),
            spec.depth()
        )));
    }
    let seq = generate(&spec, args.n, &context, &mut replicate_rng(args.seed, 0))?;
    emit(&args.out, &write_symbols(seq.all_symbols()), stdout)
}

fn cmd_verify(
    args: &VerifyArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), CliError> {
    let mut thresholds = SuiteThresholds::default();
    for t in &args.thresholds {
        thresholds.set(t)?;
    }
    let report = verify::run(&VerifyConfig {
        seed: args.seed,
        quick: args.quick,
        inject_beta_flip: args.inject_bug,
        thresholds,
    });
    emit(&args.out, &to_document(&report), stdout)?;
    for item in &report.items {
        let _ = writeln!(
            stderr,
            "{} {:<34} {}",
            if item.passed { "PASS" } else { "FAIL" },
            item.name,
            item.detail
        );
    }
    let failures: Vec<String> = report
        .hard_failures()
        .map(|i| format!("{}: {}", i.name, i.witness.as_deref().unwrap_or(&i.detail)))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::VerifyFailed(format!(
            "hard assertion failed\n{}",
            failures.join("\n")
        )))
    }
}
