use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use guidec::corpus_file::{build_corpus, corpus_from_toml};
use guidec::csv_out::rows_to_csv;
use guidec::model_file::{model_from_json, model_to_json};
use guidec::report_json::report_to_json;
use guidec::runner::sweep_parallel;
use guidec::scenario_file::{resolve, scenario_from_toml, ScenarioFile};
use guidec::trace_json::trace_to_json;
use guidec_core::episode::Decoder;
use guidec_core::model::{LanguageModel, TabularLm};
use guidec_core::verify::{run_suite, Suite, VerifyConfig};

/// Guided decoding over symbolic vocabularies: decode episodes, sweep
/// hyperparameters, train tabular models, and verify the engine against
/// its independent oracles.
#[derive(Parser)]
#[command(name = "guidec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decode one episode and write its trace as JSON.
    Decode {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Episode seed; defaults to the scenario's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep one hyperparameter and write a metrics row per value as CSV.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Hyperparameter name: lambda, temperature, or sigma.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite and write a pass/fail report as JSON.
    Verify {
        /// One of: theorems, identities, valuation.
        #[arg(long)]
        suite: String,
        /// Instances per certified policy family.
        #[arg(long)]
        trials: Option<usize>,
        /// Largest random vocabulary size.
        #[arg(long)]
        vocab_max: Option<usize>,
        /// Override for the closed-form-vs-oracle L-inf tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a tabular model from a corpus and write it as JSON.
    Train {
        /// Corpus TOML file.
        #[arg(long)]
        corpus: PathBuf,
        /// Markov order (context length), at most 3.
        #[arg(long)]
        order: usize,
        /// Add-alpha smoothing constant.
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INPUT_ERROR: u8 = 2;

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_INPUT_ERROR)
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Decode {
            scenario,
            seed,
            out,
        } => decode(&scenario, seed, out.as_deref()),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
        } => sweep_cmd(&scenario, &param, &values, out.as_deref()),
        Command::Verify {
            suite,
            trials,
            vocab_max,
            tol,
            out,
        } => verify_cmd(&suite, trials, vocab_max, tol, out.as_deref()),
        Command::Train {
            corpus,
            order,
            alpha,
            out,
        } => train_cmd(&corpus, order, alpha, &out),
    }
}

fn load_scenario(path: &Path) -> Result<(TabularLm, ScenarioFile)> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
    let file = scenario_from_toml(&text)?;
    let model_path = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&file.model);
    let model_text = fs::read_to_string(&model_path)
        .with_context(|| format!("reading model {}", model_path.display()))?;
    let model = model_from_json(&model_text)?;
    Ok((model, file))
}

fn write_or_print(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn decode(scenario_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<ExitCode> {
    let (model, file) = load_scenario(scenario_path)?;
    let scenario = resolve(&file, model.vocab())?;
    let seed = seed.unwrap_or(scenario.seed);
    let decoder = Decoder::new(&model, &scenario)?;
    let trace = decoder.run(seed)?;
    let json = trace_to_json(model.vocab(), &trace);
    write_or_print(out, &json)?;
    let sequence: Vec<&str> = trace
        .generated()
        .iter()
        .map(|&id| model.vocab().token(id))
        .collect();
    eprintln!(
        "decoded {} step(s), reward {}: {}",
        trace.horizon(),
        trace.terminal_reward(),
        sequence.join(" ")
    );
    Ok(ExitCode::SUCCESS)
}

fn sweep_cmd(
    scenario_path: &Path,
    param: &str,
    values: &[f64],
    out: Option<&Path>,
) -> Result<ExitCode> {
    let (model, file) = load_scenario(scenario_path)?;
    let scenario = resolve(&file, model.vocab())?;
    let rows = sweep_parallel(&model, &scenario, param, values)?;
    write_or_print(out, &rows_to_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn verify_cmd(
    suite_name: &str,
    trials: Option<usize>,
    vocab_max: Option<usize>,
    tol: Option<f64>,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let suite = Suite::from_name(suite_name).with_context(|| {
        format!("unknown suite {suite_name:?}; use theorems, identities, or valuation")
    })?;
    let mut config = VerifyConfig::default();
    if let Some(trials) = trials {
        config.trials = trials;
    }
    if let Some(vocab_max) = vocab_max {
        config.vocab_max = vocab_max.clamp(2, 64);
    }
    if let Some(tol) = tol {
        config.tol_linf = tol;
    }
    let report = run_suite(suite, &config)?;
    write_or_print(out, &report_to_json(&report, &config))?;
    for check in &report.checks {
        eprintln!(
            "{}: {} (worst {:.3e}, threshold {:.3e})",
            check.name,
            if check.passed { "pass" } else { "FAIL" },
            check.worst,
            check.threshold
        );
    }
    if report.passed {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_VERIFY_FAILED))
    }
}

fn train_cmd(corpus_path: &Path, order: usize, alpha: f64, out: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(corpus_path)
        .with_context(|| format!("reading corpus {}", corpus_path.display()))?;
    let file = corpus_from_toml(&text)?;
    let (vocab, corpus) = build_corpus(&file)?;
    let model = TabularLm::train(vocab, &corpus, order, alpha)?;
    fs::write(out, model_to_json(&model)).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "trained order-{order} model over {} tokens from {} sequences",
        model.vocab().len(),
        corpus.len()
    );
    Ok(ExitCode::SUCCESS)
}
