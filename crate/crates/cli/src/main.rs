//! `remini`: serve the chat gateway, run scripted sessions offline, compute
//! engagement metrics, and export anonymized transcripts.

mod batch;
mod error;
mod serve;
mod simulate;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, ValueEnum};
use remini_core::conversation::Condition;
use remini_core::PromptCorpus;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Serve,
    Simulate,
    Metrics,
    Export,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Provider {
    Remote,
    Scripted,
}

#[derive(Debug, Parser)]
#[command(name = "remini", version, about = "Reminiscence chat sessions for pairs of participants")]
struct Args {
    #[arg(long, value_enum)]
    mode: Mode,
    /// Prompt corpus (TOML); the built-in corpus when omitted.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Journal directory: written by serve and simulate, read by metrics and export.
    #[arg(long)]
    journals: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, value_enum, default_value = "scripted")]
    provider: Provider,
    /// Scripted responses and participant turns (JSON).
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, default_value = "remini")]
    condition: Condition,
    /// Use a fixed, stepping clock instead of wall time.
    #[arg(long)]
    deterministic_clock: bool,
    /// Self-disclosure labels (CSV) for metrics.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Count Summary-phase labels as Reflection in the disclosure table.
    #[arg(long)]
    merge_summary_phase: bool,
    /// JSON object of text to placeholder for export.
    #[arg(long)]
    replace_map: Option<PathBuf>,
    /// Output directory for metrics and export.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(CliError::Usage(e.kind().to_string() + ": " + e.to_string().lines().next().unwrap_or(""))),
    };
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(error: CliError) -> ExitCode {
    eprintln!("{}", error.to_line());
    ExitCode::from(error.exit_code() as u8)
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str, mode: &str) -> Result<&'a PathBuf, CliError> {
    value.as_ref().ok_or_else(|| CliError::Config(format!("{mode} needs {flag}")))
}

fn corpus(args: &Args) -> Result<Arc<PromptCorpus>, CliError> {
    match &args.corpus {
        Some(path) => PromptCorpus::load(path)
            .map(Arc::new)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
        None => Ok(Arc::new(PromptCorpus::builtin())),
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(args: Args) -> Result<(), CliError> {
    match args.mode {
        Mode::Simulate => {
            if args.provider != Provider::Scripted {
                return Err(CliError::Config("simulate needs --provider scripted".into()));
            }
            let script = require(&args.script, "--script", "simulate")?;
            let report = simulate::simulate(simulate::SimulateOptions {
                script_path: script,
                condition: args.condition,
                corpus: corpus(&args)?,
                journal_dir: args.journals.as_deref(),
                deterministic_clock: args.deterministic_clock,
            })?;
            eprintln!("phases: {}", simulate::render_trace(&report));
            print_json(&report);
            Ok(())
        }
        Mode::Metrics => batch::metrics(batch::MetricsOptions {
            journals: require(&args.journals, "--journals", "metrics")?,
            labels: args.labels.as_deref(),
            out: args.out.as_deref(),
            merge_summary_phase: args.merge_summary_phase,
        }),
        Mode::Export => {
            let map = batch::load_replace_map(args.replace_map.as_deref())?;
            let report = batch::export(
                require(&args.journals, "--journals", "export")?,
                require(&args.out, "--out", "export")?,
                &map,
            )?;
            print_json(&report);
            Ok(())
        }
        Mode::Serve => {
            let provider = match args.provider {
                Provider::Remote => serve::ProviderChoice::Remote,
                Provider::Scripted => {
                    serve::ProviderChoice::Scripted(require(&args.script, "--script", "serve --provider scripted")?.clone())
                }
            };
            serve::serve(serve::ServeOptions {
                bind: args.bind,
                corpus: corpus(&args)?,
                journals: args.journals.clone(),
                provider,
                deterministic_clock: args.deterministic_clock,
            })
        }
    }
}
