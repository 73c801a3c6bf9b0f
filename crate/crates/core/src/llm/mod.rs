//! The Conversation Driver and Conversation Analyzer pipelines.
//!
//! The driver turns the assembled prompt into the bot's next group-chat
//! message and reports whether the model declared the phase finished. The
//! analyzer condenses a finished phase into a summary that later driver
//! prompts receive as segment V.

mod provider;
pub mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{SessionState, Sender};
use crate::prompts::{AssemblyError, PhaseScript, PromptAssembler};

pub use provider::{CompletionParams, CompletionProvider, ProviderError, ScriptedProvider, ScriptedReply};
pub use remote::{RemoteConfig, RemoteProvider};

/// Literal the driver emits to close a phase. Matched case-sensitively and
/// only in driver output, never in user text.
pub const SENTINEL: &str = "PHASE DONE";

/// Longest slice of a participant message kept in a fallback digest.
pub const DIGEST_CHARS: usize = 200;

const QUOTES: &[char] = &['\'', '"', '`', '\u{2018}', '\u{2019}', '\u{201C}', '\u{201D}'];
const TRAILING_PUNCT: &[char] = &['.', '!', ':'];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverOutput {
    pub text: String,
    pub phase_done: bool,
}

impl DriverOutput {
    pub fn new(text: impl Into<String>, phase_done: bool) -> Self {
        Self { text: text.into(), phase_done }
    }

    /// Cleans a raw completion.
    pub fn from_raw(raw: &str) -> Self {
        let (text, phase_done) = detect_phase_done(raw);
        Self { text, phase_done }
    }
}

/// Strips every occurrence of [`SENTINEL`] from `raw` and reports whether
/// there was one. Quotes hugging the token, a colon introducing it and
/// punctuation trailing it go with it; the result is trimmed.
pub fn detect_phase_done(raw: &str) -> (String, bool) {
    if !raw.contains(SENTINEL) {
        return (raw.trim().to_string(), false);
    }
    let mut text = raw.to_string();
    while let Some(start) = text.find(SENTINEL) {
        let end = start + SENTINEL.len();
        let mut left = text[..start].trim_end_matches(QUOTES);
        if left.trim_end().ends_with(':') {
            left = left.trim_end().trim_end_matches(':');
        }
        let right = text[end..]
            .trim_start_matches(QUOTES)
            .trim_start_matches(TRAILING_PUNCT);
        let (left, right) = (left.trim_end(), right.trim_start());
        let removed = &text[left.len()..text.len() - right.len()];
        let separator = match (left.is_empty(), right.is_empty()) {
            (false, false) if removed.contains('\n') => "\n",
            (false, false) => " ",
            _ => "",
        };
        text = format!("{left}{separator}{right}");
    }
    (text.trim().to_string(), true)
}

/// Analyzer digest of one completed phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase_index: usize,
    pub phase_id: String,
    pub text: String,
    pub created_at: i64,
    pub source_message_count: usize,
    /// Set when the analyzer failed and `text` is the mechanical fallback.
    #[serde(default)]
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("summaries out of order: phase {next} follows phase {previous}")]
pub struct SummaryOrderError {
    pub previous: usize,
    pub next: usize,
}

/// Concatenates summaries in phase order under
/// `== Summary of <display_name> ==` headers.
pub fn compile_summaries(
    summaries: &[PhaseSummary],
    scripts: &[PhaseScript],
) -> Result<String, SummaryOrderError> {
    for pair in summaries.windows(2) {
        if pair[1].phase_index <= pair[0].phase_index {
            return Err(SummaryOrderError {
                previous: pair[0].phase_index,
                next: pair[1].phase_index,
            });
        }
    }
    let blocks: Vec<String> = summaries
        .iter()
        .map(|s| {
            let name = scripts
                .get(s.phase_index)
                .map(|script| script.display_name.as_str())
                .unwrap_or(s.phase_id.as_str());
            format!("== Summary of {name} ==\n{}", s.text)
        })
        .collect();
    Ok(blocks.join("\n\n"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Driver,
    Analyzer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeOutcome {
    Completion(String),
    Error(ProviderError),
}

/// One provider call, kept verbatim for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderExchange {
    pub pipeline: Pipeline,
    pub phase_index: usize,
    pub attempt: u32,
    pub prompt: String,
    pub outcome: ExchangeOutcome,
}

/// Receives every provider exchange as it happens.
pub trait ExchangeSink {
    fn record(&mut self, exchange: ProviderExchange);
}

impl ExchangeSink for Vec<ProviderExchange> {
    fn record(&mut self, exchange: ProviderExchange) {
        self.push(exchange);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DriveError {
    #[error("session is not active")]
    SessionClosed,
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Calls the provider once, then up to `max_retries` more times while the
/// failure is retryable.
pub fn complete_with_retries(
    provider: &dyn CompletionProvider,
    prompt: &str,
    params: &CompletionParams,
    pipeline: Pipeline,
    phase_index: usize,
    sink: &mut dyn ExchangeSink,
) -> Result<String, ProviderError> {
    params.validate()?;
    let mut attempt = 0;
    loop {
        attempt += 1;
        let result = provider.complete(prompt, params);
        sink.record(ProviderExchange {
            pipeline,
            phase_index,
            attempt,
            prompt: prompt.to_string(),
            outcome: match &result {
                Ok(text) => ExchangeOutcome::Completion(text.clone()),
                Err(err) => ExchangeOutcome::Error(err.clone()),
            },
        });
        match result {
            Err(err) if err.is_retryable() && attempt <= params.max_retries => {
                tracing::warn!(?pipeline, attempt, %err, "retrying provider call");
            }
            other => return other,
        }
    }
}

/// Renders the driver prompt for the session's current phase.
pub fn driver_prompt(state: &SessionState, assembler: &PromptAssembler<'_>) -> Result<String, DriveError> {
    if !state.is_active() {
        return Err(DriveError::SessionClosed);
    }
    Ok(assembler.driver_input(state)?.render())
}

/// Sends a rendered driver prompt and parses the reply: the sentinel is
/// detected and stripped, then the text is capped at `max_output_chars`.
pub fn run_driver(
    prompt: &str,
    provider: &dyn CompletionProvider,
    params: &CompletionParams,
    phase_index: usize,
    sink: &mut dyn ExchangeSink,
) -> Result<DriverOutput, DriveError> {
    let raw = complete_with_retries(provider, prompt, params, Pipeline::Driver, phase_index, sink)?;
    let mut output = DriverOutput::from_raw(&raw);
    if output.text.chars().count() > params.max_output_chars {
        output.text = output.text.chars().take(params.max_output_chars).collect::<String>().trim_end().to_string();
    }
    Ok(output)
}

/// Generates the bot's next message for the session's current phase.
pub fn drive(
    state: &SessionState,
    assembler: &PromptAssembler<'_>,
    provider: &dyn CompletionProvider,
    params: &CompletionParams,
    sink: &mut dyn ExchangeSink,
) -> Result<DriverOutput, DriveError> {
    let prompt = driver_prompt(state, assembler)?;
    run_driver(&prompt, provider, params, state.phase_index, sink)
}

/// Everything needed to summarize one phase, detached from the session so
/// the provider call can run elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRequest {
    /// `None` when the phase has no messages; no provider call is made.
    pub prompt: Option<String>,
    pub fallback: String,
    pub draft: PhaseSummary,
}

impl SummaryRequest {
    pub fn new(
        state: &SessionState,
        assembler: &PromptAssembler<'_>,
        phase_index: usize,
        created_at: i64,
    ) -> Result<Self, AssemblyError> {
        let prompt = assembler.analyzer_input(state, phase_index)?;
        let history = &state.phase_histories[phase_index];
        Ok(Self {
            prompt: (!history.is_empty()).then(|| prompt.render()),
            fallback: fallback_digest(state, phase_index),
            draft: PhaseSummary {
                phase_index,
                phase_id: state.condition.phases()[phase_index].id().to_string(),
                text: String::new(),
                created_at,
                source_message_count: history.len(),
                degraded: false,
            },
        })
    }

    /// Calls the analyzer. Failures and empty replies fall back to
    /// [`fallback_digest`] and mark the summary degraded.
    pub fn run(
        &self,
        provider: &dyn CompletionProvider,
        params: &CompletionParams,
        sink: &mut dyn ExchangeSink,
    ) -> PhaseSummary {
        let mut summary = self.draft.clone();
        let Some(prompt) = &self.prompt else {
            return summary;
        };
        let result = complete_with_retries(provider, prompt, params, Pipeline::Analyzer, summary.phase_index, sink);
        match result.map(|t| t.trim().to_string()) {
            Ok(text) if !text.is_empty() => summary.text = text,
            outcome => {
                tracing::warn!(phase_index = summary.phase_index, ?outcome, "analyzer failed, using fallback digest");
                summary.text = self.fallback.clone();
                summary.degraded = true;
            }
        }
        summary
    }
}

/// Summarizes a completed phase. Provider failures do not propagate: the
/// summary falls back to [`fallback_digest`] and is marked degraded.
pub fn summarize_phase(
    state: &SessionState,
    assembler: &PromptAssembler<'_>,
    provider: &dyn CompletionProvider,
    params: &CompletionParams,
    phase_index: usize,
    created_at: i64,
    sink: &mut dyn ExchangeSink,
) -> Result<PhaseSummary, AssemblyError> {
    Ok(SummaryRequest::new(state, assembler, phase_index, created_at)?.run(provider, params, sink))
}

/// Last message of each participant in the phase, truncated to
/// [`DIGEST_CHARS`] characters, one line per participant.
pub fn fallback_digest(state: &SessionState, phase_index: usize) -> String {
    let history = &state.phase_histories[phase_index];
    let lines: Vec<String> = state
        .participants
        .iter()
        .filter_map(|p| {
            history
                .iter()
                .rev()
                .find(|m| m.sender == Sender::Participant(p.id.clone()))
                .map(|m| {
                    let text: String = m.text.chars().take(DIGEST_CHARS).collect();
                    format!("{}: {}", p.display_name, text)
                })
        })
        .collect();
    if lines.is_empty() {
        "No participant messages were recorded in this phase.".to_string()
    } else {
        lines.join("\n")
    }
}
