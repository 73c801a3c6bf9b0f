//! Fully scripted offline sessions.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use remini_core::analytics::{engagement_metrics, TranscriptMetrics};
use remini_core::clock::{Clock, ManualClock, SystemClock};
use remini_core::conversation::{ChatEvent, Condition, Participant, ParticipantId, Sender, SessionStatus};
use remini_core::journal::{FileStore, Journal};
use remini_core::llm::{DriveError, ProviderError, ScriptedProvider};
use remini_core::runner::{RunnerConfig, RunnerParts, SessionRunner};
use remini_core::PromptCorpus;
use remini_gateway::{ingest, FrameKind, InboundFrame, MentionDetector, DEFAULT_MAX_MESSAGE_CHARS};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CLOCK_START_MS: i64 = 1_700_000_000_000;
pub const CLOCK_STEP_MS: i64 = 1_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    #[serde(default = "default_participants")]
    pub participants: Vec<Participant>,
    pub steps: Vec<Step>,
}

fn default_participants() -> Vec<Participant> {
    vec![
        Participant::new("p1", "Participant 1").unwrap(),
        Participant::new("p2", "Participant 2").unwrap(),
    ]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    /// Queued for the driver.
    BotResponse(String),
    /// Queued for the analyzer.
    SummaryResponse(String),
    ParticipantMessage {
        sender: String,
        text: String,
        /// Overrides mention detection when set.
        #[serde(default)]
        mention: Option<bool>,
        /// Send time relative to the session start; honoured only with the
        /// deterministic clock.
        #[serde(default)]
        at_ms: Option<i64>,
    },
    ContinuePress {
        sender: String,
        /// Defaults to the latest bot message.
        #[serde(default)]
        message_id: Option<u64>,
    },
}

impl Script {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::ScriptInvalid { step: 0, reason: e.to_string() })
    }

    pub fn bot_responses(&self) -> Vec<String> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::BotResponse(t) => Some(t.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn summary_responses(&self) -> Vec<String> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::SummaryResponse(t) => Some(t.clone()),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub session_id: String,
    pub condition: Condition,
    pub status: SessionStatus,
    pub phases_visited: Vec<usize>,
    pub summaries: usize,
    pub degraded_summaries: usize,
    pub journal: Option<PathBuf>,
    pub unused_bot_responses: usize,
    pub unused_summary_responses: usize,
    pub metrics: TranscriptMetrics,
}

pub struct SimulateOptions<'a> {
    pub script_path: &'a Path,
    pub condition: Condition,
    pub corpus: Arc<PromptCorpus>,
    pub journal_dir: Option<&'a Path>,
    pub deterministic_clock: bool,
}

pub fn session_id_for(script_path: &Path) -> String {
    let stem = script_path.file_stem().map(|s| s.to_string_lossy().into_owned());
    format!("sim-{}", stem.unwrap_or_else(|| "script".into()))
}

pub fn simulate(options: SimulateOptions<'_>) -> Result<Report, CliError> {
    let script = Script::load(options.script_path)?;
    let session_id = session_id_for(options.script_path);

    let (journal, journal_path) = match options.journal_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
            let path = dir.join(format!("{session_id}.ndjson"));
            if path.exists() {
                std::fs::remove_file(&path).map_err(CliError::io(&path))?;
            }
            let store = FileStore::open(&path).map_err(CliError::io(&path))?;
            (Journal::new(session_id.clone(), Box::new(store)), Some(path))
        }
        None => (Journal::in_memory(session_id.clone()), None),
    };

    let manual = ManualClock::new(CLOCK_START_MS, CLOCK_STEP_MS);
    let clock: Box<dyn Clock> = if options.deterministic_clock {
        Box::new(manual.clone())
    } else {
        Box::new(SystemClock::default())
    };
    let driver = Arc::new(ScriptedProvider::new(script.bot_responses()));
    let analyzer = Arc::new(ScriptedProvider::new(script.summary_responses()));
    let parts = RunnerParts {
        corpus: options.corpus,
        driver: driver.clone(),
        analyzer: analyzer.clone(),
        config: RunnerConfig::default(),
        clock,
    };
    let mut runner = SessionRunner::start(journal, options.condition, script.participants.clone(), parts)
        .map_err(|e| CliError::ScriptInvalid { step: 0, reason: e.to_string() })?;

    let detector = MentionDetector::default();
    let mut phases_visited = vec![runner.state().phase_index];
    for (i, step) in script.steps.iter().enumerate() {
        let step_no = i + 1;
        let invalid = |reason: String| CliError::ScriptInvalid { step: step_no, reason };
        if !runner.state().is_active() {
            if matches!(step, Step::ParticipantMessage { .. } | Step::ContinuePress { .. }) {
                return Err(invalid("session has already ended".into()));
            }
            continue;
        }
        let event = match step {
            Step::BotResponse(_) | Step::SummaryResponse(_) => continue,
            Step::ParticipantMessage { sender, text, mention, at_ms } => {
                if let (true, Some(at)) = (options.deterministic_clock, at_ms) {
                    manual.advance_to(CLOCK_START_MS + at);
                }
                let frame = frame(runner.state().session_id.clone(), sender, FrameKind::Text, text.clone())
                    .map_err(&invalid)?;
                let stamp = runner.stamp();
                let mut event = ingest(&frame, runner.state(), &detector, stamp, DEFAULT_MAX_MESSAGE_CHARS)
                    .map_err(|e| invalid(e.to_string()))?;
                if let (ChatEvent::UserMessage { mentions_bot, .. }, Some(flag)) = (&mut event, mention) {
                    *mentions_bot = *flag;
                }
                event
            }
            Step::ContinuePress { sender, message_id } => {
                let target = match message_id {
                    Some(id) => *id,
                    None => last_bot_message(&runner).ok_or_else(|| invalid("no bot message to continue".into()))?,
                };
                let frame = frame(runner.state().session_id.clone(), sender, FrameKind::ContinuePress, target.to_string())
                    .map_err(&invalid)?;
                let stamp = runner.stamp();
                ingest(&frame, runner.state(), &detector, stamp, DEFAULT_MAX_MESSAGE_CHARS)
                    .map_err(|e| invalid(e.to_string()))?
            }
        };
        let failures = runner.submit(event, &mut |_| {}).map_err(|e| match e {
            remini_core::runner::RunnerError::Session(e) => invalid(e.to_string()),
            other => CliError::Session(other.to_string()),
        })?;
        for phase in phases_since(&runner, *phases_visited.last().unwrap()) {
            phases_visited.push(phase);
        }
        if let Some(failure) = failures.first() {
            return Err(match &failure.error {
                DriveError::Provider(ProviderError::Exhausted) => CliError::ScriptExhausted { seq: failure.seq },
                other => CliError::Session(other.to_string()),
            });
        }
    }

    let state = runner.state();
    Ok(Report {
        session_id,
        condition: state.condition,
        status: state.status,
        phases_visited,
        summaries: state.summaries.len(),
        degraded_summaries: state.summaries.iter().filter(|s| s.degraded).count(),
        journal: journal_path,
        unused_bot_responses: driver.remaining(),
        unused_summary_responses: analyzer.remaining(),
        metrics: engagement_metrics(state),
    })
}

fn frame(session_id: String, sender: &str, kind: FrameKind, body: String) -> Result<InboundFrame, String> {
    Ok(InboundFrame {
        session_id,
        sender: ParticipantId::new(sender).map_err(|e| e.to_string())?,
        kind,
        body,
        client_ts: None,
    })
}

fn last_bot_message(runner: &SessionRunner) -> Option<u64> {
    runner
        .state()
        .messages()
        .filter(|m| m.sender == Sender::Bot)
        .map(|m| m.message_id)
        .last()
}

/// Phases entered after `from`; a single submit can cross several.
fn phases_since(runner: &SessionRunner, from: usize) -> std::ops::RangeInclusive<usize> {
    from + 1..=runner.state().phase_index
}

/// Phase trace of a report as `0 -> 1 -> 2`.
pub fn render_trace(report: &Report) -> String {
    let phases: Vec<String> = report.phases_visited.iter().map(|p| p.to_string()).collect();
    phases.join(" -> ")
}
