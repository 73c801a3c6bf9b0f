//! Phase scripts and prompt assembly for the two LLM pipelines.
//!
//! The driver sees four segments, labelled after the architecture figure
//! they come from: the current phase's chat log (I), the phase task list
//! (III), the general prompts (IV) and the compiled summaries of earlier
//! phases (V). There is no segment II. The analyzer sees I, III and IV,
//! where III is the phase's summary prompt instead of its task list.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{ChatMessage, Condition, Sender, SessionState};
use crate::llm::{compile_summaries, SummaryOrderError, SENTINEL};

const DEFAULT_CORPUS: &str = include_str!("../assets/corpus.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseScript {
    pub phase_id: String,
    pub display_name: String,
    /// "You are in the phase of ..." line printed above the task list.
    #[serde(default)]
    pub preamble: Option<String>,
    pub tasks: Vec<String>,
    /// Extra instruction appended after the numbered tasks.
    #[serde(default)]
    pub closing_note: Option<String>,
    pub summary_prompt: String,
}

impl PhaseScript {
    /// Segment III text for the driver: preamble, numbered tasks, closing note.
    pub fn render_tasks(&self) -> String {
        let mut out = String::new();
        if let Some(preamble) = &self.preamble {
            out.push_str(preamble);
            out.push('\n');
        }
        for (n, task) in self.tasks.iter().enumerate() {
            if n > 0 {
                out.push('\n');
            }
            let _ = write!(out, "{}. {}", n + 1, task);
        }
        if let Some(note) = &self.closing_note {
            out.push('\n');
            out.push_str(note);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptCorpus {
    pub general_prompts: Vec<String>,
    pub remini_scripts: Vec<PhaseScript>,
    pub baseline_scripts: Vec<PhaseScript>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusIssue {
    #[error("missing phase `{0}`")]
    MissingPhase(String),
    #[error("duplicate phase `{0}`")]
    DuplicatePhase(String),
    #[error("phase `{0}` has an empty task list")]
    EmptyTaskList(String),
    #[error("phase `{0}` does not belong to this condition")]
    UnknownPhase(String),
    #[error("final task of phase `{0}` does not ask for the phase sentinel")]
    MissingSentinel(String),
    #[error("general prompts must contain the role line")]
    MissingRoleLine,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed corpus document: {0}")]
    MalformedDocument(String),
    #[error("invalid corpus: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<CorpusIssue>),
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusDocument {
    general: Vec<String>,
    remini: Vec<PhaseScript>,
    baseline: Vec<PhaseScript>,
}

const ROLE_LINE_PREFIX: &str = "You are Remini, a reminiscence companion";

impl PromptCorpus {
    /// The shipped corpus.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_CORPUS).expect("bundled corpus is valid")
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses and validates a corpus document. Every problem found is
    /// reported, not just the first.
    pub fn parse(source: &str) -> Result<Self, CorpusError> {
        let doc: CorpusDocument =
            toml::from_str(source).map_err(|e| CorpusError::MalformedDocument(e.to_string()))?;

        let mut issues = Vec::new();
        if !doc.general.iter().any(|g| g.starts_with(ROLE_LINE_PREFIX)) {
            issues.push(CorpusIssue::MissingRoleLine);
        }
        let remini = order_scripts(Condition::Remini, doc.remini, &mut issues);
        let baseline = order_scripts(Condition::Baseline, doc.baseline, &mut issues);
        if !issues.is_empty() {
            return Err(CorpusError::Invalid(issues));
        }
        Ok(Self {
            general_prompts: doc.general,
            remini_scripts: remini,
            baseline_scripts: baseline,
        })
    }

    pub fn scripts(&self, condition: Condition) -> &[PhaseScript] {
        match condition {
            Condition::Remini => &self.remini_scripts,
            Condition::Baseline => &self.baseline_scripts,
        }
    }

    pub fn script(&self, condition: Condition, phase_index: usize) -> Option<&PhaseScript> {
        self.scripts(condition).get(phase_index)
    }

    /// Segment IV text.
    pub fn render_general(&self) -> String {
        self.general_prompts
            .iter()
            .map(|g| format!("- {g}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Checks one condition's scripts and returns them in canonical phase order.
fn order_scripts(
    condition: Condition,
    scripts: Vec<PhaseScript>,
    issues: &mut Vec<CorpusIssue>,
) -> Vec<PhaseScript> {
    let phases = condition.phases();
    let mut by_id: HashMap<String, PhaseScript> = HashMap::new();
    for script in scripts {
        if !phases.iter().any(|p| p.id() == script.phase_id) {
            issues.push(CorpusIssue::UnknownPhase(script.phase_id.clone()));
            continue;
        }
        if by_id.contains_key(&script.phase_id) {
            issues.push(CorpusIssue::DuplicatePhase(script.phase_id.clone()));
            continue;
        }
        by_id.insert(script.phase_id.clone(), script);
    }

    let mut ordered = Vec::with_capacity(phases.len());
    for (index, phase) in phases.iter().enumerate() {
        let Some(script) = by_id.remove(phase.id()) else {
            issues.push(CorpusIssue::MissingPhase(phase.id().to_string()));
            continue;
        };
        match script.tasks.last() {
            None => issues.push(CorpusIssue::EmptyTaskList(script.phase_id.clone())),
            Some(last) => {
                let terminal = index + 1 == phases.len();
                if condition == Condition::Remini && !terminal && !last.contains(SENTINEL) {
                    issues.push(CorpusIssue::MissingSentinel(script.phase_id.clone()));
                }
            }
        }
        ordered.push(script);
    }
    ordered
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SegmentLabel {
    #[serde(rename = "I")]
    History,
    #[serde(rename = "III")]
    PhaseSpecific,
    #[serde(rename = "IV")]
    General,
    #[serde(rename = "V")]
    Summaries,
}

impl SegmentLabel {
    pub fn numeral(self) -> &'static str {
        match self {
            SegmentLabel::History => "I",
            SegmentLabel::PhaseSpecific => "III",
            SegmentLabel::General => "IV",
            SegmentLabel::Summaries => "V",
        }
    }

    fn heading(self) -> &'static str {
        match self {
            SegmentLabel::History => "Conversation history of the current phase:",
            SegmentLabel::PhaseSpecific => "Phase-specific prompts:",
            SegmentLabel::General => "General prompts:",
            SegmentLabel::Summaries => "Conversation summary of previous phases:",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub label: SegmentLabel,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembledPrompt {
    pub segments: Vec<Segment>,
}

impl AssembledPrompt {
    pub fn segment(&self, label: SegmentLabel) -> Option<&str> {
        self.segments.iter().find(|s| s.label == label).map(|s| s.text.as_str())
    }

    pub fn labels(&self) -> Vec<SegmentLabel> {
        self.segments.iter().map(|s| s.label).collect()
    }

    /// The text sent to the completion provider.
    pub fn render(&self) -> String {
        self.segments
            .iter()
            .map(|s| format!("[{}] {}\n{}", s.label.numeral(), s.label.heading(), s.text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    pub fn rendered_len(&self) -> usize {
        self.render().chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssemblyError {
    #[error("phase {requested} has not been completed (session is in phase {current})")]
    PhaseNotCompleted { requested: usize, current: usize },
    #[error(transparent)]
    Summaries(#[from] SummaryOrderError),
}

/// One line per message: `<display_name> [<role>]: <text>`.
pub fn render_history(messages: &[ChatMessage]) -> String {
    history_lines(messages).join("\n")
}

fn history_lines(messages: &[ChatMessage]) -> Vec<String> {
    messages
        .iter()
        .filter_map(|m| {
            let role = match m.sender {
                Sender::Participant(_) => "user",
                Sender::Bot => "bot",
                Sender::System => return None,
            };
            Some(format!("{} [{}]: {}", m.display_name, role, m.text))
        })
        .collect()
}

/// Builds driver and analyzer inputs from a session.
#[derive(Debug, Clone, Copy)]
pub struct PromptAssembler<'a> {
    corpus: &'a PromptCorpus,
    char_budget: Option<usize>,
}

impl<'a> PromptAssembler<'a> {
    pub fn new(corpus: &'a PromptCorpus) -> Self {
        Self { corpus, char_budget: None }
    }

    /// Caps the rendered prompt length in characters. Only the oldest
    /// history lines are ever dropped to meet it.
    pub fn with_char_budget(mut self, budget: Option<usize>) -> Self {
        self.char_budget = budget;
        self
    }

    pub fn driver_input(&self, state: &SessionState) -> Result<AssembledPrompt, AssemblyError> {
        let script = self.script(state, state.phase_index);
        let mut segments = vec![
            Segment { label: SegmentLabel::History, text: String::new() },
            Segment { label: SegmentLabel::PhaseSpecific, text: script.render_tasks() },
            Segment { label: SegmentLabel::General, text: self.corpus.render_general() },
        ];
        if !state.summaries.is_empty() {
            segments.push(Segment {
                label: SegmentLabel::Summaries,
                text: compile_summaries(&state.summaries, self.corpus.scripts(state.condition))?,
            });
        }
        Ok(self.fill_history(segments, state.current_history()))
    }

    pub fn analyzer_input(
        &self,
        state: &SessionState,
        phase_index: usize,
    ) -> Result<AssembledPrompt, AssemblyError> {
        if phase_index > state.phase_index {
            return Err(AssemblyError::PhaseNotCompleted {
                requested: phase_index,
                current: state.phase_index,
            });
        }
        let script = self.script(state, phase_index);
        let segments = vec![
            Segment { label: SegmentLabel::History, text: String::new() },
            Segment { label: SegmentLabel::PhaseSpecific, text: script.summary_prompt.clone() },
            Segment { label: SegmentLabel::General, text: self.corpus.render_general() },
        ];
        Ok(self.fill_history(segments, &state.phase_histories[phase_index]))
    }

    fn script(&self, state: &SessionState, phase_index: usize) -> &'a PhaseScript {
        // Validated corpora always carry one script per phase.
        &self.corpus.scripts(state.condition)[phase_index]
    }

    fn fill_history(&self, mut segments: Vec<Segment>, messages: &[ChatMessage]) -> AssembledPrompt {
        let lines = history_lines(messages);
        let mut skip = 0;
        loop {
            segments[0].text = lines[skip..].join("\n");
            let prompt = AssembledPrompt { segments };
            match self.char_budget {
                Some(budget) if skip < lines.len() && prompt.rendered_len() > budget => {
                    segments = prompt.segments;
                    skip += 1;
                }
                _ => return prompt,
            }
        }
    }
}
