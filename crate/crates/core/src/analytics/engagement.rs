//! Chat-log engagement measures: duration, message counts, word counts.
//!
//! Only participant messages count. Words are maximal runs of non-whitespace
//! characters, which approximates but does not reproduce commercial
//! dictionary-based tokenizers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conversation::{ChatMessage, Condition, SessionState, SessionStatus};
use crate::journal::{replay, JournalRecord, ReplayError};

pub const DURATION_DEFINITION: &str = "minutes from the first participant message in the first \
narration phase (MemoryNarration or SimplifiedNarration) to the last participant message of the session";

const MS_PER_MINUTE: f64 = 60_000.0;

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub phase_index: usize,
    /// Span between the phase's first and last participant message.
    pub duration_min: Option<f64>,
    pub messages_total: usize,
    pub messages_per_participant: BTreeMap<String, usize>,
    pub words_total: usize,
    pub words_per_message: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptMetrics {
    pub session_id: String,
    pub condition: Condition,
    pub status: SessionStatus,
    pub phases_visited: usize,
    /// `None` when no participant spoke in or after a narration phase.
    pub reminiscence_duration_min: Option<f64>,
    pub duration_definition: String,
    pub messages_total: usize,
    pub messages_per_participant: BTreeMap<String, usize>,
    pub words_total: usize,
    pub words_per_participant: BTreeMap<String, usize>,
    pub words_per_message: f64,
    pub per_phase: Vec<PhaseMetrics>,
    /// True when the session holds no participant messages at all.
    pub empty_transcript: bool,
}

fn ratio(words: usize, messages: usize) -> f64 {
    if messages == 0 {
        0.0
    } else {
        words as f64 / messages as f64
    }
}

fn span_minutes(first: Option<i64>, last: Option<i64>) -> Option<f64> {
    Some((last? - first?) as f64 / MS_PER_MINUTE)
}

pub fn engagement_metrics(state: &SessionState) -> TranscriptMetrics {
    let zeroed: BTreeMap<String, usize> = state
        .participants
        .iter()
        .map(|p| (p.id.to_string(), 0))
        .collect();
    let participant_messages = |history: &[ChatMessage]| -> Vec<(String, usize, i64)> {
        history
            .iter()
            .filter_map(|m| {
                m.sender
                    .participant()
                    .map(|id| (id.to_string(), word_count(&m.text), m.timestamp))
            })
            .collect()
    };

    let mut per_phase = Vec::with_capacity(state.phase_histories.len());
    let mut messages_per_participant = zeroed.clone();
    let mut words_per_participant = zeroed.clone();
    let mut narration_start: Option<i64> = None;
    let mut session_last: Option<i64> = None;

    for (phase_index, history) in state.phase_histories.iter().enumerate() {
        let msgs = participant_messages(history);
        let mut counts = zeroed.clone();
        let mut words = 0;
        for (id, w, _) in &msgs {
            *counts.entry(id.clone()).or_default() += 1;
            *messages_per_participant.entry(id.clone()).or_default() += 1;
            *words_per_participant.entry(id.clone()).or_default() += w;
            words += w;
        }
        let first = msgs.first().map(|m| m.2);
        let last = msgs.last().map(|m| m.2);
        let is_narration = state.condition.phases()[phase_index].is_narration();
        if is_narration && narration_start.is_none() {
            narration_start = first;
        }
        if last.is_some() {
            session_last = last;
        }
        per_phase.push(PhaseMetrics {
            phase_index,
            duration_min: span_minutes(first, last),
            messages_total: msgs.len(),
            messages_per_participant: counts,
            words_total: words,
            words_per_message: ratio(words, msgs.len()),
        });
    }

    let messages_total: usize = per_phase.iter().map(|p| p.messages_total).sum();
    let words_total: usize = per_phase.iter().map(|p| p.words_total).sum();
    TranscriptMetrics {
        session_id: state.session_id.clone(),
        condition: state.condition,
        status: state.status,
        phases_visited: state.phase_index + 1,
        reminiscence_duration_min: span_minutes(narration_start, session_last),
        duration_definition: DURATION_DEFINITION.to_string(),
        messages_total,
        messages_per_participant,
        words_total,
        words_per_participant,
        words_per_message: ratio(words_total, messages_total),
        per_phase,
        empty_transcript: messages_total == 0,
    }
}

/// Replays a journal and measures the resulting session.
pub fn engagement_metrics_from_journal(records: &[JournalRecord]) -> Result<TranscriptMetrics, ReplayError> {
    replay(records).map(|state| engagement_metrics(&state))
}
