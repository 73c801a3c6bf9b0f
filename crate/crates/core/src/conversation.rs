//! Session state machine.
//!
//! Everything here is synchronous and free of I/O. Message ids and
//! timestamps are assigned by the caller (the gateway owns the clock), the
//! state only checks that they keep moving forward.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{DriverOutput, PhaseSummary, SENTINEL};

/// Display name used for messages the bot sends.
pub const BOT_DISPLAY_NAME: &str = "Remini";

/// Which chatbot the dyad talks to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Remini,
    Baseline,
}

impl Condition {
    pub fn phases(self) -> &'static [PhaseKind] {
        match self {
            Condition::Remini => &[
                PhaseKind::RapportBuilding,
                PhaseKind::MemoryNarration,
                PhaseKind::Elaboration,
                PhaseKind::Reflection,
                PhaseKind::Summary,
            ],
            Condition::Baseline => &[PhaseKind::RapportBuilding, PhaseKind::SimplifiedNarration],
        }
    }

    pub fn phase_count(self) -> usize {
        self.phases().len()
    }

    pub fn phase(self, index: usize) -> Option<PhaseKind> {
        self.phases().get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Remini => "remini",
            Condition::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "remini" => Ok(Condition::Remini),
            "baseline" => Ok(Condition::Baseline),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

/// A conversation phase. `SimplifiedNarration` only exists in the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseKind {
    RapportBuilding,
    MemoryNarration,
    Elaboration,
    Reflection,
    Summary,
    SimplifiedNarration,
}

impl PhaseKind {
    /// Identifier used in the corpus document.
    pub fn id(self) -> &'static str {
        match self {
            PhaseKind::RapportBuilding => "RapportBuilding",
            PhaseKind::MemoryNarration => "MemoryNarration",
            PhaseKind::Elaboration => "Elaboration",
            PhaseKind::Reflection => "Reflection",
            PhaseKind::Summary => "Summary",
            PhaseKind::SimplifiedNarration => "SimplifiedNarration",
        }
    }

    /// Phases in which the dyad actually narrates a memory; reminiscence
    /// duration is measured from the first of these.
    pub fn is_narration(self) -> bool {
        matches!(self, PhaseKind::MemoryNarration | PhaseKind::SimplifiedNarration)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(String);

impl ParticipantId {
    pub fn new(id: impl Into<String>) -> Result<Self, SessionError> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(SessionError::EmptyParticipantId);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: ParticipantId,
    pub display_name: String,
}

impl Participant {
    pub fn new(id: impl Into<String>, display_name: impl Into<String>) -> Result<Self, SessionError> {
        Ok(Self {
            id: ParticipantId::new(id)?,
            display_name: display_name.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "role", content = "id", rename_all = "snake_case")]
pub enum Sender {
    Participant(ParticipantId),
    Bot,
    System,
}

impl Sender {
    pub fn participant(&self) -> Option<&ParticipantId> {
        match self {
            Sender::Participant(id) => Some(id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub message_id: u64,
    pub sender: Sender,
    pub display_name: String,
    pub text: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: i64,
    pub phase_index: usize,
}

/// Server-assigned identity of a message about to be created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStamp {
    pub message_id: u64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChatEvent {
    UserMessage { message: ChatMessage, mentions_bot: bool },
    ContinuePressed { participant: ParticipantId, target_bot_message: u64 },
    SessionStarted,
    SessionEnded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Ended,
}

/// What the caller has to do after a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    None,
    TriggerDriverGeneration,
    RunAnalyzerThenAdvance,
    EndSession,
}

/// Why a system notice was posted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoticeCause {
    /// The driver call failed; the in-flight generation is abandoned.
    GenerationFailed,
    /// The session is closing.
    SessionClosing,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemNotice {
    pub message: ChatMessage,
    pub cause: NoticeCause,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("a session needs exactly 2 participants, got {0}")]
    InvalidPartySize(usize),
    #[error("participant ids and display names must be distinct")]
    DuplicateParticipant,
    #[error("participant id must not be empty")]
    EmptyParticipantId,
    #[error("session is closed")]
    SessionClosed,
    #[error("unknown participant `{0}`")]
    UnknownParticipant(String),
    #[error("message {0} is not a bot message in this session")]
    UnknownBotMessage(u64),
    #[error("message id {got} does not follow {last}")]
    NonMonotonicMessageId { last: u64, got: u64 },
    #[error("timestamp {got} is earlier than {last}")]
    NonMonotonicTimestamp { last: i64, got: i64 },
    #[error("no generation is in flight")]
    NotGenerating,
    #[error("a generation is already in flight")]
    AlreadyGenerating,
    #[error("driver output still contains the phase sentinel")]
    SentinelInOutput,
    #[error("summary is for phase {got} but the session is in phase {expected}")]
    PhaseMismatch { expected: usize, got: usize },
    #[error("the final phase cannot be advanced")]
    AlreadyFinal,
    #[error("system notices must be sent by the system")]
    NoticeSender,
}

/// Live state of one dyad's conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub session_id: String,
    pub condition: Condition,
    pub participants: [Participant; 2],
    pub phase_index: usize,
    pub phase_histories: Vec<Vec<ChatMessage>>,
    pub summaries: Vec<PhaseSummary>,
    pub generation_in_flight: bool,
    pub status: SessionStatus,
    /// Highest message id handed out so far, including system notices.
    pub last_message_id: u64,
    pub last_timestamp: i64,
}

impl SessionState {
    pub fn create(
        session_id: impl Into<String>,
        condition: Condition,
        participants: Vec<Participant>,
    ) -> Result<Self, SessionError> {
        let participants: [Participant; 2] = participants
            .try_into()
            .map_err(|v: Vec<Participant>| SessionError::InvalidPartySize(v.len()))?;
        if participants[0].id == participants[1].id
            || participants[0].display_name == participants[1].display_name
        {
            return Err(SessionError::DuplicateParticipant);
        }
        Ok(Self {
            session_id: session_id.into(),
            condition,
            participants,
            phase_index: 0,
            phase_histories: vec![Vec::new(); condition.phase_count()],
            summaries: Vec::new(),
            generation_in_flight: false,
            status: SessionStatus::Active,
            last_message_id: 0,
            last_timestamp: i64::MIN,
        })
    }

    pub fn phase(&self) -> PhaseKind {
        self.condition.phases()[self.phase_index]
    }

    pub fn is_final_phase(&self) -> bool {
        self.phase_index + 1 == self.condition.phase_count()
    }

    pub fn is_active(&self) -> bool {
        self.status == SessionStatus::Active
    }

    pub fn current_history(&self) -> &[ChatMessage] {
        &self.phase_histories[self.phase_index]
    }

    pub fn participant(&self, id: &ParticipantId) -> Option<&Participant> {
        self.participants.iter().find(|p| &p.id == id)
    }

    pub fn next_message_id(&self) -> u64 {
        self.last_message_id + 1
    }

    /// All conversational messages in send order.
    pub fn messages(&self) -> impl Iterator<Item = &ChatMessage> {
        self.phase_histories.iter().flatten()
    }

    pub fn find_message(&self, message_id: u64) -> Option<&ChatMessage> {
        self.messages().find(|m| m.message_id == message_id)
    }

    /// Pure form of [`SessionState::apply`].
    pub fn apply_event(&self, event: &ChatEvent) -> Result<(SessionState, Effect), SessionError> {
        let mut next = self.clone();
        let effect = next.apply(event)?;
        Ok((next, effect))
    }

    /// Applies an inbound event. On error the state is left untouched.
    pub fn apply(&mut self, event: &ChatEvent) -> Result<Effect, SessionError> {
        if let ChatEvent::SessionEnded = event {
            self.status = SessionStatus::Ended;
            return Ok(Effect::None);
        }
        self.ensure_active()?;
        match event {
            ChatEvent::UserMessage { message, mentions_bot } => {
                let sender = message
                    .sender
                    .participant()
                    .ok_or_else(|| SessionError::UnknownParticipant(format!("{:?}", message.sender)))?;
                if self.participant(sender).is_none() {
                    return Err(SessionError::UnknownParticipant(sender.to_string()));
                }
                self.check_stamp(message.message_id, message.timestamp)?;
                let mut message = message.clone();
                message.phase_index = self.phase_index;
                self.push_message(message);
                Ok(self.trigger_if(*mentions_bot))
            }
            ChatEvent::ContinuePressed { participant, target_bot_message } => {
                if self.participant(participant).is_none() {
                    return Err(SessionError::UnknownParticipant(participant.to_string()));
                }
                match self.find_message(*target_bot_message) {
                    Some(m) if m.sender == Sender::Bot => {}
                    _ => return Err(SessionError::UnknownBotMessage(*target_bot_message)),
                }
                Ok(self.trigger_if(true))
            }
            ChatEvent::SessionStarted => Ok(Effect::None),
            ChatEvent::SessionEnded => unreachable!("handled above"),
        }
    }

    /// Pure form of [`SessionState::commit`].
    pub fn commit_driver_output(
        &self,
        output: &DriverOutput,
        stamp: MessageStamp,
    ) -> Result<(SessionState, Effect), SessionError> {
        let mut next = self.clone();
        let effect = next.commit(output, stamp)?;
        Ok((next, effect))
    }

    /// Records the driver's reply. `stamp` is only consumed when the reply
    /// has text; an empty reply produces no message.
    pub fn commit(&mut self, output: &DriverOutput, stamp: MessageStamp) -> Result<Effect, SessionError> {
        self.ensure_active()?;
        if !self.generation_in_flight {
            return Err(SessionError::NotGenerating);
        }
        if output.text.contains(SENTINEL) {
            return Err(SessionError::SentinelInOutput);
        }
        if !output.text.is_empty() {
            self.check_stamp(stamp.message_id, stamp.timestamp)?;
            self.push_message(ChatMessage {
                message_id: stamp.message_id,
                sender: Sender::Bot,
                display_name: BOT_DISPLAY_NAME.to_string(),
                text: output.text.clone(),
                timestamp: stamp.timestamp,
                phase_index: self.phase_index,
            });
        }
        self.generation_in_flight = false;
        Ok(match (output.phase_done, self.is_final_phase()) {
            (false, _) => Effect::None,
            (true, false) => Effect::RunAnalyzerThenAdvance,
            (true, true) => Effect::EndSession,
        })
    }

    /// Pure form of [`SessionState::advance`].
    pub fn advance_phase(&self, summary: &PhaseSummary) -> Result<(SessionState, Effect), SessionError> {
        let mut next = self.clone();
        let effect = next.advance(summary)?;
        Ok((next, effect))
    }

    /// Stores the completed phase's summary and opens the next phase. The new
    /// phase starts with a bot turn, so the returned effect is always
    /// [`Effect::TriggerDriverGeneration`] and the in-flight flag is set.
    pub fn advance(&mut self, summary: &PhaseSummary) -> Result<Effect, SessionError> {
        self.ensure_active()?;
        if summary.phase_index != self.phase_index {
            return Err(SessionError::PhaseMismatch {
                expected: self.phase_index,
                got: summary.phase_index,
            });
        }
        if self.is_final_phase() {
            return Err(SessionError::AlreadyFinal);
        }
        if self.generation_in_flight {
            return Err(SessionError::AlreadyGenerating);
        }
        self.summaries.push(summary.clone());
        self.phase_index += 1;
        self.generation_in_flight = true;
        Ok(Effect::TriggerDriverGeneration)
    }

    /// Accounts for a system notice. Notices take a message id so clients can
    /// deduplicate them, but they never enter the conversational history.
    pub fn record_notice(&mut self, notice: &SystemNotice) -> Result<(), SessionError> {
        self.ensure_active()?;
        if notice.message.sender != Sender::System {
            return Err(SessionError::NoticeSender);
        }
        if notice.cause == NoticeCause::GenerationFailed && !self.generation_in_flight {
            return Err(SessionError::NotGenerating);
        }
        self.check_stamp(notice.message.message_id, notice.message.timestamp)?;
        self.last_message_id = notice.message.message_id;
        self.last_timestamp = notice.message.timestamp;
        if notice.cause == NoticeCause::GenerationFailed {
            self.generation_in_flight = false;
        }
        Ok(())
    }

    fn trigger_if(&mut self, wanted: bool) -> Effect {
        if wanted && !self.generation_in_flight {
            self.generation_in_flight = true;
            Effect::TriggerDriverGeneration
        } else {
            Effect::None
        }
    }

    fn ensure_active(&self) -> Result<(), SessionError> {
        match self.status {
            SessionStatus::Active => Ok(()),
            SessionStatus::Ended => Err(SessionError::SessionClosed),
        }
    }

    fn check_stamp(&self, message_id: u64, timestamp: i64) -> Result<(), SessionError> {
        if message_id <= self.last_message_id {
            return Err(SessionError::NonMonotonicMessageId {
                last: self.last_message_id,
                got: message_id,
            });
        }
        if timestamp < self.last_timestamp {
            return Err(SessionError::NonMonotonicTimestamp {
                last: self.last_timestamp,
                got: timestamp,
            });
        }
        Ok(())
    }

    fn push_message(&mut self, message: ChatMessage) {
        self.last_message_id = message.message_id;
        self.last_timestamp = message.timestamp;
        self.phase_histories[self.phase_index].push(message);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Vec<Participant> {
        vec![
            Participant::new("u1", "Alvin").unwrap(),
            Participant::new("u2", "Emily").unwrap(),
        ]
    }

    fn user_msg(id: u64, from: &str, text: &str, mention: bool) -> ChatEvent {
        ChatEvent::UserMessage {
            message: ChatMessage {
                message_id: id,
                sender: Sender::Participant(ParticipantId::new(from).unwrap()),
                display_name: from.to_string(),
                text: text.to_string(),
                timestamp: id as i64 * 1000,
                phase_index: 0,
            },
            mentions_bot: mention,
        }
    }

    fn stamp(id: u64) -> MessageStamp {
        MessageStamp { message_id: id, timestamp: id as i64 * 1000 }
    }

    fn summary(phase_index: usize) -> PhaseSummary {
        PhaseSummary {
            phase_index,
            phase_id: String::new(),
            text: "s".into(),
            created_at: 0,
            source_message_count: 1,
            degraded: false,
        }
    }

    #[test]
    fn remini_session_has_five_phase_slots() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        assert_eq!(s.phase_histories.len(), 5);
        assert_eq!(s.phase_index, 0);
        assert!(s.summaries.is_empty());
        assert!(!s.generation_in_flight);
        assert_eq!(s.status, SessionStatus::Active);
    }

    #[test]
    fn baseline_session_has_two_phase_slots() {
        let s = SessionState::create(
            "s",
            Condition::Baseline,
            vec![Participant::new("u1", "A").unwrap(), Participant::new("u2", "B").unwrap()],
        )
        .unwrap();
        assert_eq!(s.phase_histories.len(), 2);
        assert_eq!(
            Condition::Baseline.phases(),
            &[PhaseKind::RapportBuilding, PhaseKind::SimplifiedNarration]
        );
    }

    #[test]
    fn duplicate_or_wrong_party_size_is_rejected() {
        let dup = vec![Participant::new("u1", "A").unwrap(), Participant::new("u1", "A").unwrap()];
        assert_eq!(
            SessionState::create("s", Condition::Remini, dup),
            Err(SessionError::DuplicateParticipant)
        );
        let same_name = vec![Participant::new("u1", "A").unwrap(), Participant::new("u2", "A").unwrap()];
        assert_eq!(
            SessionState::create("s", Condition::Remini, same_name),
            Err(SessionError::DuplicateParticipant)
        );
        let mut three = pair();
        three.push(Participant::new("u3", "C").unwrap());
        assert_eq!(
            SessionState::create("s", Condition::Remini, three),
            Err(SessionError::InvalidPartySize(3))
        );
        assert_eq!(ParticipantId::new(" "), Err(SessionError::EmptyParticipantId));
    }

    #[test]
    fn plain_message_is_recorded_without_trigger() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        let (s, effect) = s.apply_event(&user_msg(1, "u1", "hi", false)).unwrap();
        assert_eq!(effect, Effect::None);
        assert_eq!(s.current_history().len(), 1);
        assert!(!s.generation_in_flight);
    }

    #[test]
    fn mention_triggers_once_then_debounces() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        let (s, effect) = s.apply_event(&user_msg(1, "u1", "@bot hi", true)).unwrap();
        assert_eq!(effect, Effect::TriggerDriverGeneration);
        assert!(s.generation_in_flight);
        let (s, effect) = s.apply_event(&user_msg(2, "u2", "@bot hello", true)).unwrap();
        assert_eq!(effect, Effect::None);
        assert_eq!(s.current_history().len(), 2);
    }

    #[test]
    fn continue_while_in_flight_changes_nothing() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        let (s, _) = s.apply_event(&user_msg(1, "u1", "@bot", true)).unwrap();
        let (s, _) = s
            .commit_driver_output(&DriverOutput::new("Hello!", false), stamp(2))
            .unwrap();
        let (s, effect) = s
            .apply_event(&ChatEvent::ContinuePressed {
                participant: ParticipantId::new("u2").unwrap(),
                target_bot_message: 2,
            })
            .unwrap();
        assert_eq!(effect, Effect::TriggerDriverGeneration);
        let press = ChatEvent::ContinuePressed {
            participant: ParticipantId::new("u1").unwrap(),
            target_bot_message: 2,
        };
        let (after, effect) = s.apply_event(&press).unwrap();
        assert_eq!(effect, Effect::None);
        assert_eq!(after, s);
    }

    #[test]
    fn continue_must_target_a_bot_message() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        let (s, _) = s.apply_event(&user_msg(1, "u1", "hi", false)).unwrap();
        let press = ChatEvent::ContinuePressed {
            participant: ParticipantId::new("u1").unwrap(),
            target_bot_message: 1,
        };
        assert_eq!(s.apply_event(&press), Err(SessionError::UnknownBotMessage(1)));
    }

    #[test]
    fn unknown_sender_and_closed_session_are_errors() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        assert_eq!(
            s.apply_event(&user_msg(1, "u9", "hi", false)).unwrap_err(),
            SessionError::UnknownParticipant("u9".into())
        );
        let (ended, effect) = s.apply_event(&ChatEvent::SessionEnded).unwrap();
        assert_eq!(effect, Effect::None);
        assert_eq!(ended.status, SessionStatus::Ended);
        assert_eq!(
            ended.apply_event(&user_msg(1, "u1", "hi", false)).unwrap_err(),
            SessionError::SessionClosed
        );
        // Ending twice is accepted and changes nothing.
        let (again, _) = ended.apply_event(&ChatEvent::SessionEnded).unwrap();
        assert_eq!(again, ended);
    }

    #[test]
    fn message_ids_and_timestamps_must_move_forward() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        let (s, _) = s.apply_event(&user_msg(5, "u1", "a", false)).unwrap();
        assert_eq!(
            s.apply_event(&user_msg(5, "u2", "b", false)).unwrap_err(),
            SessionError::NonMonotonicMessageId { last: 5, got: 5 }
        );
        let mut early = user_msg(6, "u2", "b", false);
        if let ChatEvent::UserMessage { message, .. } = &mut early {
            message.timestamp = 10;
        }
        assert!(matches!(
            s.apply_event(&early),
            Err(SessionError::NonMonotonicTimestamp { .. })
        ));
    }

    #[test]
    fn commit_outcomes() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        assert_eq!(
            s.commit_driver_output(&DriverOutput::new("x", false), stamp(1)).unwrap_err(),
            SessionError::NotGenerating
        );
        let (s, _) = s.apply_event(&user_msg(1, "u1", "@bot", true)).unwrap();
        let (plain, effect) = s
            .commit_driver_output(&DriverOutput::new("Thanks for sharing!", false), stamp(2))
            .unwrap();
        assert_eq!(effect, Effect::None);
        assert_eq!(plain.current_history().last().unwrap().sender, Sender::Bot);
        assert!(!plain.generation_in_flight);

        let (done, effect) = s
            .commit_driver_output(&DriverOutput::new("Wonderful memories!", true), stamp(2))
            .unwrap();
        assert_eq!(effect, Effect::RunAnalyzerThenAdvance);
        assert_eq!(done.current_history().len(), 2);

        let (silent, effect) = s.commit_driver_output(&DriverOutput::new("", true), stamp(2)).unwrap();
        assert_eq!(effect, Effect::RunAnalyzerThenAdvance);
        assert_eq!(silent.current_history().len(), 1);
        assert_eq!(silent.last_message_id, 1);

        let leaky = DriverOutput { text: "ok PHASE DONE".into(), phase_done: true };
        assert_eq!(
            s.commit_driver_output(&leaky, stamp(2)).unwrap_err(),
            SessionError::SentinelInOutput
        );
    }

    #[test]
    fn final_phase_done_ends_the_session() {
        let mut s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        for phase in 0..4 {
            s.generation_in_flight = false;
            s.advance(&summary(phase)).unwrap();
        }
        assert_eq!(s.phase(), PhaseKind::Summary);
        let (_, effect) = s
            .commit_driver_output(&DriverOutput::new("Goodbye!", true), stamp(1))
            .unwrap();
        assert_eq!(effect, Effect::EndSession);
    }

    #[test]
    fn advance_rules() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        let (next, effect) = s.advance_phase(&summary(0)).unwrap();
        assert_eq!(next.phase_index, 1);
        assert_eq!(next.summaries.len(), 1);
        assert_eq!(effect, Effect::TriggerDriverGeneration);
        assert!(next.generation_in_flight);

        assert_eq!(
            s.advance_phase(&summary(2)).unwrap_err(),
            SessionError::PhaseMismatch { expected: 0, got: 2 }
        );

        let mut last = s.clone();
        last.phase_index = 4;
        assert_eq!(last.advance_phase(&summary(4)).unwrap_err(), SessionError::AlreadyFinal);
    }

    #[test]
    fn failed_generation_notice_clears_in_flight() {
        let s = SessionState::create("s", Condition::Remini, pair()).unwrap();
        let (mut s, _) = s.apply_event(&user_msg(1, "u1", "@bot", true)).unwrap();
        let notice = SystemNotice {
            message: ChatMessage {
                message_id: 2,
                sender: Sender::System,
                display_name: "system".into(),
                text: "unavailable".into(),
                timestamp: 2000,
                phase_index: 0,
            },
            cause: NoticeCause::GenerationFailed,
        };
        s.record_notice(&notice).unwrap();
        assert!(!s.generation_in_flight);
        assert_eq!(s.next_message_id(), 3);
        assert!(s.current_history().len() == 1);
        assert_eq!(s.record_notice(&notice), Err(SessionError::NotGenerating));
    }
}
