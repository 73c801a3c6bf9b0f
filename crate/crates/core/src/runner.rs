//! Drives one session: applies events, runs the pipelines the resulting
//! effects ask for, journals every transition and emits outbound frames.
//!
//! Each state transition is computed on a copy, journaled, and only then
//! adopted, so the journal never lags the live state.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::conversation::{
    ChatEvent, ChatMessage, Condition, Effect, MessageStamp, NoticeCause, Participant, Sender,
    SessionError, SessionState, SystemNotice,
};
use crate::journal::{Journal, JournalError, JournalHeader, RecordBody, SCHEMA_VERSION};
use crate::llm::{self, CompletionParams, CompletionProvider, DriveError, DriverOutput, PhaseSummary, ProviderExchange, SummaryRequest};
use crate::prompts::{AssemblyError, PromptAssembler, PromptCorpus};

pub const UNAVAILABLE_NOTICE: &str = "Remini is unavailable, try again";
pub const CLOSING_NOTICE: &str = "This conversation has ended. Thank you both for sharing.";
pub const SYSTEM_DISPLAY_NAME: &str = "system";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Affordances {
    pub continue_button: bool,
}

/// A message as delivered to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundFrame {
    pub session_id: String,
    pub message: ChatMessage,
    pub affordances: Affordances,
}

#[derive(Debug, Clone, Default)]
pub struct RunnerConfig {
    pub driver_params: CompletionParams,
    pub analyzer_params: CompletionParams,
    /// Character cap on assembled prompts.
    pub char_budget: Option<usize>,
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
}

/// A driver call that failed and was turned into a system notice.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationFailure {
    /// Sequence number of the notice record.
    pub seq: u64,
    pub error: DriveError,
}

/// A driver call detached from the runner, so it can run on another thread.
pub struct DriveJob {
    prompt: Result<String, DriveError>,
    phase_index: usize,
    provider: Arc<dyn CompletionProvider>,
    params: CompletionParams,
}

pub struct DriveDone {
    pub exchanges: Vec<ProviderExchange>,
    pub result: Result<DriverOutput, DriveError>,
}

impl DriveJob {
    pub fn run(self) -> DriveDone {
        let mut exchanges = Vec::new();
        let result = self.prompt.and_then(|prompt| {
            llm::run_driver(&prompt, self.provider.as_ref(), &self.params, self.phase_index, &mut exchanges)
        });
        DriveDone { exchanges, result }
    }
}

/// An analyzer call detached from the runner.
pub struct SummaryJob {
    request: SummaryRequest,
    provider: Arc<dyn CompletionProvider>,
    params: CompletionParams,
}

pub struct SummaryDone {
    pub exchanges: Vec<ProviderExchange>,
    pub summary: PhaseSummary,
}

impl SummaryJob {
    pub fn run(self) -> SummaryDone {
        let mut exchanges = Vec::new();
        let summary = self.request.run(self.provider.as_ref(), &self.params, &mut exchanges);
        SummaryDone { exchanges, summary }
    }
}

pub enum Work {
    Drive(DriveJob),
    Summarize(SummaryJob),
}

pub struct SessionRunner {
    state: SessionState,
    corpus: Arc<PromptCorpus>,
    driver: Arc<dyn CompletionProvider>,
    analyzer: Arc<dyn CompletionProvider>,
    config: RunnerConfig,
    journal: Journal,
    clock: Box<dyn Clock>,
    trace: Option<Vec<SessionState>>,
}

impl std::fmt::Debug for SessionRunner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionRunner")
            .field("session_id", &self.state.session_id)
            .field("phase_index", &self.state.phase_index)
            .finish_non_exhaustive()
    }
}

pub struct RunnerParts {
    pub corpus: Arc<PromptCorpus>,
    pub driver: Arc<dyn CompletionProvider>,
    pub analyzer: Arc<dyn CompletionProvider>,
    pub config: RunnerConfig,
    pub clock: Box<dyn Clock>,
}

impl SessionRunner {
    /// Creates the session and journals its header and start event.
    pub fn start(
        journal: Journal,
        condition: Condition,
        participants: Vec<Participant>,
        parts: RunnerParts,
    ) -> Result<Self, RunnerError> {
        let state = SessionState::create(journal.session_id(), condition, participants)?;
        let mut runner = Self {
            state,
            corpus: parts.corpus,
            driver: parts.driver,
            analyzer: parts.analyzer,
            config: parts.config,
            journal,
            clock: parts.clock,
            trace: None,
        };
        let header = RecordBody::Header(JournalHeader {
            schema_version: SCHEMA_VERSION,
            condition,
            participants: runner.state.participants.to_vec(),
        });
        let initial = runner.state.clone();
        runner.commit(header, initial)?;
        runner.accept(ChatEvent::SessionStarted, &mut |_| {})?;
        Ok(runner)
    }

    /// Keeps a copy of the state after every journal record, so tests can
    /// compare prefix replays against the live run.
    pub fn record_trace(&mut self) {
        self.trace = Some(vec![self.state.clone(); self.journal.records().len()]);
    }

    pub fn trace(&self) -> Option<&[SessionState]> {
        self.trace.as_deref()
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn corpus(&self) -> &PromptCorpus {
        &self.corpus
    }

    /// Identity for the next message, taken from this runner's clock.
    pub fn stamp(&mut self) -> MessageStamp {
        MessageStamp {
            message_id: self.state.next_message_id(),
            timestamp: self.clock.now_ms().max(self.state.last_timestamp),
        }
    }

    /// Applies an inbound event and returns the effect without acting on it.
    /// A user message is echoed to `emit`.
    pub fn accept(
        &mut self,
        event: ChatEvent,
        emit: &mut dyn FnMut(OutboundFrame),
    ) -> Result<Effect, RunnerError> {
        let (next, effect) = self.state.apply_event(&event)?;
        let echo = match &event {
            ChatEvent::UserMessage { .. } => next.current_history().last().cloned(),
            _ => None,
        };
        self.commit(RecordBody::Event(event), next)?;
        if let Some(message) = echo {
            emit(self.frame(message, false));
        }
        Ok(effect)
    }

    /// Carries out `effect` and everything it leads to: driver calls, phase
    /// summaries and advances, the opening turn of a new phase, and the end of
    /// the session. Provider failures become system notices.
    pub fn resolve(
        &mut self,
        effect: Effect,
        emit: &mut dyn FnMut(OutboundFrame),
    ) -> Result<Vec<GenerationFailure>, RunnerError> {
        let mut failures = Vec::new();
        let mut effect = effect;
        while let Some(work) = self.next_work(effect, emit)? {
            effect = match work {
                Work::Drive(job) => match self.finish_drive(job.run(), emit)? {
                    Ok(next) => next,
                    Err(failure) => {
                        failures.push(failure);
                        Effect::None
                    }
                },
                Work::Summarize(job) => self.finish_summary(job.run())?,
            };
        }
        Ok(failures)
    }

    /// `accept` followed by `resolve`.
    pub fn submit(
        &mut self,
        event: ChatEvent,
        emit: &mut dyn FnMut(OutboundFrame),
    ) -> Result<Vec<GenerationFailure>, RunnerError> {
        let effect = self.accept(event, emit)?;
        self.resolve(effect, emit)
    }

    /// Ends the session from outside (operator or client request).
    pub fn end(&mut self, emit: &mut dyn FnMut(OutboundFrame)) -> Result<(), RunnerError> {
        if self.state.is_active() {
            self.close(emit)?;
        }
        Ok(())
    }

    /// Turns an effect into the provider work it needs. Ending the session
    /// needs none and happens here.
    pub fn next_work(
        &mut self,
        effect: Effect,
        emit: &mut dyn FnMut(OutboundFrame),
    ) -> Result<Option<Work>, RunnerError> {
        let assembler = PromptAssembler::new(&self.corpus).with_char_budget(self.config.char_budget);
        match effect {
            Effect::None => Ok(None),
            Effect::TriggerDriverGeneration => {
                let prompt = llm::driver_prompt(&self.state, &assembler);
                Ok(Some(Work::Drive(DriveJob {
                    prompt,
                    phase_index: self.state.phase_index,
                    provider: self.driver.clone(),
                    params: self.config.driver_params.clone(),
                })))
            }
            Effect::RunAnalyzerThenAdvance => {
                let created_at = self.clock.now_ms();
                let request = SummaryRequest::new(&self.state, &assembler, self.state.phase_index, created_at)?;
                Ok(Some(Work::Summarize(SummaryJob {
                    request,
                    provider: self.analyzer.clone(),
                    params: self.config.analyzer_params.clone(),
                })))
            }
            Effect::EndSession => {
                self.close(emit)?;
                Ok(None)
            }
        }
    }

    /// Commits a finished driver call. A failed call becomes a system
    /// notice. If the session ended while the call ran, only the exchanges
    /// are journaled.
    pub fn finish_drive(
        &mut self,
        done: DriveDone,
        emit: &mut dyn FnMut(OutboundFrame),
    ) -> Result<Result<Effect, GenerationFailure>, RunnerError> {
        self.journal_exchanges(done.exchanges)?;
        if !self.state.is_active() {
            return Ok(Ok(Effect::None));
        }
        match done.result {
            Ok(output) => {
                let stamp = self.stamp();
                let (next, effect) = self.state.commit_driver_output(&output, stamp)?;
                let message = (!output.text.is_empty()).then(|| next.current_history().last().cloned());
                self.commit(RecordBody::DriverOutput { output, stamp }, next)?;
                if let Some(Some(message)) = message {
                    emit(self.frame(message, effect != Effect::EndSession));
                }
                Ok(Ok(effect))
            }
            Err(error) => {
                tracing::warn!(session = %self.state.session_id, %error, "driver generation failed");
                let seq = self.notice(UNAVAILABLE_NOTICE, NoticeCause::GenerationFailed, emit)?;
                Ok(Err(GenerationFailure { seq, error }))
            }
        }
    }

    /// Stores a finished phase summary and advances the phase.
    pub fn finish_summary(&mut self, done: SummaryDone) -> Result<Effect, RunnerError> {
        self.journal_exchanges(done.exchanges)?;
        if !self.state.is_active() {
            return Ok(Effect::None);
        }
        let (next, effect) = self.state.advance_phase(&done.summary)?;
        self.commit(RecordBody::Summary(done.summary), next)?;
        Ok(effect)
    }

    fn close(&mut self, emit: &mut dyn FnMut(OutboundFrame)) -> Result<(), RunnerError> {
        self.notice(CLOSING_NOTICE, NoticeCause::SessionClosing, emit)?;
        self.accept(ChatEvent::SessionEnded, emit)?;
        Ok(())
    }

    fn notice(
        &mut self,
        text: &str,
        cause: NoticeCause,
        emit: &mut dyn FnMut(OutboundFrame),
    ) -> Result<u64, RunnerError> {
        let stamp = self.stamp();
        let notice = SystemNotice {
            message: ChatMessage {
                message_id: stamp.message_id,
                sender: Sender::System,
                display_name: SYSTEM_DISPLAY_NAME.to_string(),
                text: text.to_string(),
                timestamp: stamp.timestamp,
                phase_index: self.state.phase_index,
            },
            cause,
        };
        let mut next = self.state.clone();
        next.record_notice(&notice)?;
        let message = notice.message.clone();
        let seq = self.commit(RecordBody::SystemNotice(notice), next)?;
        emit(self.frame(message, false));
        Ok(seq)
    }

    fn journal_exchanges(&mut self, exchanges: Vec<ProviderExchange>) -> Result<(), RunnerError> {
        for exchange in exchanges {
            let unchanged = self.state.clone();
            self.commit(RecordBody::ProviderExchange(exchange), unchanged)?;
        }
        Ok(())
    }

    /// Journals `body` and adopts `next` as the live state.
    fn commit(&mut self, body: RecordBody, next: SessionState) -> Result<u64, RunnerError> {
        let wall_ts = self.clock.now_ms();
        let seq = self.journal.record(body, wall_ts)?;
        self.state = next;
        if let Some(trace) = &mut self.trace {
            trace.push(self.state.clone());
        }
        Ok(seq)
    }

    fn frame(&self, message: ChatMessage, continue_button: bool) -> OutboundFrame {
        OutboundFrame {
            session_id: self.state.session_id.clone(),
            message,
            affordances: Affordances { continue_button },
        }
    }
}
