//! Session engine for a two-person reminiscence chatbot: phase state
//! machine, prompt corpus and assembly, language-model pipelines, journaling
//! and replay, and the chat-log analytics computed from journals.

pub mod analytics;
pub mod clock;
pub mod conversation;
pub mod journal;
pub mod llm;
pub mod prompts;
pub mod runner;
pub mod transcript;

pub use conversation::{
    ChatEvent, ChatMessage, Condition, Effect, MessageStamp, Participant, ParticipantId, PhaseKind,
    Sender, SessionError, SessionState, SessionStatus,
};
pub use journal::{Journal, JournalRecord, RecordBody};
pub use llm::{CompletionParams, CompletionProvider, DriverOutput, PhaseSummary, ScriptedProvider};
pub use prompts::{PromptAssembler, PromptCorpus};
pub use runner::{OutboundFrame, RunnerParts, SessionRunner};
