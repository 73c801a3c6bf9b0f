//! Wire frames and their conversion into session events.

use remini_core::conversation::{ChatEvent, ChatMessage, MessageStamp, ParticipantId, Sender, SessionState};
use serde::{Deserialize, Serialize};

use crate::error::GatewayError;
use crate::mention::MentionDetector;

pub use remini_core::runner::{Affordances, OutboundFrame};

pub const DEFAULT_MAX_MESSAGE_CHARS: usize = 8_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Text,
    /// `body` holds the id of the bot message the button belongs to.
    ContinuePress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboundFrame {
    pub session_id: String,
    pub sender: ParticipantId,
    pub kind: FrameKind,
    #[serde(default)]
    pub body: String,
    /// Client clock reading; advisory only, never used for ordering.
    #[serde(default)]
    pub client_ts: Option<i64>,
}

/// Converts a frame into an event using server-assigned identity. The
/// caller has already routed the frame to `state`'s session.
pub fn ingest(
    frame: &InboundFrame,
    state: &SessionState,
    detector: &MentionDetector,
    stamp: MessageStamp,
    max_message_chars: usize,
) -> Result<ChatEvent, GatewayError> {
    if frame.session_id != state.session_id || !state.is_active() {
        return Err(GatewayError::UnknownSession(frame.session_id.clone()));
    }
    let participant = state
        .participant(&frame.sender)
        .ok_or_else(|| GatewayError::UnknownParticipant(frame.sender.to_string()))?;
    match frame.kind {
        FrameKind::Text => {
            let len = frame.body.chars().count();
            if len > max_message_chars {
                return Err(GatewayError::OversizeMessage { len, max: max_message_chars });
            }
            if frame.body.trim().is_empty() {
                return Err(GatewayError::InvalidFrame("message body is empty".into()));
            }
            Ok(ChatEvent::UserMessage {
                mentions_bot: detector.detect(&frame.body),
                message: ChatMessage {
                    message_id: stamp.message_id,
                    sender: Sender::Participant(participant.id.clone()),
                    display_name: participant.display_name.clone(),
                    text: frame.body.clone(),
                    timestamp: stamp.timestamp,
                    phase_index: state.phase_index,
                },
            })
        }
        FrameKind::ContinuePress => {
            let target = frame
                .body
                .trim()
                .parse::<u64>()
                .map_err(|_| GatewayError::InvalidFrame(format!("not a message id: {:?}", frame.body)))?;
            Ok(ChatEvent::ContinuePressed {
                participant: participant.id.clone(),
                target_bot_message: target,
            })
        }
    }
}
