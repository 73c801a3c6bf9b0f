//! Network edge for reminiscence chat sessions: mention detection, frame
//! ingestion, one serial actor per session, and an HTTP/NDJSON API.

pub mod adapter;
pub mod error;
pub mod frames;
pub mod mention;
pub mod server;
pub mod session;

pub use error::GatewayError;
pub use frames::{ingest, FrameKind, InboundFrame, OutboundFrame, DEFAULT_MAX_MESSAGE_CHARS};
pub use mention::{detect_mention, MentionDetector, DEFAULT_MENTION_TOKEN};
pub use server::{router, serve, CreateSession, CreatedSession, Gateway};
pub use session::{Ack, GatewayConfig, JournalLocation, SessionHandle, PAUSED_NOTICE};
