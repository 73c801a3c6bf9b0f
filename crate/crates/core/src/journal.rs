//! Append-only session journal and replay.
//!
//! A journal is newline-delimited JSON. The first record is a header naming
//! the schema version, condition and participants; every later record is
//! one state transition (or an audit-only provider exchange). Replaying the
//! records through the state machine reproduces the live session.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conversation::{
    ChatEvent, Condition, MessageStamp, Participant, SessionError, SessionState, SystemNotice,
};
use crate::llm::{DriverOutput, PhaseSummary, ProviderExchange};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalHeader {
    pub schema_version: u32,
    pub condition: Condition,
    pub participants: Vec<Participant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record_kind", content = "payload", rename_all = "snake_case")]
pub enum RecordBody {
    Header(JournalHeader),
    Event(ChatEvent),
    DriverOutput { output: DriverOutput, stamp: MessageStamp },
    Summary(PhaseSummary),
    ProviderExchange(ProviderExchange),
    SystemNotice(SystemNotice),
}

impl RecordBody {
    pub fn kind(&self) -> &'static str {
        match self {
            RecordBody::Header(_) => "header",
            RecordBody::Event(_) => "event",
            RecordBody::DriverOutput { .. } => "driver_output",
            RecordBody::Summary(_) => "summary",
            RecordBody::ProviderExchange(_) => "provider_exchange",
            RecordBody::SystemNotice(_) => "system_notice",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalRecord {
    pub seq: u64,
    pub session_id: String,
    #[serde(flatten)]
    pub body: RecordBody,
    pub wall_ts: i64,
}

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("sequence gap: expected {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("storage failure: {0}")]
    StorageFailure(#[from] io::Error),
    #[error("record {seq} is corrupt: {reason}")]
    CorruptRecord { seq: u64, reason: String },
}

/// Where serialized records end up. `write_line` must not return before the
/// line is durable.
pub trait JournalStore: Send {
    fn write_line(&mut self, line: &str) -> io::Result<()>;
}

pub struct FileStore {
    file: File,
}

impl FileStore {
    /// Opens `path` for appending, creating it if needed.
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file })
    }
}

impl JournalStore for FileStore {
    fn write_line(&mut self, line: &str) -> io::Result<()> {
        let mut buf = Vec::with_capacity(line.len() + 1);
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
        self.file.write_all(&buf)?;
        self.file.sync_data()
    }
}

/// Keeps lines in memory only.
#[derive(Debug, Default)]
pub struct MemoryStore {
    pub lines: Vec<String>,
}

impl JournalStore for MemoryStore {
    fn write_line(&mut self, line: &str) -> io::Result<()> {
        self.lines.push(line.to_string());
        Ok(())
    }
}

/// Single-writer journal for one session.
pub struct Journal {
    session_id: String,
    last_seq: u64,
    store: Box<dyn JournalStore>,
    records: Vec<JournalRecord>,
}

impl Journal {
    pub fn new(session_id: impl Into<String>, store: Box<dyn JournalStore>) -> Self {
        Self {
            session_id: session_id.into(),
            last_seq: 0,
            store,
            records: Vec::new(),
        }
    }

    pub fn in_memory(session_id: impl Into<String>) -> Self {
        Self::new(session_id, Box::new(MemoryStore::default()))
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Everything written so far, in order.
    pub fn records(&self) -> &[JournalRecord] {
        &self.records
    }

    /// Writes `record`, which must carry the next sequence number.
    pub fn append(&mut self, record: JournalRecord) -> Result<(), JournalError> {
        let expected = self.last_seq + 1;
        if record.seq != expected {
            return Err(JournalError::SequenceGap { expected, got: record.seq });
        }
        let line = serde_json::to_string(&record).map_err(io::Error::other)?;
        self.store.write_line(&line)?;
        self.last_seq = record.seq;
        self.records.push(record);
        Ok(())
    }

    /// Appends `body` under the next sequence number and returns that number.
    pub fn record(&mut self, body: RecordBody, wall_ts: i64) -> Result<u64, JournalError> {
        let seq = self.last_seq + 1;
        self.append(JournalRecord {
            seq,
            session_id: self.session_id.clone(),
            body,
            wall_ts,
        })?;
        Ok(seq)
    }
}

/// Parses a journal. Blank lines are skipped; the sequence must be gapless
/// from 1.
pub fn read_records(reader: impl BufRead) -> Result<Vec<JournalRecord>, JournalError> {
    let mut records: Vec<JournalRecord> = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let expected = records.last().map_or(1, |r| r.seq + 1);
        let record: JournalRecord = serde_json::from_str(&line).map_err(|e| JournalError::CorruptRecord {
            seq: expected,
            reason: e.to_string(),
        })?;
        if record.seq != expected {
            return Err(JournalError::CorruptRecord {
                seq: expected,
                reason: format!("found seq {} where {expected} was expected", record.seq),
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_journal_file(path: &Path) -> Result<Vec<JournalRecord>, JournalError> {
    read_records(BufReader::new(File::open(path)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("journal contains no session")]
    NoSession,
    #[error("record {seq} cannot be replayed: {reason}")]
    CorruptRecord { seq: u64, reason: String },
}

/// Rebuilds the session state by re-applying every record in order.
pub fn replay(records: &[JournalRecord]) -> Result<SessionState, ReplayError> {
    let (first, rest) = records.split_first().ok_or(ReplayError::NoSession)?;
    let RecordBody::Header(header) = &first.body else {
        return Err(ReplayError::CorruptRecord {
            seq: first.seq,
            reason: "first record is not a header".into(),
        });
    };
    let corrupt = |seq: u64, err: SessionError| ReplayError::CorruptRecord {
        seq,
        reason: err.to_string(),
    };
    if header.schema_version != SCHEMA_VERSION {
        return Err(ReplayError::CorruptRecord {
            seq: first.seq,
            reason: format!("unsupported schema version {}", header.schema_version),
        });
    }
    let mut state = SessionState::create(first.session_id.clone(), header.condition, header.participants.clone())
        .map_err(|e| corrupt(first.seq, e))?;

    for record in rest {
        let outcome = match &record.body {
            RecordBody::Header(_) => Err(ReplayError::CorruptRecord {
                seq: record.seq,
                reason: "unexpected second header".into(),
            }),
            RecordBody::Event(event) => state.apply(event).map(drop).map_err(|e| corrupt(record.seq, e)),
            RecordBody::DriverOutput { output, stamp } => {
                state.commit(output, *stamp).map(drop).map_err(|e| corrupt(record.seq, e))
            }
            RecordBody::Summary(summary) => state.advance(summary).map(drop).map_err(|e| corrupt(record.seq, e)),
            RecordBody::ProviderExchange(_) => Ok(()),
            RecordBody::SystemNotice(notice) => state.record_notice(notice).map_err(|e| corrupt(record.seq, e)),
        };
        outcome?;
    }
    Ok(state)
}
