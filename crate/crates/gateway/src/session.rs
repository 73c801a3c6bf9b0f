//! One actor thread per session. The actor owns the session runner and
//! applies commands strictly in arrival order; provider calls run on worker
//! threads and report back through the same queue, so frames that arrive
//! mid-generation are still applied (and ignored as triggers) immediately.

use std::collections::BTreeMap;
use std::io;
use std::path::PathBuf;
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread;

use remini_core::clock::{Clock, SystemClock};
use remini_core::conversation::{ChatMessage, Condition, Effect, Participant, ParticipantId, Sender};
use remini_core::journal::{FileStore, Journal, JournalStore};
use remini_core::llm::CompletionProvider;
use remini_core::runner::{
    Affordances, DriveDone, OutboundFrame, RunnerConfig, RunnerError, RunnerParts, SessionRunner, SummaryDone, Work,
    SYSTEM_DISPLAY_NAME,
};
use remini_core::transcript::Transcript;
use remini_core::PromptCorpus;
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, oneshot};

use crate::error::GatewayError;
use crate::frames::{ingest, InboundFrame, DEFAULT_MAX_MESSAGE_CHARS};
use crate::mention::MentionDetector;

pub const PAUSED_NOTICE: &str = "This session is paused because its journal could not be written.";

const BROADCAST_CAPACITY: usize = 1024;

pub type ClockFactory = Arc<dyn Fn() -> Box<dyn Clock> + Send + Sync>;
pub type StoreFactory = Arc<dyn Fn(&str) -> io::Result<Box<dyn JournalStore>> + Send + Sync>;

/// Where session journals are written.
#[derive(Clone, Default)]
pub enum JournalLocation {
    #[default]
    Memory,
    /// `<dir>/<session_id>.ndjson`.
    Dir(PathBuf),
    /// Store built per session id.
    Custom(StoreFactory),
}

#[derive(Clone)]
pub struct GatewayConfig {
    pub corpus: Arc<PromptCorpus>,
    pub driver: Arc<dyn CompletionProvider>,
    pub analyzer: Arc<dyn CompletionProvider>,
    pub runner: RunnerConfig,
    pub journal: JournalLocation,
    pub mention: MentionDetector,
    pub max_message_chars: usize,
    pub clock: ClockFactory,
}

impl GatewayConfig {
    pub fn new(
        corpus: Arc<PromptCorpus>,
        driver: Arc<dyn CompletionProvider>,
        analyzer: Arc<dyn CompletionProvider>,
    ) -> Self {
        Self {
            corpus,
            driver,
            analyzer,
            runner: RunnerConfig::default(),
            journal: JournalLocation::Memory,
            mention: MentionDetector::default(),
            max_message_chars: DEFAULT_MAX_MESSAGE_CHARS,
            clock: Arc::new(|| Box::new(SystemClock::default())),
        }
    }
}

/// Reply to an accepted frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    /// Id of the stored participant message; `None` for continue presses.
    pub message_id: Option<u64>,
    pub generation_started: bool,
}

/// What subscribers receive.
#[derive(Debug, Clone)]
pub enum Broadcast {
    Frame(OutboundFrame),
    Closed,
}

enum Command {
    Frame(InboundFrame, oneshot::Sender<Result<Ack, GatewayError>>),
    End(oneshot::Sender<Result<(), GatewayError>>),
    Transcript(oneshot::Sender<Transcript>),
    DriveDone(DriveDone),
    SummaryDone(SummaryDone),
    Shutdown,
}

#[derive(Default)]
struct Outbox {
    frames: Vec<OutboundFrame>,
    closed: bool,
}

/// Frames already sent plus the live feed. Publishing and subscribing take
/// the same lock, so a subscriber sees every frame exactly once.
struct Fanout {
    outbox: Mutex<Outbox>,
    live: broadcast::Sender<Broadcast>,
}

impl Fanout {
    fn publish(&self, frame: OutboundFrame) {
        let mut outbox = self.outbox.lock().unwrap();
        outbox.frames.push(frame.clone());
        let _ = self.live.send(Broadcast::Frame(frame));
    }

    fn close(&self) {
        let mut outbox = self.outbox.lock().unwrap();
        if !outbox.closed {
            outbox.closed = true;
            let _ = self.live.send(Broadcast::Closed);
        }
    }
}

/// A subscription: frames sent so far, then the live feed.
pub struct Subscription {
    pub history: Vec<OutboundFrame>,
    pub closed: bool,
    pub live: broadcast::Receiver<Broadcast>,
}

pub struct SessionHandle {
    id: String,
    condition: Condition,
    participants: Vec<Participant>,
    tokens: BTreeMap<String, ParticipantId>,
    commands: mpsc::Sender<Command>,
    fanout: Arc<Fanout>,
}

impl SessionHandle {
    /// Starts the session and its actor. Returns the handle and a join token
    /// per participant id.
    pub fn spawn(
        session_id: String,
        condition: Condition,
        participants: Vec<Participant>,
        config: &GatewayConfig,
    ) -> Result<(Self, BTreeMap<String, String>), GatewayError> {
        let internal = |e: io::Error| GatewayError::Internal(e.to_string());
        let journal = match &config.journal {
            JournalLocation::Memory => Journal::in_memory(session_id.clone()),
            JournalLocation::Dir(dir) => {
                let store = FileStore::open(&dir.join(format!("{session_id}.ndjson"))).map_err(internal)?;
                Journal::new(session_id.clone(), Box::new(store))
            }
            JournalLocation::Custom(factory) => Journal::new(session_id.clone(), factory(&session_id).map_err(internal)?),
        };
        let parts = RunnerParts {
            corpus: config.corpus.clone(),
            driver: config.driver.clone(),
            analyzer: config.analyzer.clone(),
            config: config.runner.clone(),
            clock: (config.clock)(),
        };
        let runner = SessionRunner::start(journal, condition, participants.clone(), parts).map_err(|e| match e {
            RunnerError::Session(e) => GatewayError::InvalidRequest(e.to_string()),
            other => GatewayError::Internal(other.to_string()),
        })?;

        let mut tokens = BTreeMap::new();
        let mut join_tokens = BTreeMap::new();
        for p in &participants {
            let token = uuid::Uuid::new_v4().simple().to_string();
            tokens.insert(token.clone(), p.id.clone());
            join_tokens.insert(p.id.to_string(), token);
        }

        let (commands, inbox) = mpsc::channel();
        let fanout = Arc::new(Fanout {
            outbox: Mutex::new(Outbox::default()),
            live: broadcast::channel(BROADCAST_CAPACITY).0,
        });
        let actor = Actor {
            runner,
            detector: config.mention.clone(),
            max_message_chars: config.max_message_chars,
            paused: None,
            commands: commands.clone(),
            fanout: fanout.clone(),
        };
        thread::Builder::new()
            .name(format!("session-{session_id}"))
            .spawn(move || actor.run(inbox))
            .map_err(|e| GatewayError::Internal(e.to_string()))?;

        Ok((
            Self {
                id: session_id,
                condition,
                participants,
                tokens,
                commands,
                fanout,
            },
            join_tokens,
        ))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn condition(&self) -> Condition {
        self.condition
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    /// Participant owning `token`.
    pub fn authorize(&self, token: &str) -> Result<&ParticipantId, GatewayError> {
        self.tokens.get(token).ok_or(GatewayError::Unauthorized)
    }

    pub async fn submit(&self, frame: InboundFrame) -> Result<Ack, GatewayError> {
        let (reply, answer) = oneshot::channel();
        self.send(Command::Frame(frame, reply))?;
        answer.await.map_err(|_| self.gone())?
    }

    pub async fn end(&self) -> Result<(), GatewayError> {
        let (reply, answer) = oneshot::channel();
        self.send(Command::End(reply))?;
        answer.await.map_err(|_| self.gone())?
    }

    pub async fn transcript(&self) -> Result<Transcript, GatewayError> {
        let (reply, answer) = oneshot::channel();
        self.send(Command::Transcript(reply))?;
        answer.await.map_err(|_| self.gone())
    }

    pub fn subscribe(&self) -> Subscription {
        let outbox = self.fanout.outbox.lock().unwrap();
        Subscription {
            history: outbox.frames.clone(),
            closed: outbox.closed,
            live: self.fanout.live.subscribe(),
        }
    }

    /// Frames sent after `message_id`, for subscribers that fell behind.
    pub fn frames_after(&self, message_id: u64) -> Vec<OutboundFrame> {
        let outbox = self.fanout.outbox.lock().unwrap();
        outbox
            .frames
            .iter()
            .filter(|f| f.message.message_id > message_id)
            .cloned()
            .collect()
    }

    fn send(&self, command: Command) -> Result<(), GatewayError> {
        self.commands.send(command).map_err(|_| self.gone())
    }

    fn gone(&self) -> GatewayError {
        GatewayError::Internal(format!("session {} actor stopped", self.id))
    }
}

impl Drop for SessionHandle {
    fn drop(&mut self) {
        let _ = self.commands.send(Command::Shutdown);
    }
}

struct Actor {
    runner: SessionRunner,
    detector: MentionDetector,
    max_message_chars: usize,
    paused: Option<String>,
    commands: mpsc::Sender<Command>,
    fanout: Arc<Fanout>,
}

impl Actor {
    fn run(mut self, inbox: mpsc::Receiver<Command>) {
        while let Ok(command) = inbox.recv() {
            match command {
                Command::Frame(frame, reply) => {
                    let _ = reply.send(self.frame(frame));
                }
                Command::End(reply) => {
                    let _ = reply.send(self.end());
                }
                Command::Transcript(reply) => {
                    let _ = reply.send(Transcript::from_state(self.runner.state()));
                }
                Command::DriveDone(done) => {
                    let fanout = self.fanout.clone();
                    let result = self.runner.finish_drive(done, &mut |f| fanout.publish(f));
                    match result {
                        Ok(Ok(effect)) => self.dispatch(effect),
                        Ok(Err(failure)) => {
                            tracing::info!(session = self.runner.state().session_id, seq = failure.seq, "generation failed");
                        }
                        Err(e) => self.fail(e),
                    }
                }
                Command::Shutdown => break,
                Command::SummaryDone(done) => match self.runner.finish_summary(done) {
                    Ok(effect) => self.dispatch(effect),
                    Err(e) => self.fail(e),
                },
            }
            if !self.runner.state().is_active() {
                self.fanout.close();
            }
        }
    }

    fn frame(&mut self, frame: InboundFrame) -> Result<Ack, GatewayError> {
        if let Some(reason) = &self.paused {
            return Err(GatewayError::Paused(reason.clone()));
        }
        let stamp = self.runner.stamp();
        let event = ingest(&frame, self.runner.state(), &self.detector, stamp, self.max_message_chars)?;
        let before = self.runner.state().last_message_id;
        let fanout = self.fanout.clone();
        match self.runner.accept(event, &mut |f| fanout.publish(f)) {
            Ok(effect) => {
                let after = self.runner.state().last_message_id;
                let generation_started = effect == Effect::TriggerDriverGeneration;
                self.dispatch(effect);
                Ok(Ack {
                    message_id: (after != before).then_some(after),
                    generation_started,
                })
            }
            Err(RunnerError::Session(e)) => Err(GatewayError::Rejected(e)),
            Err(e) => {
                let reason = e.to_string();
                self.fail(e);
                Err(GatewayError::Paused(reason))
            }
        }
    }

    fn end(&mut self) -> Result<(), GatewayError> {
        let fanout = self.fanout.clone();
        self.runner.end(&mut |f| fanout.publish(f)).map_err(|e| {
            let reason = e.to_string();
            self.fail(e);
            GatewayError::Paused(reason)
        })
    }

    /// Starts the provider work `effect` asks for on a worker thread.
    fn dispatch(&mut self, effect: Effect) {
        let fanout = self.fanout.clone();
        let work = match self.runner.next_work(effect, &mut |f| fanout.publish(f)) {
            Ok(Some(work)) => work,
            Ok(None) => return,
            Err(e) => return self.fail(e),
        };
        let commands = self.commands.clone();
        thread::spawn(move || {
            let done = match work {
                Work::Drive(job) => Command::DriveDone(job.run()),
                Work::Summarize(job) => Command::SummaryDone(job.run()),
            };
            let _ = commands.send(done);
        });
    }

    /// Journal or assembly failure: stop accepting frames and tell clients.
    fn fail(&mut self, error: RunnerError) {
        tracing::error!(session = self.runner.state().session_id, %error, "session paused");
        if self.paused.is_some() {
            return;
        }
        self.paused = Some(error.to_string());
        let state = self.runner.state();
        self.fanout.publish(OutboundFrame {
            session_id: state.session_id.clone(),
            message: ChatMessage {
                message_id: state.next_message_id(),
                sender: Sender::System,
                display_name: SYSTEM_DISPLAY_NAME.to_string(),
                text: PAUSED_NOTICE.to_string(),
                timestamp: state.last_timestamp.max(0),
                phase_index: state.phase_index,
            },
            affordances: Affordances::default(),
        });
    }
}
