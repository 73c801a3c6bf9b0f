//! Scripted session harness shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;

use std::sync::Arc;

use proptest::prelude::*;
use remini_core::clock::ManualClock;
use remini_core::conversation::{ChatEvent, ChatMessage, Condition, Participant, Sender};
use remini_core::journal::Journal;
use remini_core::llm::{ProviderError, ScriptedProvider, ScriptedReply};
use remini_core::runner::{GenerationFailure, OutboundFrame, RunnerConfig, RunnerError, RunnerParts, SessionRunner};
use remini_core::PromptCorpus;

pub const T0: i64 = 1_700_000_000_000;

pub fn pair() -> Vec<Participant> {
    vec![
        Participant::new("u1", "Aiko").unwrap(),
        Participant::new("u2", "Ben").unwrap(),
    ]
}

pub struct Sim {
    pub runner: SessionRunner,
    pub driver: Arc<ScriptedProvider>,
    pub analyzer: Arc<ScriptedProvider>,
    pub clock: ManualClock,
    pub frames: Vec<OutboundFrame>,
    pub failures: Vec<GenerationFailure>,
}

impl Sim {
    pub fn new(condition: Condition, driver: Vec<ScriptedReply>, analyzer: Vec<ScriptedReply>) -> Self {
        let driver = Arc::new(ScriptedProvider::from_replies(driver));
        let analyzer = Arc::new(ScriptedProvider::from_replies(analyzer));
        let clock = ManualClock::new(T0, 1_000);
        let parts = RunnerParts {
            corpus: Arc::new(PromptCorpus::builtin()),
            driver: driver.clone(),
            analyzer: analyzer.clone(),
            config: RunnerConfig::default(),
            clock: Box::new(clock.clone()),
        };
        let mut runner =
            SessionRunner::start(Journal::in_memory("sim"), condition, pair(), parts).expect("session starts");
        runner.record_trace();
        Self {
            runner,
            driver,
            analyzer,
            clock,
            frames: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn say(&mut self, who: usize, text: &str, mention: bool) -> Result<(), RunnerError> {
        let participant = self.runner.state().participants[who].clone();
        let stamp = self.runner.stamp();
        let event = ChatEvent::UserMessage {
            message: ChatMessage {
                message_id: stamp.message_id,
                sender: Sender::Participant(participant.id),
                display_name: participant.display_name,
                text: text.to_string(),
                timestamp: stamp.timestamp,
                phase_index: self.runner.state().phase_index,
            },
            mentions_bot: mention,
        };
        self.submit(event)
    }

    /// Presses continue under the latest bot message, if there is one.
    pub fn press_continue(&mut self, who: usize) -> Result<bool, RunnerError> {
        let Some(target) = self.last_bot_message() else {
            return Ok(false);
        };
        let participant = self.runner.state().participants[who].id.clone();
        self.submit(ChatEvent::ContinuePressed {
            participant,
            target_bot_message: target,
        })?;
        Ok(true)
    }

    pub fn end(&mut self) -> Result<(), RunnerError> {
        let frames = &mut self.frames;
        self.runner.end(&mut |f| frames.push(f))
    }

    pub fn last_bot_message(&self) -> Option<u64> {
        self.runner
            .state()
            .messages()
            .filter(|m| m.sender == Sender::Bot)
            .map(|m| m.message_id)
            .last()
    }

    fn submit(&mut self, event: ChatEvent) -> Result<(), RunnerError> {
        let frames = &mut self.frames;
        let failures = self.runner.submit(event, &mut |f| frames.push(f))?;
        self.failures.extend(failures);
        Ok(())
    }

    /// Distinct phase indices in the order the session visited them.
    pub fn visited_phases(&self) -> Vec<usize> {
        let mut visited: Vec<usize> = Vec::new();
        for state in self.runner.trace().expect("trace enabled") {
            if visited.last() != Some(&state.phase_index) {
                visited.push(state.phase_index);
            }
        }
        visited
    }
}

pub fn texts<I: IntoIterator<Item = S>, S: Into<String>>(items: I) -> Vec<ScriptedReply> {
    items.into_iter().map(|s| ScriptedReply::Text(s.into())).collect()
}

/// Driver replies for a complete session: an ordinary turn and a closing
/// turn per phase, each phase after the first opened by the bot.
pub fn full_driver_script(condition: Condition) -> Vec<ScriptedReply> {
    let mut replies = Vec::new();
    for phase in condition.phases() {
        replies.push(format!("Let's talk about {} together.", phase.id()));
        replies.push(format!("Thank you both, that wraps up {}. PHASE DONE", phase.id()));
    }
    texts(replies)
}

pub fn analyzer_script(condition: Condition) -> Vec<ScriptedReply> {
    texts(
        condition.phases()[..condition.phase_count() - 1]
            .iter()
            .map(|p| format!("Aiko and Ben discussed {}.", p.id())),
    )
}

/// Runs a session from greeting to goodbye with both participants speaking
/// in every phase.
pub fn full_run(condition: Condition) -> Sim {
    let mut sim = Sim::new(condition, full_driver_script(condition), analyzer_script(condition));
    for phase in 0..condition.phase_count() {
        if phase == 0 {
            sim.say(0, "@Remini hi, we are ready", true).unwrap();
        }
        sim.say(1, "We went to the lake that summer.", false).unwrap();
        sim.say(0, "It was a lovely trip.", false).unwrap();
        sim.press_continue(1).unwrap();
    }
    sim
}

#[derive(Debug, Clone)]
pub enum Action {
    Say { who: usize, mention: bool, words: usize },
    Continue { who: usize },
    End,
}

pub fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        6 => (0..2usize, any::<bool>(), 0..12usize).prop_map(|(who, mention, words)| Action::Say { who, mention, words }),
        3 => (0..2usize).prop_map(|who| Action::Continue { who }),
        1 => Just(Action::End),
    ]
}

pub fn driver_reply() -> impl Strategy<Value = ScriptedReply> {
    prop_oneof![
        6 => "[a-z]{1,8}( [a-z]{1,8}){0,6}".prop_map(ScriptedReply::Text),
        3 => "[a-z]{1,8}( [a-z]{1,8}){0,4}".prop_map(|t| ScriptedReply::Text(format!("{t}! PHASE DONE"))),
        1 => Just(ScriptedReply::Text("PHASE DONE".into())),
        1 => Just(ScriptedReply::Fail(ProviderError::Refused("policy".into()))),
        1 => Just(ScriptedReply::Fail(ProviderError::Timeout)),
    ]
}

pub fn analyzer_reply() -> impl Strategy<Value = ScriptedReply> {
    prop_oneof![
        4 => "[A-Za-z ]{1,40}".prop_map(ScriptedReply::Text),
        1 => Just(ScriptedReply::Fail(ProviderError::Transport("reset".into()))),
    ]
}

#[derive(Debug, Clone)]
pub struct RandomSession {
    pub condition: Condition,
    pub actions: Vec<Action>,
    pub driver: Vec<ScriptedReply>,
    pub analyzer: Vec<ScriptedReply>,
}

pub fn random_session() -> impl Strategy<Value = RandomSession> {
    (
        prop_oneof![Just(Condition::Remini), Just(Condition::Baseline)],
        prop::collection::vec(action(), 0..40),
        prop::collection::vec(driver_reply(), 0..30),
        prop::collection::vec(analyzer_reply(), 0..6),
    )
        .prop_map(|(condition, actions, driver, analyzer)| RandomSession {
            condition,
            actions,
            driver,
            analyzer,
        })
}

/// Plays `session` until its actions run out or the session ends.
pub fn play(session: &RandomSession) -> Sim {
    let mut sim = Sim::new(session.condition, session.driver.clone(), session.analyzer.clone());
    for action in &session.actions {
        if !sim.runner.state().is_active() {
            break;
        }
        match *action {
            Action::Say { who, mention, words } => {
                let mut text = vec!["memory"; words].join(" ");
                if mention {
                    text.insert_str(0, "@Remini ");
                }
                sim.say(who, &text, mention).unwrap();
            }
            Action::Continue { who } => {
                sim.press_continue(who).unwrap();
            }
            Action::End => sim.end().unwrap(),
        }
    }
    sim
}

#[derive(Debug, Clone)]
pub enum GateStep {
    Say { who: usize, mention: bool },
    Continue { who: usize },
    Finish { phase_done: bool },
    Fail,
}

pub fn gate_step() -> impl Strategy<Value = GateStep> {
    prop_oneof![
        5 => (0..2usize, any::<bool>()).prop_map(|(who, mention)| GateStep::Say { who, mention }),
        2 => (0..2usize).prop_map(|who| GateStep::Continue { who }),
        3 => prop::bool::weighted(0.2).prop_map(|phase_done| GateStep::Finish { phase_done }),
        1 => Just(GateStep::Fail),
    ]
}

/// Drives the bare state machine with generations that complete at arbitrary
/// later points and checks that a generation starts only on a mention, a
/// continue press or a phase advance, and never while one is in flight.
/// Returns the number of generations started.
pub fn check_gating(condition: Condition, steps: &[GateStep]) -> Result<usize, String> {
    use remini_core::conversation::{Effect, MessageStamp, NoticeCause, SessionError, SessionState, SystemNotice};
    use remini_core::llm::{DriverOutput, PhaseSummary};

    let mut state = SessionState::create("gate", condition, pair()).unwrap();
    let mut in_flight = false;
    let mut started = 0;
    for (i, step) in steps.iter().enumerate() {
        let ts = i as i64 + 1;
        let stamp = MessageStamp { message_id: state.next_message_id(), timestamp: ts };
        let fail = |msg: String| Err(format!("step {i} {step:?}: {msg}"));
        match *step {
            GateStep::Say { who, mention } => {
                let p = state.participants[who].clone();
                let event = ChatEvent::UserMessage {
                    message: ChatMessage {
                        message_id: stamp.message_id,
                        sender: Sender::Participant(p.id),
                        display_name: p.display_name,
                        text: "text".into(),
                        timestamp: ts,
                        phase_index: 0,
                    },
                    mentions_bot: mention,
                };
                let effect = state.apply(&event).map_err(|e| e.to_string())?;
                let want = if mention && !in_flight { Effect::TriggerDriverGeneration } else { Effect::None };
                if effect != want {
                    return fail(format!("effect {effect:?}, expected {want:?}"));
                }
            }
            GateStep::Continue { who } => {
                let Some(target) = state.messages().filter(|m| m.sender == Sender::Bot).map(|m| m.message_id).last()
                else {
                    continue;
                };
                let event = ChatEvent::ContinuePressed {
                    participant: state.participants[who].id.clone(),
                    target_bot_message: target,
                };
                let effect = state.apply(&event).map_err(|e| e.to_string())?;
                let want = if in_flight { Effect::None } else { Effect::TriggerDriverGeneration };
                if effect != want {
                    return fail(format!("effect {effect:?}, expected {want:?}"));
                }
            }
            GateStep::Finish { phase_done } => {
                let output = DriverOutput::new("reply", phase_done);
                let result = state.commit(&output, stamp);
                if !in_flight {
                    if result != Err(SessionError::NotGenerating) {
                        return fail(format!("commit while idle gave {result:?}"));
                    }
                    continue;
                }
                in_flight = false;
                match result.map_err(|e| e.to_string())? {
                    Effect::None => {}
                    Effect::RunAnalyzerThenAdvance => {
                        let summary = PhaseSummary {
                            phase_index: state.phase_index,
                            phase_id: state.phase().id().into(),
                            text: "summary".into(),
                            created_at: ts,
                            source_message_count: 0,
                            degraded: false,
                        };
                        if state.advance(&summary).map_err(|e| e.to_string())? != Effect::TriggerDriverGeneration {
                            return fail("advance did not open the phase with a bot turn".into());
                        }
                        in_flight = true;
                        started += 1;
                        continue;
                    }
                    Effect::EndSession => {
                        state.apply(&ChatEvent::SessionEnded).unwrap();
                        break;
                    }
                    other => return fail(format!("commit produced {other:?}")),
                }
            }
            GateStep::Fail => {
                let notice = SystemNotice {
                    message: ChatMessage {
                        message_id: stamp.message_id,
                        sender: Sender::System,
                        display_name: "system".into(),
                        text: "unavailable".into(),
                        timestamp: ts,
                        phase_index: state.phase_index,
                    },
                    cause: NoticeCause::GenerationFailed,
                };
                let result = state.record_notice(&notice);
                match (in_flight, result) {
                    (true, Ok(())) => in_flight = false,
                    (false, Err(SessionError::NotGenerating)) => {}
                    (_, other) => return fail(format!("notice gave {other:?}")),
                }
            }
        }
        if matches!(step, GateStep::Say { mention: true, .. } | GateStep::Continue { .. }) && !in_flight {
            in_flight = true;
            started += 1;
        }
        if state.generation_in_flight != in_flight {
            return fail(format!("in-flight flag {} but model says {in_flight}", state.generation_in_flight));
        }
    }
    Ok(started)
}

/// Every prefix of the journal replays to the state the live run had after
/// writing that record, also after a round trip through NDJSON.
pub fn check_replay(sim: &Sim) -> Result<(), String> {
    use remini_core::journal::{read_records, replay};

    let records = sim.runner.journal().records();
    let trace = sim.runner.trace().expect("trace enabled");
    if trace.len() != records.len() {
        return Err(format!("{} records but {} traced states", records.len(), trace.len()));
    }
    let live = sim.runner.state();
    if &replay(records).map_err(|e| e.to_string())? != live {
        return Err("full replay differs from the live state".into());
    }
    for k in 1..=records.len() {
        let state = replay(&records[..k]).map_err(|e| format!("prefix {k}: {e}"))?;
        if state != trace[k - 1] {
            return Err(format!("prefix of {k} records differs from the live state"));
        }
    }
    let ndjson: String = records
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    let reread = read_records(ndjson.as_bytes()).map_err(|e| e.to_string())?;
    if &replay(&reread).map_err(|e| e.to_string())? != live {
        return Err("replay after NDJSON round trip differs".into());
    }
    Ok(())
}

/// No outbound or journaled bot message carries the sentinel, and each
/// sentinel-bearing driver output is followed by exactly one transition: a
/// phase summary, or the session's end in the terminal phase. Every
/// transition is preceded by such an output.
pub fn check_sentinel(sim: &Sim) -> Result<(), String> {
    use remini_core::conversation::NoticeCause;
    use remini_core::journal::RecordBody;
    use remini_core::llm::SENTINEL;

    if let Some(frame) = sim.frames.iter().find(|f| f.message.text.contains(SENTINEL)) {
        return Err(format!("outbound frame {} contains the sentinel", frame.message.message_id));
    }
    if sim.runner.state().messages().any(|m| m.text.contains(SENTINEL)) {
        return Err("a message in history contains the sentinel".into());
    }
    let records = sim.runner.journal().records();
    let trace = sim.runner.trace().unwrap();
    // Records that change the conversation, with the state before each.
    let steps: Vec<(usize, &RecordBody)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| !matches!(r.body, RecordBody::ProviderExchange(_)))
        .map(|(k, r)| (k, &r.body))
        .collect();
    for (n, &(k, body)) in steps.iter().enumerate() {
        let next = steps.get(n + 1).map(|s| s.1);
        let after_next = steps.get(n + 2).map(|s| s.1);
        match body {
            RecordBody::DriverOutput { output, .. } if output.phase_done => {
                let terminal = trace[k - 1].is_final_phase();
                let ok = if terminal {
                    matches!(next, Some(RecordBody::SystemNotice(n)) if n.cause == NoticeCause::SessionClosing)
                        && matches!(after_next, Some(RecordBody::Event(ChatEvent::SessionEnded)))
                } else {
                    matches!(next, Some(RecordBody::Summary(_)))
                        && trace[k + 1..].iter().any(|s| s.phase_index == trace[k - 1].phase_index + 1)
                };
                if !ok {
                    return Err(format!("sentinel at record {} did not cause one transition", records[k].seq));
                }
            }
            RecordBody::Summary(_) => {
                let prev = n.checked_sub(1).map(|p| steps[p].1);
                if !matches!(prev, Some(RecordBody::DriverOutput { output, .. }) if output.phase_done) {
                    return Err(format!("summary at record {} without a sentinel", records[k].seq));
                }
            }
            _ => {}
        }
    }
    Ok(())
}
