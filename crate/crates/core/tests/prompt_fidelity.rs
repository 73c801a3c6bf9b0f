//! The built-in corpus against an independently transcribed copy of the
//! reference prompts, and what actually reaches the driver.

mod support;

use remini_core::conversation::{Condition, MessageStamp, SessionState};
use remini_core::llm::{DriverOutput, PhaseSummary};
use remini_core::prompts::{PromptAssembler, SegmentLabel};
use remini_core::PromptCorpus;
use serde_json::Value;

fn fixture() -> Value {
    serde_json::from_str(include_str!("fixtures/reference_prompts.json")).unwrap()
}

fn strings(v: &Value) -> Vec<String> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

/// (preamble, tasks) for every phase of `condition`, from the fixture.
fn expected(condition: Condition) -> Vec<(String, Vec<String>)> {
    let f = fixture();
    let entry = |v: &Value| (v[0].as_str().unwrap().to_string(), strings(&v[1]));
    match condition {
        Condition::Remini => condition
            .phases()
            .iter()
            .map(|p| entry(&f["scripts"][p.id()]))
            .collect(),
        Condition::Baseline => vec![entry(&f["scripts"]["RapportBuilding"]), entry(&f["baseline"])],
    }
}

fn state_at(condition: Condition, phase: usize) -> SessionState {
    let mut state = SessionState::create("s", condition, support::pair()).unwrap();
    for i in 0..phase {
        state
            .advance(&PhaseSummary {
                phase_index: i,
                phase_id: condition.phases()[i].id().into(),
                text: format!("summary {i}"),
                created_at: 0,
                source_message_count: 1,
                degraded: false,
            })
            .unwrap();
        let stamp = MessageStamp { message_id: state.next_message_id(), timestamp: i as i64 };
        state.commit(&DriverOutput::new("", false), stamp).unwrap();
    }
    state
}

#[test]
fn general_prompts_are_verbatim() {
    let corpus = PromptCorpus::builtin();
    assert_eq!(corpus.general_prompts, strings(&fixture()["general"]));
}

#[test]
fn scripts_are_verbatim() {
    let corpus = PromptCorpus::builtin();
    for condition in [Condition::Remini, Condition::Baseline] {
        let scripts = corpus.scripts(condition);
        for (script, (preamble, tasks)) in scripts.iter().zip(expected(condition)) {
            assert_eq!(script.preamble.as_deref(), Some(preamble.as_str()), "{}", script.phase_id);
            assert_eq!(script.tasks, tasks, "{}", script.phase_id);
        }
    }
}

#[test]
fn driver_segments_carry_every_task_in_order() {
    let corpus = PromptCorpus::builtin();
    let assembler = PromptAssembler::new(&corpus);
    for condition in [Condition::Remini, Condition::Baseline] {
        for (phase, (preamble, tasks)) in expected(condition).into_iter().enumerate() {
            let prompt = assembler.driver_input(&state_at(condition, phase)).unwrap();
            let mut want = vec![SegmentLabel::History, SegmentLabel::PhaseSpecific, SegmentLabel::General];
            if phase > 0 {
                want.push(SegmentLabel::Summaries);
            }
            assert_eq!(prompt.labels(), want);
            let iii = prompt.segment(SegmentLabel::PhaseSpecific).unwrap();
            assert!(iii.contains(&preamble));
            for task in &tasks {
                assert!(iii.contains(task.as_str()), "{condition} phase {phase} lacks {task:?}");
            }
            let iv = prompt.segment(SegmentLabel::General).unwrap();
            for line in strings(&fixture()["general"]) {
                assert!(iv.contains(&line));
            }
        }
    }
}

#[test]
fn end_to_end_driver_prompts_contain_the_scripts() {
    for condition in [Condition::Remini, Condition::Baseline] {
        let sim = support::full_run(condition);
        let prompts = sim.driver.prompts();
        assert_eq!(prompts.len(), 2 * condition.phase_count());
        for (phase, (_, tasks)) in expected(condition).into_iter().enumerate() {
            for prompt in &prompts[2 * phase..2 * phase + 2] {
                let i = prompt.find("[I] ").unwrap();
                let iii = prompt.find("[III] ").unwrap();
                let iv = prompt.find("[IV] ").unwrap();
                assert!(i < iii && iii < iv);
                if let Some(v) = prompt.find("[V] ") {
                    assert!(iv < v);
                }
                assert_eq!(prompt.contains("[V] "), phase > 0);
                for task in &tasks {
                    assert!(prompt.contains(task.as_str()));
                }
            }
        }
    }
}

#[test]
fn analyzer_input_uses_summary_prompt_without_summaries() {
    let corpus = PromptCorpus::builtin();
    let assembler = PromptAssembler::new(&corpus);
    let state = state_at(Condition::Remini, 2);
    let prompt = assembler.analyzer_input(&state, 1).unwrap();
    assert_eq!(
        prompt.labels(),
        vec![SegmentLabel::History, SegmentLabel::PhaseSpecific, SegmentLabel::General]
    );
    assert_eq!(
        prompt.segment(SegmentLabel::PhaseSpecific),
        Some(corpus.scripts(Condition::Remini)[1].summary_prompt.as_str())
    );
    assert!(assembler.analyzer_input(&state, 3).is_err());
}
