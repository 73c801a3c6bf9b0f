//! Session transcripts and their anonymized export.

use std::collections::{BTreeMap, BTreeSet};

use aho_corasick::AhoCorasick;
use serde::{Deserialize, Serialize};

use crate::conversation::{ChatMessage, Condition, Participant, SessionState, SessionStatus};
use crate::llm::PhaseSummary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: String,
    pub condition: Condition,
    pub status: SessionStatus,
    pub phase_index: usize,
    pub participants: Vec<Participant>,
    pub messages: Vec<ChatMessage>,
    pub summaries: Vec<PhaseSummary>,
}

impl Transcript {
    pub fn from_state(state: &SessionState) -> Self {
        Self {
            session_id: state.session_id.clone(),
            condition: state.condition,
            status: state.status,
            phase_index: state.phase_index,
            participants: state.participants.to_vec(),
            messages: state.messages().cloned().collect(),
            summaries: state.summaries.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ReplacementReport {
    /// Replacements made per key.
    pub counts: BTreeMap<String, usize>,
    /// Keys that never matched.
    pub unmatched: Vec<String>,
}

/// Replaces names and places with placeholders such as `[Country]`.
///
/// Matches are chosen longest key first; a shorter key never matches inside
/// a span already claimed by a longer one, and replacement text is never
/// re-scanned.
pub struct Anonymizer {
    keys: Vec<String>,
    values: Vec<String>,
    matcher: Option<AhoCorasick>,
}

impl Anonymizer {
    pub fn new(map: &BTreeMap<String, String>) -> Self {
        let (keys, values): (Vec<String>, Vec<String>) = map
            .iter()
            .filter(|(k, _)| !k.is_empty())
            .map(|(k, v)| (k.clone(), v.clone()))
            .unzip();
        let matcher = (!keys.is_empty()).then(|| AhoCorasick::new(&keys).expect("plain string patterns"));
        Self { keys, values, matcher }
    }

    pub fn apply(&self, text: &str, counts: &mut BTreeMap<String, usize>) -> String {
        let Some(matcher) = &self.matcher else {
            return text.to_string();
        };
        let mut candidates: Vec<(usize, usize, usize)> = matcher
            .find_overlapping_iter(text)
            .map(|m| (m.start(), m.end(), m.pattern().as_usize()))
            .collect();
        candidates.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));

        let mut chosen: Vec<(usize, usize, usize)> = Vec::new();
        for candidate in candidates {
            if chosen.iter().all(|c| candidate.1 <= c.0 || candidate.0 >= c.1) {
                chosen.push(candidate);
            }
        }
        chosen.sort_by_key(|c| c.0);

        let mut out = String::with_capacity(text.len());
        let mut cursor = 0;
        for (start, end, pattern) in chosen {
            out.push_str(&text[cursor..start]);
            out.push_str(&self.values[pattern]);
            *counts.entry(self.keys[pattern].clone()).or_default() += 1;
            cursor = end;
        }
        out.push_str(&text[cursor..]);
        out
    }

    /// Anonymizes message texts, display names and summaries.
    pub fn transcript(&self, transcript: &Transcript) -> (Transcript, ReplacementReport) {
        let mut counts = BTreeMap::new();
        let mut out = transcript.clone();
        for p in &mut out.participants {
            p.display_name = self.apply(&p.display_name, &mut counts);
        }
        for m in &mut out.messages {
            m.display_name = self.apply(&m.display_name, &mut counts);
            m.text = self.apply(&m.text, &mut counts);
        }
        for s in &mut out.summaries {
            s.text = self.apply(&s.text, &mut counts);
        }
        let matched: BTreeSet<&String> = counts.keys().collect();
        let unmatched = self.keys.iter().filter(|k| !matched.contains(k)).cloned().collect();
        (out, ReplacementReport { counts, unmatched })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn replaces_places() {
        let a = Anonymizer::new(&map(&[("Hakone", "[Place]")]));
        let mut counts = BTreeMap::new();
        let out = a.apply("the lake in Hakone, Hakone!", &mut counts);
        assert_eq!(out, "the lake in [Place], [Place]!");
        assert_eq!(counts["Hakone"], 2);
    }

    #[test]
    fn empty_map_is_identity() {
        let a = Anonymizer::new(&BTreeMap::new());
        let mut counts = BTreeMap::new();
        assert_eq!(a.apply("Hakone", &mut counts), "Hakone");
        assert!(counts.is_empty());
    }

    #[test]
    fn longest_key_wins_overlaps() {
        let a = Anonymizer::new(&map(&[("New York", "[City]"), ("New York University", "[University]"), ("York", "[Y]")]));
        let mut counts = BTreeMap::new();
        let out = a.apply("New York University is in New York", &mut counts);
        assert_eq!(out, "[University] is in [City]");
        assert_eq!(counts.get("York"), None);

        // A later, longer key beats an earlier, shorter overlapping one.
        let b = Anonymizer::new(&map(&[("ab", "[S]"), ("bcd", "[L]")]));
        assert_eq!(b.apply("abcd", &mut BTreeMap::new()), "a[L]");
    }

    #[test]
    fn placeholders_are_not_rescanned() {
        let a = Anonymizer::new(&map(&[("Place", "[Place]"), ("Kyoto", "[Place]")]));
        assert_eq!(a.apply("Kyoto", &mut BTreeMap::new()), "[Place]");
    }
}
