//! Whole-token, case-insensitive detection of the bot's handle.

use regex::Regex;

pub const DEFAULT_MENTION_TOKEN: &str = "@Remini";

/// Matches a handle delimited by the text boundaries or non-word characters.
#[derive(Debug, Clone)]
pub struct MentionDetector {
    token: String,
    pattern: Regex,
}

impl MentionDetector {
    /// # Panics
    /// If `token` is empty or only whitespace.
    pub fn new(token: &str) -> Self {
        let token = token.trim();
        assert!(!token.is_empty(), "mention token must not be empty");
        let pattern = Regex::new(&format!(r"(?i)(?:^|\W){}(?:$|\W)", regex::escape(token)))
            .expect("escaped token is a valid pattern");
        Self {
            token: token.to_string(),
            pattern,
        }
    }

    pub fn token(&self) -> &str {
        &self.token
    }

    pub fn detect(&self, text: &str) -> bool {
        self.pattern.is_match(text)
    }
}

impl Default for MentionDetector {
    fn default() -> Self {
        Self::new(DEFAULT_MENTION_TOKEN)
    }
}

pub fn detect_mention(text: &str, mention_token: &str) -> bool {
    MentionDetector::new(mention_token).detect(text)
}
