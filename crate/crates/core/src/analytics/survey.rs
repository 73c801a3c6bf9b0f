//! Post-session questionnaire totals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scale {
    /// Positive affect.
    Pa,
    /// Perceived engagement.
    Pes,
    /// Perceived relationship quality.
    Prq,
    /// Inclusion of other in self.
    Ios,
    /// Perceived partner responsiveness.
    Ppr,
}

impl Scale {
    pub const ALL: [Scale; 5] = [Scale::Pa, Scale::Pes, Scale::Prq, Scale::Ios, Scale::Ppr];

    pub fn item_count(self) -> usize {
        match self {
            Scale::Pa => 10,
            Scale::Pes | Scale::Prq => 6,
            Scale::Ios => 1,
            Scale::Ppr => 4,
        }
    }

    /// Inclusive Likert bounds for one item.
    pub fn item_range(self) -> (u32, u32) {
        match self {
            Scale::Pa => (1, 5),
            _ => (1, 7),
        }
    }

    /// Inclusive bounds of the total score.
    pub fn total_range(self) -> (u32, u32) {
        let (lo, hi) = self.item_range();
        let n = self.item_count() as u32;
        (lo * n, hi * n)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Pa => "PA",
            Scale::Pes => "PES",
            Scale::Prq => "PRQ",
            Scale::Ios => "IOS",
            Scale::Ppr => "PPR",
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scale {
    type Err = SurveyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scale::ALL
            .into_iter()
            .find(|scale| scale.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SurveyError::UnknownScale(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub scale: Scale,
    pub item_scores: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SurveyError {
    #[error("{scale} expects {expected} items, got {got}")]
    WrongItemCount { scale: Scale, expected: usize, got: usize },
    #[error("{scale} item {item} is {value}, outside {min}..={max}")]
    ItemOutOfRange { scale: Scale, item: usize, value: u32, min: u32, max: u32 },
    #[error("unknown scale {0:?}")]
    UnknownScale(String),
}

/// Unweighted total of the item scores.
pub fn score_survey(response: &SurveyResponse) -> Result<u32, SurveyError> {
    let scale = response.scale;
    let expected = scale.item_count();
    if response.item_scores.len() != expected {
        return Err(SurveyError::WrongItemCount {
            scale,
            expected,
            got: response.item_scores.len(),
        });
    }
    let (min, max) = scale.item_range();
    for (item, &value) in response.item_scores.iter().enumerate() {
        if !(min..=max).contains(&value) {
            return Err(SurveyError::ItemOutOfRange { scale, item, value, min, max });
        }
    }
    Ok(response.item_scores.iter().sum())
}
