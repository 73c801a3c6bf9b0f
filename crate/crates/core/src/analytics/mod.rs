//! Chat-log measures, questionnaire scoring and coder agreement.

pub mod disclosure;
pub mod engagement;
pub mod reliability;
pub mod survey;

use std::io::Write;

pub use disclosure::{
    agreement, disclosure_table, median, quantile, read_labels, write_disclosure_csv, CodedLabel,
    Dimension, DimensionAgreement, DisclosureCell, LabelError, TableOptions, UnitId,
};
pub use engagement::{
    engagement_metrics, engagement_metrics_from_journal, word_count, PhaseMetrics,
    TranscriptMetrics, DURATION_DEFINITION,
};
pub use reliability::{cohen_kappa, krippendorff_alpha_nominal, krippendorff_alpha_pair, AgreementError, Alpha};
pub use survey::{score_survey, Scale, SurveyError, SurveyResponse};

pub const METRICS_COLUMNS: [&str; 8] = [
    "session_id",
    "condition",
    "duration_min",
    "messages_total",
    "words_total",
    "words_per_message",
    "phases_visited",
    "status",
];

/// Flat per-session metrics table; a missing duration is an empty field.
pub fn write_metrics_csv<W: Write>(rows: &[TranscriptMetrics], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(METRICS_COLUMNS)?;
    for m in rows {
        writer.write_record([
            m.session_id.clone(),
            m.condition.to_string(),
            m.reminiscence_duration_min.map(|d| d.to_string()).unwrap_or_default(),
            m.messages_total.to_string(),
            m.words_total.to_string(),
            m.words_per_message.to_string(),
            m.phases_visited.to_string(),
            serde_json::to_value(m.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
