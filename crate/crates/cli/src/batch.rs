//! Batch analytics and anonymized export over a directory of journals.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};

use remini_core::analytics::{
    agreement, disclosure_table, engagement_metrics_from_journal, read_labels, write_disclosure_csv,
    write_metrics_csv, TableOptions, TranscriptMetrics,
};
use remini_core::journal::{read_journal_file, replay};
use remini_core::transcript::{Anonymizer, Transcript};
use serde::Serialize;

use crate::error::{warn, CliError};

#[derive(Debug, Clone, Serialize)]
pub struct FileError {
    pub file: PathBuf,
    pub message: String,
}

/// `*.ndjson` files directly under `dir`, sorted by name.
pub fn journal_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(CliError::io(dir))? {
        let path = entry.map_err(CliError::io(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "ndjson") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn skip(errors: &mut Vec<FileError>, file: &Path, message: String) {
    warn("journal_skipped", file, &message);
    errors.push(FileError { file: file.to_path_buf(), message });
}

#[derive(Debug, Serialize)]
pub struct MetricsOutput {
    pub sessions: Vec<TranscriptMetrics>,
    pub errors: Vec<FileError>,
}

pub fn collect_metrics(dir: &Path) -> Result<MetricsOutput, CliError> {
    let mut sessions = Vec::new();
    let mut errors = Vec::new();
    for file in journal_files(dir)? {
        let metrics = read_journal_file(&file)
            .map_err(|e| e.to_string())
            .and_then(|records| engagement_metrics_from_journal(&records).map_err(|e| e.to_string()));
        match metrics {
            Ok(m) => sessions.push(m),
            Err(message) => skip(&mut errors, &file, message),
        }
    }
    Ok(MetricsOutput { sessions, errors })
}

pub struct MetricsOptions<'a> {
    pub journals: &'a Path,
    pub labels: Option<&'a Path>,
    pub out: Option<&'a Path>,
    pub merge_summary_phase: bool,
}

/// Writes `metrics.csv` and `metrics.json` (plus `disclosure.csv` and
/// `agreement.json` with labels) into `out`, or the CSV to stdout without it.
pub fn metrics(options: MetricsOptions<'_>) -> Result<(), CliError> {
    let output = collect_metrics(options.journals)?;
    let Some(out) = options.out else {
        let stdout = std::io::stdout();
        write_metrics_csv(&output.sessions, stdout.lock()).map_err(|e| CliError::Session(e.to_string()))?;
        if options.labels.is_some() {
            return Err(CliError::Config("--labels needs --out".into()));
        }
        return Ok(());
    };
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let csv_path = out.join("metrics.csv");
    let file = File::create(&csv_path).map_err(CliError::io(&csv_path))?;
    write_metrics_csv(&output.sessions, file).map_err(|e| CliError::Session(e.to_string()))?;
    write_json(&out.join("metrics.json"), &output)?;

    if let Some(labels_path) = options.labels {
        let file = File::open(labels_path).map_err(CliError::io(labels_path))?;
        let labels = read_labels(file).map_err(|e| CliError::Config(e.to_string()))?;
        let table = disclosure_table(&labels, TableOptions { merge_summary_phase: options.merge_summary_phase });
        let path = out.join("disclosure.csv");
        let file = File::create(&path).map_err(CliError::io(&path))?;
        write_disclosure_csv(&table, file).map_err(|e| CliError::Session(e.to_string()))?;
        match agreement(&labels) {
            Ok(rows) => write_json(&out.join("agreement.json"), &rows)?,
            Err(e) => warn("agreement_skipped", labels_path, &e.to_string()),
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ExportedFile {
    pub session_id: String,
    pub file: PathBuf,
    pub replacements: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize)]
pub struct ExportReport {
    pub exported: Vec<ExportedFile>,
    /// Map keys that matched nowhere in the batch.
    pub unmatched: Vec<String>,
    pub errors: Vec<FileError>,
}

pub fn load_replace_map(path: Option<&Path>) -> Result<BTreeMap<String, String>, CliError> {
    let Some(path) = path else {
        return Ok(BTreeMap::new());
    };
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes `<out>/<session_id>.json` per journal with the map applied.
pub fn export(journals: &Path, out: &Path, map: &BTreeMap<String, String>) -> Result<ExportReport, CliError> {
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let anonymizer = Anonymizer::new(map);
    let mut exported = Vec::new();
    let mut errors = Vec::new();
    let mut matched = BTreeSet::new();
    for file in journal_files(journals)? {
        let state = match read_journal_file(&file)
            .map_err(|e| e.to_string())
            .and_then(|records| replay(&records).map_err(|e| e.to_string()))
        {
            Ok(state) => state,
            Err(message) => {
                skip(&mut errors, &file, message);
                continue;
            }
        };
        let (transcript, report) = anonymizer.transcript(&Transcript::from_state(&state));
        let path = out.join(format!("{}.json", transcript.session_id));
        write_json(&path, &transcript)?;
        matched.extend(report.counts.keys().cloned());
        exported.push(ExportedFile {
            session_id: transcript.session_id,
            file: path,
            replacements: report.counts,
        });
    }
    let unmatched: Vec<String> = map.keys().filter(|k| !k.is_empty() && !matched.contains(*k)).cloned().collect();
    for key in &unmatched {
        warn("unmatched_replacement", journals, key);
    }
    Ok(ExportReport { exported, unmatched, errors })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(CliError::io(path))
}
