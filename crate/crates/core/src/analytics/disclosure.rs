//! Coded self-disclosure labels: parsing, inter-coder agreement and
//! per-phase summary tables.
//!
//! A unit is one (session, phase) pair. When several coders labelled the
//! same unit and dimension, the unit contributes the median of their levels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::reliability::{cohen_kappa, krippendorff_alpha_pair, AgreementError, Alpha};

/// Phase index of Summary and Reflection in the five-phase script.
const SUMMARY_PHASE: usize = 4;
const REFLECTION_PHASE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Informational,
    Thoughts,
    Feelings,
    DetailPresence,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Informational,
        Dimension::Thoughts,
        Dimension::Feelings,
        Dimension::DetailPresence,
    ];

    pub fn level_range(self) -> (u8, u8) {
        match self {
            Dimension::DetailPresence => (0, 1),
            _ => (1, 3),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Informational => "informational",
            Dimension::Thoughts => "thoughts",
            Dimension::Feelings => "feelings",
            Dimension::DetailPresence => "detail_presence",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s.trim())
            .ok_or_else(|| LabelError::UnknownDimension(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitId {
    pub session_id: String,
    pub phase_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedLabel {
    pub unit: UnitId,
    pub coder_id: String,
    pub dimension: Dimension,
    pub level: u8,
}

impl CodedLabel {
    pub fn new(
        session_id: impl Into<String>,
        phase_index: usize,
        coder_id: impl Into<String>,
        dimension: Dimension,
        level: u8,
    ) -> Result<Self, LabelError> {
        let (min, max) = dimension.level_range();
        if !(min..=max).contains(&level) {
            return Err(LabelError::LevelOutOfRange { dimension, level });
        }
        Ok(Self {
            unit: UnitId {
                session_id: session_id.into(),
                phase_index,
            },
            coder_id: coder_id.into(),
            dimension,
            level,
        })
    }
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("level {level} is outside the range of {dimension}")]
    LevelOutOfRange { dimension: Dimension, level: u8 },
    #[error("label file line {line}: {source}")]
    Row {
        line: u64,
        #[source]
        source: Box<LabelError>,
    },
    #[error("label file: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Deserialize)]
struct LabelRow {
    session_id: String,
    phase_index: usize,
    coder_id: String,
    dimension: String,
    level: u8,
}

/// Reads `session_id,phase_index,coder_id,dimension,level` rows (header
/// required, surrounding whitespace ignored).
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<CodedLabel>, LabelError> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut labels = Vec::new();
    for row in csv.deserialize::<LabelRow>() {
        let row = row?;
        let dimension = row.dimension.parse::<Dimension>();
        let label = dimension
            .and_then(|d| CodedLabel::new(row.session_id, row.phase_index, row.coder_id, d, row.level));
        match label {
            Ok(label) => labels.push(label),
            Err(source) => {
                return Err(LabelError::Row {
                    line: labels.len() as u64 + 2,
                    source: Box::new(source),
                })
            }
        }
    }
    Ok(labels)
}

/// Median with the even-count convention of averaging the middle pair.
pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Linear-interpolation quantile (Hyndman and Fan type 7).
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TableOptions {
    /// Count Summary-phase units as Reflection.
    pub merge_summary_phase: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisclosureCell {
    pub dimension: Dimension,
    pub phase_index: usize,
    pub units: usize,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
}

/// Per-dimension, per-phase medians and quartiles over units.
///
/// Every dimension gets a row for every phase from 0 to the highest phase
/// seen; cells without labels have `units == 0` and null statistics.
pub fn disclosure_table(labels: &[CodedLabel], options: TableOptions) -> Vec<DisclosureCell> {
    let phase_of = |p: usize| {
        if options.merge_summary_phase && p == SUMMARY_PHASE {
            REFLECTION_PHASE
        } else {
            p
        }
    };

    // (dimension, unit) -> levels from all coders.
    let mut by_unit: BTreeMap<(Dimension, UnitId), Vec<f64>> = BTreeMap::new();
    for label in labels {
        let unit = UnitId {
            session_id: label.unit.session_id.clone(),
            phase_index: phase_of(label.unit.phase_index),
        };
        by_unit
            .entry((label.dimension, unit))
            .or_default()
            .push(label.level as f64);
    }
    // Merging can put two coders' worth of Summary and Reflection labels in
    // one unit; the unit median still applies.
    let mut by_cell: BTreeMap<(Dimension, usize), Vec<f64>> = BTreeMap::new();
    for ((dimension, unit), levels) in &by_unit {
        let value = median(levels).expect("nonempty by construction");
        by_cell.entry((*dimension, unit.phase_index)).or_default().push(value);
    }

    let Some(max_phase) = labels.iter().map(|l| phase_of(l.unit.phase_index)).max() else {
        return Vec::new();
    };
    let mut cells = Vec::new();
    for dimension in Dimension::ALL {
        for phase_index in 0..=max_phase {
            let values = by_cell.get(&(dimension, phase_index)).map(Vec::as_slice).unwrap_or(&[]);
            cells.push(DisclosureCell {
                dimension,
                phase_index,
                units: values.len(),
                median: median(values),
                q1: quantile(values, 0.25),
                q3: quantile(values, 0.75),
            });
        }
    }
    cells
}

pub fn write_disclosure_csv<W: Write>(cells: &[DisclosureCell], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["dimension", "phase_index", "units", "median", "q1", "q3"])?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for cell in cells {
        writer.write_record([
            cell.dimension.as_str().to_string(),
            cell.phase_index.to_string(),
            cell.units.to_string(),
            opt(cell.median),
            opt(cell.q1),
            opt(cell.q3),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionAgreement {
    pub dimension: Dimension,
    /// Units labelled by both coders.
    pub units: usize,
    pub kappa: Result<f64, String>,
    pub alpha: Result<Alpha, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementSetupError {
    #[error("agreement needs exactly 2 coders, found {0:?}")]
    CoderCount(Vec<String>),
    #[error("coder {coder} labelled {unit:?} {dimension} more than once")]
    DuplicateLabel { coder: String, unit: UnitId, dimension: Dimension },
}

/// Cohen's kappa and Krippendorff's alpha per dimension, over the units both
/// coders labelled.
pub fn agreement(labels: &[CodedLabel]) -> Result<Vec<DimensionAgreement>, AgreementSetupError> {
    let coders: BTreeSet<&str> = labels.iter().map(|l| l.coder_id.as_str()).collect();
    let coders: Vec<&str> = coders.into_iter().collect();
    if coders.len() != 2 {
        return Err(AgreementSetupError::CoderCount(coders.iter().map(|c| c.to_string()).collect()));
    }
    let mut grid: BTreeMap<(Dimension, &UnitId), [Option<u8>; 2]> = BTreeMap::new();
    for label in labels {
        let slot = usize::from(label.coder_id == coders[1]);
        let entry = grid.entry((label.dimension, &label.unit)).or_default();
        if entry[slot].replace(label.level).is_some() {
            return Err(AgreementSetupError::DuplicateLabel {
                coder: label.coder_id.clone(),
                unit: label.unit.clone(),
                dimension: label.dimension,
            });
        }
    }

    let mut out = Vec::new();
    for dimension in Dimension::ALL {
        let (a, b): (Vec<u8>, Vec<u8>) = grid
            .iter()
            .filter(|((d, _), _)| *d == dimension)
            .filter_map(|(_, pair)| Some((pair[0]?, pair[1]?)))
            .unzip();
        if a.is_empty() && !grid.keys().any(|(d, _)| *d == dimension) {
            continue;
        }
        let err = |e: AgreementError| e.to_string();
        out.push(DimensionAgreement {
            dimension,
            units: a.len(),
            kappa: cohen_kappa(&a, &b).map_err(err),
            alpha: krippendorff_alpha_pair(&a, &b).map_err(err),
        });
    }
    Ok(out)
}
