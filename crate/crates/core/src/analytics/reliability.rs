//! Chance-corrected inter-rater agreement.

use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgreementError {
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no labels to compare")]
    EmptyInput,
    #[error("at least 2 coders are required, got {0}")]
    InsufficientCoders(usize),
    #[error("at least 2 units are required, got {0}")]
    InsufficientUnits(usize),
    #[error("coder {coder} has no value for unit {unit}")]
    MissingValue { coder: usize, unit: usize },
}

/// Cohen's kappa for two coders.
///
/// Returns exactly 1.0 when chance agreement is 1 (both coders used a single,
/// shared category throughout).
pub fn cohen_kappa<L: Eq + Hash>(a: &[L], b: &[L]) -> Result<f64, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(AgreementError::EmptyInput);
    }
    let n = a.len() as u128;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u128;
    let mut marginals: HashMap<&L, (u128, u128)> = HashMap::new();
    for x in a {
        marginals.entry(x).or_default().0 += 1;
    }
    for y in b {
        marginals.entry(y).or_default().1 += 1;
    }
    let chance: u128 = marginals.values().map(|(ca, cb)| ca * cb).sum();

    // kappa = (p_o - p_e) / (1 - p_e), scaled by n^2 to stay in integers.
    let denominator = n * n - chance;
    if denominator == 0 {
        return Ok(1.0);
    }
    let numerator = (agree * n) as f64 - chance as f64;
    Ok(numerator / denominator as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Alpha {
    pub value: f64,
    /// Set when every value in the data is identical, so expected
    /// disagreement is zero and alpha is reported as 1.0 by convention.
    pub degenerate: bool,
}

/// Krippendorff's alpha with the nominal metric, for complete data.
///
/// `coders[c][u]` is coder `c`'s value for unit `u`.
pub fn krippendorff_alpha_nominal<L: Eq + Hash>(coders: &[Vec<Option<L>>]) -> Result<Alpha, AgreementError> {
    if coders.len() < 2 {
        return Err(AgreementError::InsufficientCoders(coders.len()));
    }
    let units = coders[0].len();
    for row in coders {
        if row.len() != units {
            return Err(AgreementError::LengthMismatch(units, row.len()));
        }
    }
    if units < 2 {
        return Err(AgreementError::InsufficientUnits(units));
    }
    for (c, row) in coders.iter().enumerate() {
        if let Some(u) = row.iter().position(Option::is_none) {
            return Err(AgreementError::MissingValue { coder: c, unit: u });
        }
    }

    let m = coders.len() as f64;
    // Observed disagreement mass: sum over units of the off-diagonal
    // coincidences, each pair weighted 1/(m-1).
    let mut observed_off_diagonal = 0.0;
    let mut totals: HashMap<&L, f64> = HashMap::new();
    for u in 0..units {
        let mut counts: HashMap<&L, f64> = HashMap::new();
        for row in coders {
            let value = row[u].as_ref().expect("checked above");
            *counts.entry(value).or_default() += 1.0;
            *totals.entry(value).or_default() += 1.0;
        }
        let same_pairs: f64 = counts.values().map(|k| k * (k - 1.0)).sum();
        observed_off_diagonal += (m * (m - 1.0) - same_pairs) / (m - 1.0);
    }
    let n: f64 = totals.values().sum();
    let expected_off_diagonal = n * n - totals.values().map(|k| k * k).sum::<f64>();
    if expected_off_diagonal == 0.0 {
        return Ok(Alpha { value: 1.0, degenerate: true });
    }
    let value = 1.0 - (n - 1.0) * observed_off_diagonal / expected_off_diagonal;
    Ok(Alpha { value, degenerate: false })
}

/// Convenience wrapper for complete two-coder data.
pub fn krippendorff_alpha_pair<L: Eq + Hash + Clone>(a: &[L], b: &[L]) -> Result<Alpha, AgreementError> {
    if a.len() != b.len() {
        return Err(AgreementError::LengthMismatch(a.len(), b.len()));
    }
    let rows = vec![
        a.iter().cloned().map(Some).collect(),
        b.iter().cloned().map(Some).collect(),
    ];
    krippendorff_alpha_nominal(&rows)
}
