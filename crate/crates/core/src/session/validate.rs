//! Eligibility of stimuli from recognition-survey results.
//!
//! Input is CSV with header `stimulus_id,correct,n,k`: how many of `n`
//! raters picked the intended emotion out of `k` choices.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use super::SessionError;
use crate::platform::scoring::ELIGIBILITY_PERCENT;
use crate::platform::{chance_corrected_score, is_eligible};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentRow {
    pub stimulus_id: String,
    pub correct: u64,
    pub n: u64,
    pub k: u64,
    pub score: f64,
    pub eligible: bool,
}

pub fn validate_content(input: impl Read) -> Result<Vec<ContentRow>, SessionError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| SessionError::BadRow { line: 1, reason: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    if header != ["stimulus_id", "correct", "n", "k"] {
        return Err(SessionError::BadRow { line: 1, reason: "expected header `stimulus_id,correct,n,k`".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let bad = |reason: String| SessionError::BadRow { line, reason };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let count = |col: usize, name: &str| -> Result<u64, SessionError> {
            rec[col].parse().map_err(|_| bad(format!("{name} `{}` is not a non-negative integer", &rec[col])))
        };
        let (correct, n, k) = (count(1, "correct")?, count(2, "n")?, count(3, "k")?);
        let score = chance_corrected_score(correct, n, k).map_err(|e| bad(e.to_string()))?;
        rows.push(ContentRow { stimulus_id: rec[0].to_string(), correct, n, k, score, eligible: is_eligible(score) });
    }
    Ok(rows)
}

pub fn validate_content_file(path: &Path) -> Result<Vec<ContentRow>, SessionError> {
    validate_content(std::fs::File::open(path)?)
}

/// Plain-text report, one line per stimulus.
pub fn content_report(rows: &[ContentRow]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&format!(
            "{}\t{}/{} (k={})\t{:.1}%\t{}\n",
            r.stimulus_id,
            r.correct,
            r.n,
            r.k,
            r.score,
            if r.eligible { "eligible" } else { "ineligible" }
        ));
    }
    let eligible = rows.iter().filter(|r| r.eligible).count();
    out.push_str(&format!("{eligible} of {} stimuli exceed {ELIGIBILITY_PERCENT}%\n", rows.len()));
    out
}
