use serde::{Deserialize, Serialize};

use super::vocabulary::{quadrant, Vocabulary};
use super::PlatformError;
use crate::emotionml::{to_internal, AVPoint, EmotionAnnotation};

/// Maximum AV distance from the target's canonical point that still counts
/// as a match.
pub const MATCH_DISTANCE: f64 = 0.6;
/// Chance-corrected percentage a stimulus must exceed to be used.
pub const ELIGIBILITY_PERCENT: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptResult {
    pub target: String,
    pub recognized: AVPoint,
    pub recognized_label: String,
    pub distance: f64,
    pub matched: bool,
    pub coins: u32,
}

/// Match iff same quadrant as the target's canonical point and within
/// [`MATCH_DISTANCE`]. A match pays one coin, two when the annotation's
/// category also names the target. Annotations without a category are
/// labeled with the nearest vocabulary emotion.
pub fn evaluate_attempt(
    vocabulary: &Vocabulary,
    target: &str,
    recognized: &EmotionAnnotation,
) -> Result<AttemptResult, PlatformError> {
    let canonical = vocabulary.require(target)?;
    let p = to_internal(recognized);
    let distance = p.distance(&canonical);
    let matched = quadrant(&p) == quadrant(&canonical) && distance <= MATCH_DISTANCE;
    let recognized_label = match &recognized.category {
        Some(c) => c.clone(),
        None => vocabulary.nearest(&p).to_string(),
    };
    let coins = match (matched, recognized.category.as_deref() == Some(target)) {
        (true, true) => 2,
        (true, false) => 1,
        (false, _) => 0,
    };
    Ok(AttemptResult { target: target.to_string(), recognized: p, recognized_label, distance, matched, coins })
}

/// A zero-coin result for a turn whose annotation never arrived.
pub fn missed_attempt(target: &str) -> AttemptResult {
    AttemptResult {
        target: target.to_string(),
        recognized: AVPoint::NEUTRAL,
        recognized_label: String::new(),
        distance: f64::NAN,
        matched: false,
        coins: 0,
    }
}

/// `max(0, (p − 1/k) / (1 − 1/k)) × 100` with `p = correct / n`.
pub fn chance_corrected_score(correct: u64, n: u64, k: u64) -> Result<f64, PlatformError> {
    if n == 0 || correct > n || k < 2 {
        return Err(PlatformError::BadCounts { correct, n, k });
    }
    let p = correct as f64 / n as f64;
    let chance = 1.0 / k as f64;
    Ok(((p - chance) / (1.0 - chance)).max(0.0) * 100.0)
}

pub fn is_eligible(score_percent: f64) -> bool {
    score_percent > ELIGIBILITY_PERCENT
}
