use serde::{Deserialize, Serialize};

use super::features::differentiate;
use super::{validate_trace, BodyError, Joint, SkeletonFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Total-body kinetic energy (m²/s², unit masses) above which a frame
    /// counts as moving.
    pub energy_threshold: f64,
    pub min_duration_ms: f64,
    pub padding_ms: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig { energy_threshold: 0.01, min_duration_ms: 300.0, padding_ms: 100.0 }
    }
}

/// Per-frame ½|v|² summed over all eleven joints.
pub fn body_energy_profile(stream: &[SkeletonFrame]) -> Result<Vec<f64>, BodyError> {
    validate_trace(stream)?;
    if stream.len() < 2 {
        return Ok(vec![0.0; stream.len()]);
    }
    let t: Vec<f64> = stream.iter().map(|f| f.timestamp_ms / 1000.0).collect();
    let mut energy = vec![0.0; stream.len()];
    for j in Joint::ALL {
        let track: Vec<_> = stream.iter().map(|f| f.joint(j)).collect();
        for (e, v) in energy.iter_mut().zip(differentiate(&track, &t)) {
            *e += 0.5 * v.norm_squared();
        }
    }
    Ok(energy)
}

/// Maximal runs of frames above the energy threshold that last at least
/// `min_duration_ms` (first to last frame), padded on both sides and clamped
/// to the stream. Padded runs that touch are merged so the output stays
/// disjoint and ordered.
pub fn segment_gestures(stream: &[SkeletonFrame], config: &SegmentConfig) -> Result<Vec<(f64, f64)>, BodyError> {
    let energy = body_energy_profile(stream)?;
    let (Some(first), Some(last)) = (stream.first(), stream.last()) else {
        return Ok(Vec::new());
    };
    let (lo, hi) = (first.timestamp_ms, last.timestamp_ms);

    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=energy.len() {
        let active = energy.get(i).is_some_and(|&e| e > config.energy_threshold);
        match (active, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let (a, b) = (stream[s].timestamp_ms, stream[i - 1].timestamp_ms);
                if b - a >= config.min_duration_ms {
                    runs.push(((a - config.padding_ms).max(lo), (b + config.padding_ms).min(hi)));
                }
                start = None;
            }
            _ => {}
        }
    }

    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(runs.len());
    for (a, b) in runs {
        match merged.last_mut() {
            Some(prev) if a <= prev.1 => prev.1 = prev.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    Ok(merged)
}

/// Frames of the longest detected gesture, or the whole stream when no
/// segment is found or the longest one is too short to describe.
pub fn longest_gesture(stream: &[SkeletonFrame], config: &SegmentConfig) -> Result<Vec<SkeletonFrame>, BodyError> {
    let segments = segment_gestures(stream, config)?;
    let best = segments.into_iter().max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)));
    if let Some((a, b)) = best {
        let frames: Vec<SkeletonFrame> =
            stream.iter().filter(|f| f.timestamp_ms >= a && f.timestamp_ms <= b).cloned().collect();
        if frames.len() >= 3 && b - a >= 200.0 {
            return Ok(frames);
        }
    }
    Ok(stream.to_vec())
}
