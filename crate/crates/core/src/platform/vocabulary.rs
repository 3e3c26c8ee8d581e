//! The twenty platform emotions and their canonical arousal/valence points.

use serde::{Deserialize, Serialize};

use crate::emotionml::AVPoint;
use crate::keyvalue::KeyValues;

use super::PlatformError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    PosValenceHighArousal,
    NegValenceHighArousal,
    NegValenceLowArousal,
    PosValenceLowArousal,
}

/// Sign-based quadrant; a zero coordinate counts as positive.
pub fn quadrant(p: &AVPoint) -> Quadrant {
    match (p.valence >= 0.0, p.arousal >= 0.0) {
        (true, true) => Quadrant::PosValenceHighArousal,
        (false, true) => Quadrant::NegValenceHighArousal,
        (false, false) => Quadrant::NegValenceLowArousal,
        (true, false) => Quadrant::PosValenceLowArousal,
    }
}

/// (label, valence, arousal)
const DEFAULT_TABLE: [(&str, f64, f64); 20] = [
    ("happy", 0.6, 0.5),
    ("sad", -0.6, -0.5),
    ("afraid", -0.6, 0.6),
    ("angry", -0.6, 0.7),
    ("disgusted", -0.6, 0.3),
    ("surprised", 0.3, 0.7),
    ("excited", 0.6, 0.8),
    ("interested", 0.4, 0.3),
    ("bored", -0.3, -0.6),
    ("worried", -0.4, 0.3),
    ("disappointed", -0.5, -0.3),
    ("frustrated", -0.5, 0.5),
    ("hurt", -0.6, -0.2),
    ("kind", 0.5, -0.3),
    ("jealous", -0.4, 0.4),
    ("unfriendly", -0.5, 0.2),
    ("joking", 0.6, 0.4),
    ("sneaky", -0.2, 0.3),
    ("ashamed", -0.5, -0.4),
    ("proud", 0.5, 0.3),
];

/// Basic-emotion classifier labels and the platform emotion each maps to.
pub const BASIC_TO_PLATFORM: [(&str, &str); 6] = [
    ("anger", "angry"),
    ("disgust", "disgusted"),
    ("fear", "afraid"),
    ("happiness", "happy"),
    ("sadness", "sad"),
    ("surprise", "surprised"),
];

pub fn platform_label_for_basic(basic: &str) -> Option<&'static str> {
    BASIC_TO_PLATFORM.iter().find(|(b, _)| *b == basic).map(|(_, p)| *p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionEntry {
    pub label: String,
    pub point: AVPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    entries: Vec<EmotionEntry>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            entries: DEFAULT_TABLE
                .iter()
                .map(|&(label, valence, arousal)| EmotionEntry { label: label.into(), point: AVPoint::new(arousal, valence) })
                .collect(),
        }
    }
}

impl Vocabulary {
    pub const SIZE: usize = 20;

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    pub fn entries(&self) -> &[EmotionEntry] {
        &self.entries
    }

    pub fn contains(&self, label: &str) -> bool {
        self.point(label).is_some()
    }

    pub fn point(&self, label: &str) -> Option<AVPoint> {
        self.entries.iter().find(|e| e.label == label).map(|e| e.point)
    }

    pub fn require(&self, label: &str) -> Result<AVPoint, PlatformError> {
        self.point(label).ok_or_else(|| PlatformError::UnknownEmotion(label.to_string()))
    }

    pub fn quadrant_of(&self, label: &str) -> Result<Quadrant, PlatformError> {
        self.require(label).map(|p| quadrant(&p))
    }

    /// Vocabulary label whose canonical point is closest to `p`.
    pub fn nearest(&self, p: &AVPoint) -> &str {
        self.entries
            .iter()
            .min_by(|a, b| a.point.distance(p).total_cmp(&b.point.distance(p)).then_with(|| a.label.cmp(&b.label)))
            .map(|e| e.label.as_str())
            .expect("vocabulary is never empty")
    }

    /// Applies `emotion.<label>.valence` / `emotion.<label>.arousal`
    /// overrides. Labels must already exist and points must stay strictly
    /// inside a quadrant.
    pub fn apply_overrides(&mut self, kv: &KeyValues) -> Result<(), PlatformError> {
        for (key, _) in kv.iter() {
            let Some(rest) = key.strip_prefix("emotion.") else { continue };
            let (label, axis) = rest
                .rsplit_once('.')
                .ok_or_else(|| PlatformError::Config(format!("bad vocabulary key `{key}`")))?;
            let value: f64 = kv.required(key).map_err(|e| PlatformError::Config(e.to_string()))?;
            let entry = self
                .entries
                .iter_mut()
                .find(|e| e.label == label)
                .ok_or_else(|| PlatformError::UnknownEmotion(label.to_string()))?;
            match axis {
                "valence" => entry.point.valence = value,
                "arousal" => entry.point.arousal = value,
                _ => return Err(PlatformError::Config(format!("bad vocabulary key `{key}`"))),
            }
        }
        self.check()
    }

    fn check(&self) -> Result<(), PlatformError> {
        for e in &self.entries {
            if !e.point.is_valid() || e.point.arousal == 0.0 || e.point.valence == 0.0 {
                return Err(PlatformError::Config(format!(
                    "canonical point of `{}` must lie strictly inside a quadrant",
                    e.label
                )));
            }
        }
        Ok(())
    }
}
