//! Valence/arousal regression from 34-slot facial feature frames.
//!
//! Slot layout (0-based): 0..28 expression descriptors, 28..31 head yaw,
//! pitch and roll, 31..34 the windowed standard deviation of those three.

mod model;
mod stream;

use thiserror::Error;

use crate::keyvalue::KeyValueError;

pub use model::{train_model, FacePredictor, LinearAVModel, LinearOutput, DEFAULT_LAMBDA, SMOOTHING_ALPHA};
pub use stream::{
    feature_csv, fill_pose_variation, parse_feature_csv, parse_training_csv, pose_variation, read_feature_csv,
    read_training_csv, training_csv, TrainingRows, FEATURE_HEADER,
};

pub const FEATURE_DIM: usize = 34;
pub const EXPRESSION_SLOTS: usize = 28;
/// First of the yaw/pitch/roll slots.
pub const POSE_SLOT: usize = 28;
/// First of the three pose-variation slots.
pub const POSE_STD_SLOT: usize = 31;
pub const POSE_WINDOW: usize = 30;

#[derive(Debug, Error)]
pub enum FaceError {
    #[error("pose window holds {0} frames; need at least 2")]
    WindowTooSmall(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("normal equations are rank deficient; use a positive ridge parameter")]
    DegenerateSystem,
    #[error("model is not trained")]
    UntrainedModel,
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("timestamps must strictly increase (frame {index})")]
    NonMonotoneTimestamps { index: usize },
    #[error("feature CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Model(#[from] KeyValueError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceFeatureFrame {
    pub timestamp_ms: f64,
    pub features: [f64; FEATURE_DIM],
}

impl FaceFeatureFrame {
    pub fn new(timestamp_ms: f64, features: [f64; FEATURE_DIM]) -> Self {
        FaceFeatureFrame { timestamp_ms, features }
    }

    pub fn pose(&self) -> [f64; 3] {
        [self.features[POSE_SLOT], self.features[POSE_SLOT + 1], self.features[POSE_SLOT + 2]]
    }
}

pub fn validate_stream(frames: &[FaceFeatureFrame]) -> Result<(), FaceError> {
    for (i, f) in frames.iter().enumerate() {
        if !f.timestamp_ms.is_finite() || f.features.iter().any(|v| !v.is_finite()) {
            return Err(FaceError::InvalidValue(format!("non-finite value in frame {i}")));
        }
        if i > 0 && f.timestamp_ms <= frames[i - 1].timestamp_ms {
            return Err(FaceError::NonMonotoneTimestamps { index: i });
        }
    }
    Ok(())
}
