//! Full-body expressive features from skeleton traces, gesture segmentation
//! and a nearest-centroid classifier over the six basic emotions.
//!
//! Coordinates are meters with `x` lateral, `y` up and `z` pointing in the
//! direction the person faces, so positive lean is forward.

mod classifier;
mod features;
mod segment;

use std::io::Read;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

use crate::keyvalue::KeyValueError;

pub use classifier::{classify, train_centroids, train_from_traces, BodyClassification, EmotionCentroidModel, BASIC_EMOTIONS};
pub use features::{extract_features, BodyFeatures, FEATURE_COUNT, FEATURE_NAMES};
pub use segment::{body_energy_profile, longest_gesture, segment_gestures, SegmentConfig};

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error)]
pub enum BodyError {
    #[error("trace has {frames} frames spanning {span_ms} ms; need at least 3 frames over 200 ms")]
    TooFewFrames { frames: usize, span_ms: f64 },
    #[error("timestamps must strictly increase (frame {index})")]
    NonMonotoneTimestamps { index: usize },
    #[error("non-finite coordinate in frame {index}")]
    NonFinite { index: usize },
    #[error("no training trace for `{0}`")]
    MissingLabel(String),
    #[error("`{0}` is not one of the six basic emotions")]
    UnknownLabel(String),
    #[error("model is not trained")]
    UntrainedModel,
    #[error("trace CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Model(#[from] KeyValueError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Joint {
    Head,
    Neck,
    LShoulder,
    RShoulder,
    LElbow,
    RElbow,
    LHand,
    RHand,
    Torso,
    LHip,
    RHip,
}

impl Joint {
    pub const ALL: [Joint; 11] = [
        Joint::Head,
        Joint::Neck,
        Joint::LShoulder,
        Joint::RShoulder,
        Joint::LElbow,
        Joint::RElbow,
        Joint::LHand,
        Joint::RHand,
        Joint::Torso,
        Joint::LHip,
        Joint::RHip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Joint::Head => "head",
            Joint::Neck => "neck",
            Joint::LShoulder => "l_shoulder",
            Joint::RShoulder => "r_shoulder",
            Joint::LElbow => "l_elbow",
            Joint::RElbow => "r_elbow",
            Joint::LHand => "l_hand",
            Joint::RHand => "r_hand",
            Joint::Torso => "torso",
            Joint::LHip => "l_hip",
            Joint::RHip => "r_hip",
        }
    }

    pub fn from_name(name: &str) -> Option<Joint> {
        Joint::ALL.into_iter().find(|j| j.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonFrame {
    pub timestamp_ms: f64,
    pub joints: [Vec3; 11],
}

impl SkeletonFrame {
    pub fn new(timestamp_ms: f64, joints: [Vec3; 11]) -> Self {
        SkeletonFrame { timestamp_ms, joints }
    }

    pub fn joint(&self, j: Joint) -> Vec3 {
        self.joints[j.index()]
    }

    pub fn set(&mut self, j: Joint, p: Vec3) {
        self.joints[j.index()] = p;
    }
}

/// Checks finiteness and strictly increasing timestamps.
pub fn validate_trace(trace: &[SkeletonFrame]) -> Result<(), BodyError> {
    for (i, f) in trace.iter().enumerate() {
        if !f.timestamp_ms.is_finite() || f.joints.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(BodyError::NonFinite { index: i });
        }
        if i > 0 && f.timestamp_ms <= trace[i - 1].timestamp_ms {
            return Err(BodyError::NonMonotoneTimestamps { index: i });
        }
    }
    Ok(())
}

pub const TRACE_HEADER: &str = "t_ms,joint,x,y,z";

/// Parses the `t_ms,joint,x,y,z` trace format: one row per joint per frame,
/// every frame listing all eleven joints.
pub fn parse_trace_csv(input: impl Read) -> Result<Vec<SkeletonFrame>, BodyError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> =
        reader.headers().map_err(|e| BodyError::Csv(e.to_string()))?.iter().map(str::to_string).collect();
    if header != ["t_ms", "joint", "x", "y", "z"] {
        return Err(BodyError::Csv(format!("expected header `{TRACE_HEADER}`, got `{}`", header.join(","))));
    }
    let mut frames: Vec<(SkeletonFrame, [bool; 11])> = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| BodyError::Csv(e.to_string()))?;
        let line = row + 2;
        let num = |i: usize| -> Result<f64, BodyError> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| BodyError::Csv(format!("line {line}: column {} is not a number", i + 1)))
        };
        let t = num(0)?;
        let joint = rec
            .get(1)
            .and_then(Joint::from_name)
            .ok_or_else(|| BodyError::Csv(format!("line {line}: unknown joint {:?}", rec.get(1).unwrap_or(""))))?;
        let p = Vec3::new(num(2)?, num(3)?, num(4)?);
        let needs_new = frames.last().is_none_or(|(f, _)| f.timestamp_ms != t);
        if needs_new {
            if let Some((f, seen)) = frames.last() {
                if seen.iter().any(|s| !s) {
                    return Err(BodyError::Csv(format!("frame at {} ms lacks some joints", f.timestamp_ms)));
                }
            }
            frames.push((SkeletonFrame::new(t, [Vec3::zeros(); 11]), [false; 11]));
        }
        let (f, seen) = frames.last_mut().expect("just pushed");
        if std::mem::replace(&mut seen[joint.index()], true) {
            return Err(BodyError::Csv(format!("line {line}: joint {} repeated at {t} ms", joint.name())));
        }
        f.set(joint, p);
    }
    if let Some((f, seen)) = frames.last() {
        if seen.iter().any(|s| !s) {
            return Err(BodyError::Csv(format!("frame at {} ms lacks some joints", f.timestamp_ms)));
        }
    }
    let trace: Vec<SkeletonFrame> = frames.into_iter().map(|(f, _)| f).collect();
    validate_trace(&trace)?;
    Ok(trace)
}

pub fn read_trace(path: &Path) -> Result<Vec<SkeletonFrame>, BodyError> {
    parse_trace_csv(std::fs::File::open(path)?)
}

pub fn trace_to_csv(trace: &[SkeletonFrame]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for f in trace {
        for j in Joint::ALL {
            let p = f.joint(j);
            out.push_str(&format!("{},{},{},{},{}\n", f.timestamp_ms, j.name(), p.x, p.y, p.z));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: f64) -> SkeletonFrame {
        let mut joints = [Vec3::zeros(); 11];
        for (i, j) in joints.iter_mut().enumerate() {
            *j = Vec3::new(i as f64 * 0.1, 1.0 + i as f64 * 0.01, 0.5);
        }
        SkeletonFrame::new(t, joints)
    }

    #[test]
    fn csv_round_trip() {
        let trace = vec![frame(0.0), frame(33.5), frame(66.0)];
        let back = parse_trace_csv(trace_to_csv(&trace).as_bytes()).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_trace_csv("a,b\n".as_bytes()), Err(BodyError::Csv(_))));
        let missing = "t_ms,joint,x,y,z\n0,head,0,0,0\n10,head,0,0,0\n";
        assert!(matches!(parse_trace_csv(missing.as_bytes()), Err(BodyError::Csv(_))));
        let mut text = trace_to_csv(&[frame(10.0), frame(5.0)]);
        assert!(matches!(parse_trace_csv(text.as_bytes()), Err(BodyError::NonMonotoneTimestamps { index: 1 })));
        text = trace_to_csv(&[frame(0.0)]).replace("head", "tail");
        assert!(matches!(parse_trace_csv(text.as_bytes()), Err(BodyError::Csv(_))));
    }
}
