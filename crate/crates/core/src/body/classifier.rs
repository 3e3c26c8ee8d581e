use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{extract_features, BodyError, BodyFeatures, SkeletonFrame, FEATURE_COUNT};
use crate::emotionml::AVPoint;
use crate::keyvalue::{join_vector, KeyValues};
use crate::platform::vocabulary::{platform_label_for_basic, Vocabulary};

/// Label set of the classifier, in lexicographic order.
pub const BASIC_EMOTIONS: [&str; 6] = ["anger", "disgust", "fear", "happiness", "sadness", "surprise"];

type Vector = [f64; FEATURE_COUNT];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmotionCentroidModel {
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    /// `(label, scaled centroid)` in [`BASIC_EMOTIONS`] order.
    pub centroids: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyClassification {
    /// One of [`BASIC_EMOTIONS`].
    pub label: String,
    /// The platform vocabulary label the basic emotion maps to.
    pub platform_label: String,
    pub confidence: f64,
    pub av: AVPoint,
}

fn vec_mean(rows: &[Vector]) -> Vec<f64> {
    (0..FEATURE_COUNT).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64).collect()
}

/// Fits per-feature z-scaling (population std, 1 where degenerate) on all
/// vectors and takes the mean scaled vector per label.
pub fn train_centroids(samples: &[(String, BodyFeatures)]) -> Result<EmotionCentroidModel, BodyError> {
    if let Some((bad, _)) = samples.iter().find(|(l, _)| !BASIC_EMOTIONS.contains(&l.as_str())) {
        return Err(BodyError::UnknownLabel(bad.clone()));
    }
    if let Some(missing) = BASIC_EMOTIONS.iter().find(|e| !samples.iter().any(|(l, _)| l == *e)) {
        return Err(BodyError::MissingLabel(missing.to_string()));
    }
    let rows: Vec<Vector> = samples.iter().map(|(_, f)| f.to_vector()).collect();
    let mean = vec_mean(&rows);
    let scale: Vec<f64> = (0..FEATURE_COUNT)
        .map(|k| {
            let var = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / rows.len() as f64;
            let sd = var.sqrt();
            if sd < 1e-12 {
                1.0
            } else {
                sd
            }
        })
        .collect();
    let mut model = EmotionCentroidModel { feature_mean: mean, feature_scale: scale, centroids: Vec::new() };
    for label in BASIC_EMOTIONS {
        let scaled: Vec<Vector> = samples
            .iter()
            .filter(|(l, _)| l == label)
            .map(|(_, f)| model.scale(&f.to_vector()).try_into().expect("feature width"))
            .collect();
        model.centroids.push((label.to_string(), vec_mean(&scaled)));
    }
    Ok(model)
}

pub fn train_from_traces(traces: &[(String, Vec<SkeletonFrame>)]) -> Result<EmotionCentroidModel, BodyError> {
    let samples = traces
        .iter()
        .map(|(l, t)| Ok((l.clone(), extract_features(t)?)))
        .collect::<Result<Vec<_>, BodyError>>()?;
    train_centroids(&samples)
}

impl EmotionCentroidModel {
    pub fn is_trained(&self) -> bool {
        self.centroids.len() == BASIC_EMOTIONS.len()
            && self.feature_mean.len() == FEATURE_COUNT
            && self.feature_scale.len() == FEATURE_COUNT
            && self.centroids.iter().all(|(_, c)| c.len() == FEATURE_COUNT)
    }

    pub fn scale(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.feature_mean).zip(&self.feature_scale).map(|((x, m), s)| (x - m) / s).collect()
    }

    /// Key:value text: `labels`, `feature_mean`, `feature_scale` and one
    /// `centroid.<label>` per emotion, vectors comma-separated.
    pub fn to_keyvalues(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("labels", self.centroids.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>().join(","));
        kv.set("feature_mean", join_vector(&self.feature_mean));
        kv.set("feature_scale", join_vector(&self.feature_scale));
        for (label, c) in &self.centroids {
            kv.set(format!("centroid.{label}"), join_vector(c));
        }
        kv
    }

    pub fn from_keyvalues(kv: &KeyValues) -> Result<Self, BodyError> {
        let mut model = EmotionCentroidModel {
            feature_mean: kv.vector("feature_mean")?,
            feature_scale: kv.vector("feature_scale")?,
            centroids: Vec::new(),
        };
        let labels: Vec<String> = kv.require("labels")?.split(',').map(|s| s.trim().to_string()).collect();
        for label in BASIC_EMOTIONS {
            if !labels.iter().any(|l| l == label) {
                return Err(BodyError::MissingLabel(label.to_string()));
            }
        }
        if let Some(bad) = labels.iter().find(|l| !BASIC_EMOTIONS.contains(&l.as_str())) {
            return Err(BodyError::UnknownLabel(bad.clone()));
        }
        for label in BASIC_EMOTIONS {
            model.centroids.push((label.to_string(), kv.vector(&format!("centroid.{label}"))?));
        }
        if !model.is_trained() || model.feature_scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(BodyError::UntrainedModel);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), BodyError> {
        std::fs::write(path, self.to_keyvalues().to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BodyError> {
        Self::from_keyvalues(&KeyValues::load(path)?)
    }
}

/// Nearest centroid in scaled space; ties go to the lexicographically smaller
/// label. Confidence is d₂/(d₁+d₂) over the two smallest distances.
pub fn classify(
    features: &BodyFeatures,
    model: &EmotionCentroidModel,
    vocabulary: &Vocabulary,
) -> Result<BodyClassification, BodyError> {
    if !model.is_trained() {
        return Err(BodyError::UntrainedModel);
    }
    let x = model.scale(&features.to_vector());
    let mut ranked: Vec<(f64, &str)> = model
        .centroids
        .iter()
        .map(|(l, c)| (x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), l.as_str()))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let (d1, label) = ranked[0];
    let d2 = ranked[1].0;
    let confidence = if d1 + d2 == 0.0 { 0.5 } else { d2 / (d1 + d2) };
    let platform_label = platform_label_for_basic(label).ok_or_else(|| BodyError::UnknownLabel(label.into()))?;
    let av = vocabulary.point(platform_label).unwrap_or(AVPoint::NEUTRAL);
    Ok(BodyClassification { label: label.to_string(), platform_label: platform_label.to_string(), confidence, av })
}
