use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FaceError, FaceFeatureFrame, FEATURE_DIM};
use crate::emotionml::AVPoint;
use crate::keyvalue::{join_vector, KeyValues};

pub const DEFAULT_LAMBDA: f64 = 1.0;
/// Weight of the newest clamped output in the exponential smoothing.
pub const SMOOTHING_ALPHA: f64 = 0.3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearOutput {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearOutput {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// One linear map per output dimension.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearAVModel {
    pub valence: LinearOutput,
    pub arousal: LinearOutput,
    pub lambda: f64,
}

/// Ridge regression per output, bias fitted by mean-centering and left
/// unpenalized: minimizes ‖Xw + b − y‖² + λ‖w‖².
///
/// Solved through the SVD of the centered design, `w = V·diag(s/(s²+λ))·Uᵀy`,
/// which stays stable when `λ` is tiny.
pub fn train_model(x: &[[f64; FEATURE_DIM]], y: &[[f64; 2]], lambda: f64) -> Result<LinearAVModel, FaceError> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(FaceError::DimensionMismatch(format!("{n} feature rows, {} target rows", y.len())));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(FaceError::InvalidValue(format!("ridge parameter {lambda}")));
    }
    if x.iter().flatten().chain(y.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(FaceError::InvalidValue("non-finite training value".into()));
    }
    let design = DMatrix::from_fn(n, FEATURE_DIM, |i, j| x[i][j]);
    let x_mean: Vec<f64> = (0..FEATURE_DIM).map(|j| design.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, FEATURE_DIM, |i, j| design[(i, j)] - x_mean[j]);

    let svd = centered.svd(true, true);
    let (u, v_t) = (svd.u.as_ref().expect("u requested"), svd.v_t.as_ref().expect("v_t requested"));
    let s = &svd.singular_values;
    let s_max = s.max();
    let tol = s_max * (n.max(FEATURE_DIM) as f64) * f64::EPSILON;
    if lambda == 0.0 && (n <= FEATURE_DIM || s.len() < FEATURE_DIM || s.iter().any(|&v| v <= tol)) {
        return Err(FaceError::DegenerateSystem);
    }

    let fit = |col: usize| -> LinearOutput {
        let target = DVector::from_fn(n, |i, _| y[i][col]);
        let y_mean = target.mean();
        let centered_y = target.add_scalar(-y_mean);
        let uty = u.transpose() * centered_y;
        let shrunk = DVector::from_fn(s.len(), |k, _| {
            let d = s[k] * s[k] + lambda;
            if s[k] <= tol || d == 0.0 {
                0.0
            } else {
                s[k] / d * uty[k]
            }
        });
        let w = v_t.transpose() * shrunk;
        let bias = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
        LinearOutput { weights: w.iter().copied().collect(), bias }
    };
    Ok(LinearAVModel { valence: fit(0), arousal: fit(1), lambda })
}

impl LinearAVModel {
    pub fn is_trained(&self) -> bool {
        self.valence.weights.len() == FEATURE_DIM && self.arousal.weights.len() == FEATURE_DIM
    }

    /// `(valence, arousal)` before clamping.
    pub fn raw(&self, features: &[f64]) -> Result<(f64, f64), FaceError> {
        if !self.is_trained() {
            return Err(FaceError::UntrainedModel);
        }
        if features.len() != FEATURE_DIM {
            return Err(FaceError::DimensionMismatch(format!("{} features, expected {FEATURE_DIM}", features.len())));
        }
        Ok((self.valence.eval(features), self.arousal.eval(features)))
    }

    /// Keys: `lambda`, `valence.weights`, `valence.bias`, `arousal.weights`,
    /// `arousal.bias`; weight vectors are comma-separated, 34 entries each.
    pub fn to_keyvalues(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("lambda", self.lambda);
        for (name, out) in [("valence", &self.valence), ("arousal", &self.arousal)] {
            kv.set(format!("{name}.weights"), join_vector(&out.weights));
            kv.set(format!("{name}.bias"), out.bias);
        }
        kv
    }

    pub fn from_keyvalues(kv: &KeyValues) -> Result<Self, FaceError> {
        let output = |name: &str| -> Result<LinearOutput, FaceError> {
            let weights = kv.vector(&format!("{name}.weights"))?;
            if weights.len() != FEATURE_DIM {
                return Err(FaceError::DimensionMismatch(format!(
                    "{name}.weights has {} entries, expected {FEATURE_DIM}",
                    weights.len()
                )));
            }
            Ok(LinearOutput { weights, bias: kv.required(&format!("{name}.bias"))? })
        };
        let model = LinearAVModel { valence: output("valence")?, arousal: output("arousal")?, lambda: kv.required("lambda")? };
        let all = model.valence.weights.iter().chain(&model.arousal.weights).chain([&model.valence.bias, &model.arousal.bias]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(FaceError::InvalidValue("non-finite coefficient".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), FaceError> {
        std::fs::write(path, self.to_keyvalues().to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FaceError> {
        Self::from_keyvalues(&KeyValues::load(path)?)
    }
}

/// Per-stream prediction state: clamps each output to [-1, 1], then blends it
/// with the previous output (`α·new + (1 − α)·previous`).
#[derive(Debug, Clone)]
pub struct FacePredictor<'m> {
    model: &'m LinearAVModel,
    previous: Option<AVPoint>,
}

impl<'m> FacePredictor<'m> {
    pub fn new(model: &'m LinearAVModel) -> Self {
        FacePredictor { model, previous: None }
    }

    pub fn predict(&mut self, frame: &FaceFeatureFrame) -> Result<AVPoint, FaceError> {
        let (v, a) = self.model.raw(&frame.features)?;
        let clamped = AVPoint::clamped(a, v);
        let out = match self.previous {
            None => clamped,
            Some(p) => AVPoint::new(
                SMOOTHING_ALPHA * clamped.arousal + (1.0 - SMOOTHING_ALPHA) * p.arousal,
                SMOOTHING_ALPHA * clamped.valence + (1.0 - SMOOTHING_ALPHA) * p.valence,
            ),
        };
        self.previous = Some(out);
        Ok(out)
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }
}
