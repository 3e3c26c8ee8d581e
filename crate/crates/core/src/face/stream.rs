use std::io::Read;
use std::path::Path;

use super::{validate_stream, FaceError, FaceFeatureFrame, FEATURE_DIM, POSE_STD_SLOT, POSE_WINDOW};

pub const FEATURE_HEADER: &str = "t_ms,f1..f34";

/// Per-axis standard deviation of yaw, pitch and roll over the last
/// [`POSE_WINDOW`] frames of `window`. Uses the population estimator
/// (divide by n), so a yaw alternating ±a over an even count gives exactly a.
pub fn pose_variation(window: &[FaceFeatureFrame]) -> Result<[f64; 3], FaceError> {
    let tail = &window[window.len().saturating_sub(POSE_WINDOW)..];
    if tail.len() < 2 {
        return Err(FaceError::WindowTooSmall(tail.len()));
    }
    let n = tail.len() as f64;
    let mut out = [0.0; 3];
    for (axis, o) in out.iter_mut().enumerate() {
        // shifting by the first sample keeps a constant pose at exactly zero
        let origin = tail[0].pose()[axis];
        let shifted: Vec<f64> = tail.iter().map(|f| f.pose()[axis] - origin).collect();
        let mean = shifted.iter().sum::<f64>() / n;
        *o = (shifted.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    }
    Ok(out)
}

/// Writes each frame's pose-variation slots from the window ending at that
/// frame; the very first frame gets zeros.
pub fn fill_pose_variation(frames: &mut [FaceFeatureFrame]) {
    for i in 0..frames.len() {
        let std = pose_variation(&frames[..=i]).unwrap_or([0.0; 3]);
        frames[i].features[POSE_STD_SLOT..POSE_STD_SLOT + 3].copy_from_slice(&std);
    }
}

fn numbers(rec: &csv::StringRecord, line: usize) -> Result<Vec<f64>, FaceError> {
    rec.iter()
        .enumerate()
        .map(|(i, s)| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| FaceError::Csv(format!("line {line}: column {} is not a finite number", i + 1)))
        })
        .collect()
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[String]) -> Result<(), FaceError> {
    let header: Vec<String> =
        reader.headers().map_err(|e| FaceError::Csv(e.to_string()))?.iter().map(str::to_string).collect();
    if header != expected {
        return Err(FaceError::Csv(format!("expected header `{}`", expected.join(","))));
    }
    Ok(())
}

fn slot_names() -> impl Iterator<Item = String> {
    (1..=FEATURE_DIM).map(|i| format!("f{i}"))
}

/// Parses a feature stream with header `t_ms,f1,...,f34`.
pub fn parse_feature_csv(input: impl Read) -> Result<Vec<FaceFeatureFrame>, FaceError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let expected: Vec<String> = std::iter::once("t_ms".to_string()).chain(slot_names()).collect();
    check_header(&mut reader, &expected)?;
    let mut frames = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| FaceError::Csv(e.to_string()))?;
        let v = numbers(&rec, row + 2)?;
        let mut features = [0.0; FEATURE_DIM];
        features.copy_from_slice(&v[1..]);
        frames.push(FaceFeatureFrame::new(v[0], features));
    }
    validate_stream(&frames)?;
    Ok(frames)
}

pub fn read_feature_csv(path: &Path) -> Result<Vec<FaceFeatureFrame>, FaceError> {
    parse_feature_csv(std::fs::File::open(path)?)
}

pub fn feature_csv(frames: &[FaceFeatureFrame]) -> String {
    let mut out: Vec<String> = vec![std::iter::once("t_ms".to_string()).chain(slot_names()).collect::<Vec<_>>().join(",")];
    for f in frames {
        let row: Vec<String> = std::iter::once(f.timestamp_ms).chain(f.features).map(|v| v.to_string()).collect();
        out.push(row.join(","));
    }
    out.join("\n") + "\n"
}

/// Feature rows and their `[valence, arousal]` targets.
pub type TrainingRows = (Vec<[f64; FEATURE_DIM]>, Vec<[f64; 2]>);

/// Parses training rows `f1,...,f34,valence,arousal`; targets must lie in
/// [-1, 1].
pub fn parse_training_csv(input: impl Read) -> Result<TrainingRows, FaceError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let expected: Vec<String> = slot_names().chain(["valence".to_string(), "arousal".to_string()]).collect();
    check_header(&mut reader, &expected)?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| FaceError::Csv(e.to_string()))?;
        let v = numbers(&rec, row + 2)?;
        let mut x = [0.0; FEATURE_DIM];
        x.copy_from_slice(&v[..FEATURE_DIM]);
        let y = [v[FEATURE_DIM], v[FEATURE_DIM + 1]];
        if y.iter().any(|t| t.abs() > 1.0) {
            return Err(FaceError::Csv(format!("line {}: targets must lie in [-1, 1]", row + 2)));
        }
        xs.push(x);
        ys.push(y);
    }
    Ok((xs, ys))
}

pub fn read_training_csv(path: &Path) -> Result<TrainingRows, FaceError> {
    parse_training_csv(std::fs::File::open(path)?)
}

pub fn training_csv(xs: &[[f64; FEATURE_DIM]], ys: &[[f64; 2]]) -> String {
    let header: Vec<String> = slot_names().chain(["valence".to_string(), "arousal".to_string()]).collect();
    let mut out = vec![header.join(",")];
    for (x, y) in xs.iter().zip(ys) {
        out.push(x.iter().chain(y).map(|v| v.to_string()).collect::<Vec<_>>().join(","));
    }
    out.join("\n") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face::POSE_SLOT;

    fn with_yaw(t: f64, yaw: f64) -> FaceFeatureFrame {
        let mut f = [0.0; FEATURE_DIM];
        f[POSE_SLOT] = yaw;
        f[POSE_SLOT + 1] = 0.2;
        FaceFeatureFrame::new(t, f)
    }

    #[test]
    fn pose_variation_examples() {
        let constant: Vec<_> = (0..10).map(|i| with_yaw(i as f64, 0.4)).collect();
        assert_eq!(pose_variation(&constant).unwrap(), [0.0, 0.0, 0.0]);
        let alt: Vec<_> = (0..30).map(|i| with_yaw(i as f64, if i % 2 == 0 { 0.25 } else { -0.25 })).collect();
        assert_eq!(pose_variation(&alt).unwrap()[0], 0.25);
        assert!(matches!(pose_variation(&alt[..1]), Err(FaceError::WindowTooSmall(1))));
    }

    #[test]
    fn window_uses_last_thirty() {
        let mut frames: Vec<_> = (0..10).map(|i| with_yaw(i as f64, 5.0 * i as f64)).collect();
        frames.extend((10..40).map(|i| with_yaw(i as f64, 1.0)));
        assert_eq!(pose_variation(&frames).unwrap()[0], 0.0);
    }

    #[test]
    fn csv_round_trips() {
        let mut frames: Vec<_> = (0..5).map(|i| with_yaw(i as f64 * 33.0, 0.1 * i as f64)).collect();
        fill_pose_variation(&mut frames);
        assert_eq!(frames[0].features[POSE_STD_SLOT], 0.0);
        assert!(frames[4].features[POSE_STD_SLOT] > 0.0);
        assert_eq!(parse_feature_csv(feature_csv(&frames).as_bytes()).unwrap(), frames);

        let xs = vec![[0.5; FEATURE_DIM], [0.25; FEATURE_DIM]];
        let ys = vec![[0.1, -0.2], [1.0, -1.0]];
        let (bx, by) = parse_training_csv(training_csv(&xs, &ys).as_bytes()).unwrap();
        assert_eq!((bx, by), (xs, ys));
        let bad = training_csv(&[[0.0; FEATURE_DIM]], &[[1.5, 0.0]]);
        assert!(parse_training_csv(bad.as_bytes()).is_err());
    }
}
