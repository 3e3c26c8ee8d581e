//! Fits the ridge model on synthetic face features and tracks a stream that
//! drifts toward a target emotion.

use affectplay::face::{fill_pose_variation, train_model, FacePredictor, DEFAULT_LAMBDA};
use affectplay::fixtures::{face_stream_for, face_training_data, FACE_SEED};
use affectplay::platform::Vocabulary;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (x, y) = face_training_data(FACE_SEED, 400);
    let model = train_model(&x, &y, DEFAULT_LAMBDA)?;
    let vocab = Vocabulary::default();
    for target in ["happy", "sad", "afraid"] {
        let point = vocab.point(target).unwrap();
        let mut predictor = FacePredictor::new(&model);
        let mut stream = face_stream_for(point, FACE_SEED, 25);
        fill_pose_variation(&mut stream);
        let mut last = None;
        for frame in &stream {
            last = Some(predictor.predict(frame)?);
        }
        let p = last.unwrap();
        println!(
            "{target:<7} canonical ({:+.2}, {:+.2}) predicted ({:+.2}, {:+.2}) nearest {}",
            point.arousal, point.valence, p.arousal, p.valence, vocab.nearest(&p)
        );
    }
    Ok(())
}
