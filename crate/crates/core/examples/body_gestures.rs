//! Trains the gesture classifier on synthetic traces and classifies fresh
//! ones.

use affectplay::body::{classify, extract_features, longest_gesture, train_from_traces, SegmentConfig, BASIC_EMOTIONS};
use affectplay::fixtures::synth_gesture;
use affectplay::platform::Vocabulary;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seg = SegmentConfig::default();
    let mut training = Vec::new();
    for e in BASIC_EMOTIONS {
        for seed in 0..8 {
            training.push((e.to_string(), longest_gesture(&synth_gesture(e, seed).unwrap(), &seg)?));
        }
    }
    let model = train_from_traces(&training)?;
    let vocab = Vocabulary::default();
    for e in BASIC_EMOTIONS {
        let trace = longest_gesture(&synth_gesture(e, 1000).unwrap(), &seg)?;
        let f = extract_features(&trace)?;
        let c = classify(&f, &model, &vocab)?;
        println!(
            "{e:<10} -> {:<10} ({:<9}) confidence {:.2}  ke_hands {:.3} openness {:.2}",
            c.label, c.platform_label, c.confidence, f.ke_hands, f.openness
        );
    }
    Ok(())
}
