//! Compares a synthetic utterance against every prototype and prints the
//! traffic-light feedback for the intended target.

use affectplay::fixtures::{prototype_clip, synth_utterance, UtteranceSpec};
use affectplay::platform::Vocabulary;
use affectplay::voice::{compare_to_prototype, estimate_emotion, summarize, PrototypeEntry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = Vocabulary::default();
    let library: Vec<PrototypeEntry> = vocab
        .labels()
        .map(|l| {
            let params = summarize(&prototype_clip(l, &vocab).unwrap())?;
            Ok(PrototypeEntry { label: l.into(), params, av: vocab.point(l).unwrap(), clip_path: Default::default() })
        })
        .collect::<Result<_, affectplay::voice::VoiceError>>()?;

    // a slightly calmer rendition of "happy"
    let target = "happy";
    let mut spec = UtteranceSpec::for_point(vocab.point(target).unwrap());
    spec.f0_start_hz -= 20.0;
    spec.amplitude *= 0.8;
    let attempt = summarize(&synth_utterance(&spec, 7))?;

    let est = estimate_emotion(&attempt, &library)?;
    println!("recognized {} (D = {:.3})", est.label, est.distance);
    let fb = compare_to_prototype(&attempt, library.iter().find(|e| e.label == target).unwrap());
    for p in &fb.params {
        println!("{:<16} {:>9.3} vs {:>9.3}  d = {:.3}  {:?}", p.name, p.value, p.reference, p.distance, p.light);
    }
    println!("overall {:.3} {:?}", fb.overall_distance, fb.overall_light);
    Ok(())
}
