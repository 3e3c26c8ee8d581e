//! Builds annotations on the internal [-1, 1] scale, writes them as
//! EmotionML and reads them back.

use affectplay::emotionml::{from_internal, parse_emotionml, serialize_emotionml, to_internal, AVPoint, Modality};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let anns = vec![
        from_internal(AVPoint::new(0.6, 0.7), Modality::Voice, Some("happy".into()), 0).with_confidence(0.9),
        from_internal(AVPoint::new(-0.4, -0.6), Modality::Face, Some("sad".into()), 40),
        from_internal(AVPoint::new(0.8, -0.5), Modality::Body, None, 80),
    ];
    let doc = serialize_emotionml(&anns)?;
    println!("{doc}");
    for a in parse_emotionml(&doc)? {
        let p = to_internal(&a);
        println!("{:>5} @ {:>3} ms  arousal {:+.2} valence {:+.2}  {:?}", a.modality, a.timestamp_ms, p.arousal, p.valence, a.category);
    }
    Ok(())
}
