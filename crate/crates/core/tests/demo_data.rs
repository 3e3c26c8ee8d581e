use affectplay::fixtures::{expected_body_label, write_demo_data, DEMO_TURNS};
use affectplay::platform::{Subsystem, Vocabulary};
use affectplay::session::{Analyzer, SessionConfig, SessionScript};
use affectplay::emotionml::to_internal;

#[test]
fn every_demo_attempt_is_recognized_as_its_target() {
    let dir = tempfile::tempdir().unwrap();
    let demo = write_demo_data(dir.path(), 3).unwrap();
    let cfg = SessionConfig::load(Some(&demo.config), Vec::new()).unwrap();
    let vocab = Vocabulary::default();

    let voice = Analyzer::load(Subsystem::Voice, &cfg).unwrap();
    for label in vocab.labels() {
        let bytes = std::fs::read(dir.path().join(format!("attempts/voice/{label}.wav"))).unwrap();
        let a = voice.analyze(&bytes, Some(label), 0).unwrap();
        assert_eq!(a.annotations[0].category.as_deref(), Some(label));
        let lights = a.feedback.unwrap();
        assert_eq!(lights["overall_light"], "green", "{label}");
    }

    let body = Analyzer::load(Subsystem::Body, &cfg).unwrap();
    for basic in affectplay::body::BASIC_EMOTIONS {
        let bytes = std::fs::read(dir.path().join(format!("attempts/body/{basic}.csv"))).unwrap();
        let a = body.analyze(&bytes, None, 0).unwrap();
        assert_eq!(a.annotations[0].category.as_deref(), expected_body_label(basic), "{basic}");
    }

    let face = Analyzer::load(Subsystem::Face, &cfg).unwrap();
    for label in vocab.labels() {
        let bytes = std::fs::read(dir.path().join(format!("attempts/face/{label}.csv"))).unwrap();
        let a = face.analyze(&bytes, None, 1000).unwrap();
        let last = a.annotations.last().unwrap();
        assert_eq!(last.category.as_deref(), Some(label));
        assert!(to_internal(last).distance(&vocab.point(label).unwrap()) < 0.05);
        assert_eq!(last.timestamp_ms, 1000 + 24 * 40);
    }

    let script = SessionScript::load(&demo.script, &vocab).unwrap();
    assert_eq!(script.turns.len(), DEMO_TURNS.len());
}
