use affectplay::emotionml::{from_internal, serialize_emotionml, AVPoint, Modality};
use affectplay::platform::engine::parse_log;
use affectplay::platform::{
    chance_corrected_score, evaluate_attempt, is_eligible, quadrant, quiz_progression, race_step, replay_log,
    AttemptResult, Engine, EngineConfig, EngineInput, GameState, LogRecord, PlatformError, Progression, Racer,
    RobotSchedule, Subsystem, UnitState, Vocabulary,
};
use proptest::prelude::*;

fn attempt(matched: bool, coins: u32) -> AttemptResult {
    AttemptResult {
        target: "happy".into(),
        recognized: AVPoint::NEUTRAL,
        recognized_label: "happy".into(),
        distance: 0.0,
        matched,
        coins,
    }
}

#[test]
fn chance_corrected_oracles() {
    // (0.6 − 1/6) / (5/6) = 0.52 by hand
    let s = chance_corrected_score(36, 60, 6).unwrap();
    assert!((s - 52.0).abs() < 1e-9);
    assert!(is_eligible(s));
    for k in 2..20u64 {
        assert_eq!(chance_corrected_score(60, 60 * k, k).unwrap(), 0.0);
    }
    assert_eq!(chance_corrected_score(60, 60, 6).unwrap(), 100.0);
    assert!(matches!(chance_corrected_score(61, 60, 6), Err(PlatformError::BadCounts { .. })));
}

proptest! {
    #[test]
    fn chance_score_monotone_and_raw_limit(n in 1u64..500, k in 2u64..50, seed in any::<u64>()) {
        let mut prev = -1.0;
        for c in 0..=n {
            let s = chance_corrected_score(c, n, k).unwrap();
            prop_assert!(s >= prev && (0.0..=100.0).contains(&s));
            prev = s;
        }
        let c = seed % (n + 1);
        let raw = c as f64 / n as f64 * 100.0;
        prop_assert!((chance_corrected_score(c, n, 1_000_000).unwrap() - raw).abs() <= 0.01);
    }

    #[test]
    fn quadrant_scale_invariant(a in -1.0..1.0f64, v in -1.0..1.0f64, c in 1e-6..1e6f64) {
        let p = AVPoint::new(a, v);
        prop_assert_eq!(quadrant(&p), quadrant(&p.scale(c)));
    }

    #[test]
    fn coins_imply_match(a in -1.0..1.0f64, v in -1.0..1.0f64, target in 0usize..20, with_cat in any::<bool>()) {
        let vocab = Vocabulary::default();
        let label = vocab.labels().nth(target).unwrap().to_string();
        let ann = from_internal(AVPoint::new(a, v), Modality::Voice, with_cat.then(|| label.clone()), 0);
        let r = evaluate_attempt(&vocab, &label, &ann).unwrap();
        prop_assert!(r.coins <= 2);
        prop_assert!(r.coins == 0 || r.matched);
        prop_assert_eq!(r.coins == 2, r.matched && with_cat);
    }
}

#[test]
fn race_bounds_hold_for_ten_thousand_sequences() {
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(10_000));
    let strategy = (
        prop::collection::vec((any::<bool>(), 0u32..3), 0..40),
        any::<u64>(),
        1u32..15,
        prop_oneof![(1u32..4).prop_map(|n| RobotSchedule::EveryNth { n }), (0.0..1.0f64).prop_map(|p| RobotSchedule::Seeded { p })],
    );
    runner
        .run(&strategy, |(seq, seed, board_len, schedule)| {
            let mut s = GameState::new(board_len, seed, &["u"]);
            s.schedule = schedule;
            let mut wallet = 0u64;
            for (matched, coins) in seq {
                let coins = if matched { coins } else { 0 };
                match race_step(&s, &attempt(matched, coins)) {
                    Ok(next) => {
                        prop_assert!(next.player_pos <= board_len && next.robot_pos <= board_len);
                        prop_assert!(next.player_pos >= s.player_pos && next.robot_pos >= s.robot_pos);
                        wallet += coins as u64;
                        prop_assert_eq!(next.wallet, wallet);
                        s = next;
                    }
                    Err(PlatformError::GameFinished) => prop_assert!(s.winner.is_some()),
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                }
            }
            Ok(())
        })
        .unwrap();
}

#[test]
fn ten_straight_matches_beat_the_every_second_turn_robot() {
    // hand simulation: after turn t the robot stands on floor(t / 2); the player reaches 10 first on turn 10
    let mut s = GameState::new(10, 0, &[]);
    for t in 1..=10u32 {
        s = race_step(&s, &attempt(true, 1)).unwrap();
        if t < 10 {
            assert_eq!((s.player_pos, s.robot_pos, s.winner), (t, t / 2, None));
        }
    }
    assert_eq!((s.turn, s.winner), (10, Some(Racer::Player)));
}

#[test]
fn first_turn_follows_schedule() {
    for seed in 0..50u64 {
        let mut s = GameState::new(10, seed, &[]);
        s.schedule = RobotSchedule::Seeded { p: 0.5 };
        let next = race_step(&s, &attempt(true, 1)).unwrap();
        assert_eq!(next.player_pos, 1);
        assert_eq!(next.robot_pos, s.schedule.robot_moves(seed, 1) as u32);
    }
    let fresh = race_step(&GameState::new(10, 9, &[]), &attempt(true, 1)).unwrap();
    assert_eq!(fresh.robot_pos, 0);
}

#[test]
fn robot_can_win() {
    let mut s = GameState::new(3, 0, &[]);
    s.schedule = RobotSchedule::EveryNth { n: 1 };
    for _ in 0..3 {
        s = race_step(&s, &attempt(false, 0)).unwrap();
    }
    assert_eq!(s.winner, Some(Racer::Robot));
}

#[test]
fn passing_scores_commute() {
    let units = ["a", "b", "c", "d", "e"];
    let start = Progression::new(units);
    let scores: Vec<(&str, u64)> = vec![("a", 9), ("b", 8), ("c", 10), ("d", 3), ("e", 8)];
    // replay until nothing changes, skipping locked units, for every rotation and reversal
    let settle = |order: &[(&str, u64)]| {
        let mut p = start.clone();
        loop {
            let before = p.clone();
            for (u, c) in order {
                if let Ok(next) = quiz_progression(&p, u, *c, 10) {
                    p = next;
                }
            }
            if p == before {
                return p;
            }
        }
    };
    let reference = settle(&scores);
    assert_eq!(reference.state("c"), Some(UnitState::Passed));
    assert_eq!(reference.state("d"), Some(UnitState::Unlocked));
    assert_eq!(reference.state("e"), Some(UnitState::Locked));
    for r in 0..scores.len() {
        let mut order = scores.clone();
        order.rotate_left(r);
        assert_eq!(settle(&order), reference);
        order.reverse();
        assert_eq!(settle(&order), reference);
    }
}

fn annotation_doc(p: AVPoint, category: &str, modality: Modality) -> String {
    serialize_emotionml(&[from_internal(p, modality, Some(category.to_string()), 42)]).unwrap()
}

#[test]
fn replayed_log_is_byte_identical() {
    let mut e = Engine::new(EngineConfig::new(77, 10));
    let vocab = Vocabulary::default();
    let turns = [
        ("happy", Subsystem::Voice, Some(vocab.point("happy").unwrap())),
        ("sad", Subsystem::Face, Some(AVPoint::new(-0.3, -0.4))),
        ("angry", Subsystem::Body, None),
        ("proud", Subsystem::Voice, Some(AVPoint::new(-0.9, 0.9))),
    ];
    for (target, sub, point) in turns {
        e.handle(EngineInput::Control {
            subsystem: sub,
            command: affectplay::platform::ControlCommand::Start,
            acknowledged: point.is_some(),
            state: None,
            detail: None,
        })
        .unwrap();
        e.handle(EngineInput::TurnBegin { target: target.into(), modality: sub, media: format!("{target}.dat") })
            .unwrap();
        let turn = e.open_turn().unwrap();
        match point {
            Some(p) => {
                let feedback = serde_json::json!({"overall_light": "green"});
                e.handle(EngineInput::Annotation {
                    turn,
                    subsystem: sub,
                    emotionml: annotation_doc(p, target, sub.modality()),
                    feedback: Some(feedback),
                })
                .unwrap();
            }
            None => {
                e.handle(EngineInput::TurnTimeout { turn, subsystem: sub }).unwrap();
            }
        }
    }
    e.handle(EngineInput::Quiz { unit: "happy".into(), correct: 4, total: 5 }).unwrap();
    e.handle(EngineInput::Spend { price: 1 }).unwrap();
    e.finish();
    let log = e.log_text();
    assert_eq!(replay_log(&log).unwrap(), log);

    let records = parse_log(&log).unwrap();
    assert!(matches!(records.first(), Some(LogRecord::Header { .. })));
    assert!(records.iter().any(|r| matches!(r, LogRecord::Timeout { turn: 3, .. })));
    let Some(LogRecord::Summary { turns, wallet, .. }) = records.last() else { panic!("no summary") };
    assert_eq!(turns.len(), 4);
    assert_eq!(*wallet, 2 + 2 - 1);
}
