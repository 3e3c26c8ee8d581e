//! Plays the race against the robot directly through the engine, without a
//! bus: annotations are built by hand.

use affectplay::emotionml::{from_internal, serialize_emotionml, AVPoint};
use affectplay::platform::{ControlCommand, Engine, EngineConfig, EngineInput, Subsystem, Vocabulary};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vocab = Vocabulary::default();
    let mut engine = Engine::new(EngineConfig::new(42, 6));
    let attempts = [
        ("happy", Subsystem::Voice, Some(vocab.point("happy").unwrap())),
        ("sad", Subsystem::Face, Some(AVPoint::new(0.5, 0.5))),
        ("angry", Subsystem::Body, None),
        ("proud", Subsystem::Voice, Some(vocab.point("proud").unwrap())),
        ("bored", Subsystem::Face, Some(vocab.point("bored").unwrap())),
        ("afraid", Subsystem::Voice, Some(vocab.point("afraid").unwrap())),
        ("happy", Subsystem::Face, Some(vocab.point("happy").unwrap())),
    ];
    for (target, sub, point) in attempts {
        if engine.is_finished() {
            break;
        }
        engine.handle(EngineInput::Control { subsystem: sub, command: ControlCommand::Start, acknowledged: true, state: None, detail: None })?;
        engine.handle(EngineInput::TurnBegin { target: target.into(), modality: sub, media: String::new() })?;
        let turn = engine.open_turn().unwrap();
        let input = match point {
            Some(p) => {
                let doc = serialize_emotionml(&[from_internal(p, sub.modality(), Some(vocab.nearest(&p).to_string()), 0)])?;
                EngineInput::Annotation { turn, subsystem: sub, emotionml: doc, feedback: None }
            }
            None => EngineInput::TurnTimeout { turn, subsystem: sub },
        };
        engine.handle(input)?;
        let s = engine.state();
        let f = engine.feedback().last().unwrap();
        println!(
            "turn {turn}: {target:<6} via {sub:<5} matched={:<5} coins={}  player {} robot {} wallet {}",
            f.matched, f.coins, s.player_pos, s.robot_pos, s.wallet
        );
    }
    engine.finish();
    println!("\n{}", engine.log_text().lines().last().unwrap_or_default());
    Ok(())
}
