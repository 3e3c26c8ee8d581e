//! The session engine: a deterministic state machine fed with bus-derived
//! inputs that writes one JSON record per event.
//!
//! Every input is itself logged, so a log can be replayed through a fresh
//! engine and must come out byte for byte the same. Record timestamps come
//! from a logical clock (one slot per turn) rather than the wall clock for
//! the same reason.

use serde::{Deserialize, Serialize};

use super::control::{ControlCommand, ServiceState, Subsystem};
use super::game::{quiz_progression, race_step, wallet_spend, GameState, Racer, RobotSchedule, UnitState};
use super::scoring::{evaluate_attempt, missed_attempt, AttemptResult};
use super::vocabulary::Vocabulary;
use super::PlatformError;
use crate::emotionml::{parse_emotionml, AVPoint};

/// Logical milliseconds allotted to each turn.
pub const TURN_SLOT_MS: u64 = 5_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub seed: u64,
    pub board_len: u32,
    pub schedule: RobotSchedule,
    pub units: Vec<String>,
    pub vocabulary: Vocabulary,
}

impl EngineConfig {
    pub fn new(seed: u64, board_len: u32) -> Self {
        let vocabulary = Vocabulary::default();
        EngineConfig {
            seed,
            board_len,
            schedule: RobotSchedule::default(),
            units: vocabulary.labels().map(str::to_string).collect(),
            vocabulary,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EngineInput {
    TurnBegin { target: String, modality: Subsystem, media: String },
    Control {
        subsystem: Subsystem,
        command: ControlCommand,
        acknowledged: bool,
        state: Option<ServiceState>,
        detail: Option<String>,
    },
    Annotation { turn: u32, subsystem: Subsystem, emotionml: String, feedback: Option<serde_json::Value> },
    TurnTimeout { turn: u32, subsystem: Subsystem },
    Quiz { unit: String, correct: u64, total: u64 },
    Spend { price: u64 },
}

/// Per-turn outcome carried in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnFeedback {
    pub turn: u32,
    pub target: String,
    pub modality: Subsystem,
    pub recognized_label: Option<String>,
    pub recognized: Option<AVPoint>,
    pub matched: bool,
    pub coins: u32,
    pub timed_out: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        t_ms: u64,
        #[serde(flatten)]
        config: EngineConfig,
    },
    Turn {
        t_ms: u64,
        turn: u32,
        target: String,
        modality: Subsystem,
        media: String,
    },
    Control {
        t_ms: u64,
        turn: u32,
        subsystem: Subsystem,
        command: ControlCommand,
        acknowledged: bool,
        state: Option<ServiceState>,
        detail: Option<String>,
    },
    Annotation {
        t_ms: u64,
        turn: u32,
        subsystem: Subsystem,
        emotionml: String,
        feedback: Option<serde_json::Value>,
        used: bool,
        error: Option<String>,
    },
    Attempt {
        t_ms: u64,
        turn: u32,
        modality: Subsystem,
        #[serde(flatten)]
        result: AttemptResult,
        feedback: Option<serde_json::Value>,
    },
    Timeout {
        t_ms: u64,
        turn: u32,
        subsystem: Subsystem,
    },
    RaceStep {
        t_ms: u64,
        turn: u32,
        player_pos: u32,
        robot_pos: u32,
        winner: Option<Racer>,
    },
    Wallet {
        t_ms: u64,
        turn: u32,
        delta: i64,
        wallet: u64,
    },
    Spend {
        t_ms: u64,
        price: u64,
        wallet: u64,
    },
    Progression {
        t_ms: u64,
        unit: String,
        correct: u64,
        total: u64,
        units: Vec<(String, UnitState)>,
    },
    Summary {
        t_ms: u64,
        turns_played: u32,
        winner: Option<Racer>,
        wallet: u64,
        player_pos: u32,
        robot_pos: u32,
        turns: Vec<TurnFeedback>,
    },
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("log records always serialize")
    }

    /// Recovers the engine input a record was produced from, if it is one.
    pub fn as_input(&self) -> Option<EngineInput> {
        match self {
            LogRecord::Turn { target, modality, media, .. } => {
                Some(EngineInput::TurnBegin { target: target.clone(), modality: *modality, media: media.clone() })
            }
            LogRecord::Control { subsystem, command, acknowledged, state, detail, .. } => Some(EngineInput::Control {
                subsystem: *subsystem,
                command: *command,
                acknowledged: *acknowledged,
                state: *state,
                detail: detail.clone(),
            }),
            LogRecord::Annotation { turn, subsystem, emotionml, feedback, .. } => Some(EngineInput::Annotation {
                turn: *turn,
                subsystem: *subsystem,
                emotionml: emotionml.clone(),
                feedback: feedback.clone(),
            }),
            LogRecord::Timeout { turn, subsystem, .. } => {
                Some(EngineInput::TurnTimeout { turn: *turn, subsystem: *subsystem })
            }
            LogRecord::Progression { unit, correct, total, .. } => {
                Some(EngineInput::Quiz { unit: unit.clone(), correct: *correct, total: *total })
            }
            LogRecord::Spend { price, .. } => Some(EngineInput::Spend { price: *price }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct OpenTurn {
    turn: u32,
    target: String,
    modality: Subsystem,
}

pub struct Engine {
    config: EngineConfig,
    state: GameState,
    open: Option<OpenTurn>,
    feedback: Vec<TurnFeedback>,
    lines: Vec<String>,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Engine {
        let units: Vec<&str> = config.units.iter().map(String::as_str).collect();
        let mut state = GameState::new(config.board_len, config.seed, &units);
        state.schedule = config.schedule;
        let mut engine = Engine { config, state, open: None, feedback: Vec::new(), lines: Vec::new() };
        engine.push(LogRecord::Header { t_ms: 0, config: engine.config.clone() });
        engine
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.config.vocabulary
    }

    pub fn is_finished(&self) -> bool {
        self.state.is_finished()
    }

    /// Turn currently awaiting an annotation.
    pub fn open_turn(&self) -> Option<u32> {
        self.open.as_ref().map(|o| o.turn)
    }

    pub fn feedback(&self) -> &[TurnFeedback] {
        &self.feedback
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn log_text(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }

    fn now(&self) -> u64 {
        self.state.turn as u64 * TURN_SLOT_MS
            + if self.open.is_some() { TURN_SLOT_MS } else { 0 }
    }

    fn push(&mut self, r: LogRecord) -> LogRecord {
        self.lines.push(r.to_line());
        r
    }

    pub fn handle(&mut self, input: EngineInput) -> Result<Vec<LogRecord>, PlatformError> {
        match input {
            EngineInput::TurnBegin { target, modality, media } => self.begin_turn(target, modality, media),
            EngineInput::Control { subsystem, command, acknowledged, state, detail } => {
                let r = LogRecord::Control {
                    t_ms: self.now(),
                    turn: self.open_turn().unwrap_or(self.state.turn),
                    subsystem,
                    command,
                    acknowledged,
                    state,
                    detail,
                };
                Ok(vec![self.push(r)])
            }
            EngineInput::Annotation { turn, subsystem, emotionml, feedback } => {
                self.annotation(turn, subsystem, emotionml, feedback)
            }
            EngineInput::TurnTimeout { turn, subsystem } => self.timeout(turn, subsystem),
            EngineInput::Quiz { unit, correct, total } => {
                self.state.progression = quiz_progression(&self.state.progression, &unit, correct, total)?;
                let r = LogRecord::Progression {
                    t_ms: self.now(),
                    unit,
                    correct,
                    total,
                    units: self.state.progression.units.clone(),
                };
                Ok(vec![self.push(r)])
            }
            EngineInput::Spend { price } => {
                if self.open.is_some() {
                    return Err(PlatformError::Log("cannot spend during an open turn".into()));
                }
                self.state = wallet_spend(&self.state, price)?;
                let r = LogRecord::Spend { t_ms: self.now(), price, wallet: self.state.wallet };
                Ok(vec![self.push(r)])
            }
        }
    }

    fn begin_turn(&mut self, target: String, modality: Subsystem, media: String) -> Result<Vec<LogRecord>, PlatformError> {
        if self.state.is_finished() {
            return Err(PlatformError::GameFinished);
        }
        if let Some(o) = &self.open {
            return Err(PlatformError::Log(format!("turn {} is still open", o.turn)));
        }
        self.config.vocabulary.require(&target)?;
        let turn = self.state.turn + 1;
        self.open = Some(OpenTurn { turn, target: target.clone(), modality });
        self.state.target = Some(target.clone());
        self.state.modality = modality.modality();
        let r = LogRecord::Turn { t_ms: self.now(), turn, target, modality, media };
        Ok(vec![self.push(r)])
    }

    fn annotation(
        &mut self,
        turn: u32,
        subsystem: Subsystem,
        emotionml: String,
        feedback: Option<serde_json::Value>,
    ) -> Result<Vec<LogRecord>, PlatformError> {
        let t_ms = self.now();
        let wanted = self.open.as_ref().filter(|o| o.turn == turn && o.modality == subsystem).cloned();
        // services may emit several emotions per document (face: one per frame); the latest one counts
        let parsed = parse_emotionml(&emotionml).map(|anns| {
            anns.into_iter().filter(|a| a.modality == subsystem.modality()).max_by_key(|a| a.timestamp_ms)
        });
        let (latest, error) = match parsed {
            Ok(Some(a)) => (Some(a), None),
            Ok(None) => (None, Some(format!("no {subsystem} emotion in document"))),
            Err(e) => (None, Some(e.to_string())),
        };
        let scored = match (&wanted, &latest) {
            (Some(open), Some(a)) => Some(evaluate_attempt(&self.config.vocabulary, &open.target, a)?),
            _ => None,
        };
        let mut out = vec![self.push(LogRecord::Annotation {
            t_ms,
            turn,
            subsystem,
            emotionml,
            feedback: feedback.clone(),
            used: scored.is_some(),
            error,
        })];
        if let (Some(open), Some(result)) = (wanted, scored) {
            out.push(self.push(LogRecord::Attempt { t_ms, turn, modality: subsystem, result: result.clone(), feedback }));
            out.extend(self.close_turn(open, result, false)?);
        }
        Ok(out)
    }

    fn timeout(&mut self, turn: u32, subsystem: Subsystem) -> Result<Vec<LogRecord>, PlatformError> {
        let open = match &self.open {
            Some(o) if o.turn == turn => o.clone(),
            _ => return Err(PlatformError::Log(format!("turn {turn} is not open"))),
        };
        let mut out = vec![self.push(LogRecord::Timeout { t_ms: self.now(), turn, subsystem })];
        let missed = missed_attempt(&open.target);
        out.extend(self.close_turn(open, missed, true)?);
        Ok(out)
    }

    fn close_turn(&mut self, open: OpenTurn, result: AttemptResult, timed_out: bool) -> Result<Vec<LogRecord>, PlatformError> {
        let t_ms = self.now();
        self.state = race_step(&self.state, &result)?;
        self.open = None;
        self.feedback.push(TurnFeedback {
            turn: open.turn,
            target: open.target,
            modality: open.modality,
            recognized_label: (!timed_out).then(|| result.recognized_label.clone()),
            recognized: (!timed_out).then_some(result.recognized),
            matched: result.matched,
            coins: result.coins,
            timed_out,
        });
        let s = &self.state;
        let race = LogRecord::RaceStep {
            t_ms,
            turn: open.turn,
            player_pos: s.player_pos,
            robot_pos: s.robot_pos,
            winner: s.winner,
        };
        let wallet = LogRecord::Wallet { t_ms, turn: open.turn, delta: result.coins as i64, wallet: s.wallet };
        Ok(vec![self.push(race), self.push(wallet)])
    }

    /// Closes the session with a summary record. Any open turn is left
    /// unscored.
    pub fn finish(&mut self) -> LogRecord {
        let s = &self.state;
        let r = LogRecord::Summary {
            t_ms: (s.turn as u64 + 1) * TURN_SLOT_MS,
            turns_played: s.turn,
            winner: s.winner,
            wallet: s.wallet,
            player_pos: s.player_pos,
            robot_pos: s.robot_pos,
            turns: self.feedback.clone(),
        };
        self.open = None;
        self.push(r)
    }
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, PlatformError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| PlatformError::Log(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Feeds the input records of a session log through a fresh engine and
/// returns the log it writes.
pub fn replay_log(text: &str) -> Result<String, PlatformError> {
    let records = parse_log(text)?;
    let mut iter = records.into_iter();
    let Some(LogRecord::Header { config, .. }) = iter.next() else {
        return Err(PlatformError::Log("log does not start with a header".into()));
    };
    let mut engine = Engine::new(config);
    for r in iter {
        if let LogRecord::Summary { .. } = r {
            engine.finish();
        } else if let Some(input) = r.as_input() {
            engine.handle(input)?;
        }
    }
    Ok(engine.log_text())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotionml::{from_internal, serialize_emotionml, Modality};

    fn doc(p: AVPoint, category: Option<&str>, modality: Modality) -> String {
        serialize_emotionml(&[from_internal(p, modality, category.map(str::to_string), 1)]).unwrap()
    }

    fn run(engine: &mut Engine, target: &str, sub: Subsystem, p: Option<AVPoint>) {
        engine.handle(EngineInput::TurnBegin { target: target.into(), modality: sub, media: "m".into() }).unwrap();
        let turn = engine.open_turn().unwrap();
        match p {
            Some(p) => {
                engine
                    .handle(EngineInput::Annotation {
                        turn,
                        subsystem: sub,
                        emotionml: doc(p, Some(target), sub.modality()),
                        feedback: None,
                    })
                    .unwrap();
            }
            None => {
                engine.handle(EngineInput::TurnTimeout { turn, subsystem: sub }).unwrap();
            }
        }
    }

    #[test]
    fn empty_session_has_header_and_summary() {
        let mut e = Engine::new(EngineConfig::new(1, 10));
        e.finish();
        let recs = parse_log(&e.log_text()).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(matches!(recs[1], LogRecord::Summary { winner: None, turns_played: 0, .. }));
    }

    #[test]
    fn scored_and_timed_out_turns() {
        let mut e = Engine::new(EngineConfig::new(1, 10));
        let happy = e.vocabulary().point("happy").unwrap();
        run(&mut e, "happy", Subsystem::Voice, Some(happy));
        run(&mut e, "sad", Subsystem::Body, None);
        assert_eq!(e.state().wallet, 2);
        assert_eq!((e.state().player_pos, e.state().robot_pos), (1, 1));
        assert!(e.feedback()[1].timed_out);
        e.finish();
        assert_eq!(replay_log(&e.log_text()).unwrap(), e.log_text());
    }

    #[test]
    fn foreign_and_late_annotations_are_recorded_unused() {
        let mut e = Engine::new(EngineConfig::new(1, 10));
        e.handle(EngineInput::TurnBegin { target: "happy".into(), modality: Subsystem::Voice, media: "m".into() })
            .unwrap();
        let face = doc(AVPoint::new(0.5, 0.5), None, Modality::Face);
        let out = e
            .handle(EngineInput::Annotation { turn: 1, subsystem: Subsystem::Face, emotionml: face, feedback: None })
            .unwrap();
        assert_eq!(out.len(), 1);
        assert!(matches!(out[0], LogRecord::Annotation { used: false, .. }));
        assert_eq!(e.open_turn(), Some(1));
        let bad = e
            .handle(EngineInput::Annotation {
                turn: 1,
                subsystem: Subsystem::Voice,
                emotionml: "<nope".into(),
                feedback: None,
            })
            .unwrap();
        assert!(matches!(&bad[0], LogRecord::Annotation { used: false, error: Some(_), .. }));
    }

    #[test]
    fn spend_and_quiz_replay() {
        let mut e = Engine::new(EngineConfig::new(3, 10));
        let happy = e.vocabulary().point("happy").unwrap();
        run(&mut e, "happy", Subsystem::Face, Some(happy));
        e.handle(EngineInput::Spend { price: 1 }).unwrap();
        assert!(e.handle(EngineInput::Spend { price: 5 }).is_err());
        e.handle(EngineInput::Quiz { unit: "happy".into(), correct: 9, total: 10 }).unwrap();
        e.finish();
        assert_eq!(e.state().wallet, 1);
        assert_eq!(replay_log(&e.log_text()).unwrap(), e.log_text());
    }
}
