//! Game-side logic: the emotion vocabulary, attempt scoring, the race game,
//! unit progression, subsystem control over the bus and the session engine
//! that turns bus traffic into a replayable log.

pub mod control;
pub mod engine;
pub mod game;
pub mod scoring;
pub mod vocabulary;

use thiserror::Error;

use crate::emotionml::EmotionMlError;
use crate::stomp::ClientError;

pub use control::{ControlCommand, Controller, ServiceState, ServiceStatus, Subsystem};
pub use engine::{replay_log, Engine, EngineConfig, EngineInput, LogRecord, TurnFeedback};
pub use game::{quiz_progression, race_step, wallet_spend, GameState, Progression, Racer, RobotSchedule, UnitState};
pub use scoring::{chance_corrected_score, evaluate_attempt, is_eligible, AttemptResult, MATCH_DISTANCE};
pub use vocabulary::{quadrant, Quadrant, Vocabulary};

#[derive(Debug, Error)]
pub enum PlatformError {
    #[error("`{0}` is not in the emotion vocabulary")]
    UnknownEmotion(String),
    #[error("unknown subsystem `{0}` (expected face, voice or body)")]
    UnknownSubsystem(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("the game is already finished")]
    GameFinished,
    #[error("unit `{0}` is locked")]
    UnitLocked(String),
    #[error("no unit named `{0}`")]
    UnknownUnit(String),
    #[error("wallet holds {wallet} coins, cannot spend {price}")]
    InsufficientFunds { wallet: u64, price: u64 },
    #[error("bad counts: correct={correct} n={n} k={k}")]
    BadCounts { correct: u64, n: u64, k: u64 },
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("session log: {0}")]
    Log(String),
    #[error(transparent)]
    EmotionMl(#[from] EmotionMlError),
    #[error(transparent)]
    Bus(#[from] ClientError),
}
