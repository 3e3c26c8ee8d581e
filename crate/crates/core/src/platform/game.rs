use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scoring::AttemptResult;
use super::PlatformError;
use crate::emotionml::Modality;

pub const DEFAULT_BOARD_LEN: u32 = 10;
/// Fraction of correct quiz answers needed to pass a unit.
pub const PASS_FRACTION: f64 = 0.8;

/// When the robot opponent advances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RobotSchedule {
    /// On every turn divisible by `n` (1-based).
    EveryNth { n: u32 },
    /// With probability `p` per turn, drawn from a ChaCha stream keyed by
    /// the session seed and the turn number, so any turn can be replayed on
    /// its own.
    Seeded { p: f64 },
}

impl Default for RobotSchedule {
    fn default() -> Self {
        RobotSchedule::EveryNth { n: 2 }
    }
}

impl RobotSchedule {
    pub fn robot_moves(&self, seed: u64, turn: u32) -> bool {
        match *self {
            RobotSchedule::EveryNth { n } => n > 0 && turn.is_multiple_of(n),
            RobotSchedule::Seeded { p } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(turn as u64);
                rng.random_bool(p.clamp(0.0, 1.0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Racer {
    Player,
    Robot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitState {
    Locked,
    Unlocked,
    Passed,
}

/// Learning units in curriculum order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progression {
    pub units: Vec<(String, UnitState)>,
}

impl Progression {
    /// Only the first unit starts unlocked.
    pub fn new<S: Into<String>>(units: impl IntoIterator<Item = S>) -> Self {
        let units = units
            .into_iter()
            .enumerate()
            .map(|(i, u)| (u.into(), if i == 0 { UnitState::Unlocked } else { UnitState::Locked }))
            .collect();
        Progression { units }
    }

    pub fn state(&self, unit: &str) -> Option<UnitState> {
        self.units.iter().find(|(u, _)| u == unit).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub target: Option<String>,
    pub modality: Modality,
    pub board_len: u32,
    pub player_pos: u32,
    pub robot_pos: u32,
    pub wallet: u64,
    pub rng_seed: u64,
    pub schedule: RobotSchedule,
    /// Turns played so far.
    pub turn: u32,
    pub winner: Option<Racer>,
    pub progression: Progression,
}

impl GameState {
    pub fn new(board_len: u32, rng_seed: u64, units: &[&str]) -> Self {
        GameState {
            target: None,
            modality: Modality::Voice,
            board_len,
            player_pos: 0,
            robot_pos: 0,
            wallet: 0,
            rng_seed,
            schedule: RobotSchedule::default(),
            turn: 0,
            winner: None,
            progression: Progression::new(units.iter().copied()),
        }
    }

    pub fn is_finished(&self) -> bool {
        self.winner.is_some()
    }
}

/// One race turn: the player moves on a match and wins on reaching the end
/// before the robot gets its move.
pub fn race_step(state: &GameState, result: &AttemptResult) -> Result<GameState, PlatformError> {
    if state.is_finished() {
        return Err(PlatformError::GameFinished);
    }
    let mut next = state.clone();
    next.turn += 1;
    next.wallet += result.coins as u64;
    if result.matched {
        next.player_pos = (next.player_pos + 1).min(next.board_len);
    }
    if next.player_pos >= next.board_len {
        next.winner = Some(Racer::Player);
        return Ok(next);
    }
    if next.schedule.robot_moves(next.rng_seed, next.turn) {
        next.robot_pos = (next.robot_pos + 1).min(next.board_len);
        if next.robot_pos >= next.board_len {
            next.winner = Some(Racer::Robot);
        }
    }
    Ok(next)
}

pub fn wallet_spend(state: &GameState, price: u64) -> Result<GameState, PlatformError> {
    if price > state.wallet {
        return Err(PlatformError::InsufficientFunds { wallet: state.wallet, price });
    }
    let mut next = state.clone();
    next.wallet -= price;
    Ok(next)
}

/// Records a quiz score for an unlocked unit. Passing (≥ 80 %) marks the
/// unit passed and unlocks the next one; a passed unit never reverts.
pub fn quiz_progression(
    progression: &Progression,
    unit: &str,
    correct: u64,
    total: u64,
) -> Result<Progression, PlatformError> {
    if total == 0 || correct > total {
        return Err(PlatformError::BadCounts { correct, n: total, k: 0 });
    }
    let idx = progression
        .units
        .iter()
        .position(|(u, _)| u == unit)
        .ok_or_else(|| PlatformError::UnknownUnit(unit.to_string()))?;
    let mut next = progression.clone();
    match next.units[idx].1 {
        UnitState::Locked => Err(PlatformError::UnitLocked(unit.to_string())),
        UnitState::Passed => Ok(next),
        UnitState::Unlocked => {
            if correct as f64 / total as f64 >= PASS_FRACTION {
                next.units[idx].1 = UnitState::Passed;
                if let Some((_, s @ UnitState::Locked)) = next.units.get_mut(idx + 1) {
                    *s = UnitState::Unlocked;
                }
            }
            Ok(next)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotionml::AVPoint;

    fn attempt(matched: bool) -> AttemptResult {
        AttemptResult {
            target: "happy".into(),
            recognized: AVPoint::NEUTRAL,
            recognized_label: "happy".into(),
            distance: 0.0,
            matched,
            coins: matched as u32,
        }
    }

    #[test]
    fn ten_matches_win_on_turn_ten() {
        let mut s = GameState::new(10, 7, &["u1"]);
        for turn in 1..=10 {
            s = race_step(&s, &attempt(true)).unwrap();
            assert_eq!(s.turn, turn);
            if turn < 10 {
                assert!(s.winner.is_none());
            }
        }
        assert_eq!(s.winner, Some(Racer::Player));
        assert_eq!((s.player_pos, s.robot_pos, s.wallet), (10, 4, 10));
        assert!(matches!(race_step(&s, &attempt(true)), Err(PlatformError::GameFinished)));
    }

    #[test]
    fn miss_keeps_player_in_place() {
        let s = race_step(&GameState::new(10, 0, &[]), &attempt(false)).unwrap();
        assert_eq!(s.player_pos, 0);
        assert_eq!(s.robot_pos, 0);
        let s = race_step(&s, &attempt(false)).unwrap();
        assert_eq!(s.robot_pos, 1);
    }

    #[test]
    fn seeded_schedule_is_replayable() {
        let sched = RobotSchedule::Seeded { p: 0.5 };
        let a: Vec<bool> = (1..=64).map(|t| sched.robot_moves(42, t)).collect();
        let b: Vec<bool> = (1..=64).map(|t| sched.robot_moves(42, t)).collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|&m| m) && a.iter().any(|&m| !m));
    }

    #[test]
    fn wallet() {
        let mut s = GameState::new(10, 0, &[]);
        s.wallet = 5;
        assert_eq!(wallet_spend(&s, 3).unwrap().wallet, 2);
        assert_eq!(wallet_spend(&s, 0).unwrap(), s);
        s.wallet = 2;
        assert!(matches!(wallet_spend(&s, 3), Err(PlatformError::InsufficientFunds { wallet: 2, price: 3 })));
    }

    #[test]
    fn quiz_threshold_and_locks() {
        let p = Progression::new(["a", "b", "c"]);
        assert!(matches!(quiz_progression(&p, "b", 10, 10), Err(PlatformError::UnitLocked(_))));
        let failed = quiz_progression(&p, "a", 7, 10).unwrap();
        assert_eq!(failed, p);
        let passed = quiz_progression(&p, "a", 8, 10).unwrap();
        assert_eq!(passed.state("a"), Some(UnitState::Passed));
        assert_eq!(passed.state("b"), Some(UnitState::Unlocked));
        assert_eq!(passed.state("c"), Some(UnitState::Locked));
        assert_eq!(quiz_progression(&passed, "a", 0, 10).unwrap(), passed);
        assert!(matches!(quiz_progression(&p, "zzz", 1, 1), Err(PlatformError::UnknownUnit(_))));
    }
}
