//! Session scripts: a seed, a board length and an ordered list of turns.
//!
//! ```text
//! # comment
//! seed: 7
//! board_len: 10
//! turn: happy voice attempts/happy.wav
//! turn: angry body attempts/anger.csv
//! ```
//!
//! Media paths are relative to the script's directory.

use std::path::{Path, PathBuf};

use super::SessionError;
use crate::platform::{Subsystem, Vocabulary};

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptTurn {
    pub target: String,
    pub modality: Subsystem,
    /// Resolved path handed to the service.
    pub media: PathBuf,
    /// The path as written, recorded in the log so logs do not depend on
    /// where the script lives.
    pub media_label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionScript {
    pub seed: u64,
    pub board_len: u32,
    pub turns: Vec<ScriptTurn>,
}

impl SessionScript {
    pub fn parse(text: &str, base: &Path, vocabulary: &Vocabulary) -> Result<SessionScript, SessionError> {
        let mut script = SessionScript { seed: 0, board_len: crate::platform::game::DEFAULT_BOARD_LEN, turns: Vec::new() };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let invalid = |reason: String| SessionError::ScriptInvalid(format!("line {}: {reason}", i + 1));
            let (key, value) = line.split_once(':').ok_or_else(|| invalid("expected `key: value`".into()))?;
            let value = value.trim();
            match key.trim() {
                "seed" => script.seed = value.parse().map_err(|_| invalid(format!("bad seed `{value}`")))?,
                "board_len" => {
                    script.board_len = value
                        .parse()
                        .ok()
                        .filter(|n| *n > 0)
                        .ok_or_else(|| invalid(format!("bad board length `{value}`")))?
                }
                "turn" => {
                    let parts: Vec<&str> = value.splitn(3, char::is_whitespace).map(str::trim).collect();
                    let [target, modality, media] = parts[..] else {
                        return Err(invalid("expected `turn: <emotion> <modality> <path>`".into()));
                    };
                    if !vocabulary.contains(target) {
                        return Err(invalid(format!("`{target}` is not in the vocabulary")));
                    }
                    let modality: Subsystem = modality.parse().map_err(|_| invalid(format!("unknown modality `{modality}`")))?;
                    let path = base.join(media);
                    if !path.is_file() {
                        return Err(invalid(format!("media file `{}` does not exist", path.display())));
                    }
                    script.turns.push(ScriptTurn {
                        target: target.to_string(),
                        modality,
                        media: path,
                        media_label: media.to_string(),
                    });
                }
                other => return Err(invalid(format!("unknown key `{other}`"))),
            }
        }
        Ok(script)
    }

    pub fn load(path: &Path, vocabulary: &Vocabulary) -> Result<SessionScript, SessionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SessionError::ScriptInvalid(format!("{}: {e}", path.display())))?;
        SessionScript::parse(&text, path.parent().unwrap_or(Path::new(".")), vocabulary)
    }
}
