//! Flat `key: value` configuration with environment overrides.
//!
//! | key | default |
//! |-----|---------|
//! | `broker.host` | `127.0.0.1` |
//! | `broker.port` | `61613` |
//! | `media.port.face` / `media.port.voice` / `media.port.body` | `8701` / `8702` / `8703` (`0` picks a free port) |
//! | `voice.prototypes` | directory of prototype utterances |
//! | `body.model` / `face.model` | trained model files |
//! | `session.turn_timeout_ms` | `5000` |
//! | `session.ack_timeout_ms` | `2000` |
//! | `session.ready_timeout_ms` | `30000` |
//! | `session.log` | optional path the session log is written to |
//! | `body.segment.energy_threshold` / `min_duration_ms` / `padding_ms` | see [`SegmentConfig`] |
//! | `emotion.<label>.arousal` / `emotion.<label>.valence` | canonical point overrides |
//!
//! Relative paths resolve against the configuration file's directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use super::SessionError;
use crate::body::SegmentConfig;
use crate::keyvalue::KeyValues;
use crate::platform::{Subsystem, Vocabulary};
use crate::stomp::DEFAULT_PORT;

/// Environment variables and the keys they override.
pub const ENV_KEYS: [(&str, &str); 11] = [
    ("ASC_BROKER_HOST", "broker.host"),
    ("ASC_BROKER_PORT", "broker.port"),
    ("ASC_MEDIA_PORT_FACE", "media.port.face"),
    ("ASC_MEDIA_PORT_VOICE", "media.port.voice"),
    ("ASC_MEDIA_PORT_BODY", "media.port.body"),
    ("ASC_VOICE_PROTOTYPES", "voice.prototypes"),
    ("ASC_BODY_MODEL", "body.model"),
    ("ASC_FACE_MODEL", "face.model"),
    ("ASC_TURN_TIMEOUT_MS", "session.turn_timeout_ms"),
    ("ASC_ACK_TIMEOUT_MS", "session.ack_timeout_ms"),
    ("ASC_SESSION_LOG", "session.log"),
];

/// Names the configuration file when `--config` is not given.
pub const ENV_CONFIG: &str = "ASC_CONFIG";

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub broker_host: String,
    pub broker_port: u16,
    /// Media ports in [`Subsystem::ALL`] order (face, voice, body).
    pub media_ports: [u16; 3],
    pub voice_prototypes: Option<PathBuf>,
    pub body_model: Option<PathBuf>,
    pub face_model: Option<PathBuf>,
    pub turn_timeout: Duration,
    pub ack_timeout: Duration,
    pub ready_timeout: Duration,
    pub log_path: Option<PathBuf>,
    pub segment: SegmentConfig,
    pub vocabulary: Vocabulary,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            broker_host: "127.0.0.1".into(),
            broker_port: DEFAULT_PORT,
            media_ports: [8701, 8702, 8703],
            voice_prototypes: None,
            body_model: None,
            face_model: None,
            turn_timeout: Duration::from_millis(5000),
            ack_timeout: Duration::from_millis(2000),
            ready_timeout: Duration::from_millis(30_000),
            log_path: None,
            segment: SegmentConfig::default(),
            vocabulary: Vocabulary::default(),
        }
    }
}

fn slot(sub: Subsystem) -> usize {
    Subsystem::ALL.iter().position(|s| *s == sub).expect("subsystem listed in ALL")
}

impl SessionConfig {
    /// Builds a configuration from parsed keys; unknown keys are rejected so
    /// typos surface early.
    pub fn from_keyvalues(kv: &KeyValues, base: &Path) -> Result<SessionConfig, SessionError> {
        let mut cfg = SessionConfig::default();
        let bad = |e: crate::keyvalue::KeyValueError| SessionError::Config(e.to_string());
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let ms = |key: &str| -> Result<Option<Duration>, SessionError> {
            Ok(kv.parsed::<u64>(key).map_err(bad)?.map(Duration::from_millis))
        };
        for (key, value) in kv.iter() {
            match key {
                "broker.host" => cfg.broker_host = value.to_string(),
                "broker.port" => cfg.broker_port = kv.required(key).map_err(bad)?,
                "media.port.face" => cfg.media_ports[slot(Subsystem::Face)] = kv.required(key).map_err(bad)?,
                "media.port.voice" => cfg.media_ports[slot(Subsystem::Voice)] = kv.required(key).map_err(bad)?,
                "media.port.body" => cfg.media_ports[slot(Subsystem::Body)] = kv.required(key).map_err(bad)?,
                "voice.prototypes" => cfg.voice_prototypes = Some(path(value)),
                "body.model" => cfg.body_model = Some(path(value)),
                "face.model" => cfg.face_model = Some(path(value)),
                "session.turn_timeout_ms" => cfg.turn_timeout = ms(key)?.expect("present"),
                "session.ack_timeout_ms" => cfg.ack_timeout = ms(key)?.expect("present"),
                "session.ready_timeout_ms" => cfg.ready_timeout = ms(key)?.expect("present"),
                "session.log" => cfg.log_path = Some(path(value)),
                "body.segment.energy_threshold" => cfg.segment.energy_threshold = kv.required(key).map_err(bad)?,
                "body.segment.min_duration_ms" => cfg.segment.min_duration_ms = kv.required(key).map_err(bad)?,
                "body.segment.padding_ms" => cfg.segment.padding_ms = kv.required(key).map_err(bad)?,
                k if k.starts_with("emotion.") => {}
                other => return Err(SessionError::Config(format!("unknown key `{other}`"))),
            }
        }
        cfg.vocabulary.apply_overrides(kv)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads the file (if any), then applies `ASC_*` overrides from `env`.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<SessionConfig, SessionError> {
        let (mut kv, base) = match path {
            Some(p) => (KeyValues::load(p)?, p.parent().unwrap_or(Path::new(".")).to_path_buf()),
            None => (KeyValues::new(), PathBuf::from(".")),
        };
        for (name, value) in env {
            if let Some((_, key)) = ENV_KEYS.iter().find(|(n, _)| *n == name) {
                kv.set(*key, value);
            }
        }
        SessionConfig::from_keyvalues(&kv, &base)
    }

    /// Configuration for a process: `--config`, else `$ASC_CONFIG`, plus the
    /// process environment.
    pub fn from_process(path: Option<&Path>) -> Result<SessionConfig, SessionError> {
        let from_env = std::env::var_os(ENV_CONFIG).map(PathBuf::from);
        SessionConfig::load(path.or(from_env.as_deref()), std::env::vars())
    }

    fn check(&self) -> Result<(), SessionError> {
        let used: Vec<u16> = self.media_ports.iter().copied().filter(|p| *p != 0).collect();
        for (i, p) in used.iter().enumerate() {
            if used[..i].contains(p) || *p == self.broker_port {
                return Err(SessionError::Config(format!("port {p} is assigned twice")));
            }
        }
        if self.turn_timeout.is_zero() || self.ack_timeout.is_zero() {
            return Err(SessionError::Config("timeouts must be positive".into()));
        }
        Ok(())
    }

    pub fn media_port(&self, sub: Subsystem) -> u16 {
        self.media_ports[slot(sub)]
    }

    pub fn broker_addr(&self) -> String {
        format!("{}:{}", self.broker_host, self.broker_port)
    }

    /// Environment that reproduces the bus, media and model settings in a
    /// child process.
    pub fn to_env(&self) -> Vec<(String, String)> {
        let mut env = vec![
            ("ASC_BROKER_HOST".to_string(), self.broker_host.clone()),
            ("ASC_BROKER_PORT".to_string(), self.broker_port.to_string()),
            ("ASC_MEDIA_PORT_FACE".to_string(), self.media_port(Subsystem::Face).to_string()),
            ("ASC_MEDIA_PORT_VOICE".to_string(), self.media_port(Subsystem::Voice).to_string()),
            ("ASC_MEDIA_PORT_BODY".to_string(), self.media_port(Subsystem::Body).to_string()),
        ];
        for (name, p) in [
            ("ASC_VOICE_PROTOTYPES", &self.voice_prototypes),
            ("ASC_BODY_MODEL", &self.body_model),
            ("ASC_FACE_MODEL", &self.face_model),
        ] {
            if let Some(p) = p {
                env.push((name.to_string(), p.display().to_string()));
            }
        }
        env
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("a.conf");
        std::fs::write(&file, "broker.port: 7000\nbody.model: models/body.model\nemotion.happy.arousal: 0.9\n").unwrap();
        let env = vec![("ASC_BROKER_PORT".to_string(), "7001".to_string()), ("HOME".to_string(), "/x".to_string())];
        let cfg = SessionConfig::load(Some(&file), env).unwrap();
        assert_eq!(cfg.broker_port, 7001);
        assert_eq!(cfg.body_model, Some(dir.path().join("models/body.model")));
        assert_eq!(cfg.vocabulary.point("happy").unwrap().arousal, 0.9);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = Path::new(".");
        for text in ["broker.prot: 1", "media.port.face: 9000\nmedia.port.body: 9000", "session.turn_timeout_ms: 0"] {
            let kv = KeyValues::parse(text).unwrap();
            assert!(matches!(SessionConfig::from_keyvalues(&kv, base), Err(SessionError::Config(_))), "{text}");
        }
    }
}
