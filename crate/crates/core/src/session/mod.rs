//! Process-level plumbing: configuration, session scripts, the analyzer
//! services, the per-service media endpoint, scripted session execution,
//! content validation and the WebSocket bridge for the UI.

pub mod bridge;
pub mod config;
pub mod media;
pub mod runner;
pub mod script;
pub mod service;
pub mod validate;

use thiserror::Error;

use crate::body::BodyError;
use crate::face::FaceError;
use crate::keyvalue::KeyValueError;
use crate::platform::PlatformError;
use crate::stomp::{BrokerError, ClientError};
use crate::voice::VoiceError;

pub use bridge::{run_bridge, BridgeCommand, BridgeEvent, BridgeOptions};
pub use config::SessionConfig;
pub use media::MediaServer;
pub use runner::{play_turn, run_broker, run_session, LocalStack, SessionRun, Supervisor};
pub use script::{ScriptTurn, SessionScript};
pub use service::{run_service, Analyzer};
pub use validate::{content_report, validate_content, validate_content_file, ContentRow};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session script: {0}")]
    ScriptInvalid(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("broker unreachable at {addr}: {reason}")]
    BrokerUnreachable { addr: String, reason: String },
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
    #[error("media server: {0}")]
    Media(String),
    #[error("bridge: {0}")]
    Bridge(String),
    #[error("service process: {0}")]
    Process(String),
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error(transparent)]
    Bus(#[from] ClientError),
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Voice(#[from] VoiceError),
    #[error(transparent)]
    Body(#[from] BodyError),
    #[error(transparent)]
    Face(#[from] FaceError),
    #[error(transparent)]
    KeyValue(#[from] KeyValueError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
