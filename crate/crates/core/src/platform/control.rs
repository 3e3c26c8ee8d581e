//! The control and results protocol spoken over the bus.
//!
//! The platform sends commands to `/queue/control.<subsystem>` with the
//! command word as the body and a `command-id` header. Services answer every
//! command with a status message on `/topic/asc` (`asc-kind:status`, echoing
//! `command-id`) and publish analysis results there as EmotionML
//! (`asc-kind:result`, plus `turn-id` and optionally a JSON `asc-feedback`
//! header).

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::PlatformError;
use crate::emotionml::Modality;
use crate::stomp::{Client, Destination, Frame};

pub const HDR_KIND: &str = "asc-kind";
pub const HDR_SUBSYSTEM: &str = "subsystem";
pub const HDR_STATE: &str = "state";
pub const HDR_COMMAND_ID: &str = "command-id";
pub const HDR_MEDIA_PATH: &str = "media-path";
pub const HDR_TARGET: &str = "target";
pub const HDR_TURN_ID: &str = "turn-id";
pub const HDR_T_MS: &str = "t-ms";
pub const HDR_FEEDBACK: &str = "asc-feedback";
pub const HDR_DETAIL: &str = "detail";
pub const KIND_STATUS: &str = "status";
pub const KIND_RESULT: &str = "result";

pub const ACK_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsystem {
    Face,
    Voice,
    Body,
}

impl Subsystem {
    pub const ALL: [Subsystem; 3] = [Subsystem::Face, Subsystem::Voice, Subsystem::Body];

    pub fn as_str(self) -> &'static str {
        match self {
            Subsystem::Face => "face",
            Subsystem::Voice => "voice",
            Subsystem::Body => "body",
        }
    }

    pub fn modality(self) -> Modality {
        match self {
            Subsystem::Face => Modality::Face,
            Subsystem::Voice => Modality::Voice,
            Subsystem::Body => Modality::Body,
        }
    }

    pub fn from_modality(m: Modality) -> Option<Subsystem> {
        match m {
            Modality::Face => Some(Subsystem::Face),
            Modality::Voice => Some(Subsystem::Voice),
            Modality::Body => Some(Subsystem::Body),
            Modality::Fused => None,
        }
    }

    pub fn control_queue(self) -> Destination {
        Destination::control(self.as_str())
    }
}

impl fmt::Display for Subsystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subsystem {
    type Err = PlatformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Subsystem::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| PlatformError::UnknownSubsystem(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlCommand {
    Start,
    Stop,
    Shutdown,
    /// Analyze the media named by the `media-path` header.
    Analyze,
}

impl ControlCommand {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlCommand::Start => "start",
            ControlCommand::Stop => "stop",
            ControlCommand::Shutdown => "shutdown",
            ControlCommand::Analyze => "analyze",
        }
    }
}

impl FromStr for ControlCommand {
    type Err = PlatformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "start" => Ok(ControlCommand::Start),
            "stop" => Ok(ControlCommand::Stop),
            "shutdown" => Ok(ControlCommand::Shutdown),
            "analyze" => Ok(ControlCommand::Analyze),
            other => Err(PlatformError::Config(format!("unknown control command `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceState {
    Idle,
    Running,
    /// Acknowledged a shutdown and is exiting.
    Exiting,
}

impl ServiceState {
    pub fn as_str(self) -> &'static str {
        match self {
            ServiceState::Idle => "idle",
            ServiceState::Running => "running",
            ServiceState::Exiting => "exiting",
        }
    }

    /// Lifecycle edges; repeated commands are idempotent.
    pub fn apply(self, cmd: ControlCommand) -> ServiceState {
        match (self, cmd) {
            (ServiceState::Exiting, _) => ServiceState::Exiting,
            (_, ControlCommand::Start) => ServiceState::Running,
            (_, ControlCommand::Stop) => ServiceState::Idle,
            (_, ControlCommand::Shutdown) => ServiceState::Exiting,
            (s, ControlCommand::Analyze) => s,
        }
    }
}

impl FromStr for ServiceState {
    type Err = PlatformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "idle" => Ok(ServiceState::Idle),
            "running" => Ok(ServiceState::Running),
            "exiting" => Ok(ServiceState::Exiting),
            other => Err(PlatformError::Config(format!("unknown service state `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceStatus {
    pub subsystem: Subsystem,
    pub state: ServiceState,
    pub command_id: Option<String>,
    /// Set when the command failed, for example an unreadable media file.
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultMessage {
    pub subsystem: Subsystem,
    pub turn_id: Option<String>,
    pub emotionml: String,
    pub feedback: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BusMessage {
    Status(ServiceStatus),
    Result(ResultMessage),
}

impl BusMessage {
    /// Classifies a MESSAGE from the results topic; unrelated traffic gives
    /// `None`.
    pub fn from_frame(frame: &Frame) -> Option<BusMessage> {
        let subsystem = frame.get(HDR_SUBSYSTEM)?.parse().ok()?;
        match frame.get(HDR_KIND)? {
            KIND_STATUS => Some(BusMessage::Status(ServiceStatus {
                subsystem,
                state: frame.get(HDR_STATE)?.parse().ok()?,
                command_id: frame.get(HDR_COMMAND_ID).map(str::to_string),
                detail: frame.get(HDR_DETAIL).map(str::to_string),
            })),
            KIND_RESULT => Some(BusMessage::Result(ResultMessage {
                subsystem,
                turn_id: frame.get(HDR_TURN_ID).map(str::to_string),
                emotionml: frame.body_text(),
                feedback: frame.get(HDR_FEEDBACK).and_then(|s| serde_json::from_str(s).ok()),
            })),
            _ => None,
        }
    }
}

/// Platform-side bus endpoint: sends control commands and collects status
/// and result messages from the results topic.
pub struct Controller {
    client: Client,
    next_command: u64,
    results: VecDeque<ResultMessage>,
}

impl Controller {
    pub fn connect(addr: impl std::net::ToSocketAddrs) -> Result<Controller, PlatformError> {
        let mut client = Client::connect(addr)?;
        client.subscribe(&Destination::results(), "platform-asc")?;
        Ok(Controller { client, next_command: 1, results: VecDeque::new() })
    }

    fn send_command(
        &mut self,
        subsystem: Subsystem,
        cmd: ControlCommand,
        extra: &[(&str, &str)],
    ) -> Result<String, PlatformError> {
        let id = format!("c-{}", self.next_command);
        self.next_command += 1;
        let mut headers = vec![(HDR_COMMAND_ID, id.as_str())];
        headers.extend_from_slice(extra);
        self.client.send(&subsystem.control_queue(), cmd.as_str().as_bytes(), &headers)?;
        Ok(id)
    }

    fn await_status(&mut self, id: &str, subsystem: Subsystem, timeout: Duration) -> Result<ServiceStatus, PlatformError> {
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(PlatformError::Timeout(format!("{subsystem} acknowledgment")));
            }
            let Some(frame) = self.client.recv(left)? else { continue };
            match BusMessage::from_frame(&frame) {
                Some(BusMessage::Status(s)) if s.command_id.as_deref() == Some(id) => return Ok(s),
                Some(BusMessage::Result(r)) => self.results.push_back(r),
                _ => {}
            }
        }
    }

    /// Sends a lifecycle command and waits up to two seconds for the
    /// service's status reply.
    pub fn control(&mut self, subsystem: Subsystem, cmd: ControlCommand) -> Result<ServiceStatus, PlatformError> {
        self.control_with(subsystem, cmd, &[], ACK_TIMEOUT)
    }

    pub fn control_with(
        &mut self,
        subsystem: Subsystem,
        cmd: ControlCommand,
        headers: &[(&str, &str)],
        timeout: Duration,
    ) -> Result<ServiceStatus, PlatformError> {
        let id = self.send_command(subsystem, cmd, headers)?;
        self.await_status(&id, subsystem, timeout)
    }

    /// Asks a service to analyze a media file for `turn_id` against the
    /// turn's `target`. Returns once the request is queued; the result
    /// arrives via [`Controller::next_result`].
    pub fn request_analysis(
        &mut self,
        subsystem: Subsystem,
        media_path: &str,
        turn_id: &str,
        t_ms: u64,
        target: &str,
    ) -> Result<(), PlatformError> {
        let t = t_ms.to_string();
        self.send_command(
            subsystem,
            ControlCommand::Analyze,
            &[(HDR_MEDIA_PATH, media_path), (HDR_TURN_ID, turn_id), (HDR_T_MS, &t), (HDR_TARGET, target)],
        )?;
        Ok(())
    }

    /// Next result message, or `None` once `timeout` passes.
    pub fn next_result(&mut self, timeout: Duration) -> Result<Option<ResultMessage>, PlatformError> {
        if let Some(r) = self.results.pop_front() {
            return Ok(Some(r));
        }
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(None);
            }
            let Some(frame) = self.client.recv(left)? else { continue };
            if let Some(BusMessage::Result(r)) = BusMessage::from_frame(&frame) {
                return Ok(Some(r));
            }
        }
    }

    pub fn disconnect(self) -> Result<(), PlatformError> {
        self.client.disconnect()?;
        Ok(())
    }
}
