//! STOMP 1.2 transport: frame codec, an in-process broker with topic and
//! queue destinations, and a blocking client.

mod broker;
mod client;
mod frame;

use std::fmt;
use std::str::FromStr;

pub use broker::{Broker, BrokerConfig, BrokerError, DEFAULT_QUEUE_CAPACITY};
pub use client::{Client, ClientError};
pub use frame::{decode_frame, encode_frame, Command, Frame, FrameError, MAX_HEADER_BYTES};

pub const DEFAULT_PORT: u16 = 61613;
/// Name of the shared results topic.
pub const RESULTS_TOPIC: &str = "asc";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DestinationKind {
    Topic,
    Queue,
}

/// A `/topic/<name>` or `/queue/<name>` destination.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Destination {
    pub kind: DestinationKind,
    pub name: String,
}

impl Destination {
    pub fn topic(name: impl Into<String>) -> Self {
        Destination { kind: DestinationKind::Topic, name: name.into() }
    }

    pub fn queue(name: impl Into<String>) -> Self {
        Destination { kind: DestinationKind::Queue, name: name.into() }
    }

    /// `/topic/asc`
    pub fn results() -> Self {
        Destination::topic(RESULTS_TOPIC)
    }

    /// `/queue/control.<subsystem>`
    pub fn control(subsystem: &str) -> Self {
        Destination::queue(format!("control.{subsystem}"))
    }
}

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DestinationKind::Topic => write!(f, "/topic/{}", self.name),
            DestinationKind::Queue => write!(f, "/queue/{}", self.name),
        }
    }
}

impl FromStr for Destination {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, name) = if let Some(rest) = s.strip_prefix("/topic/") {
            (DestinationKind::Topic, rest)
        } else if let Some(rest) = s.strip_prefix("/queue/") {
            (DestinationKind::Queue, rest)
        } else {
            return Err(format!("destination {s:?} must start with /topic/ or /queue/"));
        };
        if name.is_empty() {
            return Err(format!("destination {s:?} has an empty name"));
        }
        Ok(Destination { kind, name: name.to_string() })
    }
}
