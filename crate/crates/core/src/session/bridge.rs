//! WebSocket bridge between the UI and the bus.
//!
//! The UI sends JSON commands tagged by `cmd`:
//!
//! ```json
//! {"cmd": "select_target", "target": "happy"}
//! {"cmd": "select_modality", "modality": "voice"}
//! {"cmd": "submit_attempt", "path": "attempts/voice/happy.wav"}
//! {"cmd": "play_reference"}
//! {"cmd": "list_media"}
//! {"cmd": "reset"}
//! ```
//!
//! and receives JSON events tagged by `event`: `state` after every command,
//! `feedback` after an attempt, `reference`, `media` and `error`. One UI
//! connection is served at a time; game state survives reconnects.
//!
//! With a static directory configured, an HTTP server on a second port
//! serves the UI assets plus `/reference/<label>.wav`.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use super::runner::{connect, play_turn};
use super::{SessionConfig, SessionError};
use crate::emotionml::AVPoint;
use crate::platform::{quadrant, Controller, Engine, EngineConfig, LogRecord, Quadrant, Racer, Subsystem};
use crate::voice::REFERENCE_WAV;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum BridgeCommand {
    SelectTarget { target: String },
    SelectModality { modality: Subsystem },
    /// Media path; relative paths resolve against the bridge's media
    /// directory.
    SubmitAttempt { path: String },
    PlayReference,
    ListMedia,
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum BridgeEvent {
    State {
        target: Option<String>,
        target_point: Option<AVPoint>,
        target_quadrant: Option<Quadrant>,
        modality: Subsystem,
        turn: u32,
        board_len: u32,
        player_pos: u32,
        robot_pos: u32,
        wallet: u64,
        winner: Option<Racer>,
    },
    Feedback {
        turn: u32,
        target: String,
        modality: Subsystem,
        recognized: Option<AVPoint>,
        recognized_label: Option<String>,
        matched: bool,
        coins: u32,
        timed_out: bool,
        /// Traffic-light comparison against the prototype (voice only).
        lights: Option<serde_json::Value>,
    },
    Reference { target: String, path: String, url: Option<String> },
    Media { paths: Vec<String> },
    Error { message: String },
}

#[derive(Debug, Clone, Default)]
pub struct BridgeOptions {
    pub seed: u64,
    pub board_len: Option<u32>,
    /// Base for relative attempt paths and the source of `list_media`.
    pub media_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub http_port: Option<u16>,
}

/// Bridge state: the game engine plus the current selection.
pub struct Bridge {
    cfg: SessionConfig,
    opts: BridgeOptions,
    controller: Controller,
    engine: Engine,
    target: Option<String>,
    modality: Subsystem,
    http_base: Option<String>,
}

impl Bridge {
    pub fn new(cfg: &SessionConfig, opts: BridgeOptions) -> Result<Bridge, SessionError> {
        let controller = connect(cfg)?;
        let engine = Engine::new(Bridge::engine_config(cfg, &opts));
        Ok(Bridge { cfg: cfg.clone(), opts, controller, engine, target: None, modality: Subsystem::Voice, http_base: None })
    }

    fn engine_config(cfg: &SessionConfig, opts: &BridgeOptions) -> EngineConfig {
        let mut ec = EngineConfig::new(opts.seed, opts.board_len.unwrap_or(crate::platform::game::DEFAULT_BOARD_LEN));
        ec.units = cfg.vocabulary.labels().map(str::to_string).collect();
        ec.vocabulary = cfg.vocabulary.clone();
        ec
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn state_event(&self) -> BridgeEvent {
        let s = self.engine.state();
        let point = self.target.as_deref().and_then(|t| self.cfg.vocabulary.point(t));
        BridgeEvent::State {
            target: self.target.clone(),
            target_point: point,
            target_quadrant: point.as_ref().map(quadrant),
            modality: self.modality,
            turn: s.turn,
            board_len: s.board_len,
            player_pos: s.player_pos,
            robot_pos: s.robot_pos,
            wallet: s.wallet,
            winner: s.winner,
        }
    }

    fn resolve(&self, path: &str) -> PathBuf {
        match &self.opts.media_dir {
            Some(dir) if Path::new(path).is_relative() => dir.join(path),
            _ => PathBuf::from(path),
        }
    }

    fn submit(&mut self, path: &str) -> Result<Vec<BridgeEvent>, SessionError> {
        let target = self.target.clone().ok_or_else(|| SessionError::Bridge("select a target first".into()))?;
        let media = self.resolve(path);
        if !media.is_file() {
            return Err(SessionError::Bridge(format!("no media file at {}", media.display())));
        }
        let records = play_turn(&mut self.controller, &mut self.engine, &self.cfg, &target, self.modality, &media, path)?;
        let lights = records.iter().find_map(|r| match r {
            LogRecord::Attempt { feedback, .. } => feedback.clone(),
            _ => None,
        });
        let f = self.engine.feedback().last().expect("turn was scored").clone();
        Ok(vec![BridgeEvent::Feedback {
            turn: f.turn,
            target: f.target,
            modality: f.modality,
            recognized: f.recognized,
            recognized_label: f.recognized_label,
            matched: f.matched,
            coins: f.coins,
            timed_out: f.timed_out,
            lights,
        }])
    }

    fn list_media(&self) -> Result<Vec<String>, SessionError> {
        let Some(root) = &self.opts.media_dir else { return Ok(Vec::new()) };
        let mut out = Vec::new();
        let mut stack = vec![root.clone()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir)? {
                let p = entry?.path();
                if p.is_dir() {
                    stack.push(p);
                } else if matches!(p.extension().and_then(|e| e.to_str()), Some("wav" | "csv")) {
                    out.push(p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/"));
                }
            }
        }
        out.sort();
        Ok(out)
    }

    /// Applies one command and returns the events to push, ending with the
    /// current state.
    pub fn handle(&mut self, cmd: BridgeCommand) -> Vec<BridgeEvent> {
        let result: Result<Vec<BridgeEvent>, SessionError> = match cmd {
            BridgeCommand::SelectTarget { target } => {
                if self.cfg.vocabulary.contains(&target) {
                    self.target = Some(target);
                    Ok(Vec::new())
                } else {
                    Err(SessionError::Bridge(format!("`{target}` is not in the vocabulary")))
                }
            }
            BridgeCommand::SelectModality { modality } => {
                self.modality = modality;
                Ok(Vec::new())
            }
            BridgeCommand::SubmitAttempt { path } => self.submit(&path),
            BridgeCommand::PlayReference => match (&self.target, &self.cfg.voice_prototypes) {
                (Some(t), Some(dir)) => Ok(vec![BridgeEvent::Reference {
                    target: t.clone(),
                    path: dir.join(t).join(REFERENCE_WAV).display().to_string(),
                    url: self.http_base.as_ref().map(|b| format!("{b}/reference/{t}.wav")),
                }]),
                (None, _) => Err(SessionError::Bridge("select a target first".into())),
                (_, None) => Err(SessionError::Bridge("no prototype directory configured".into())),
            },
            BridgeCommand::ListMedia => self.list_media().map(|paths| vec![BridgeEvent::Media { paths }]),
            BridgeCommand::Reset => {
                self.engine = Engine::new(Bridge::engine_config(&self.cfg, &self.opts));
                Ok(Vec::new())
            }
        };
        let mut events = result.unwrap_or_else(|e| vec![BridgeEvent::Error { message: e.to_string() }]);
        events.push(self.state_event());
        events
    }

    /// Parses a text frame and handles it; malformed JSON yields an error
    /// event.
    pub fn handle_text(&mut self, text: &str) -> Vec<BridgeEvent> {
        match serde_json::from_str::<BridgeCommand>(text) {
            Ok(cmd) => self.handle(cmd),
            Err(e) => vec![BridgeEvent::Error { message: format!("bad command: {e}") }, self.state_event()],
        }
    }
}

fn send(ws: &mut WebSocket<TcpStream>, events: &[BridgeEvent]) -> tungstenite::Result<()> {
    for e in events {
        ws.send(Message::text(serde_json::to_string(e).expect("events serialize")))?;
    }
    Ok(())
}

fn serve_connection(bridge: &mut Bridge, stream: TcpStream, stop: &AtomicBool) -> Result<(), SessionError> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut ws = tungstenite::accept(stream).map_err(|e| SessionError::Bridge(format!("handshake: {e}")))?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(100)))?;
    let ws_err = |e: tungstenite::Error| SessionError::Bridge(e.to_string());
    send(&mut ws, &[bridge.state_event()]).map_err(ws_err)?;
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let events = bridge.handle_text(text.as_str());
                send(&mut ws, &events).map_err(ws_err)?;
            }
            Ok(Message::Close(_)) | Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => {
                return Ok(())
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => return Err(ws_err(e)),
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("wav") => "audio/wav",
        _ => "application/octet-stream",
    }
}

/// Maps a request path onto a file under `root`, refusing anything that
/// climbs out of it.
fn under(root: &Path, url_path: &str) -> Option<PathBuf> {
    let rel = Path::new(url_path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    Some(root.join(rel))
}

fn start_static(
    static_dir: PathBuf,
    prototypes: Option<PathBuf>,
    port: u16,
) -> Result<(Arc<tiny_http::Server>, SocketAddr, thread::JoinHandle<()>), SessionError> {
    let server = tiny_http::Server::http(("127.0.0.1", port)).map_err(|e| SessionError::Bridge(format!("http: {e}")))?;
    let addr = server.server_addr().to_ip().ok_or_else(|| SessionError::Bridge("http server has no IP address".into()))?;
    let server = Arc::new(server);
    let worker = {
        let server = server.clone();
        thread::spawn(move || {
            for req in server.incoming_requests() {
                let url = req.url().split('?').next().unwrap_or("/").to_string();
                let file = match url.strip_prefix("/reference/").and_then(|r| r.strip_suffix(".wav")) {
                    Some(label) => prototypes.as_ref().and_then(|d| under(d, label)).map(|d| d.join(REFERENCE_WAV)),
                    None if url == "/" => Some(static_dir.join("index.html")),
                    None => under(&static_dir, &url),
                };
                let response = match file.filter(|f| f.is_file()).and_then(|f| std::fs::read(&f).ok().map(|b| (f, b))) {
                    Some((f, bytes)) => {
                        let header = tiny_http::Header::from_bytes("Content-Type", content_type(&f)).expect("static header");
                        req.respond(tiny_http::Response::from_data(bytes).with_header(header))
                    }
                    None => req.respond(tiny_http::Response::from_string("not found").with_status_code(404)),
                };
                if let Err(e) = response {
                    log::debug!("static response failed: {e}");
                }
            }
        })
    };
    Ok((server, addr, worker))
}

/// Serves the bridge on `listener` until `stop` is set.
pub fn run_bridge(
    cfg: &SessionConfig,
    opts: BridgeOptions,
    listener: TcpListener,
    stop: &AtomicBool,
) -> Result<(), SessionError> {
    let static_server = match &opts.static_dir {
        Some(dir) => Some(start_static(dir.clone(), cfg.voice_prototypes.clone(), opts.http_port.unwrap_or(0))?),
        None => None,
    };
    let mut bridge = Bridge::new(cfg, opts)?;
    if let Some((_, addr, _)) = &static_server {
        info!("UI assets at http://{addr}/");
        bridge.http_base = Some(format!("http://{addr}"));
    }
    info!("bridge listening on ws://{}", listener.local_addr()?);
    listener.set_nonblocking(true)?;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                info!("UI connected from {peer}");
                if let Err(e) = serve_connection(&mut bridge, stream, stop) {
                    warn!("UI connection ended: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(50)),
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(p) = &cfg.log_path {
        std::fs::write(p, bridge.engine.log_text())?;
    }
    if let Some((server, _, worker)) = static_server {
        server.unblock();
        let _ = worker.join();
    }
    Ok(())
}
