//! Broker hosting, service supervision and scripted session execution.

use std::path::{Path, PathBuf};
use std::process::{Child, Command as Process, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use log::{info, warn};

use super::{SessionConfig, SessionError, SessionScript};
use crate::platform::control::HDR_TARGET;
use crate::platform::engine::TURN_SLOT_MS;
use crate::platform::{
    ControlCommand, Controller, Engine, EngineConfig, EngineInput, LogRecord, PlatformError, Subsystem, TurnFeedback,
};
use crate::stomp::{Broker, BrokerConfig};

/// Hosts a broker until `stop` is set. Returns the number of connections
/// that were still open at shutdown.
pub fn run_broker(cfg: &SessionConfig, stop: &AtomicBool) -> Result<usize, SessionError> {
    let broker = Broker::start(&BrokerConfig { host: cfg.broker_host.clone(), port: cfg.broker_port, ..Default::default() })?;
    info!("broker listening on {}", broker.local_addr());
    while !stop.load(Ordering::SeqCst) {
        std::thread::sleep(Duration::from_millis(50));
    }
    Ok(broker.stop())
}

/// Analyzer services running as child processes of this executable.
pub struct Supervisor {
    exe: PathBuf,
    config_file: Option<PathBuf>,
    children: Vec<(Subsystem, Child)>,
}

impl Supervisor {
    /// `exe` must accept `service --subsystem <name>`.
    pub fn new(exe: impl Into<PathBuf>, config_file: Option<&Path>) -> Supervisor {
        Supervisor { exe: exe.into(), config_file: config_file.map(Path::to_path_buf), children: Vec::new() }
    }

    pub fn spawn(&mut self, subsystem: Subsystem, cfg: &SessionConfig) -> Result<(), SessionError> {
        let mut cmd = Process::new(&self.exe);
        cmd.args(["service", "--subsystem", subsystem.as_str()]).envs(cfg.to_env()).stdout(Stdio::null());
        match &self.config_file {
            Some(p) => cmd.env(super::config::ENV_CONFIG, p),
            None => cmd.env_remove(super::config::ENV_CONFIG),
        };
        let child = cmd.spawn().map_err(|e| SessionError::Process(format!("{}: {e}", self.exe.display())))?;
        self.children.push((subsystem, child));
        Ok(())
    }

    pub fn pid(&self, subsystem: Subsystem) -> Option<u32> {
        self.children.iter().find(|(s, _)| *s == subsystem).map(|(_, c)| c.id())
    }

    /// Kills a service abruptly, as a crash would.
    pub fn kill(&mut self, subsystem: Subsystem) -> Result<(), SessionError> {
        if let Some(i) = self.children.iter().position(|(s, _)| *s == subsystem) {
            let (_, mut child) = self.children.remove(i);
            child.kill()?;
            child.wait()?;
        }
        Ok(())
    }

    /// Waits up to `timeout` for every child to exit, then kills stragglers.
    /// Returns the exit codes of the children that exited on their own.
    pub fn wait_all(&mut self, timeout: Duration) -> Vec<(Subsystem, Option<i32>)> {
        let deadline = Instant::now() + timeout;
        let mut codes = Vec::new();
        while !self.children.is_empty() {
            let mut i = 0;
            while i < self.children.len() {
                match self.children[i].1.try_wait() {
                    Ok(Some(status)) => {
                        let (sub, _) = self.children.remove(i);
                        codes.push((sub, status.code()));
                    }
                    _ => i += 1,
                }
            }
            if Instant::now() >= deadline {
                for (sub, mut child) in self.children.drain(..) {
                    warn!("{sub} service did not exit; killing it");
                    let _ = child.kill();
                    let _ = child.wait();
                }
                break;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        codes
    }
}

impl Drop for Supervisor {
    fn drop(&mut self) {
        for (_, child) in &mut self.children {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Blocks until every listed service answers a status request.
pub fn wait_ready(controller: &mut Controller, subsystems: &[Subsystem], timeout: Duration) -> Result<(), SessionError> {
    for &s in subsystems {
        controller.control_with(s, ControlCommand::Stop, &[], timeout)?;
    }
    Ok(())
}

/// A broker in this process plus the three services as children.
pub struct LocalStack {
    pub config: SessionConfig,
    pub supervisor: Supervisor,
    broker: Option<Broker>,
}

impl LocalStack {
    /// Starts the broker (port `0` picks a free one and is written back into
    /// `config`), spawns the services and waits until each one answers.
    pub fn launch(exe: impl Into<PathBuf>, config: &SessionConfig, config_file: Option<&Path>) -> Result<LocalStack, SessionError> {
        let mut config = config.clone();
        let broker =
            Broker::start(&BrokerConfig { host: config.broker_host.clone(), port: config.broker_port, ..Default::default() })?;
        config.broker_port = broker.local_addr().port();
        let mut supervisor = Supervisor::new(exe, config_file);
        for s in Subsystem::ALL {
            supervisor.spawn(s, &config)?;
        }
        let mut controller = connect(&config)?;
        wait_ready(&mut controller, &Subsystem::ALL, config.ready_timeout)?;
        let _ = controller.disconnect();
        Ok(LocalStack { config, supervisor, broker: Some(broker) })
    }

    /// Sends shutdown to the services still alive, reaps them and stops the
    /// broker. Returns the services' exit codes.
    pub fn shutdown(mut self) -> Result<Vec<(Subsystem, Option<i32>)>, SessionError> {
        let mut controller = connect(&self.config)?;
        for (s, _) in &self.supervisor.children {
            if let Err(e) = controller.control_with(*s, ControlCommand::Shutdown, &[], self.config.ack_timeout) {
                warn!("{s} did not acknowledge shutdown: {e}");
            }
        }
        let _ = controller.disconnect();
        let codes = self.supervisor.wait_all(Duration::from_secs(10));
        if let Some(b) = self.broker.take() {
            b.stop();
        }
        Ok(codes)
    }
}

pub fn connect(cfg: &SessionConfig) -> Result<Controller, SessionError> {
    let addr = cfg.broker_addr();
    Controller::connect(addr.as_str()).map_err(|e| SessionError::BrokerUnreachable { addr, reason: e.to_string() })
}

/// Plays one turn: opens it in the engine, starts the service, submits the
/// media and waits for the matching result. A missing acknowledgment or
/// result becomes a timeout, scored as a miss. Returns the records written.
pub fn play_turn(
    controller: &mut Controller,
    engine: &mut Engine,
    cfg: &SessionConfig,
    target: &str,
    subsystem: Subsystem,
    media: &Path,
    media_label: &str,
) -> Result<Vec<LogRecord>, SessionError> {
    let mut records = engine.handle(EngineInput::TurnBegin {
        target: target.to_string(),
        modality: subsystem,
        media: media_label.to_string(),
    })?;
    let turn = engine.open_turn().expect("turn just opened");

    let ack = controller.control_with(subsystem, ControlCommand::Start, &[(HDR_TARGET, target)], cfg.ack_timeout);
    let acknowledged = match &ack {
        Ok(_) => true,
        Err(PlatformError::Timeout(_)) => false,
        Err(_) => return Err(ack.unwrap_err().into()),
    };
    let status = ack.ok();
    records.extend(engine.handle(EngineInput::Control {
        subsystem,
        command: ControlCommand::Start,
        acknowledged,
        state: status.as_ref().map(|s| s.state),
        detail: status.and_then(|s| s.detail),
    })?);

    if acknowledged {
        let turn_id = turn.to_string();
        let media_path = media.to_string_lossy();
        controller.request_analysis(subsystem, &media_path, &turn_id, turn as u64 * TURN_SLOT_MS, target)?;
        let deadline = Instant::now() + cfg.turn_timeout;
        while engine.open_turn() == Some(turn) {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                break;
            }
            let Some(r) = controller.next_result(left)? else { break };
            if r.subsystem != subsystem || r.turn_id.as_deref() != Some(turn_id.as_str()) {
                log::debug!("ignoring stale {} result for turn {:?}", r.subsystem, r.turn_id);
                continue;
            }
            records.extend(engine.handle(EngineInput::Annotation {
                turn,
                subsystem,
                emotionml: r.emotionml,
                feedback: r.feedback,
            })?);
        }
    }
    if engine.open_turn() == Some(turn) {
        records.extend(engine.handle(EngineInput::TurnTimeout { turn, subsystem })?);
    }
    Ok(records)
}

/// Outcome of a scripted session.
#[derive(Debug, Clone)]
pub struct SessionRun {
    pub log: String,
    pub summary: LogRecord,
    pub feedback: Vec<TurnFeedback>,
}

pub fn engine_config(script: &SessionScript, cfg: &SessionConfig) -> EngineConfig {
    let mut ec = EngineConfig::new(script.seed, script.board_len);
    ec.units = cfg.vocabulary.labels().map(str::to_string).collect();
    ec.vocabulary = cfg.vocabulary.clone();
    ec
}

/// Runs every turn of `script` against services on the configured broker,
/// stopping early once the race has a winner. `on_turn` sees each turn's
/// feedback as soon as it is scored.
pub fn run_session(
    script: &SessionScript,
    cfg: &SessionConfig,
    mut on_turn: impl FnMut(&TurnFeedback),
) -> Result<SessionRun, SessionError> {
    let mut controller = connect(cfg)?;
    let mut engine = Engine::new(engine_config(script, cfg));
    for turn in &script.turns {
        if engine.is_finished() {
            break;
        }
        play_turn(&mut controller, &mut engine, cfg, &turn.target, turn.modality, &turn.media, &turn.media_label)?;
        if let Some(f) = engine.feedback().last() {
            on_turn(f);
        }
    }
    let summary = engine.finish();
    let _ = controller.disconnect();
    let log = engine.log_text();
    if let Some(p) = &cfg.log_path {
        std::fs::write(p, &log)?;
    }
    Ok(SessionRun { log, summary, feedback: engine.feedback().to_vec() })
}
