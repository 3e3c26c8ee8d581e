use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use affectplay::platform::Subsystem;
use affectplay::session::{
    content_report, run_bridge, run_broker, run_service, run_session, validate_content_file, BridgeOptions, LocalStack,
    SessionConfig, SessionError, SessionScript,
};

#[derive(Parser)]
#[command(name = "affectplay", version, about = "Emotion-expression training platform")]
struct Cli {
    /// Key:value configuration file (defaults to $ASC_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the message broker until interrupted.
    Broker {
        #[arg(long)]
        port: Option<u16>,
    },
    /// Run one analyzer service.
    Service {
        #[arg(long)]
        subsystem: Subsystem,
    },
    /// Play a scripted session and print its log.
    Session {
        #[arg(long)]
        script: PathBuf,
        /// Overrides the script's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Start a broker and the three services for the duration of the run.
        #[arg(long)]
        spawn: bool,
        /// Write the log here instead of standard output.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Report chance-corrected scores and eligibility for survey results.
    ValidateContent { csv: PathBuf },
    /// Serve the UI WebSocket bridge.
    Bridge {
        #[arg(long)]
        ws_port: u16,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        board_len: Option<u32>,
        /// Directory that relative attempt paths resolve against.
        #[arg(long)]
        media_dir: Option<PathBuf>,
        /// UI assets to serve over HTTP.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        http_port: Option<u16>,
        #[arg(long)]
        spawn: bool,
    },
}

fn stop_flag() -> Result<Arc<AtomicBool>, SessionError> {
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    ctrlc::set_handler(move || s.store(true, Ordering::SeqCst))
        .map_err(|e| SessionError::Process(format!("signal handler: {e}")))?;
    Ok(stop)
}

fn run(cli: Cli) -> Result<(), SessionError> {
    let mut cfg = SessionConfig::from_process(cli.config.as_deref())?;
    match cli.command {
        Cmd::Broker { port } => {
            if let Some(p) = port {
                cfg.broker_port = p;
            }
            let stop = stop_flag()?;
            run_broker(&cfg, &stop)?;
        }
        Cmd::Service { subsystem } => {
            let stop = stop_flag()?;
            run_service(subsystem, &cfg, &stop)?;
        }
        Cmd::Session { script, seed, spawn, log } => {
            let mut script = SessionScript::load(&script, &cfg.vocabulary)?;
            if let Some(s) = seed {
                script.seed = s;
            }
            if log.is_some() {
                cfg.log_path = log;
            }
            let stack = if spawn { Some(LocalStack::launch(std::env::current_exe()?, &cfg, cli.config.as_deref())?) } else { None };
            let run_cfg = stack.as_ref().map_or(cfg.clone(), |s| s.config.clone());
            let outcome = run_session(&script, &run_cfg, |f| {
                log::info!("turn {}: {} via {} matched={} coins={}", f.turn, f.target, f.modality, f.matched, f.coins)
            });
            if let Some(stack) = stack {
                stack.shutdown()?;
            }
            let outcome = outcome?;
            if cfg.log_path.is_none() {
                print!("{}", outcome.log);
            }
        }
        Cmd::ValidateContent { csv } => {
            print!("{}", content_report(&validate_content_file(&csv)?));
        }
        Cmd::Bridge { ws_port, seed, board_len, media_dir, static_dir, http_port, spawn } => {
            let stop = stop_flag()?;
            let listener = TcpListener::bind(("127.0.0.1", ws_port))?;
            let stack = if spawn { Some(LocalStack::launch(std::env::current_exe()?, &cfg, cli.config.as_deref())?) } else { None };
            let run_cfg = stack.as_ref().map_or(cfg.clone(), |s| s.config.clone());
            let opts = BridgeOptions { seed, board_len, media_dir, static_dir, http_port };
            let outcome = run_bridge(&run_cfg, opts, listener, &stop);
            if let Some(stack) = stack {
                stack.shutdown()?;
            }
            outcome?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
