//! Runs the whole platform in one process: a broker, the three analyzer
//! services on threads and the scripted six-turn session over demo data.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use affectplay::fixtures::write_demo_data;
use affectplay::platform::Subsystem;
use affectplay::session::runner::{connect, wait_ready};
use affectplay::session::{run_service, run_session, SessionConfig, SessionScript};
use affectplay::stomp::{Broker, BrokerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let dir = std::env::temp_dir().join(format!("affectplay-desk-{}", std::process::id()));
    let demo = write_demo_data(&dir, 1)?;
    let mut cfg = SessionConfig::load(Some(&demo.config), Vec::new())?;
    cfg.media_ports = [0, 0, 0];

    let broker = Broker::start(&BrokerConfig { port: 0, ..Default::default() })?;
    cfg.broker_port = broker.local_addr().port();
    let stop = Arc::new(AtomicBool::new(false));
    let services: Vec<_> = Subsystem::ALL
        .into_iter()
        .map(|sub| {
            let (cfg, stop) = (cfg.clone(), stop.clone());
            std::thread::spawn(move || run_service(sub, &cfg, &stop))
        })
        .collect();
    wait_ready(&mut connect(&cfg)?, &Subsystem::ALL, Duration::from_secs(30))?;

    let script = SessionScript::load(&demo.script, &cfg.vocabulary)?;
    let run = run_session(&script, &cfg, |f| {
        println!(
            "turn {}: {:<9} via {:<5} -> {:<9} matched={} coins={}",
            f.turn,
            f.target,
            f.modality,
            f.recognized_label.as_deref().unwrap_or("-"),
            f.matched,
            f.coins
        )
    })?;
    println!("{}", run.log.lines().last().unwrap_or_default());

    stop.store(true, Ordering::SeqCst);
    for s in services {
        s.join().expect("service thread")?;
    }
    broker.stop();
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
