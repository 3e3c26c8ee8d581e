#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;

use affectplay::fixtures::{write_demo_data, DemoData};
use affectplay::session::{LocalStack, SessionConfig};

pub const EXE: &str = env!("CARGO_BIN_EXE_affectplay");

pub fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// Demo tree plus a configuration on free ports.
pub fn demo(dir: &Path, seed: u64) -> (DemoData, SessionConfig) {
    let demo = write_demo_data(dir, seed).unwrap();
    let mut cfg = SessionConfig::load(Some(&demo.config), Vec::new()).unwrap();
    cfg.broker_port = 0;
    cfg.media_ports = [free_port(), free_port(), free_port()];
    (demo, cfg)
}

pub fn launch(cfg: &SessionConfig) -> LocalStack {
    LocalStack::launch(EXE, cfg, None).unwrap()
}

/// Minimal HTTP/1.0 GET: status code and body.
pub fn http_get(port: u16, path: &str) -> (u16, String, Vec<u8>) {
    let mut s = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(s, "GET {path} HTTP/1.0\r\nHost: localhost\r\n\r\n").unwrap();
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).unwrap();
    let split = raw.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
    let head = String::from_utf8_lossy(&raw[..split]).to_string();
    let status = head.split_whitespace().nth(1).unwrap().parse().unwrap();
    let content_type = head
        .lines()
        .find_map(|l| l.split_once(':').filter(|(k, _)| k.eq_ignore_ascii_case("content-type")).map(|(_, v)| v.trim().to_string()))
        .unwrap_or_default();
    (status, content_type, raw[split + 4..].to_vec())
}
