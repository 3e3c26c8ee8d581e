//! `GET /media/latest`: the bytes a service analyzed most recently.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};

use tiny_http::{Header, Response, Server};

use super::SessionError;

pub const LATEST_PATH: &str = "/media/latest";

#[derive(Debug, Clone, PartialEq)]
struct Latest {
    bytes: Vec<u8>,
    content_type: &'static str,
}

pub struct MediaServer {
    server: Arc<Server>,
    latest: Arc<Mutex<Option<Latest>>>,
    worker: Option<JoinHandle<()>>,
    addr: SocketAddr,
}

impl MediaServer {
    /// Binds `host:port` (`0` picks a free port) and serves in a background
    /// thread.
    pub fn start(host: &str, port: u16) -> Result<MediaServer, SessionError> {
        let server = Server::http((host, port)).map_err(|e| SessionError::Media(format!("{host}:{port}: {e}")))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| SessionError::Media("media server is not bound to an IP socket".into()))?;
        let server = Arc::new(server);
        let latest: Arc<Mutex<Option<Latest>>> = Arc::new(Mutex::new(None));
        let worker = {
            let (server, latest) = (server.clone(), latest.clone());
            thread::spawn(move || {
                for request in server.incoming_requests() {
                    let current = latest.lock().unwrap_or_else(|e| e.into_inner()).clone();
                    let found = (request.method() == &tiny_http::Method::Get && request.url() == LATEST_PATH)
                        .then_some(current)
                        .flatten();
                    let result = match found {
                        Some(m) => {
                            let header = Header::from_bytes("Content-Type", m.content_type).expect("static header");
                            request.respond(Response::from_data(m.bytes).with_header(header))
                        }
                        None => request.respond(Response::from_string("not found").with_status_code(404)),
                    };
                    if let Err(e) = result {
                        log::debug!("media response failed: {e}");
                    }
                }
            })
        };
        Ok(MediaServer { server, latest, worker: Some(worker), addr })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn set_latest(&self, bytes: Vec<u8>, content_type: &'static str) {
        *self.latest.lock().unwrap_or_else(|e| e.into_inner()) = Some(Latest { bytes, content_type });
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for MediaServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}
