use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{debug, warn};
use thiserror::Error;

use super::frame::{decode_frame, encode_frame, Command, Frame, FrameError};
use super::{Destination, DestinationKind};

pub const DEFAULT_QUEUE_CAPACITY: usize = 10_000;

/// Largest body a client may send before the connection is rejected.
const MAX_BODY_BYTES: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    pub host: String,
    pub port: u16,
    /// Messages kept for a queue without consumers; the oldest is dropped
    /// when full.
    pub queue_capacity: usize,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        BrokerConfig { host: "127.0.0.1".into(), port: super::DEFAULT_PORT, queue_capacity: DEFAULT_QUEUE_CAPACITY }
    }
}

type ConnId = u64;

enum Outbound {
    Frame(Vec<u8>),
    Close,
}

struct Connection {
    tx: Sender<Outbound>,
    subscriptions: HashMap<String, Destination>,
}

#[derive(Clone, PartialEq, Eq)]
struct SubKey {
    conn: ConnId,
    id: String,
}

struct Pending {
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

#[derive(Default)]
struct QueueState {
    consumers: Vec<SubKey>,
    next: usize,
    buffered: VecDeque<Pending>,
    dropped: u64,
}

#[derive(Default)]
struct Registry {
    connections: HashMap<ConnId, Connection>,
    topics: HashMap<String, Vec<SubKey>>,
    queues: HashMap<String, QueueState>,
}

struct Shared {
    registry: Mutex<Registry>,
    stopping: AtomicBool,
    next_conn: AtomicU64,
    next_message: AtomicU64,
    queue_capacity: usize,
    threads: Mutex<Vec<JoinHandle<()>>>,
}

impl Shared {
    fn registry(&self) -> MutexGuard<'_, Registry> {
        self.registry.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// A running broker. Dropping it stops the broker.
pub struct Broker {
    shared: Arc<Shared>,
    addr: SocketAddr,
    acceptor: Option<JoinHandle<()>>,
}

impl Broker {
    /// Binds the listener and starts accepting connections.
    pub fn start(config: &BrokerConfig) -> Result<Broker, BrokerError> {
        let listener = TcpListener::bind((config.host.as_str(), config.port)).map_err(|e| {
            if e.kind() == io::ErrorKind::AddrInUse {
                BrokerError::PortInUse(config.port)
            } else {
                BrokerError::Io(e)
            }
        })?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            registry: Mutex::new(Registry::default()),
            stopping: AtomicBool::new(false),
            next_conn: AtomicU64::new(1),
            next_message: AtomicU64::new(1),
            queue_capacity: config.queue_capacity.max(1),
            threads: Mutex::new(Vec::new()),
        });
        let acceptor = {
            let shared = Arc::clone(&shared);
            thread::Builder::new().name("stomp-accept".into()).spawn(move || accept_loop(listener, shared))?
        };
        debug!("broker listening on {addr}");
        Ok(Broker { shared, addr, acceptor: Some(acceptor) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn connection_count(&self) -> usize {
        self.shared.registry().connections.len()
    }

    /// Messages waiting in a queue that has no consumer.
    pub fn buffered(&self, queue: &str) -> usize {
        self.shared.registry().queues.get(queue).map_or(0, |q| q.buffered.len())
    }

    /// Publishes from inside the broker process. Returns the number of
    /// MESSAGE frames dispatched (0 for a buffered queue message).
    pub fn publish(&self, dest: &Destination, body: &[u8], headers: &[(String, String)]) -> usize {
        let mut reg = self.shared.registry();
        publish(&self.shared, &mut reg, dest, headers.to_vec(), body.to_vec())
    }

    /// Closes every connection and stops accepting. Returns how many
    /// connections were open.
    pub fn stop(mut self) -> usize {
        self.shutdown()
    }

    fn shutdown(&mut self) -> usize {
        if self.shared.stopping.swap(true, Ordering::SeqCst) {
            return 0;
        }
        if let Some(a) = self.acceptor.take() {
            let _ = a.join();
        }
        let open = {
            let reg = self.shared.registry();
            for conn in reg.connections.values() {
                let _ = conn.tx.send(Outbound::Close);
            }
            reg.connections.len()
        };
        let threads: Vec<_> = std::mem::take(&mut *self.shared.threads.lock().unwrap_or_else(|p| p.into_inner()));
        for t in threads {
            let _ = t.join();
        }
        open
    }
}

impl Drop for Broker {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    while !shared.stopping.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                debug!("connection from {peer}");
                if let Err(e) = spawn_connection(stream, &shared) {
                    warn!("failed to set up connection from {peer}: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(10));
            }
        }
    }
}

fn spawn_connection(stream: TcpStream, shared: &Arc<Shared>) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let id = shared.next_conn.fetch_add(1, Ordering::SeqCst);
    let (tx, rx) = mpsc::channel::<Outbound>();
    let mut write_half = stream.try_clone()?;
    let writer = thread::Builder::new().name(format!("stomp-w{id}")).spawn(move || {
        for out in rx {
            match out {
                Outbound::Frame(bytes) => {
                    if write_half.write_all(&bytes).is_err() {
                        break;
                    }
                }
                Outbound::Close => break,
            }
        }
        let _ = write_half.flush();
        let _ = write_half.shutdown(Shutdown::Both);
    })?;
    shared.registry().connections.insert(id, Connection { tx: tx.clone(), subscriptions: HashMap::new() });
    let reader = {
        let shared = Arc::clone(shared);
        thread::Builder::new().name(format!("stomp-r{id}")).spawn(move || {
            serve_connection(id, stream, tx, &shared);
            drop_connection(&shared, id);
        })?
    };
    let mut threads = shared.threads.lock().unwrap_or_else(|p| p.into_inner());
    threads.retain(|t| !t.is_finished());
    threads.push(writer);
    threads.push(reader);
    Ok(())
}

fn drop_connection(shared: &Shared, id: ConnId) {
    let mut reg = shared.registry();
    if let Some(conn) = reg.connections.remove(&id) {
        let _ = conn.tx.send(Outbound::Close);
        for (sub_id, dest) in conn.subscriptions {
            remove_subscriber(&mut reg, &dest, &SubKey { conn: id, id: sub_id });
        }
    }
}

fn send_frame(tx: &Sender<Outbound>, frame: &Frame) {
    match encode_frame(frame) {
        Ok(bytes) => {
            let _ = tx.send(Outbound::Frame(bytes));
        }
        Err(e) => warn!("dropping unencodable frame: {e}"),
    }
}

fn protocol_error(tx: &Sender<Outbound>, message: &str, receipt: Option<&str>) {
    let mut f = Frame::new(Command::Error).header("message", message);
    if let Some(r) = receipt {
        f = f.header("receipt-id", r);
    }
    send_frame(tx, &f.header("content-type", "text/plain").body(message.as_bytes().to_vec()));
    let _ = tx.send(Outbound::Close);
}

fn serve_connection(id: ConnId, mut stream: TcpStream, tx: Sender<Outbound>, shared: &Arc<Shared>) {
    let mut buf: Vec<u8> = Vec::with_capacity(4096);
    let mut chunk = [0u8; 8192];
    let mut connected = false;
    loop {
        loop {
            match decode_frame(&buf) {
                Ok((frame, used)) => {
                    buf.drain(..used);
                    match handle_frame(id, frame, &mut connected, &tx, shared) {
                        Flow::Continue => {}
                        Flow::Close => return,
                    }
                }
                Err(FrameError::Incomplete) => {
                    if buf.len() > MAX_BODY_BYTES + super::frame::MAX_HEADER_BYTES {
                        protocol_error(&tx, "frame too large", None);
                        return;
                    }
                    break;
                }
                Err(e) => {
                    protocol_error(&tx, &e.to_string(), None);
                    return;
                }
            }
        }
        match stream.read(&mut chunk) {
            Ok(0) | Err(_) => return,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
        }
    }
}

enum Flow {
    Continue,
    Close,
}

fn handle_frame(
    id: ConnId,
    frame: Frame,
    connected: &mut bool,
    tx: &Sender<Outbound>,
    shared: &Arc<Shared>,
) -> Flow {
    let receipt = frame.get("receipt").map(str::to_string);
    let fail = |msg: &str| {
        protocol_error(tx, msg, receipt.as_deref());
        Flow::Close
    };

    if !*connected {
        if frame.command != Command::Connect {
            return fail("expected CONNECT");
        }
        if let Some(versions) = frame.get("accept-version") {
            if !versions.split(',').any(|v| v.trim() == "1.2") {
                return fail("only STOMP 1.2 is supported");
            }
        }
        *connected = true;
        send_frame(
            tx,
            &Frame::new(Command::Connected)
                .header("version", "1.2")
                .header("server", concat!("affectplay/", env!("CARGO_PKG_VERSION")))
                .header("heart-beat", "0,0"),
        );
        return Flow::Continue;
    }

    match frame.command {
        Command::Send => {
            let Some(dest) = frame.get("destination").and_then(|d| d.parse::<Destination>().ok()) else {
                return fail("SEND requires a /topic/ or /queue/ destination");
            };
            if frame.get("transaction").is_some() {
                return fail("transactions are not supported");
            }
            let headers: Vec<(String, String)> = frame
                .headers
                .iter()
                .filter(|(k, _)| !matches!(k.as_str(), "destination" | "receipt" | "message-id" | "subscription"))
                .cloned()
                .collect();
            let mut reg = shared.registry();
            publish(shared, &mut reg, &dest, headers, frame.body);
        }
        Command::Subscribe => {
            let (Some(sub_id), Some(dest)) = (frame.get("id"), frame.get("destination")) else {
                return fail("SUBSCRIBE requires id and destination");
            };
            let Ok(dest) = dest.parse::<Destination>() else {
                return fail("SUBSCRIBE requires a /topic/ or /queue/ destination");
            };
            if frame.get("ack").is_some_and(|a| a != "auto") {
                return fail("only ack:auto is supported");
            }
            let mut reg = shared.registry();
            let Some(conn) = reg.connections.get_mut(&id) else { return Flow::Close };
            if conn.subscriptions.contains_key(sub_id) {
                drop(reg);
                return fail("duplicate subscription id");
            }
            conn.subscriptions.insert(sub_id.to_string(), dest.clone());
            let key = SubKey { conn: id, id: sub_id.to_string() };
            match dest.kind {
                DestinationKind::Topic => reg.topics.entry(dest.name.clone()).or_default().push(key),
                DestinationKind::Queue => {
                    reg.queues.entry(dest.name.clone()).or_default().consumers.push(key);
                    drain_queue(shared, &mut reg, &dest.name);
                }
            }
        }
        Command::Unsubscribe => {
            let Some(sub_id) = frame.get("id") else { return fail("UNSUBSCRIBE requires id") };
            let mut reg = shared.registry();
            let removed = reg.connections.get_mut(&id).and_then(|c| c.subscriptions.remove(sub_id));
            match removed {
                Some(dest) => remove_subscriber(&mut reg, &dest, &SubKey { conn: id, id: sub_id.to_string() }),
                None => {
                    drop(reg);
                    return fail("unknown subscription id");
                }
            }
        }
        Command::Disconnect => {
            if let Some(r) = &receipt {
                send_frame(tx, &Frame::new(Command::Receipt).header("receipt-id", r.as_str()));
            }
            let _ = tx.send(Outbound::Close);
            return Flow::Close;
        }
        Command::Connect => return fail("already connected"),
        Command::Connected | Command::Message | Command::Receipt | Command::Error => {
            return fail("server frame sent by client");
        }
    }

    if let Some(r) = &receipt {
        send_frame(tx, &Frame::new(Command::Receipt).header("receipt-id", r.as_str()));
    }
    Flow::Continue
}

fn remove_subscriber(reg: &mut Registry, dest: &Destination, key: &SubKey) {
    match dest.kind {
        DestinationKind::Topic => {
            if let Some(subs) = reg.topics.get_mut(&dest.name) {
                subs.retain(|s| s != key);
            }
        }
        DestinationKind::Queue => {
            if let Some(q) = reg.queues.get_mut(&dest.name) {
                if let Some(pos) = q.consumers.iter().position(|s| s == key) {
                    q.consumers.remove(pos);
                    if pos < q.next {
                        q.next -= 1;
                    }
                    if q.next >= q.consumers.len() {
                        q.next = 0;
                    }
                }
            }
        }
    }
}

fn deliver(shared: &Shared, reg: &Registry, dest: &Destination, key: &SubKey, headers: &[(String, String)], body: &[u8]) -> bool {
    let Some(conn) = reg.connections.get(&key.conn) else { return false };
    let message_id = shared.next_message.fetch_add(1, Ordering::SeqCst);
    let mut f = Frame::new(Command::Message)
        .header("destination", dest.to_string())
        .header("message-id", format!("m-{message_id}"))
        .header("subscription", key.id.as_str());
    f.headers.extend(headers.iter().cloned());
    f.body = body.to_vec();
    send_frame(&conn.tx, &f);
    true
}

fn publish(
    shared: &Shared,
    reg: &mut Registry,
    dest: &Destination,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
) -> usize {
    match dest.kind {
        DestinationKind::Topic => {
            let subs = reg.topics.get(&dest.name).cloned().unwrap_or_default();
            subs.iter().filter(|k| deliver(shared, reg, dest, k, &headers, &body)).count()
        }
        DestinationKind::Queue => {
            let cap = shared.queue_capacity;
            let q = reg.queues.entry(dest.name.clone()).or_default();
            q.buffered.push_back(Pending { headers, body });
            while q.buffered.len() > cap {
                q.buffered.pop_front();
                q.dropped += 1;
                warn!("queue {} full, dropped oldest message", dest.name);
            }
            drain_queue(shared, reg, &dest.name)
        }
    }
}

/// Hands buffered messages to consumers round-robin, oldest first.
fn drain_queue(shared: &Shared, reg: &mut Registry, name: &str) -> usize {
    let dest = Destination::queue(name);
    let mut delivered = 0;
    loop {
        let Some(q) = reg.queues.get_mut(name) else { return delivered };
        if q.consumers.is_empty() || q.buffered.is_empty() {
            return delivered;
        }
        let idx = q.next % q.consumers.len();
        q.next = (idx + 1) % q.consumers.len();
        let key = q.consumers[idx].clone();
        let msg = q.buffered.pop_front().expect("non-empty");
        if deliver(shared, reg, &dest, &key, &msg.headers, &msg.body) {
            delivered += 1;
        } else if let Some(q) = reg.queues.get_mut(name) {
            // consumer vanished between lookup and delivery; retry with the next one
            q.consumers.retain(|k| k != &key);
            q.next = 0;
            q.buffered.push_front(msg);
        }
    }
}
