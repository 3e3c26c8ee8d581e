use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::frame::{decode_frame, encode_frame, Command, Frame, FrameError};
use super::Destination;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("broker reported an error: {0}")]
    Broker(String),
    #[error("timed out waiting for {0}")]
    Timeout(&'static str),
    #[error("connection closed")]
    Closed,
}

/// Blocking STOMP client. One owner drives it; a background thread only
/// reads and decodes incoming frames.
pub struct Client {
    stream: TcpStream,
    incoming: Receiver<Result<Frame, FrameError>>,
    stash: VecDeque<Frame>,
    next_receipt: u64,
    reader: Option<JoinHandle<()>>,
    closed: bool,
}

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
const RECEIPT_TIMEOUT: Duration = Duration::from_secs(5);

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Client, ClientError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let host = stream.peer_addr().map(|a| a.ip().to_string()).unwrap_or_else(|_| "localhost".into());
        let mut read_half = stream.try_clone()?;
        let (tx, rx) = mpsc::channel();
        let reader = thread::Builder::new().name("stomp-client-read".into()).spawn(move || {
            let mut buf = Vec::new();
            let mut chunk = [0u8; 8192];
            loop {
                loop {
                    match decode_frame(&buf) {
                        Ok((f, used)) => {
                            buf.drain(..used);
                            if tx.send(Ok(f)).is_err() {
                                return;
                            }
                        }
                        Err(FrameError::Incomplete) => break,
                        Err(e) => {
                            let _ = tx.send(Err(e));
                            return;
                        }
                    }
                }
                match read_half.read(&mut chunk) {
                    Ok(0) | Err(_) => return,
                    Ok(n) => buf.extend_from_slice(&chunk[..n]),
                }
            }
        })?;
        let mut client = Client { stream, incoming: rx, stash: VecDeque::new(), next_receipt: 1, reader: Some(reader), closed: false };
        client.write(
            &Frame::new(Command::Connect)
                .header("accept-version", "1.2")
                .header("host", host)
                .header("heart-beat", "0,0"),
        )?;
        match client.next_frame(Instant::now() + HANDSHAKE_TIMEOUT)? {
            Some(f) if f.command == Command::Connected => Ok(client),
            Some(f) if f.command == Command::Error => Err(ClientError::Broker(error_message(&f))),
            Some(_) => Err(ClientError::Broker("unexpected frame during handshake".into())),
            None => Err(ClientError::Timeout("CONNECTED")),
        }
    }

    /// Writes a raw frame.
    pub fn write(&mut self, frame: &Frame) -> Result<(), ClientError> {
        if self.closed {
            return Err(ClientError::Closed);
        }
        let bytes = encode_frame(frame)?;
        self.stream.write_all(&bytes)?;
        Ok(())
    }

    fn next_frame(&mut self, deadline: Instant) -> Result<Option<Frame>, ClientError> {
        let wait = deadline.saturating_duration_since(Instant::now());
        match self.incoming.recv_timeout(wait) {
            Ok(Ok(f)) => Ok(Some(f)),
            Ok(Err(e)) => Err(e.into()),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(ClientError::Closed),
        }
    }

    /// Writes `frame` with a fresh `receipt` header and waits for the
    /// matching RECEIPT. Frames arriving meanwhile are kept for [`recv`](Self::recv).
    pub fn write_with_receipt(&mut self, frame: Frame) -> Result<(), ClientError> {
        let receipt = format!("rcpt-{}", self.next_receipt);
        self.next_receipt += 1;
        self.write(&frame.header("receipt", receipt.as_str()))?;
        let deadline = Instant::now() + RECEIPT_TIMEOUT;
        loop {
            match self.next_frame(deadline)? {
                Some(f) if f.command == Command::Receipt && f.get("receipt-id") == Some(receipt.as_str()) => {
                    return Ok(())
                }
                Some(f) if f.command == Command::Error => return Err(ClientError::Broker(error_message(&f))),
                Some(f) => self.stash.push_back(f),
                None => return Err(ClientError::Timeout("RECEIPT")),
            }
        }
    }

    /// Subscribes and waits until the broker has registered the subscription.
    pub fn subscribe(&mut self, dest: &Destination, id: &str) -> Result<(), ClientError> {
        self.write_with_receipt(
            Frame::new(Command::Subscribe).header("id", id).header("destination", dest.to_string()).header("ack", "auto"),
        )
    }

    pub fn unsubscribe(&mut self, id: &str) -> Result<(), ClientError> {
        self.write_with_receipt(Frame::new(Command::Unsubscribe).header("id", id))
    }

    /// Fire-and-forget SEND.
    pub fn send(&mut self, dest: &Destination, body: &[u8], headers: &[(&str, &str)]) -> Result<(), ClientError> {
        self.write(&send_frame(dest, body, headers))
    }

    /// SEND that returns only after the broker has processed it.
    pub fn send_confirmed(&mut self, dest: &Destination, body: &[u8], headers: &[(&str, &str)]) -> Result<(), ClientError> {
        self.write_with_receipt(send_frame(dest, body, headers))
    }

    /// Next MESSAGE (or ERROR) frame, waiting at most `timeout`.
    pub fn recv(&mut self, timeout: Duration) -> Result<Option<Frame>, ClientError> {
        if let Some(f) = self.stash.pop_front() {
            return Ok(Some(f));
        }
        self.next_frame(Instant::now() + timeout)
    }

    /// Sends DISCONNECT, waits for its receipt and closes the socket.
    pub fn disconnect(mut self) -> Result<(), ClientError> {
        let result = self.write_with_receipt(Frame::new(Command::Disconnect));
        self.close();
        result
    }

    fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            let _ = self.stream.shutdown(Shutdown::Both);
            if let Some(r) = self.reader.take() {
                let _ = r.join();
            }
        }
    }
}

impl Drop for Client {
    fn drop(&mut self) {
        self.close();
    }
}

fn send_frame(dest: &Destination, body: &[u8], headers: &[(&str, &str)]) -> Frame {
    let mut f = Frame::new(Command::Send).header("destination", dest.to_string());
    for (k, v) in headers {
        f = f.header(*k, *v);
    }
    f.body(body.to_vec())
}

fn error_message(f: &Frame) -> String {
    f.get("message").map(str::to_string).unwrap_or_else(|| f.body_text())
}
