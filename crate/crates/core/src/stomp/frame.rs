//! STOMP 1.2 frame grammar.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("incomplete frame, need more bytes")]
    Incomplete,
    #[error("bad escape sequence in header: {0}")]
    BadEscape(String),
    #[error("unknown command {0:?}")]
    UnknownCommand(String),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Connect,
    Connected,
    Send,
    Subscribe,
    Unsubscribe,
    Message,
    Receipt,
    Error,
    Disconnect,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Connect,
        Command::Connected,
        Command::Send,
        Command::Subscribe,
        Command::Unsubscribe,
        Command::Message,
        Command::Receipt,
        Command::Error,
        Command::Disconnect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Connect => "CONNECT",
            Command::Connected => "CONNECTED",
            Command::Send => "SEND",
            Command::Subscribe => "SUBSCRIBE",
            Command::Unsubscribe => "UNSUBSCRIBE",
            Command::Message => "MESSAGE",
            Command::Receipt => "RECEIPT",
            Command::Error => "ERROR",
            Command::Disconnect => "DISCONNECT",
        }
    }

    /// CONNECT and CONNECTED headers are sent verbatim, without escaping.
    fn escapes_headers(self) -> bool {
        !matches!(self, Command::Connect | Command::Connected)
    }

    fn requires_empty_body(self) -> bool {
        matches!(self, Command::Connect | Command::Subscribe | Command::Unsubscribe | Command::Disconnect)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = FrameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "STOMP" => Ok(Command::Connect),
            _ => Command::ALL
                .into_iter()
                .find(|c| c.as_str() == s)
                .ok_or_else(|| FrameError::UnknownCommand(s.chars().take(64).collect())),
        }
    }
}

/// Command, ordered headers and body. `content-length` is framing metadata:
/// it is produced by [`encode_frame`] and consumed by [`decode_frame`], never
/// stored in `headers`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub command: Command,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl Frame {
    pub fn new(command: Command) -> Self {
        Frame { command, headers: Vec::new(), body: Vec::new() }
    }

    pub fn header(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((key.into(), value.into()));
        self
    }

    pub fn body(mut self, body: impl Into<Vec<u8>>) -> Self {
        self.body = body.into();
        self
    }

    /// First value for `key`; repeated keys after the first are shadowed.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn body_text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if self.command.requires_empty_body() && !self.body.is_empty() {
            return Err(FrameError::InvalidFrame(format!("{} must not carry a body", self.command)));
        }
        for (k, v) in &self.headers {
            if k.is_empty() {
                return Err(FrameError::InvalidFrame("empty header key".into()));
            }
            if !self.command.escapes_headers() {
                let bad = |s: &str| s.contains(['\n', '\r']);
                if bad(k) || bad(v) || k.contains(':') {
                    return Err(FrameError::InvalidFrame(format!(
                        "{} header {k:?} cannot be represented without escaping",
                        self.command
                    )));
                }
            }
        }
        Ok(())
    }
}

fn escape_into(out: &mut Vec<u8>, s: &str) {
    for b in s.bytes() {
        match b {
            b'\\' => out.extend_from_slice(b"\\\\"),
            b'\n' => out.extend_from_slice(b"\\n"),
            b'\r' => out.extend_from_slice(b"\\r"),
            b':' => out.extend_from_slice(b"\\c"),
            _ => out.push(b),
        }
    }
}

fn unescape(raw: &[u8]) -> Result<String, FrameError> {
    let mut out = Vec::with_capacity(raw.len());
    let mut it = raw.iter();
    while let Some(&b) = it.next() {
        if b != b'\\' {
            out.push(b);
            continue;
        }
        match it.next() {
            Some(b'\\') => out.push(b'\\'),
            Some(b'n') => out.push(b'\n'),
            Some(b'r') => out.push(b'\r'),
            Some(b'c') => out.push(b':'),
            Some(&other) => return Err(FrameError::BadEscape(format!("\\{}", other as char))),
            None => return Err(FrameError::BadEscape("trailing backslash".into())),
        }
    }
    String::from_utf8(out).map_err(|_| FrameError::Malformed("header is not UTF-8".into()))
}

/// Encodes a frame: command line, header lines, blank line, body, NUL.
pub fn encode_frame(f: &Frame) -> Result<Vec<u8>, FrameError> {
    f.validate()?;
    let mut out = Vec::with_capacity(64 + f.body.len());
    out.extend_from_slice(f.command.as_str().as_bytes());
    out.push(b'\n');
    let escapes = f.command.escapes_headers();
    for (k, v) in f.headers.iter().filter(|(k, _)| k != "content-length") {
        if escapes {
            escape_into(&mut out, k);
            out.push(b':');
            escape_into(&mut out, v);
        } else {
            out.extend_from_slice(k.as_bytes());
            out.push(b':');
            out.extend_from_slice(v.as_bytes());
        }
        out.push(b'\n');
    }
    if !f.body.is_empty() {
        out.extend_from_slice(format!("content-length:{}\n", f.body.len()).as_bytes());
    }
    out.push(b'\n');
    out.extend_from_slice(&f.body);
    out.push(0);
    Ok(out)
}

fn find_line(buf: &[u8], from: usize) -> Option<(usize, usize)> {
    // returns (line_end_exclusive_without_cr, next_line_start)
    let nl = buf[from..].iter().position(|&b| b == b'\n')? + from;
    let end = if nl > from && buf[nl - 1] == b'\r' { nl - 1 } else { nl };
    Some((end, nl + 1))
}

/// Upper bound on the header section, guarding against unbounded buffering.
pub const MAX_HEADER_BYTES: usize = 64 * 1024;

/// Decodes one frame from the front of `buf`, returning it and the number of
/// bytes consumed. Heart-beat EOLs before the command are skipped.
pub fn decode_frame(buf: &[u8]) -> Result<(Frame, usize), FrameError> {
    let mut pos = 0;
    loop {
        match buf.get(pos) {
            Some(b'\n') => pos += 1,
            Some(b'\r') if buf.get(pos + 1) == Some(&b'\n') => pos += 2,
            Some(b'\r') if pos + 1 == buf.len() => return Err(FrameError::Incomplete),
            Some(_) => break,
            None => return Err(FrameError::Incomplete),
        }
    }

    let Some((cmd_end, mut cursor)) = find_line(buf, pos) else {
        let pending = &buf[pos..];
        // Reject garbage early when no known command can still match.
        let prefix_ok = Command::ALL
            .iter()
            .map(|c| c.as_str())
            .chain(["STOMP"])
            .any(|c| c.as_bytes().starts_with(pending) || pending.starts_with(c.as_bytes()));
        if !prefix_ok || pending.len() > 16 {
            return Err(FrameError::UnknownCommand(String::from_utf8_lossy(&pending[..pending.len().min(64)]).into()));
        }
        return Err(FrameError::Incomplete);
    };
    let cmd_text = std::str::from_utf8(&buf[pos..cmd_end])
        .map_err(|_| FrameError::UnknownCommand(String::from_utf8_lossy(&buf[pos..cmd_end]).into()))?;
    let command: Command = cmd_text.parse()?;

    let mut headers = Vec::new();
    let mut content_length: Option<usize> = None;
    loop {
        let Some((end, next)) = find_line(buf, cursor) else {
            if buf.len() - pos > MAX_HEADER_BYTES {
                return Err(FrameError::Malformed("header section too large".into()));
            }
            return Err(FrameError::Incomplete);
        };
        let line = &buf[cursor..end];
        cursor = next;
        if line.is_empty() {
            break;
        }
        let colon = line
            .iter()
            .position(|&b| b == b':')
            .ok_or_else(|| FrameError::Malformed("header line without ':'".into()))?;
        let (k, v) = if command.escapes_headers() {
            (unescape(&line[..colon])?, unescape(&line[colon + 1..])?)
        } else {
            let s = |b: &[u8]| {
                String::from_utf8(b.to_vec()).map_err(|_| FrameError::Malformed("header is not UTF-8".into()))
            };
            (s(&line[..colon])?, s(&line[colon + 1..])?)
        };
        if k.is_empty() {
            return Err(FrameError::Malformed("empty header key".into()));
        }
        if k == "content-length" {
            if content_length.is_none() {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| FrameError::Malformed(format!("bad content-length {v:?}")))?;
                content_length = Some(n);
            }
            continue;
        }
        headers.push((k, v));
    }

    let body_start = cursor;
    let (body, consumed) = match content_length {
        Some(n) => {
            let end = body_start.checked_add(n).ok_or_else(|| FrameError::Malformed("content-length overflow".into()))?;
            if buf.len() < end + 1 {
                return Err(FrameError::Incomplete);
            }
            if buf[end] != 0 {
                return Err(FrameError::Malformed("frame body not terminated by NUL".into()));
            }
            (buf[body_start..end].to_vec(), end + 1)
        }
        None => match buf[body_start..].iter().position(|&b| b == 0) {
            Some(i) => (buf[body_start..body_start + i].to_vec(), body_start + i + 1),
            None => return Err(FrameError::Incomplete),
        },
    };

    Ok((Frame { command, headers, body }, consumed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn send_example_bytes() {
        let f = Frame::new(Command::Send).header("destination", "/topic/asc").body("x");
        let bytes = encode_frame(&f).unwrap();
        assert_eq!(bytes, b"SEND\ndestination:/topic/asc\ncontent-length:1\n\nx\0");
        let (back, used) = decode_frame(&bytes).unwrap();
        assert_eq!(back, f);
        assert_eq!(used, bytes.len());
    }

    #[test]
    fn escapes_colon() {
        let f = Frame::new(Command::Send).header("k", "a:b");
        let bytes = encode_frame(&f).unwrap();
        assert!(bytes.windows(5).any(|w| w == b"a\\cb\n"));
    }

    #[test]
    fn connect_headers_are_verbatim() {
        let f = Frame::new(Command::Connect).header("host", "a\\b");
        let bytes = encode_frame(&f).unwrap();
        assert!(bytes.starts_with(b"CONNECT\nhost:a\\b\n"));
        assert_eq!(decode_frame(&bytes).unwrap().0, f);
        let bad = Frame::new(Command::Connected).header("x", "two\nlines");
        assert!(matches!(encode_frame(&bad), Err(FrameError::InvalidFrame(_))));
    }

    #[test]
    fn truncated_is_incomplete() {
        assert_eq!(decode_frame(b"SEND\ndestination:/q\n\nabc"), Err(FrameError::Incomplete));
        assert_eq!(decode_frame(b"SEN"), Err(FrameError::Incomplete));
        assert_eq!(decode_frame(b""), Err(FrameError::Incomplete));
        assert_eq!(decode_frame(b"SEND\ncontent-length:5\n\nab"), Err(FrameError::Incomplete));
    }

    #[test]
    fn errors() {
        assert!(matches!(decode_frame(b"HELLO\n\n\0"), Err(FrameError::UnknownCommand(_))));
        assert!(matches!(decode_frame(b"garbage without newline"), Err(FrameError::UnknownCommand(_))));
        assert!(matches!(decode_frame(b"SEND\nk:a\\tb\n\n\0"), Err(FrameError::BadEscape(_))));
        assert!(matches!(decode_frame(b"SEND\nnocolon\n\n\0"), Err(FrameError::Malformed(_))));
        assert!(matches!(decode_frame(b"SEND\ncontent-length:1\n\nab\0"), Err(FrameError::Malformed(_))));
    }

    #[test]
    fn heartbeats_and_crlf() {
        let (f, used) = decode_frame(b"\n\r\n\nRECEIPT\r\nreceipt-id:r1\r\n\r\n\0rest").unwrap();
        assert_eq!(f, Frame::new(Command::Receipt).header("receipt-id", "r1"));
        assert_eq!(used, 31);
    }

    #[test]
    fn repeated_header_first_wins() {
        let (f, _) = decode_frame(b"MESSAGE\nfoo:1\nfoo:2\n\n\0").unwrap();
        assert_eq!(f.get("foo"), Some("1"));
        assert_eq!(f.headers.len(), 2);
    }

    #[test]
    fn body_forbidden_for_subscribe() {
        let f = Frame::new(Command::Subscribe).body("x");
        assert!(matches!(encode_frame(&f), Err(FrameError::InvalidFrame(_))));
        let f = Frame::new(Command::Send).header("", "v");
        assert!(matches!(encode_frame(&f), Err(FrameError::InvalidFrame(_))));
    }
}
