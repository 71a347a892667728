//! Byte-level connection layer: an implicit-TLS socket for `imaps://`
//! endpoints and an in-memory duplex pipe used by the mock server.
//!
//! Both sides expose the same line/literal oriented read interface so the
//! rest of the client never cares which one it is talking to.

use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

pub mod tls;

pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

/// Parsed `imaps://` endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
    pub use_tls: bool,
}

/// Parses an `imaps://host[:port]` url. Anything else is rejected.
pub fn parse_url(url: &str) -> Result<Endpoint> {
    let (scheme, rest) = url
        .split_once("://")
        .ok_or_else(|| Error::MalformedUrl(format!("missing scheme in `{url}`")))?;
    if scheme != "imaps" {
        return Err(Error::UnsupportedScheme(scheme.to_string()));
    }
    // strip a trailing path, if any
    let authority = rest.split('/').next().unwrap_or("");
    let (host, port) = match authority.rsplit_once(':') {
        Some((h, p)) => {
            let port: u16 = p
                .parse()
                .ok()
                .filter(|&p| p >= 1)
                .ok_or_else(|| Error::MalformedUrl(format!("bad port `{p}`")))?;
            (h, port)
        }
        None => (authority, 993),
    };
    if host.is_empty() {
        return Err(Error::MalformedUrl("empty host".into()));
    }
    if host.chars().any(|c| c.is_whitespace()) {
        return Err(Error::MalformedUrl("whitespace in host".into()));
    }
    Ok(Endpoint {
        host: host.to_string(),
        port,
        use_tls: true,
    })
}

/// A single-owner, buffered connection. Reads never return a partial
/// CRLF-terminated line; fragmentation at the byte layer is invisible.
pub trait Transport: Send {
    /// Writes all bytes, in order.
    fn write_all(&mut self, bytes: &[u8]) -> Result<()>;

    /// Returns one line including its terminating CRLF, blocking up to the
    /// configured timeout.
    fn read_line(&mut self) -> Result<Vec<u8>>;

    /// Returns exactly `n` bytes.
    fn read_exact(&mut self, n: usize) -> Result<Vec<u8>>;

    /// Replaces the read timeout for subsequent operations.
    fn set_timeout(&mut self, timeout: Duration);

    /// Closes the connection. All later reads and writes fail with
    /// `ConnectionClosed`.
    fn close(&mut self);
}

impl Transport for Box<dyn Transport> {
    fn write_all(&mut self, bytes: &[u8]) -> Result<()> {
        (**self).write_all(bytes)
    }

    fn read_line(&mut self) -> Result<Vec<u8>> {
        (**self).read_line()
    }

    fn read_exact(&mut self, n: usize) -> Result<Vec<u8>> {
        (**self).read_exact(n)
    }

    fn set_timeout(&mut self, timeout: Duration) {
        (**self).set_timeout(timeout)
    }

    fn close(&mut self) {
        (**self).close()
    }
}

/// Raw byte source/sink a [`Buffered`] connection sits on.
pub trait Channel: Send {
    /// Blocks up to `timeout` for at least one byte; `Ok(chunk)` is never
    /// empty.
    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>>;
    fn send(&mut self, bytes: &[u8]) -> Result<()>;
    fn shutdown(&mut self);
}

/// Line-buffering wrapper implementing [`Transport`] over any [`Channel`].
pub struct Buffered<C: Channel> {
    chan: C,
    buf: Vec<u8>,
    timeout: Duration,
    closed: bool,
}

impl<C: Channel> Buffered<C> {
    pub(crate) fn new(chan: C, timeout: Duration) -> Self {
        Buffered {
            chan,
            buf: Vec::new(),
            timeout,
            closed: false,
        }
    }

    fn fill(&mut self, deadline: Instant) -> Result<()> {
        let remaining = deadline
            .checked_duration_since(Instant::now())
            .ok_or(Error::ReadTimeout)?;
        let chunk = self.chan.recv(remaining)?;
        self.buf.extend_from_slice(&chunk);
        Ok(())
    }

    fn check_open(&self) -> Result<()> {
        if self.closed {
            Err(Error::ConnectionClosed)
        } else {
            Ok(())
        }
    }
}

impl<C: Channel> Transport for Buffered<C> {
    fn write_all(&mut self, bytes: &[u8]) -> Result<()> {
        self.check_open()?;
        if bytes.is_empty() {
            return Ok(());
        }
        self.chan.send(bytes)
    }

    fn read_line(&mut self) -> Result<Vec<u8>> {
        self.check_open()?;
        let deadline = Instant::now() + self.timeout;
        loop {
            if let Some(pos) = self.buf.iter().position(|&b| b == b'\n') {
                let line: Vec<u8> = self.buf.drain(..=pos).collect();
                return Ok(line);
            }
            self.fill(deadline)?;
        }
    }

    fn read_exact(&mut self, n: usize) -> Result<Vec<u8>> {
        self.check_open()?;
        let deadline = Instant::now() + self.timeout;
        while self.buf.len() < n {
            self.fill(deadline)?;
        }
        Ok(self.buf.drain(..n).collect())
    }

    fn set_timeout(&mut self, timeout: Duration) {
        self.timeout = timeout;
    }

    fn close(&mut self) {
        self.closed = true;
        self.chan.shutdown();
    }
}

/// One half of an in-memory duplex pipe.
pub struct PipeChannel {
    tx: Option<Sender<Vec<u8>>>,
    rx: Option<Receiver<Vec<u8>>>,
}

impl Channel for PipeChannel {
    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>> {
        let rx = self.rx.as_ref().ok_or(Error::ConnectionClosed)?;
        match rx.recv_timeout(timeout) {
            Ok(chunk) if chunk.is_empty() => Err(Error::ConnectionClosed),
            Ok(chunk) => Ok(chunk),
            Err(RecvTimeoutError::Timeout) => Err(Error::ReadTimeout),
            Err(RecvTimeoutError::Disconnected) => Err(Error::ConnectionClosed),
        }
    }

    fn send(&mut self, bytes: &[u8]) -> Result<()> {
        let tx = self.tx.as_ref().ok_or(Error::ConnectionClosed)?;
        tx.send(bytes.to_vec()).map_err(|_| Error::ConnectionClosed)
    }

    fn shutdown(&mut self) {
        self.tx = None;
        self.rx = None;
    }
}

pub type PipeTransport = Buffered<PipeChannel>;

/// Creates a connected pair of in-memory transports. Bytes written to one
/// side become readable on the other; dropping or closing a side makes the
/// peer observe `ConnectionClosed` once its buffer drains.
pub fn pipe_pair(timeout: Duration) -> (PipeTransport, PipeTransport) {
    let (a_tx, b_rx) = mpsc::channel();
    let (b_tx, a_rx) = mpsc::channel();
    let a = Buffered::new(
        PipeChannel {
            tx: Some(a_tx),
            rx: Some(a_rx),
        },
        timeout,
    );
    let b = Buffered::new(
        PipeChannel {
            tx: Some(b_tx),
            rx: Some(b_rx),
        },
        timeout,
    );
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (PipeTransport, PipeTransport) {
        pipe_pair(Duration::from_millis(200))
    }

    #[test]
    fn parse_url_default_port() {
        let ep = parse_url("imaps://outlook.office365.com").unwrap();
        assert_eq!(
            ep,
            Endpoint {
                host: "outlook.office365.com".into(),
                port: 993,
                use_tls: true
            }
        );
    }

    #[test]
    fn parse_url_explicit_port() {
        let ep = parse_url("imaps://localhost:3993").unwrap();
        assert_eq!(ep.host, "localhost");
        assert_eq!(ep.port, 3993);
        assert!(ep.use_tls);
    }

    #[test]
    fn parse_url_rejects_other_schemes() {
        assert!(matches!(
            parse_url("http://example.com"),
            Err(Error::UnsupportedScheme(s)) if s == "http"
        ));
        assert!(matches!(
            parse_url("imap://example.com"),
            Err(Error::UnsupportedScheme(_))
        ));
    }

    #[test]
    fn parse_url_rejects_empty_host_and_bad_port() {
        assert!(matches!(parse_url("imaps://"), Err(Error::MalformedUrl(_))));
        assert!(matches!(
            parse_url("imaps://h:0"),
            Err(Error::MalformedUrl(_))
        ));
        assert!(matches!(parse_url("nourl"), Err(Error::MalformedUrl(_))));
    }

    #[test]
    fn read_line_splits_buffered_lines() {
        let (mut client, mut server) = pair();
        server.write_all(b"* OK IMAP\r\na1 OK\r\n").unwrap();
        assert_eq!(client.read_line().unwrap(), b"* OK IMAP\r\n");
        assert_eq!(client.read_line().unwrap(), b"a1 OK\r\n");
    }

    #[test]
    fn read_line_joins_fragments() {
        let (mut client, mut server) = pair();
        server.write_all(b"* OK IM").unwrap();
        server.write_all(b"AP ready\r\n").unwrap();
        assert_eq!(client.read_line().unwrap(), b"* OK IMAP ready\r\n");
    }

    #[test]
    fn read_line_times_out() {
        let (mut client, _server) = pair();
        let start = Instant::now();
        assert!(matches!(client.read_line(), Err(Error::ReadTimeout)));
        let elapsed = start.elapsed();
        assert!(elapsed >= Duration::from_millis(200));
        assert!(elapsed < Duration::from_millis(700));
    }

    #[test]
    fn read_exact_zero_and_exact() {
        let (mut client, mut server) = pair();
        assert_eq!(client.read_exact(0).unwrap(), b"");
        server.write_all(b"0123456789").unwrap();
        assert_eq!(client.read_exact(10).unwrap(), b"0123456789");
    }

    #[test]
    fn read_exact_truncated_by_close() {
        let (mut client, mut server) = pair();
        server.write_all(b"01234").unwrap();
        server.close();
        assert!(matches!(client.read_exact(10), Err(Error::ConnectionClosed)));
    }

    #[test]
    fn write_after_close_fails() {
        let (mut client, _server) = pair();
        client.close();
        assert!(matches!(
            client.write_all(b"a1 NOOP\r\n"),
            Err(Error::ConnectionClosed)
        ));
        assert!(matches!(client.read_line(), Err(Error::ConnectionClosed)));
    }

    #[test]
    fn empty_write_is_noop() {
        let (mut client, mut server) = pair();
        client.write_all(b"").unwrap();
        client.write_all(b"x\r\n").unwrap();
        assert_eq!(server.read_line().unwrap(), b"x\r\n");
    }

    #[test]
    fn stream_reassembly_is_lossless() {
        // concatenating read_line/read_exact output reproduces the stream
        let (mut client, mut server) = pair();
        let stream = b"* OK hi\r\n{5}\r\nhelloA1 OK done\r\n".to_vec();
        for chunk in stream.chunks(3) {
            server.write_all(chunk).unwrap();
        }
        let mut got = Vec::new();
        got.extend(client.read_line().unwrap());
        got.extend(client.read_line().unwrap());
        got.extend(client.read_exact(5).unwrap());
        got.extend(client.read_line().unwrap());
        assert_eq!(got, stream);
    }
}
