//! Implicit-TLS TCP transport for `imaps://` endpoints.

use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use rustls::client::danger::{
    HandshakeSignatureValid, ServerCertVerified, ServerCertVerifier,
};
use rustls::pki_types::{CertificateDer, ServerName, UnixTime};
use rustls::{ClientConfig, ClientConnection, RootCertStore, StreamOwned};

use super::{Buffered, Channel, Endpoint, Transport};
use crate::error::{Error, Result};

/// Certificate verifier that accepts anything. Only reachable through an
/// explicit opt-out flag (for talking to a local mock or self-signed dev
/// server).
#[derive(Debug)]
struct AcceptAnyCert(Arc<rustls::crypto::CryptoProvider>);

impl ServerCertVerifier for AcceptAnyCert {
    fn verify_server_cert(
        &self,
        _end_entity: &CertificateDer<'_>,
        _intermediates: &[CertificateDer<'_>],
        _server_name: &ServerName<'_>,
        _ocsp_response: &[u8],
        _now: UnixTime,
    ) -> std::result::Result<ServerCertVerified, rustls::Error> {
        Ok(ServerCertVerified::assertion())
    }

    fn verify_tls12_signature(
        &self,
        _message: &[u8],
        _cert: &CertificateDer<'_>,
        _dss: &rustls::DigitallySignedStruct,
    ) -> std::result::Result<HandshakeSignatureValid, rustls::Error> {
        Ok(HandshakeSignatureValid::assertion())
    }

    fn verify_tls13_signature(
        &self,
        _message: &[u8],
        _cert: &CertificateDer<'_>,
        _dss: &rustls::DigitallySignedStruct,
    ) -> std::result::Result<HandshakeSignatureValid, rustls::Error> {
        Ok(HandshakeSignatureValid::assertion())
    }

    fn supported_verify_schemes(&self) -> Vec<rustls::SignatureScheme> {
        self.0.signature_verification_algorithms.supported_schemes()
    }
}

struct TlsChannel {
    stream: StreamOwned<ClientConnection, TcpStream>,
    open: bool,
}

impl Channel for TlsChannel {
    fn recv(&mut self, timeout: Duration) -> Result<Vec<u8>> {
        if !self.open {
            return Err(Error::ConnectionClosed);
        }
        // zero duration would mean "no timeout" to the socket API
        let timeout = timeout.max(Duration::from_millis(1));
        self.stream
            .sock
            .set_read_timeout(Some(timeout))
            .map_err(Error::Io)?;
        let mut buf = [0u8; 8192];
        match self.stream.read(&mut buf) {
            Ok(0) => Err(Error::ConnectionClosed),
            Ok(n) => Ok(buf[..n].to_vec()),
            Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {
                Err(Error::ReadTimeout)
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(Error::ConnectionClosed),
            Err(e) => Err(Error::Io(e)),
        }
    }

    fn send(&mut self, bytes: &[u8]) -> Result<()> {
        if !self.open {
            return Err(Error::ConnectionClosed);
        }
        self.stream.write_all(bytes).map_err(|e| match e.kind() {
            std::io::ErrorKind::BrokenPipe | std::io::ErrorKind::ConnectionReset => {
                Error::ConnectionClosed
            }
            _ => Error::Io(e),
        })?;
        self.stream.flush().map_err(Error::Io)
    }

    fn shutdown(&mut self) {
        if self.open {
            self.open = false;
            let _ = self.stream.conn.send_close_notify();
            let _ = self.stream.flush();
            let _ = self.stream.sock.shutdown(std::net::Shutdown::Both);
        }
    }
}

fn client_config(verify_tls: bool) -> ClientConfig {
    let provider = Arc::new(rustls::crypto::ring::default_provider());
    let builder = ClientConfig::builder_with_provider(provider.clone())
        .with_safe_default_protocol_versions()
        .expect("ring provider supports default protocol versions");
    if verify_tls {
        let mut roots = RootCertStore::empty();
        roots.extend(webpki_roots::TLS_SERVER_ROOTS.iter().cloned());
        builder.with_root_certificates(roots).with_no_client_auth()
    } else {
        builder
            .dangerous()
            .with_custom_certificate_verifier(Arc::new(AcceptAnyCert(provider)))
            .with_no_client_auth()
    }
}

/// Opens a TCP connection, completes the TLS handshake, and returns a
/// buffered transport. The server greeting is left unread.
pub fn connect(
    endpoint: &Endpoint,
    timeout: Duration,
    verify_tls: bool,
) -> Result<Box<dyn Transport>> {
    let addrs: Vec<_> = (endpoint.host.as_str(), endpoint.port)
        .to_socket_addrs()
        .map_err(|e| Error::MalformedUrl(format!("cannot resolve {}: {e}", endpoint.host)))?
        .collect();
    if addrs.is_empty() {
        return Err(Error::MalformedUrl(format!(
            "no addresses for {}",
            endpoint.host
        )));
    }
    let mut last_err = Error::Refused;
    let mut sock = None;
    for addr in addrs {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(s) => {
                sock = Some(s);
                break;
            }
            Err(e) if matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
                last_err = Error::ConnectTimeout;
            }
            Err(e) if e.kind() == std::io::ErrorKind::ConnectionRefused => {
                last_err = Error::Refused;
            }
            Err(e) => last_err = Error::Io(e),
        }
    }
    let sock = sock.ok_or(last_err)?;
    sock.set_nodelay(true).ok();
    sock.set_read_timeout(Some(timeout)).map_err(Error::Io)?;
    sock.set_write_timeout(Some(timeout)).map_err(Error::Io)?;

    let server_name = ServerName::try_from(endpoint.host.clone())
        .map_err(|_| Error::MalformedUrl(format!("invalid host name {}", endpoint.host)))?;
    let conn = ClientConnection::new(Arc::new(client_config(verify_tls)), server_name)
        .map_err(|e| Error::TlsFailure(e.to_string()))?;
    let mut stream = StreamOwned::new(conn, sock);
    while stream.conn.is_handshaking() {
        stream
            .conn
            .complete_io(&mut stream.sock)
            .map_err(|e| Error::TlsFailure(e.to_string()))?;
    }

    Ok(Box::new(Buffered::new(
        TlsChannel { stream, open: true },
        timeout,
    )))
}
