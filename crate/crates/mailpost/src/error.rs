use std::fmt;
use std::io;

/// Errors produced by any layer of the client.
///
/// Variants never carry credential material; server-provided text is
/// included verbatim where it helps diagnosis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // url / config
    #[error("unsupported url scheme `{0}` (only imaps:// is accepted)")]
    UnsupportedScheme(String),
    #[error("malformed url: {0}")]
    MalformedUrl(String),
    #[error("invalid timeout: must be greater than zero")]
    InvalidTimeout,

    // transport
    #[error("connection attempt timed out")]
    ConnectTimeout,
    #[error("TLS failure: {0}")]
    TlsFailure(String),
    #[error("connection refused")]
    Refused,
    #[error("connection closed by peer")]
    ConnectionClosed,
    #[error("read timed out")]
    ReadTimeout,

    // protocol
    #[error("command tag space exhausted; reconnect required")]
    TagSpaceExhausted,
    #[error("argument cannot be encoded: {0}")]
    UnencodableArgument(String),
    #[error("malformed server response: {0}")]
    MalformedResponse(String),
    #[error("malformed ENVELOPE structure: {0}")]
    MalformedEnvelope(String),
    #[error("malformed BODYSTRUCTURE: {0}")]
    MalformedBodyStructure(String),
    #[error("protocol desync: expected completion for tag {expected}, saw {seen}")]
    ProtocolDesync { expected: String, seen: String },

    // session
    #[error("authentication failed: {0}")]
    AuthFailed(String),
    #[error("no such folder: {0}")]
    NoSuchFolder(String),
    #[error("operation not permitted in state {phase}: {op}")]
    StateError { phase: &'static str, op: &'static str },
    #[error("folder operation failed: {0}")]
    FolderOpFailed(String),

    // search
    #[error("server lacks required capability {0}")]
    CapabilityMissing(&'static str),
    #[error("server refused search: {0}")]
    SearchRefused(String),
    #[error("invalid date range: since must precede before")]
    InvalidRange,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // fetch
    #[error("no such message: {0}")]
    NoSuchMessage(u32),
    #[error("unknown fetch attribute: {0}")]
    UnknownAttribute(String),
    #[error("message {0} has no attachments")]
    NoAttachments(u32),

    // mime
    #[error("invalid base64 input: {0}")]
    InvalidBase64(String),
    #[error("malformed MIME message: {0}")]
    MalformedMime(String),

    // analytics
    #[error("bad lexicon line {line}: {reason}")]
    BadLexiconLine { line: usize, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable short name used by tests and CLI exit-code mapping.
    pub fn kind(&self) -> &'static str {
        use Error::*;
        match self {
            UnsupportedScheme(_) => "UnsupportedScheme",
            MalformedUrl(_) => "MalformedUrl",
            InvalidTimeout => "InvalidTimeout",
            ConnectTimeout => "ConnectTimeout",
            TlsFailure(_) => "TlsFailure",
            Refused => "Refused",
            ConnectionClosed => "ConnectionClosed",
            ReadTimeout => "ReadTimeout",
            TagSpaceExhausted => "TagSpaceExhausted",
            UnencodableArgument(_) => "UnencodableArgument",
            MalformedResponse(_) => "MalformedResponse",
            MalformedEnvelope(_) => "MalformedEnvelope",
            MalformedBodyStructure(_) => "MalformedBodyStructure",
            ProtocolDesync { .. } => "ProtocolDesync",
            AuthFailed(_) => "AuthFailed",
            NoSuchFolder(_) => "NoSuchFolder",
            StateError { .. } => "StateError",
            FolderOpFailed(_) => "FolderOpFailed",
            CapabilityMissing(_) => "CapabilityMissing",
            SearchRefused(_) => "SearchRefused",
            InvalidRange => "InvalidRange",
            InvalidArgument(_) => "InvalidArgument",
            NoSuchMessage(_) => "NoSuchMessage",
            UnknownAttribute(_) => "UnknownAttribute",
            NoAttachments(_) => "NoAttachments",
            InvalidBase64(_) => "InvalidBase64",
            MalformedMime(_) => "MalformedMime",
            BadLexiconLine { .. } => "BadLexiconLine",
            Io(_) => "Io",
        }
    }
}

/// Redacted wrapper for secrets so neither Debug nor Display can leak them.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(pub(crate) String);

impl Secret {
    pub fn new(s: impl Into<String>) -> Self {
        Secret(s.into())
    }

    pub(crate) fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

impl fmt::Display for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("***")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secret_never_prints_its_contents() {
        let s = Secret::new("hunter2");
        assert!(!format!("{:?}", s).contains("hunter2"));
        assert!(!format!("{}", s).contains("hunter2"));
    }
}
