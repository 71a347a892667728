//! The connection token: configuration, login (plain and XOAUTH2), the
//! protocol state machine, folder management, and capability listing.
//!
//! A `Session` is single-owner; run several sessions for parallelism.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;

use crate::error::{Error, Result, Secret};
use crate::protocol::{
    next_tag, read_full_response, read_logical_line, serialize_command, Arg, CommandTag,
    ServerResponse, Status, Untagged,
};
use crate::transport::{self, Transport, DEFAULT_TIMEOUT_MS};

/// Authentication material. Exactly one variant per config.
#[derive(Debug, Clone)]
pub enum Auth {
    Password(Secret),
    XOAuth2Bearer(Secret),
}

/// Connection parameters for one account session.
#[derive(Debug, Clone)]
pub struct ImapConfig {
    pub url: String,
    pub username: String,
    auth: Option<Auth>,
    pub timeout: Duration,
    pub use_uid: bool,
    pub verify_tls: bool,
}

impl ImapConfig {
    pub fn new(url: impl Into<String>, username: impl Into<String>) -> Self {
        ImapConfig {
            url: url.into(),
            username: username.into(),
            auth: None,
            timeout: Duration::from_millis(DEFAULT_TIMEOUT_MS),
            use_uid: true,
            verify_tls: true,
        }
    }

    pub fn password(mut self, secret: impl Into<String>) -> Self {
        self.auth = Some(Auth::Password(Secret::new(secret)));
        self
    }

    pub fn xoauth2_bearer(mut self, token: impl Into<String>) -> Self {
        self.auth = Some(Auth::XOAuth2Bearer(Secret::new(token)));
        self
    }

    pub fn timeout_ms(mut self, ms: u64) -> Self {
        self.timeout = Duration::from_millis(ms);
        self
    }

    pub fn use_uid(mut self, use_uid: bool) -> Self {
        self.use_uid = use_uid;
        self
    }

    pub fn verify_tls(mut self, verify: bool) -> Self {
        self.verify_tls = verify;
        self
    }
}

/// Protocol phase, advancing not-authenticated → authenticated → selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    NotAuthenticated,
    Authenticated,
    Selected,
    LoggedOut,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::NotAuthenticated => "NotAuthenticated",
            Phase::Authenticated => "Authenticated",
            Phase::Selected => "Selected",
            Phase::LoggedOut => "LoggedOut",
        }
    }
}

/// Result of selecting a folder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FolderSelection {
    pub message_count: u32,
    pub flags: Vec<String>,
}

/// A live IMAP session over one transport.
pub struct Session {
    pub(crate) transport: Box<dyn Transport>,
    pub(crate) tag_counter: u32,
    pub(crate) phase: Phase,
    pub(crate) selected_folder: Option<String>,
    pub(crate) message_count: Option<u32>,
    pub(crate) capabilities: Vec<String>,
    pub(crate) use_uid: bool,
    pub(crate) username: String,
}

impl Session {
    /// Connects over TLS, consumes the greeting, and authenticates.
    pub fn configure_imap(config: ImapConfig) -> Result<Session> {
        let endpoint = transport::parse_url(&config.url)?;
        let t = transport::tls::connect(&endpoint, config.timeout, config.verify_tls)?;
        Session::configure_with_transport(t, &config)
    }

    /// Same login sequence over an externally supplied transport (the
    /// mock server's pipe, typically).
    pub fn configure_with_transport(
        mut transport: Box<dyn Transport>,
        config: &ImapConfig,
    ) -> Result<Session> {
        transport.set_timeout(config.timeout);
        let mut session = Session {
            transport,
            tag_counter: 0,
            phase: Phase::NotAuthenticated,
            selected_folder: None,
            message_count: None,
            capabilities: Vec::new(),
            use_uid: config.use_uid,
            username: config.username.clone(),
        };

        // greeting
        let greeting = read_logical_line(&mut session.transport)?;
        let greeting_text = match crate::protocol::parse_response(&greeting)? {
            ServerResponse::Untagged(Untagged::StatusText(text)) => {
                if text.to_ascii_uppercase().starts_with("PREAUTH") {
                    session.phase = Phase::Authenticated;
                }
                text
            }
            // a BYE greeting is a connect failure
            ServerResponse::Untagged(Untagged::Bye(_)) => return Err(Error::Refused),
            other => {
                return Err(Error::MalformedResponse(format!(
                    "unexpected greeting: {other:?}"
                )))
            }
        };

        if session.phase == Phase::NotAuthenticated {
            session.authenticate(config)?;
            session.phase = Phase::Authenticated;
        }

        // capability cache: greeting response code when present, else ask
        if let Some(caps) = capabilities_in_brackets(&greeting_text) {
            session.capabilities = caps;
        } else {
            session.capabilities = session.query_capabilities()?;
        }
        Ok(session)
    }

    fn authenticate(&mut self, config: &ImapConfig) -> Result<()> {
        let auth = config
            .auth
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("no authentication configured".into()))?;
        match auth {
            Auth::Password(secret) => {
                let (_, status, text) = self.exec(
                    "LOGIN",
                    &[
                        Arg::Quoted(config.username.clone()),
                        Arg::Quoted(secret.expose().to_string()),
                    ],
                )?;
                match status {
                    Status::Ok => Ok(()),
                    _ => Err(Error::AuthFailed(text)),
                }
            }
            Auth::XOAuth2Bearer(token) => {
                let sasl = format!(
                    "user={}\x01auth=Bearer {}\x01\x01",
                    config.username,
                    token.expose()
                );
                let initial = BASE64.encode(sasl.as_bytes());
                let tag = self.next_tag()?;
                let cmd = serialize_command(
                    &tag,
                    "AUTHENTICATE",
                    &[Arg::Atom("XOAUTH2".into()), Arg::Atom(initial)],
                )?;
                self.transport.write_all(&cmd)?;
                loop {
                    let line = read_logical_line(&mut self.transport)?;
                    match crate::protocol::parse_response(&line)? {
                        // error challenge: reply with an empty line to
                        // collect the final NO
                        ServerResponse::Continuation(_) => {
                            self.transport.write_all(b"\r\n")?;
                        }
                        ServerResponse::Tagged { tag: seen, status, text } => {
                            if seen != tag.0 {
                                return Err(Error::ProtocolDesync { expected: tag.0, seen });
                            }
                            return match status {
                                Status::Ok => Ok(()),
                                _ => Err(Error::AuthFailed(text)),
                            };
                        }
                        ServerResponse::Untagged(_) => {}
                    }
                }
            }
        }
    }

    fn next_tag(&mut self) -> Result<CommandTag> {
        next_tag(&mut self.tag_counter)
    }

    /// Issues one command and reads through its tagged completion.
    pub(crate) fn exec(
        &mut self,
        verb: &str,
        args: &[Arg],
    ) -> Result<(Vec<ServerResponse>, Status, String)> {
        let tag = self.next_tag()?;
        let cmd = serialize_command(&tag, verb, args)?;
        self.transport.write_all(&cmd)?;
        let responses = read_full_response(&mut self.transport, &tag)?;
        let (status, text) = match responses.last() {
            Some(ServerResponse::Tagged { status, text, .. }) => (*status, text.clone()),
            _ => return Err(Error::MalformedResponse("missing tagged completion".into())),
        };
        Ok((responses, status, text))
    }

    pub(crate) fn require_phase(&self, min: Phase, op: &'static str) -> Result<()> {
        let ok = match min {
            Phase::NotAuthenticated => self.phase != Phase::LoggedOut,
            Phase::Authenticated => {
                matches!(self.phase, Phase::Authenticated | Phase::Selected)
            }
            Phase::Selected => self.phase == Phase::Selected,
            Phase::LoggedOut => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::StateError { phase: self.phase.name(), op })
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn selected_folder(&self) -> Option<&str> {
        self.selected_folder.as_deref()
    }

    pub fn message_count(&self) -> Option<u32> {
        self.message_count
    }

    pub fn username(&self) -> &str {
        &self.username
    }

    pub fn uses_uid(&self) -> bool {
        self.use_uid
    }

    pub fn has_capability(&self, cap: &str) -> bool {
        self.capabilities.iter().any(|c| c.eq_ignore_ascii_case(cap))
    }

    /// Selects a mail folder; search and fetch target it until the next
    /// selection.
    pub fn select_folder(&mut self, name: &str) -> Result<FolderSelection> {
        self.require_phase(Phase::Authenticated, "select_folder")?;
        let (responses, status, text) = self.exec("SELECT", &[Arg::mailbox(name)])?;
        match status {
            Status::Ok => {
                let mut count = 0;
                let mut flags = Vec::new();
                for r in &responses {
                    match r {
                        ServerResponse::Untagged(Untagged::Exists(n)) => count = *n,
                        ServerResponse::Untagged(Untagged::Flags(f)) => flags = f.clone(),
                        _ => {}
                    }
                }
                self.phase = Phase::Selected;
                self.selected_folder = Some(name.to_string());
                self.message_count = Some(count);
                Ok(FolderSelection { message_count: count, flags })
            }
            _ => Err(Error::NoSuchFolder(format!("{name}: {text}"))),
        }
    }

    /// Folder names from `LIST "" "*"`, server order preserved.
    pub fn list_folders(&mut self) -> Result<Vec<String>> {
        self.require_phase(Phase::Authenticated, "list_folders")?;
        let (responses, status, text) = self.exec(
            "LIST",
            &[Arg::Quoted(String::new()), Arg::Quoted("*".into())],
        )?;
        if status != Status::Ok {
            return Err(Error::FolderOpFailed(text));
        }
        Ok(responses
            .iter()
            .filter_map(|r| match r {
                ServerResponse::Untagged(Untagged::List { name }) => Some(name.clone()),
                _ => None,
            })
            .collect())
    }

    pub fn create_folder(&mut self, name: &str) -> Result<()> {
        self.require_phase(Phase::Authenticated, "create_folder")?;
        self.folder_op("CREATE", &[Arg::mailbox(name)])
    }

    pub fn delete_folder(&mut self, name: &str) -> Result<()> {
        self.require_phase(Phase::Authenticated, "delete_folder")?;
        self.folder_op("DELETE", &[Arg::mailbox(name)])
    }

    /// Renames a folder. When the currently selected folder is renamed,
    /// the session follows it to the new name.
    pub fn rename_folder(&mut self, name: &str, new_name: &str) -> Result<()> {
        self.require_phase(Phase::Authenticated, "rename_folder")?;
        self.folder_op("RENAME", &[Arg::mailbox(name), Arg::mailbox(new_name)])?;
        if self.selected_folder.as_deref() == Some(name) {
            self.selected_folder = Some(new_name.to_string());
        }
        Ok(())
    }

    fn folder_op(&mut self, verb: &str, args: &[Arg]) -> Result<()> {
        let (_, status, text) = self.exec(verb, args)?;
        match status {
            Status::Ok => Ok(()),
            _ => Err(Error::FolderOpFailed(text)),
        }
    }

    /// Capability tokens, uppercased, refreshing the session's cache.
    pub fn list_server_capabilities(&mut self) -> Result<Vec<String>> {
        self.require_phase(Phase::NotAuthenticated, "list_server_capabilities")?;
        let caps = self.query_capabilities()?;
        self.capabilities = caps.clone();
        Ok(caps)
    }

    fn query_capabilities(&mut self) -> Result<Vec<String>> {
        let (responses, status, text) = self.exec("CAPABILITY", &[])?;
        if status != Status::Ok {
            return Err(Error::MalformedResponse(format!("CAPABILITY failed: {text}")));
        }
        for r in &responses {
            if let ServerResponse::Untagged(Untagged::Capability(caps)) = r {
                return Ok(caps.clone());
            }
        }
        Ok(Vec::new())
    }

    /// Replaces the read timeout for all subsequent operations.
    pub fn reset_timeout(&mut self, timeout: Duration) -> Result<()> {
        if timeout.is_zero() {
            return Err(Error::InvalidTimeout);
        }
        self.transport.set_timeout(timeout);
        Ok(())
    }

    /// Best-effort LOGOUT; transport errors are swallowed. Idempotent.
    pub fn logout(&mut self) {
        if self.phase == Phase::LoggedOut {
            return;
        }
        if let Ok(tag) = next_tag(&mut self.tag_counter) {
            if let Ok(cmd) = serialize_command(&tag, "LOGOUT", &[]) {
                if self.transport.write_all(&cmd).is_ok() {
                    let _ = read_full_response(&mut self.transport, &tag);
                }
            }
        }
        self.transport.close();
        self.phase = Phase::LoggedOut;
        self.selected_folder = None;
        self.message_count = None;
    }
}

/// Extracts tokens from a `[CAPABILITY ...]` response code in greeting
/// text, if present.
fn capabilities_in_brackets(text: &str) -> Option<Vec<String>> {
    let start = text.find('[')?;
    let end = text[start..].find(']')? + start;
    let inner = &text[start + 1..end];
    let mut toks = inner.split_ascii_whitespace();
    if !toks.next()?.eq_ignore_ascii_case("CAPABILITY") {
        return None;
    }
    Some(toks.map(|t| t.to_ascii_uppercase()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_debug_never_leaks_secrets() {
        let cfg = ImapConfig::new("imaps://x", "u").password("hunter2");
        assert!(!format!("{cfg:?}").contains("hunter2"));
        let cfg = ImapConfig::new("imaps://x", "u").xoauth2_bearer("tok-123");
        assert!(!format!("{cfg:?}").contains("tok-123"));
    }

    #[test]
    fn capability_brackets() {
        assert_eq!(
            capabilities_in_brackets("[CAPABILITY IMAP4rev1 WITHIN] mock ready"),
            Some(vec!["IMAP4REV1".into(), "WITHIN".into()])
        );
        assert_eq!(capabilities_in_brackets("ready"), None);
        assert_eq!(capabilities_in_brackets("[ALERT] hi"), None);
    }
}
