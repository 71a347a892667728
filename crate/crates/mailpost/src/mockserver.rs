//! In-process IMAP mock servers for tests: a scripted server that replays
//! canned exchanges, and a stateful server that evaluates SEARCH and FETCH
//! against fixture messages loaded from .eml files.
//!
//! Both run on an in-memory pipe; nothing touches the network.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::mime::{parse_mime, MimeEntity};
use crate::protocol::{read_logical_line, TransferEncoding};
use crate::search::ImapDate;
use crate::transport::{pipe_pair, PipeTransport, Transport};

const SERVER_TIMEOUT: Duration = Duration::from_secs(5);

/// One expected command and the scripted reply to it.
#[derive(Debug, Clone)]
pub struct ScriptStep {
    /// Verb the command must start with (after the tag), e.g. "UID SEARCH".
    pub expect_verb: String,
    /// Extra substring the command text must contain, if any.
    pub expect_contains: Option<String>,
    /// Untagged lines sent before completion, without CRLF. Embedded
    /// literals are written verbatim.
    pub untagged: Vec<String>,
    /// Tagged completion: "OK", "NO", or "BAD".
    pub status: String,
    pub text: String,
}

impl ScriptStep {
    pub fn ok(verb: &str, untagged: &[&str]) -> ScriptStep {
        ScriptStep {
            expect_verb: verb.to_string(),
            expect_contains: None,
            untagged: untagged.iter().map(|s| s.to_string()).collect(),
            status: "OK".into(),
            text: format!("{verb} completed"),
        }
    }

    pub fn no(verb: &str, text: &str) -> ScriptStep {
        ScriptStep {
            expect_verb: verb.to_string(),
            expect_contains: None,
            untagged: Vec::new(),
            status: "NO".into(),
            text: text.to_string(),
        }
    }

    pub fn contains(mut self, needle: &str) -> ScriptStep {
        self.expect_contains = Some(needle.to_string());
        self
    }
}

/// Handle to a running mock server. `connect` yields the client side of
/// the pipe exactly once.
pub struct MockEndpoint {
    client: Option<PipeTransport>,
    log: Arc<Mutex<Vec<String>>>,
    unexpected: Arc<Mutex<Vec<String>>>,
}

impl MockEndpoint {
    pub fn connect(&mut self) -> Box<dyn Transport> {
        Box::new(self.client.take().expect("mock endpoint already connected"))
    }

    /// Full decoded command lines in arrival order, tags included.
    pub fn command_log(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }

    /// Commands the script did not anticipate.
    pub fn unexpected(&self) -> Vec<String> {
        self.unexpected.lock().unwrap().clone()
    }
}

/// Starts a scripted server. `greeting` is sent verbatim (plus CRLF);
/// steps are matched strictly in order. LOGOUT is always handled.
pub fn start_scripted(greeting: &str, steps: Vec<ScriptStep>) -> MockEndpoint {
    let (client, mut server) = pipe_pair(SERVER_TIMEOUT);
    let log = Arc::new(Mutex::new(Vec::new()));
    let unexpected = Arc::new(Mutex::new(Vec::new()));
    let greeting = greeting.to_string();
    let (log2, unexpected2) = (Arc::clone(&log), Arc::clone(&unexpected));
    thread::spawn(move || {
        if server.write_all(format!("{greeting}\r\n").as_bytes()).is_err() {
            return;
        }
        let mut next = 0usize;
        loop {
            let line = match read_logical_line(&mut server) {
                Ok(l) => l,
                Err(_) => return,
            };
            let tokens = tokenize_command(&line);
            let Some((tag, rest)) = split_tag(&line) else {
                continue;
            };
            log2.lock().unwrap().push(format!("{tag} {rest}"));
            let rest_upper = rest.to_ascii_uppercase();
            if rest_upper.starts_with("LOGOUT") {
                let _ = server.write_all(b"* BYE mock signing off\r\n");
                let _ = server.write_all(format!("{tag} OK LOGOUT completed\r\n").as_bytes());
                return;
            }
            let step = steps.get(next);
            let matches = step.is_some_and(|s| {
                rest_upper.starts_with(&s.expect_verb.to_ascii_uppercase())
                    && s.expect_contains
                        .as_ref()
                        .is_none_or(|needle| rest.contains(needle.as_str()))
            });
            if !matches {
                unexpected2
                    .lock()
                    .unwrap()
                    .push(format!("{tag} {}", tokens.join(" ")));
                let _ = server
                    .write_all(format!("{tag} BAD unexpected command\r\n").as_bytes());
                continue;
            }
            let step = step.unwrap();
            next += 1;
            for u in &step.untagged {
                if server.write_all(format!("{u}\r\n").as_bytes()).is_err() {
                    return;
                }
            }
            let done = server
                .write_all(format!("{tag} {} {}\r\n", step.status, step.text).as_bytes());
            if done.is_err() {
                return;
            }
        }
    });
    MockEndpoint {
        client: Some(client),
        log,
        unexpected,
    }
}

/// One fixture message.
#[derive(Debug, Clone)]
pub struct FixtureMessage {
    pub uid: u32,
    pub flags: Vec<String>,
    /// INTERNALDATE wire form: `17-Nov-2020 09:30:00 +0000`.
    pub internal_date: String,
    pub raw: Vec<u8>,
}

/// Fixture account state shared by one or more mock sessions.
#[derive(Debug, Clone, Default)]
pub struct FixtureMailbox {
    /// Folder name to messages, UID order.
    pub folders: BTreeMap<String, Vec<FixtureMessage>>,
    /// When set, LOGIN must present exactly this password.
    pub expected_password: Option<String>,
    /// When set, XOAUTH2 initial responses must carry this bearer token.
    pub expected_bearer: Option<String>,
    /// Advertise the WITHIN extension and honor YOUNGER/OLDER.
    pub advertise_within: bool,
    /// Reverse the order of FETCH data responses.
    pub scramble_fetch_order: bool,
    /// "Now" for YOUNGER/OLDER, seconds since the Unix epoch.
    pub now_epoch: i64,
}

impl FixtureMailbox {
    pub fn capability_line(&self) -> String {
        if self.advertise_within {
            "IMAP4rev1 WITHIN".into()
        } else {
            "IMAP4rev1".into()
        }
    }
}

#[derive(serde::Deserialize)]
struct Manifest {
    #[serde(default)]
    expected_password: Option<String>,
    #[serde(default)]
    advertise_within: bool,
    #[serde(default)]
    now: Option<String>,
    folders: BTreeMap<String, Vec<ManifestMessage>>,
}

#[derive(serde::Deserialize)]
struct ManifestMessage {
    file: String,
    uid: u32,
    #[serde(default)]
    flags: Vec<String>,
    internal_date: String,
}

/// Loads a fixture mailbox from a directory holding `manifest.toml` and
/// the .eml files it references.
pub fn load_fixture_dir(dir: &Path) -> Result<FixtureMailbox> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.toml"))?;
    let manifest: Manifest = toml::from_str(&manifest_text)
        .map_err(|e| Error::InvalidArgument(format!("bad manifest: {e}")))?;
    let mut mailbox = FixtureMailbox {
        expected_password: manifest.expected_password,
        advertise_within: manifest.advertise_within,
        ..FixtureMailbox::default()
    };
    if let Some(now) = &manifest.now {
        mailbox.now_epoch = parse_internal_date_epoch(now)
            .ok_or_else(|| Error::InvalidArgument(format!("bad now timestamp `{now}`")))?;
    }
    for (folder, messages) in manifest.folders {
        let mut list = Vec::with_capacity(messages.len());
        for m in messages {
            let raw = std::fs::read(dir.join(&m.file))?;
            list.push(FixtureMessage {
                uid: m.uid,
                flags: m.flags,
                internal_date: m.internal_date,
                raw,
            });
        }
        list.sort_by_key(|m| m.uid);
        mailbox.folders.insert(folder, list);
    }
    Ok(mailbox)
}

/// Starts a stateful server over a private copy of the fixtures.
pub fn start_stateful(mailbox: FixtureMailbox) -> MockEndpoint {
    start_stateful_shared(Arc::new(Mutex::new(mailbox)))
}

/// Starts a stateful server over shared fixtures; several sessions can
/// point at the same account concurrently.
pub fn start_stateful_shared(state: Arc<Mutex<FixtureMailbox>>) -> MockEndpoint {
    let (client, mut server) = pipe_pair(SERVER_TIMEOUT);
    let log = Arc::new(Mutex::new(Vec::new()));
    let unexpected = Arc::new(Mutex::new(Vec::new()));
    let (log2, unexpected2) = (Arc::clone(&log), Arc::clone(&unexpected));
    thread::spawn(move || {
        let caps = state.lock().unwrap().capability_line();
        let greeting = format!("* OK [CAPABILITY {caps}] mock ready\r\n");
        if server.write_all(greeting.as_bytes()).is_err() {
            return;
        }
        let mut conn = StatefulConn {
            state,
            authed: false,
            selected: None,
            unexpected: unexpected2,
        };
        loop {
            let line = match read_logical_line(&mut server) {
                Ok(l) => l,
                Err(_) => return,
            };
            let Some((tag, rest)) = split_tag(&line) else {
                continue;
            };
            log2.lock().unwrap().push(format!("{tag} {rest}"));
            if conn.handle(&mut server, &tag, &rest, &line).is_err() {
                return;
            }
            if rest.to_ascii_uppercase().starts_with("LOGOUT") {
                return;
            }
        }
    });
    MockEndpoint {
        client: Some(client),
        log,
        unexpected,
    }
}

struct StatefulConn {
    state: Arc<Mutex<FixtureMailbox>>,
    authed: bool,
    selected: Option<String>,
    unexpected: Arc<Mutex<Vec<String>>>,
}

impl StatefulConn {
    fn handle(
        &mut self,
        server: &mut PipeTransport,
        tag: &str,
        rest: &str,
        raw_line: &[u8],
    ) -> Result<()> {
        let tokens = tokenize_command(raw_line);
        // tokens[0] is the tag
        let upper = rest.to_ascii_uppercase();
        let reply = |server: &mut PipeTransport, s: String| server.write_all(s.as_bytes());

        if upper.starts_with("LOGOUT") {
            reply(server, "* BYE mock signing off\r\n".into())?;
            return reply(server, format!("{tag} OK LOGOUT completed\r\n"));
        }
        if upper.starts_with("CAPABILITY") {
            let caps = self.state.lock().unwrap().capability_line();
            reply(server, format!("* CAPABILITY {caps}\r\n"))?;
            return reply(server, format!("{tag} OK CAPABILITY completed\r\n"));
        }
        if upper.starts_with("LOGIN") {
            let expected = self.state.lock().unwrap().expected_password.clone();
            let presented = tokens.get(3);
            let ok = match (&expected, presented) {
                (Some(want), Some(got)) => want == got,
                (Some(_), None) => false,
                (None, _) => true,
            };
            return if ok {
                self.authed = true;
                reply(server, format!("{tag} OK LOGIN completed\r\n"))
            } else {
                reply(server, format!("{tag} NO [AUTHENTICATIONFAILED] invalid credentials\r\n"))
            };
        }
        if upper.starts_with("AUTHENTICATE XOAUTH2") {
            let expected = self.state.lock().unwrap().expected_bearer.clone();
            let initial = tokens.get(3).cloned().unwrap_or_default();
            let decoded = crate::mime::decode_base64(&initial).unwrap_or_default();
            let decoded = String::from_utf8_lossy(&decoded).into_owned();
            let ok = match expected {
                Some(tok) => decoded.contains(&format!("auth=Bearer {tok}\u{1}")),
                None => decoded.contains("auth=Bearer "),
            };
            return if ok {
                self.authed = true;
                reply(server, format!("{tag} OK AUTHENTICATE completed\r\n"))
            } else {
                // error challenge, then the final NO after the empty reply
                reply(server, "+ eyJzdGF0dXMiOiI0MDEifQ==\r\n".into())?;
                let _ = read_logical_line(server);
                reply(server, format!("{tag} NO [AUTHENTICATIONFAILED] bad token\r\n"))
            };
        }
        if !self.authed {
            return reply(server, format!("{tag} BAD not authenticated\r\n"));
        }
        if upper.starts_with("LIST") {
            let names: Vec<String> =
                self.state.lock().unwrap().folders.keys().cloned().collect();
            for name in names {
                reply(
                    server,
                    format!("* LIST (\\HasNoChildren) \"/\" {}\r\n", render_astring(&name)),
                )?;
            }
            return reply(server, format!("{tag} OK LIST completed\r\n"));
        }
        if upper.starts_with("SELECT") {
            let name = tokens.get(2).cloned().unwrap_or_default();
            let state = self.state.lock().unwrap();
            return match state.folders.get(&name) {
                Some(msgs) => {
                    let n = msgs.len();
                    drop(state);
                    reply(server, format!("* {n} EXISTS\r\n"))?;
                    reply(server, "* 0 RECENT\r\n".into())?;
                    reply(
                        server,
                        "* FLAGS (\\Answered \\Flagged \\Deleted \\Seen \\Draft)\r\n".into(),
                    )?;
                    self.selected = Some(name);
                    reply(server, format!("{tag} OK [READ-WRITE] SELECT completed\r\n"))
                }
                None => {
                    drop(state);
                    reply(server, format!("{tag} NO [TRYCREATE] no such mailbox\r\n"))
                }
            };
        }
        if upper.starts_with("CREATE") {
            let name = tokens.get(2).cloned().unwrap_or_default();
            let mut state = self.state.lock().unwrap();
            if name.is_empty() || state.folders.contains_key(&name) {
                drop(state);
                return reply(server, format!("{tag} NO mailbox already exists\r\n"));
            }
            state.folders.insert(name, Vec::new());
            drop(state);
            return reply(server, format!("{tag} OK CREATE completed\r\n"));
        }
        if upper.starts_with("DELETE") {
            let name = tokens.get(2).cloned().unwrap_or_default();
            let mut state = self.state.lock().unwrap();
            return if state.folders.remove(&name).is_some() {
                drop(state);
                reply(server, format!("{tag} OK DELETE completed\r\n"))
            } else {
                drop(state);
                reply(server, format!("{tag} NO no such mailbox\r\n"))
            };
        }
        if upper.starts_with("RENAME") {
            let from = tokens.get(2).cloned().unwrap_or_default();
            let to = tokens.get(3).cloned().unwrap_or_default();
            let mut state = self.state.lock().unwrap();
            if to.is_empty() || state.folders.contains_key(&to) {
                drop(state);
                return reply(server, format!("{tag} NO target mailbox exists\r\n"));
            }
            return match state.folders.remove(&from) {
                Some(msgs) => {
                    state.folders.insert(to, msgs);
                    drop(state);
                    reply(server, format!("{tag} OK RENAME completed\r\n"))
                }
                None => {
                    drop(state);
                    reply(server, format!("{tag} NO no such mailbox\r\n"))
                }
            };
        }
        if upper.starts_with("UID SEARCH") || upper.starts_with("SEARCH") {
            let uid_mode = upper.starts_with("UID");
            let Some(folder) = self.selected.clone() else {
                return reply(server, format!("{tag} BAD no mailbox selected\r\n"));
            };
            let key_tokens: Vec<String> =
                tokens[if uid_mode { 3 } else { 2 }..].to_vec();
            let state = self.state.lock().unwrap();
            let within_ok = state.advertise_within;
            let msgs = state.folders.get(&folder).cloned().unwrap_or_default();
            let now = state.now_epoch;
            drop(state);
            if !within_ok
                && key_tokens
                    .iter()
                    .any(|t| t.eq_ignore_ascii_case("YOUNGER") || t.eq_ignore_ascii_case("OLDER"))
            {
                return reply(server, format!("{tag} NO [CANNOT] unknown search key\r\n"));
            }
            let mut cursor = 0usize;
            let mut hits: Vec<u32> = Vec::new();
            let mut parse_failed = false;
            for (idx, m) in msgs.iter().enumerate() {
                cursor = 0;
                match eval_keys(&key_tokens, &mut cursor, m, now) {
                    Some(true) => hits.push(if uid_mode { m.uid } else { idx as u32 + 1 }),
                    Some(false) => {}
                    None => {
                        parse_failed = true;
                        break;
                    }
                }
            }
            if parse_failed || cursor != key_tokens.len() {
                self.unexpected
                    .lock()
                    .unwrap()
                    .push(format!("{tag} {rest}"));
                return reply(server, format!("{tag} BAD could not parse search keys\r\n"));
            }
            let rendered: Vec<String> = hits.iter().map(|n| n.to_string()).collect();
            let line = if rendered.is_empty() {
                "* SEARCH\r\n".to_string()
            } else {
                format!("* SEARCH {}\r\n", rendered.join(" "))
            };
            reply(server, line)?;
            return reply(server, format!("{tag} OK SEARCH completed\r\n"));
        }
        if upper.starts_with("UID FETCH") || upper.starts_with("FETCH") {
            let uid_mode = upper.starts_with("UID");
            let Some(folder) = self.selected.clone() else {
                return reply(server, format!("{tag} BAD no mailbox selected\r\n"));
            };
            let base = if uid_mode { 3 } else { 2 };
            let Some(set) = tokens.get(base) else {
                return reply(server, format!("{tag} BAD missing sequence set\r\n"));
            };
            let items: Vec<String> = tokens[base + 1..]
                .iter()
                .filter(|t| *t != "(" && *t != ")")
                .cloned()
                .collect();
            let state = self.state.lock().unwrap();
            let msgs = state.folders.get(&folder).cloned().unwrap_or_default();
            let scramble = state.scramble_fetch_order;
            drop(state);
            let wanted = parse_sequence_set(set);
            let mut responses: Vec<Vec<u8>> = Vec::new();
            for (idx, m) in msgs.iter().enumerate() {
                let seq = idx as u32 + 1;
                let id = if uid_mode { m.uid } else { seq };
                if !wanted.contains(&id) {
                    continue;
                }
                match render_fetch_response(seq, m, &items, uid_mode) {
                    Some(r) => responses.push(r),
                    None => {
                        return reply(
                            server,
                            format!("{tag} BAD unsupported fetch item\r\n"),
                        )
                    }
                }
            }
            if scramble {
                responses.reverse();
            }
            for r in responses {
                server.write_all(&r)?;
            }
            return reply(server, format!("{tag} OK FETCH completed\r\n"));
        }
        if upper.starts_with("NOOP") {
            return reply(server, format!("{tag} OK NOOP completed\r\n"));
        }
        self.unexpected
            .lock()
            .unwrap()
            .push(format!("{tag} {rest}"));
        reply(server, format!("{tag} BAD unexpected command\r\n"))
    }
}

/// Splits one decoded command line into (tag, rest-as-text).
fn split_tag(line: &[u8]) -> Option<(String, String)> {
    let text = String::from_utf8_lossy(line);
    let text = text.trim_end_matches(['\r', '\n']);
    let (tag, rest) = text.split_once(' ')?;
    Some((tag.to_string(), rest.to_string()))
}

/// Tokenizes a client command line: atoms split on spaces, quoted strings
/// unescaped, `{N}` literals inlined, parens emitted as their own tokens.
/// Bracketed section specs (`BODY.PEEK[HEADER.FIELDS (FROM)]`) stay whole.
pub fn tokenize_command(line: &[u8]) -> Vec<String> {
    let mut toks = Vec::new();
    let mut i = 0usize;
    while i < line.len() {
        match line[i] {
            b' ' | b'\r' | b'\n' => i += 1,
            b'"' => {
                i += 1;
                let mut s = Vec::new();
                while i < line.len() && line[i] != b'"' {
                    if line[i] == b'\\' && i + 1 < line.len() {
                        i += 1;
                    }
                    s.push(line[i]);
                    i += 1;
                }
                i += 1; // closing quote
                toks.push(String::from_utf8_lossy(&s).into_owned());
            }
            b'(' | b')' => {
                toks.push((line[i] as char).to_string());
                i += 1;
            }
            b'{' => {
                // {N}\r\n<N raw bytes>
                let close = match line[i..].iter().position(|&b| b == b'}') {
                    Some(c) => i + c,
                    None => break,
                };
                let n: usize = std::str::from_utf8(&line[i + 1..close])
                    .ok()
                    .and_then(|d| d.parse().ok())
                    .unwrap_or(0);
                let mut start = close + 1;
                if line.get(start) == Some(&b'\r') {
                    start += 1;
                }
                if line.get(start) == Some(&b'\n') {
                    start += 1;
                }
                let end = (start + n).min(line.len());
                toks.push(String::from_utf8_lossy(&line[start..end]).into_owned());
                i = end;
            }
            _ => {
                let start = i;
                while i < line.len() {
                    match line[i] {
                        b' ' | b'\r' | b'\n' | b'(' | b')' => break,
                        b'[' => {
                            // keep the section spec whole
                            while i < line.len() && line[i] != b']' {
                                i += 1;
                            }
                            i += 1;
                        }
                        _ => i += 1,
                    }
                }
                toks.push(String::from_utf8_lossy(&line[start..i.min(line.len())]).into_owned());
            }
        }
    }
    toks
}

fn parse_sequence_set(set: &str) -> Vec<u32> {
    let mut out = Vec::new();
    for piece in set.split(',') {
        match piece.split_once(':') {
            Some((a, b)) => {
                if let (Ok(a), Ok(b)) = (a.parse::<u32>(), b.parse::<u32>()) {
                    for v in a.min(b)..=a.max(b) {
                        out.push(v);
                    }
                }
            }
            None => {
                if let Ok(v) = piece.parse::<u32>() {
                    out.push(v);
                }
            }
        }
    }
    out
}

// search key evaluation ---------------------------------------------------

/// Evaluates an AND-ed run of keys starting at `*i`. `None` means the
/// keys could not be parsed.
fn eval_keys(tokens: &[String], i: &mut usize, m: &FixtureMessage, now: i64) -> Option<bool> {
    let mut result = true;
    while *i < tokens.len() {
        result &= eval_one(tokens, i, m, now)?;
    }
    Some(result)
}

fn eval_one(tokens: &[String], i: &mut usize, m: &FixtureMessage, now: i64) -> Option<bool> {
    let key = tokens.get(*i)?.to_ascii_uppercase();
    *i += 1;
    let next = |i: &mut usize| -> Option<String> {
        let t = tokens.get(*i).cloned();
        *i += 1;
        t
    };
    let date_of = |m: &FixtureMessage| -> Option<ImapDate> {
        let d = m.internal_date.split_whitespace().next()?;
        ImapDate::parse(d).ok()
    };
    match key.as_str() {
        "(" => {
            // parenthesized key list: conjunction until the closing paren
            let mut result = true;
            loop {
                match tokens.get(*i) {
                    Some(t) if t == ")" => {
                        *i += 1;
                        return Some(result);
                    }
                    Some(_) => result &= eval_one(tokens, i, m, now)?,
                    None => return None,
                }
            }
        }
        "ALL" => Some(true),
        "SINCE" => {
            let d = ImapDate::parse(&next(i)?).ok()?;
            Some(date_of(m)? >= d)
        }
        "BEFORE" => {
            let d = ImapDate::parse(&next(i)?).ok()?;
            Some(date_of(m)? < d)
        }
        "ON" => {
            let d = ImapDate::parse(&next(i)?).ok()?;
            Some(date_of(m)? == d)
        }
        "FROM" | "TO" | "CC" | "BCC" | "SUBJECT" => {
            let needle = next(i)?;
            Some(header_contains(&m.raw, &key, &needle))
        }
        "HEADER" => {
            let name = next(i)?;
            let needle = next(i)?;
            Some(header_contains(&m.raw, &name, &needle))
        }
        "BODY" => {
            let needle = next(i)?;
            Some(contains_ci(body_of(&m.raw), needle.as_bytes()))
        }
        "TEXT" => {
            let needle = next(i)?;
            Some(contains_ci(&m.raw, needle.as_bytes()))
        }
        "SEEN" => Some(has_flag(m, "\\Seen")),
        "ANSWERED" => Some(has_flag(m, "\\Answered")),
        "FLAGGED" => Some(has_flag(m, "\\Flagged")),
        "DELETED" => Some(has_flag(m, "\\Deleted")),
        "DRAFT" => Some(has_flag(m, "\\Draft")),
        "RECENT" => Some(has_flag(m, "\\Recent")),
        "LARGER" => {
            let n: u64 = next(i)?.parse().ok()?;
            Some(m.raw.len() as u64 > n)
        }
        "SMALLER" => {
            let n: u64 = next(i)?.parse().ok()?;
            Some((m.raw.len() as u64) < n)
        }
        "YOUNGER" => {
            let n: i64 = next(i)?.parse().ok()?;
            let t = parse_internal_date_epoch(&m.internal_date)?;
            Some(now - t <= n)
        }
        "OLDER" => {
            let n: i64 = next(i)?.parse().ok()?;
            let t = parse_internal_date_epoch(&m.internal_date)?;
            Some(now - t >= n)
        }
        "NOT" => Some(!eval_one(tokens, i, m, now)?),
        "OR" => {
            let a = eval_one(tokens, i, m, now)?;
            let b = eval_one(tokens, i, m, now)?;
            Some(a || b)
        }
        _ => None,
    }
}

fn has_flag(m: &FixtureMessage, flag: &str) -> bool {
    m.flags.iter().any(|f| f.eq_ignore_ascii_case(flag))
}

fn header_contains(raw: &[u8], name: &str, needle: &str) -> bool {
    let entity = parse_mime(raw);
    match entity.header(name) {
        Some(v) => contains_ci(v.as_bytes(), needle.as_bytes()),
        None => false,
    }
}

fn body_of(raw: &[u8]) -> &[u8] {
    match find_header_end(raw) {
        Some(end) => &raw[end..],
        None => raw,
    }
}

fn contains_ci(haystack: &[u8], needle: &[u8]) -> bool {
    if needle.is_empty() {
        return true;
    }
    haystack
        .windows(needle.len())
        .any(|w| w.eq_ignore_ascii_case(needle))
}

/// Parses `DD-Mon-YYYY HH:MM:SS +ZZZZ` to Unix seconds.
pub fn parse_internal_date_epoch(s: &str) -> Option<i64> {
    let mut parts = s.split_whitespace();
    let date = ImapDate::parse(parts.next()?).ok()?;
    let time = parts.next().unwrap_or("00:00:00");
    let zone = parts.next().unwrap_or("+0000");
    let mut hms = time.split(':');
    let h: i64 = hms.next()?.parse().ok()?;
    let min: i64 = hms.next()?.parse().ok()?;
    let sec: i64 = hms.next().unwrap_or("0").parse().ok()?;
    let days = days_from_civil(date.year() as i64, date.month() as i64, date.day() as i64);
    let (sign, digits) = match zone.as_bytes().first()? {
        b'-' => (-1, &zone[1..]),
        b'+' => (1, &zone[1..]),
        _ => (1, zone),
    };
    if digits.len() != 4 {
        return None;
    }
    let zh: i64 = digits[..2].parse().ok()?;
    let zm: i64 = digits[2..].parse().ok()?;
    let offset = sign * (zh * 3600 + zm * 60);
    Some(days * 86400 + h * 3600 + min * 60 + sec - offset)
}

/// Days since 1970-01-01 for a proleptic Gregorian date.
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let doy = (153 * (m + if m > 2 { -3 } else { 9 }) + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe - 719468
}

// fetch response rendering ------------------------------------------------

fn render_fetch_response(
    seq: u32,
    m: &FixtureMessage,
    items: &[String],
    uid_mode: bool,
) -> Option<Vec<u8>> {
    let mut pieces: Vec<Vec<u8>> = Vec::new();
    let mut uid_included = false;
    for item in items {
        let upper = item.to_ascii_uppercase();
        if upper == "UID" {
            uid_included = true;
            pieces.push(format!("UID {}", m.uid).into_bytes());
        } else if upper == "FLAGS" {
            pieces.push(format!("FLAGS ({})", m.flags.join(" ")).into_bytes());
        } else if upper == "INTERNALDATE" {
            pieces.push(format!("INTERNALDATE \"{}\"", m.internal_date).into_bytes());
        } else if upper == "RFC822.SIZE" {
            pieces.push(format!("RFC822.SIZE {}", m.raw.len()).into_bytes());
        } else if upper == "ENVELOPE" {
            let entity = parse_mime(&m.raw);
            pieces.push(format!("ENVELOPE {}", render_envelope(&entity)).into_bytes());
        } else if upper == "BODYSTRUCTURE" {
            let entity = parse_mime(&m.raw);
            pieces.push(
                format!("BODYSTRUCTURE {}", render_bodystructure(&entity)).into_bytes(),
            );
        } else if let Some(section) = peek_section(&upper) {
            let bytes = section_bytes(&m.raw, section)?;
            let mut piece = format!("BODY[{section}] {{{}}}\r\n", bytes.len()).into_bytes();
            piece.extend_from_slice(&bytes);
            pieces.push(piece);
        } else {
            return None;
        }
    }
    if uid_mode && !uid_included {
        pieces.push(format!("UID {}", m.uid).into_bytes());
    }
    let mut out = format!("* {seq} FETCH (").into_bytes();
    for (i, p) in pieces.iter().enumerate() {
        if i > 0 {
            out.push(b' ');
        }
        out.extend_from_slice(p);
    }
    out.extend_from_slice(b")\r\n");
    Some(out)
}

/// `BODY.PEEK[sec]` or `BODY[sec]` to the inner section spec.
fn peek_section(item: &str) -> Option<&str> {
    let rest = item
        .strip_prefix("BODY.PEEK")
        .or_else(|| item.strip_prefix("BODY"))?;
    rest.strip_prefix('[')?.strip_suffix(']')
}

fn find_header_end(raw: &[u8]) -> Option<usize> {
    raw.windows(4)
        .position(|w| w == b"\r\n\r\n")
        .map(|p| p + 4)
        .or_else(|| raw.windows(2).position(|w| w == b"\n\n").map(|p| p + 2))
}

/// Extracts one BODY section's bytes from a raw message.
fn section_bytes(raw: &[u8], section: &str) -> Option<Vec<u8>> {
    if section.is_empty() {
        return Some(raw.to_vec());
    }
    let upper = section.to_ascii_uppercase();
    if upper == "HEADER" {
        let end = find_header_end(raw).unwrap_or(raw.len());
        return Some(raw[..end].to_vec());
    }
    if upper == "TEXT" {
        return Some(body_of(raw).to_vec());
    }
    if let Some(rest) = upper.strip_prefix("HEADER.FIELDS") {
        let names: Vec<String> = rest
            .trim()
            .trim_start_matches('(')
            .trim_end_matches(')')
            .split_ascii_whitespace()
            .map(|s| s.to_ascii_uppercase())
            .collect();
        return Some(header_fields(raw, &names));
    }
    // dotted part number
    if !section.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
        return None;
    }
    let entity = parse_mime(raw);
    let mut node = &entity;
    for piece in section.split('.') {
        let k: usize = piece.parse().ok()?;
        if node.children.is_empty() {
            // part 1 of a non-multipart message is the message body
            if k == 1 {
                continue;
            }
            return None;
        }
        node = node.children.get(k - 1)?;
    }
    if node.children.is_empty() {
        Some(node.body.clone())
    } else {
        None
    }
}

/// Returns the raw header lines (continuations included) whose field name
/// is in `names`, plus the terminating blank line.
fn header_fields(raw: &[u8], names: &[String]) -> Vec<u8> {
    let end = find_header_end(raw).unwrap_or(raw.len());
    let mut out = Vec::new();
    let mut keep = false;
    for line in split_keepends(&raw[..end]) {
        let is_continuation = line.first().is_some_and(|&b| b == b' ' || b == b'\t');
        if !is_continuation {
            keep = match line.iter().position(|&b| b == b':') {
                Some(colon) => {
                    let name = String::from_utf8_lossy(&line[..colon])
                        .trim()
                        .to_ascii_uppercase();
                    names.contains(&name)
                }
                None => false,
            };
        }
        if keep {
            out.extend_from_slice(line);
        }
    }
    out.extend_from_slice(b"\r\n");
    out
}

fn split_keepends(bytes: &[u8]) -> Vec<&[u8]> {
    let mut out = Vec::new();
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if b == b'\n' {
            out.push(&bytes[start..=i]);
            start = i + 1;
        }
    }
    if start < bytes.len() {
        out.push(&bytes[start..]);
    }
    out
}

// wire-form rendering -----------------------------------------------------

fn render_qstr(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn render_astring(s: &str) -> String {
    if !s.is_empty()
        && s.bytes().all(|b| {
            (0x21..0x7f).contains(&b)
                && !matches!(b, b'(' | b')' | b'{' | b'%' | b'*' | b'"' | b'\\' | b']')
        })
    {
        s.to_string()
    } else {
        render_qstr(s)
    }
}

fn render_opt(s: Option<&str>) -> String {
    match s {
        Some(v) => render_qstr(v),
        None => "NIL".into(),
    }
}

/// `Name <local@host>, other@host` to an ENVELOPE address list.
fn render_address_list(value: Option<&str>) -> String {
    let Some(value) = value else {
        return "NIL".into();
    };
    let mut rendered = Vec::new();
    for piece in value.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let (name, addr) = match (piece.find('<'), piece.find('>')) {
            (Some(lt), Some(gt)) if lt < gt => {
                let name = piece[..lt].trim().trim_matches('"').trim();
                (
                    if name.is_empty() { None } else { Some(name) },
                    &piece[lt + 1..gt],
                )
            }
            _ => (None, piece),
        };
        let Some((local, host)) = addr.rsplit_once('@') else {
            continue;
        };
        rendered.push(format!(
            "({} NIL {} {})",
            render_opt(name),
            render_qstr(local),
            render_qstr(host)
        ));
    }
    if rendered.is_empty() {
        "NIL".into()
    } else {
        format!("({})", rendered.join(""))
    }
}

/// Renders an ENVELOPE from a parsed message: date, subject, from,
/// sender, reply-to, to, cc, bcc, in-reply-to, message-id.
pub fn render_envelope(entity: &MimeEntity) -> String {
    let from = render_address_list(entity.header("From"));
    format!(
        "({} {} {} {} {} {} {} {} {} {})",
        render_opt(entity.header("Date")),
        render_opt(entity.header("Subject")),
        from.clone(),
        from.clone(),
        from,
        render_address_list(entity.header("To")),
        render_address_list(entity.header("Cc")),
        render_address_list(entity.header("Bcc")),
        render_opt(entity.header("In-Reply-To")),
        render_opt(entity.header("Message-ID")),
    )
}

fn encoding_token(e: TransferEncoding) -> &'static str {
    match e {
        TransferEncoding::SevenBit => "7bit",
        TransferEncoding::EightBit => "8bit",
        TransferEncoding::Binary => "binary",
        TransferEncoding::QuotedPrintable => "quoted-printable",
        TransferEncoding::Base64 => "base64",
    }
}

fn render_disposition(entity: &MimeEntity) -> String {
    match &entity.disposition {
        None => "NIL".into(),
        Some(d) => match &d.filename {
            Some(f) => format!(
                "({} (\"filename\" {}))",
                render_qstr(&d.kind),
                render_qstr(f)
            ),
            None => format!("({} NIL)", render_qstr(&d.kind)),
        },
    }
}

/// Renders a BODYSTRUCTURE (with extension fields) from a parsed message.
pub fn render_bodystructure(entity: &MimeEntity) -> String {
    if entity.is_multipart() {
        let children: String = entity.children.iter().map(render_bodystructure).collect();
        let params = match &entity.boundary {
            Some(b) => format!("(\"boundary\" {})", render_qstr(b)),
            None => "NIL".into(),
        };
        return format!(
            "({children} {} {params} {} NIL NIL)",
            render_qstr(&entity.subtype.to_ascii_uppercase()),
            render_disposition(entity),
        );
    }
    let mut params: Vec<String> = Vec::new();
    if let Some(cs) = &entity.charset {
        params.push(format!("\"charset\" {}", render_qstr(cs)));
    }
    if let Some(ct) = entity.header("Content-Type") {
        if let Some(name) = crate::mime::param_value(ct, "name") {
            params.push(format!("\"name\" {}", render_qstr(&name)));
        }
    }
    let params = if params.is_empty() {
        "NIL".into()
    } else {
        format!("({})", params.join(" "))
    };
    let size = entity.body.len();
    let lines_field = if entity.media_type.eq_ignore_ascii_case("text") {
        let lines = entity.body.iter().filter(|&&b| b == b'\n').count();
        format!(" {lines}")
    } else {
        String::new()
    };
    format!(
        "({} {} {params} NIL NIL {} {size}{lines_field} NIL {} NIL NIL)",
        render_qstr(&entity.media_type),
        render_qstr(&entity.subtype),
        render_qstr(encoding_token(entity.transfer_encoding)),
        render_disposition(entity),
    )
}
