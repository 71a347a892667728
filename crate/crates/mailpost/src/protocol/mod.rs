//! IMAP wire codec: command tagging and serialization on the way out,
//! response classification and payload parsing on the way in.

use crate::error::{Error, Result};
use crate::transport::Transport;

mod bodystructure;
mod envelope;
pub mod value;

pub use bodystructure::{
    parse_bodystructure, BodyStructureNode, Disposition, DispositionKind, TransferEncoding,
};
pub use envelope::{parse_envelope, Address, Envelope};

pub(crate) use bodystructure::node_from_value;
pub(crate) use envelope::envelope_from_value;

use value::{Reader, Value};

/// Client command tag: "A" plus a zero-padded four-digit counter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTag(pub String);

impl std::fmt::Display for CommandTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Advances the session counter and returns the next tag. The counter
/// value passed in is the number of tags already issued.
pub fn next_tag(counter: &mut u32) -> Result<CommandTag> {
    if *counter >= 9999 {
        return Err(Error::TagSpaceExhausted);
    }
    *counter += 1;
    Ok(CommandTag(format!("A{:04}", *counter)))
}

/// Message identification scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdKind {
    Uid,
    SequenceNumber,
}

/// A message id, either a UID or a sequence number. All ids in one result
/// set share the same kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MessageId {
    pub value: u32,
    pub kind: IdKind,
}

impl MessageId {
    pub fn uid(value: u32) -> Self {
        MessageId { value, kind: IdKind::Uid }
    }

    pub fn seq(value: u32) -> Self {
        MessageId { value, kind: IdKind::SequenceNumber }
    }
}

impl std::fmt::Display for MessageId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// One command argument. String arguments pick their own wire form
/// (bare atom, quoted, or literal) based on content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    /// Rendered bare. Fails serialization if it contains atom-specials.
    Atom(String),
    /// Rendered as a quoted string; upgraded to a literal when the content
    /// cannot appear inside quotes.
    Quoted(String),
    /// Always rendered as a `{N}` literal.
    Literal(Vec<u8>),
    Num(u32),
    /// Pre-rendered text emitted verbatim (section specs, key lists).
    Raw(String),
}

impl Arg {
    /// Quoted when the content is printable ASCII, literal otherwise.
    pub fn string(s: impl Into<String>) -> Arg {
        let s = s.into();
        if s.bytes().all(|b| (0x20..0x7f).contains(&b)) {
            Arg::Quoted(s)
        } else {
            Arg::Literal(s.into_bytes())
        }
    }

    /// Mailbox names render bare when atom-safe (`SELECT INBOX`);
    /// otherwise quoted/literal.
    pub fn mailbox(s: impl Into<String>) -> Arg {
        let s = s.into();
        if !s.is_empty() && s.bytes().all(is_atom_char) {
            Arg::Atom(s)
        } else {
            Arg::string(s)
        }
    }
}

fn is_atom_char(b: u8) -> bool {
    // CHAR except atom-specials: ( ) { SP CTL % * " \ ]
    (0x21..0x7f).contains(&b) && !matches!(b, b'(' | b')' | b'{' | b'%' | b'*' | b'"' | b'\\' | b']')
}

fn render_arg(out: &mut Vec<u8>, arg: &Arg) -> Result<()> {
    match arg {
        Arg::Atom(a) => {
            if a.is_empty() || !a.bytes().all(is_atom_char) {
                return Err(Error::UnencodableArgument(format!("not an atom: {a:?}")));
            }
            out.extend_from_slice(a.as_bytes());
        }
        Arg::Quoted(s) => {
            if s.bytes().any(|b| b == b'\r' || b == b'\n') {
                return Err(Error::UnencodableArgument(
                    "CR/LF not allowed in quoted string".into(),
                ));
            }
            if s.bytes().any(|b| b >= 0x80) {
                // 8-bit content must travel as a literal
                return render_arg(out, &Arg::Literal(s.clone().into_bytes()));
            }
            out.push(b'"');
            for b in s.bytes() {
                if b == b'"' || b == b'\\' {
                    out.push(b'\\');
                }
                out.push(b);
            }
            out.push(b'"');
        }
        Arg::Literal(bytes) => {
            out.extend_from_slice(format!("{{{}}}\r\n", bytes.len()).as_bytes());
            out.extend_from_slice(bytes);
        }
        Arg::Num(n) => out.extend_from_slice(n.to_string().as_bytes()),
        Arg::Raw(r) => out.extend_from_slice(r.as_bytes()),
    }
    Ok(())
}

/// Renders `<tag> <verb> <args>\r\n`, applying quoting and literal rules.
pub fn serialize_command(tag: &CommandTag, verb: &str, args: &[Arg]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(tag.0.as_bytes());
    out.push(b' ');
    out.extend_from_slice(verb.as_bytes());
    for arg in args {
        out.push(b' ');
        render_arg(&mut out, arg)?;
    }
    out.extend_from_slice(b"\r\n");
    Ok(out)
}

/// Tagged completion status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    No,
    Bad,
}

/// One parsed untagged response.
#[derive(Debug, Clone, PartialEq)]
pub enum Untagged {
    Search(Vec<u32>),
    Capability(Vec<String>),
    /// Folder name from a `* LIST (...) "/" name` line.
    List { name: String },
    Exists(u32),
    Recent(u32),
    Flags(Vec<String>),
    /// FETCH data: sequence number plus (item, value) pairs.
    Fetch { seq: u32, items: Vec<(String, Value)> },
    Bye(String),
    /// Untagged OK/NO/BAD and anything unrecognized, kept as text.
    StatusText(String),
}

/// A complete server response unit.
#[derive(Debug, Clone, PartialEq)]
pub enum ServerResponse {
    Untagged(Untagged),
    Continuation(String),
    Tagged {
        tag: String,
        status: Status,
        text: String,
    },
}

fn lossy_text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).trim_end_matches(['\r', '\n']).to_string()
}

/// Classifies one logical response (CRLF-terminated, literals already
/// inlined) into tagged, untagged, or continuation-request form.
pub fn parse_response(line: &[u8]) -> Result<ServerResponse> {
    let trimmed: &[u8] = {
        let mut end = line.len();
        while end > 0 && (line[end - 1] == b'\r' || line[end - 1] == b'\n') {
            end -= 1;
        }
        &line[..end]
    };
    if trimmed.is_empty() {
        return Err(Error::MalformedResponse("empty line".into()));
    }
    if trimmed.starts_with(b"+ ") || trimmed == b"+" {
        let text = lossy_text(trimmed.get(2..).unwrap_or(b""));
        return Ok(ServerResponse::Continuation(text));
    }
    if trimmed.starts_with(b"* ") {
        return Ok(ServerResponse::Untagged(parse_untagged(&trimmed[2..])?));
    }
    // tagged completion: <tag> SP <OK|NO|BAD> SP text
    let mut parts = trimmed.splitn(3, |&b| b == b' ');
    let tag = parts.next().unwrap_or(b"");
    let status = parts.next().unwrap_or(b"");
    let text = parts.next().unwrap_or(b"");
    let status = match status {
        s if s.eq_ignore_ascii_case(b"OK") => Status::Ok,
        s if s.eq_ignore_ascii_case(b"NO") => Status::No,
        s if s.eq_ignore_ascii_case(b"BAD") => Status::Bad,
        _ => {
            return Err(Error::MalformedResponse(format!(
                "unclassifiable line: {}",
                lossy_text(trimmed)
            )))
        }
    };
    let tag = lossy_text(tag);
    if tag.is_empty() {
        return Err(Error::MalformedResponse("missing tag".into()));
    }
    Ok(ServerResponse::Tagged {
        tag,
        status,
        text: lossy_text(text),
    })
}

fn parse_untagged(rest: &[u8]) -> Result<Untagged> {
    let mut parts = rest.splitn(2, |&b| b == b' ');
    let first = parts.next().unwrap_or(b"");
    let remainder = parts.next().unwrap_or(b"");

    if first.eq_ignore_ascii_case(b"SEARCH") {
        return Ok(Untagged::Search(parse_id_list(remainder)?));
    }
    if first.eq_ignore_ascii_case(b"CAPABILITY") {
        let caps = String::from_utf8_lossy(remainder)
            .split_ascii_whitespace()
            .map(|t| t.to_ascii_uppercase())
            .collect();
        return Ok(Untagged::Capability(caps));
    }
    if first.eq_ignore_ascii_case(b"LIST") {
        return parse_list_line(remainder);
    }
    if first.eq_ignore_ascii_case(b"FLAGS") {
        let mut r = Reader::new(remainder);
        let flags = match r.read_value()? {
            Value::List(items) => items
                .iter()
                .filter_map(|v| v.as_text())
                .collect(),
            _ => Vec::new(),
        };
        return Ok(Untagged::Flags(flags));
    }
    if first.eq_ignore_ascii_case(b"BYE") {
        return Ok(Untagged::Bye(lossy_text(remainder)));
    }
    if first.eq_ignore_ascii_case(b"OK")
        || first.eq_ignore_ascii_case(b"NO")
        || first.eq_ignore_ascii_case(b"BAD")
    {
        return Ok(Untagged::StatusText(lossy_text(rest)));
    }
    // numeric prefix: EXISTS / RECENT / FETCH / EXPUNGE
    if let Ok(n) = std::str::from_utf8(first).unwrap_or("").parse::<u32>() {
        let mut kw = remainder.splitn(2, |&b| b == b' ');
        let keyword = kw.next().unwrap_or(b"");
        let payload = kw.next().unwrap_or(b"");
        if keyword.eq_ignore_ascii_case(b"EXISTS") {
            return Ok(Untagged::Exists(n));
        }
        if keyword.eq_ignore_ascii_case(b"RECENT") {
            return Ok(Untagged::Recent(n));
        }
        if keyword.eq_ignore_ascii_case(b"FETCH") {
            return Ok(Untagged::Fetch {
                seq: n,
                items: parse_fetch_items(payload)?,
            });
        }
        return Ok(Untagged::StatusText(lossy_text(rest)));
    }
    // unknown untagged responses are preserved, not rejected
    Ok(Untagged::StatusText(lossy_text(rest)))
}

fn parse_id_list(bytes: &[u8]) -> Result<Vec<u32>> {
    let text = String::from_utf8_lossy(bytes);
    let mut ids = Vec::new();
    for tok in text.split_ascii_whitespace() {
        let id: u32 = tok.parse().map_err(|_| {
            Error::MalformedResponse(format!("non-numeric SEARCH token: {tok}"))
        })?;
        ids.push(id);
    }
    Ok(ids)
}

fn parse_list_line(rest: &[u8]) -> Result<Untagged> {
    let mut r = Reader::new(rest);
    let _flags = r.read_value()?; // (\HasNoChildren)
    let _delim = r.read_value()?; // "/" or NIL
    let name = r
        .read_value()?
        .as_text()
        .ok_or_else(|| Error::MalformedResponse("LIST without a name".into()))?;
    Ok(Untagged::List { name })
}

fn parse_fetch_items(payload: &[u8]) -> Result<Vec<(String, Value)>> {
    let mut r = Reader::new(payload);
    r.expect(b'(')
        .map_err(|_| Error::MalformedResponse("FETCH without item list".into()))?;
    let mut pairs = Vec::new();
    while !r.peek_is(b')') {
        let name = r.read_atom()?.to_ascii_uppercase();
        let val = r.read_value()?;
        pairs.push((name, val));
    }
    Ok(pairs)
}

/// Parses a `* SEARCH ...` line into message ids of the given kind.
pub fn parse_search_results(line: &[u8], kind: IdKind) -> Result<Vec<MessageId>> {
    match parse_response(line)? {
        ServerResponse::Untagged(Untagged::Search(ids)) => {
            Ok(ids.into_iter().map(|value| MessageId { value, kind }).collect())
        }
        _ => Err(Error::MalformedResponse("not a SEARCH response".into())),
    }
}

/// Reads one logical response: a line plus any `{N}` literals it
/// announces, continuation lines included, literals inlined.
pub fn read_logical_line(transport: &mut dyn Transport) -> Result<Vec<u8>> {
    let mut out = transport.read_line()?;
    loop {
        let n = match trailing_literal_len(&out) {
            Some(n) => n,
            None => return Ok(out),
        };
        let lit = transport.read_exact(n)?;
        out.extend_from_slice(&lit);
        let next = transport.read_line()?;
        out.extend_from_slice(&next);
    }
}

/// A line ending `...{N}\r\n` announces N literal bytes to follow.
fn trailing_literal_len(buf: &[u8]) -> Option<usize> {
    let mut end = buf.len();
    while end > 0 && (buf[end - 1] == b'\r' || buf[end - 1] == b'\n') {
        end -= 1;
    }
    let line = &buf[..end];
    if !line.ends_with(b"}") {
        return None;
    }
    let open = line.iter().rposition(|&b| b == b'{')?;
    let digits = &line[open + 1..line.len() - 1];
    if digits.is_empty() || !digits.iter().all(u8::is_ascii_digit) {
        return None;
    }
    std::str::from_utf8(digits).ok()?.parse().ok()
}

/// Consumes responses until the command with `tag` completes; returns all
/// of them in order, the tagged completion last.
pub fn read_full_response(
    transport: &mut dyn Transport,
    tag: &CommandTag,
) -> Result<Vec<ServerResponse>> {
    let mut responses = Vec::new();
    loop {
        let logical = read_logical_line(transport)?;
        let resp = parse_response(&logical)?;
        let done = match &resp {
            ServerResponse::Tagged { tag: seen, .. } => {
                if *seen != tag.0 {
                    return Err(Error::ProtocolDesync {
                        expected: tag.0.clone(),
                        seen: seen.clone(),
                    });
                }
                true
            }
            _ => false,
        };
        responses.push(resp);
        if done {
            return Ok(responses);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::pipe_pair;
    use std::time::Duration;

    #[test]
    fn tags_count_and_pad() {
        let mut c = 0;
        assert_eq!(next_tag(&mut c).unwrap().0, "A0001");
        let mut c = 41;
        assert_eq!(next_tag(&mut c).unwrap().0, "A0042");
        assert_eq!(c, 42);
        let mut c = 9999;
        assert!(matches!(next_tag(&mut c), Err(Error::TagSpaceExhausted)));
    }

    #[test]
    fn serialize_select_inbox() {
        let cmd = serialize_command(
            &CommandTag("A0001".into()),
            "SELECT",
            &[Arg::mailbox("INBOX")],
        )
        .unwrap();
        assert_eq!(cmd, b"A0001 SELECT INBOX\r\n");
    }

    #[test]
    fn serialize_search_from_quoted() {
        let cmd = serialize_command(
            &CommandTag("A0002".into()),
            "SEARCH",
            &[Arg::Atom("FROM".into()), Arg::Quoted("@ksu.edu".into())],
        )
        .unwrap();
        assert_eq!(cmd, b"A0002 SEARCH FROM \"@ksu.edu\"\r\n");
    }

    #[test]
    fn serialize_login_quotes_both() {
        let cmd = serialize_command(
            &CommandTag("A0003".into()),
            "LOGIN",
            &[Arg::Quoted("user".into()), Arg::Quoted("pa ss".into())],
        )
        .unwrap();
        assert_eq!(cmd, b"A0003 LOGIN \"user\" \"pa ss\"\r\n");
    }

    #[test]
    fn eight_bit_string_becomes_literal() {
        let cmd = serialize_command(
            &CommandTag("A0004".into()),
            "SELECT",
            &[Arg::string("caf\u{e9}")],
        )
        .unwrap();
        assert_eq!(cmd, b"A0004 SELECT {5}\r\ncaf\xc3\xa9\r\n");
    }

    #[test]
    fn crlf_in_quoted_is_unencodable() {
        let err = serialize_command(
            &CommandTag("A0005".into()),
            "SELECT",
            &[Arg::Quoted("a\r\nb".into())],
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnencodableArgument(_)));
    }

    #[test]
    fn parse_tagged_ok() {
        let r = parse_response(b"A0001 OK SELECT completed\r\n").unwrap();
        assert_eq!(
            r,
            ServerResponse::Tagged {
                tag: "A0001".into(),
                status: Status::Ok,
                text: "SELECT completed".into()
            }
        );
    }

    #[test]
    fn parse_untagged_exists() {
        let r = parse_response(b"* 18 EXISTS\r\n").unwrap();
        assert_eq!(r, ServerResponse::Untagged(Untagged::Exists(18)));
    }

    #[test]
    fn parse_garbage_rejected() {
        assert!(matches!(
            parse_response(b"garbage\r\n"),
            Err(Error::MalformedResponse(_))
        ));
    }

    #[test]
    fn parse_search_results_known_vector() {
        let ids = parse_search_results(
            b"* SEARCH 60 145 147 159 332 333 336 338 341 428\r\n",
            IdKind::Uid,
        )
        .unwrap();
        let values: Vec<u32> = ids.iter().map(|i| i.value).collect();
        assert_eq!(values, vec![60, 145, 147, 159, 332, 333, 336, 338, 341, 428]);
        assert!(ids.iter().all(|i| i.kind == IdKind::Uid));
    }

    #[test]
    fn parse_search_results_empty_and_singleton() {
        assert!(parse_search_results(b"* SEARCH\r\n", IdKind::Uid)
            .unwrap()
            .is_empty());
        let one = parse_search_results(b"* SEARCH 7\r\n", IdKind::SequenceNumber).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].value, 7);
    }

    #[test]
    fn parse_search_results_rejects_non_numeric() {
        assert!(parse_search_results(b"* SEARCH 1 x 3\r\n", IdKind::Uid).is_err());
    }

    #[test]
    fn read_full_response_two_lines() {
        let (mut client, mut server) = pipe_pair(Duration::from_millis(500));
        server
            .write_all(b"* SEARCH 7\r\nA0002 OK SEARCH completed\r\n")
            .unwrap();
        let rs = read_full_response(&mut client, &CommandTag("A0002".into())).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs[0], ServerResponse::Untagged(Untagged::Search(vec![7])));
        assert!(matches!(&rs[1], ServerResponse::Tagged { status: Status::Ok, .. }));
    }

    #[test]
    fn read_full_response_with_literal() {
        let (mut client, mut server) = pipe_pair(Duration::from_millis(500));
        server
            .write_all(b"* 1 FETCH (BODY[1] {5}\r\nhello)\r\nA0003 OK done\r\n")
            .unwrap();
        let rs = read_full_response(&mut client, &CommandTag("A0003".into())).unwrap();
        match &rs[0] {
            ServerResponse::Untagged(Untagged::Fetch { seq, items }) => {
                assert_eq!(*seq, 1);
                assert_eq!(items[0].0, "BODY[1]");
                assert_eq!(items[0].1, Value::Str(b"hello".to_vec()));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn read_full_response_desync() {
        let (mut client, mut server) = pipe_pair(Duration::from_millis(500));
        server.write_all(b"A0009 OK oops\r\n").unwrap();
        let err = read_full_response(&mut client, &CommandTag("A0002".into())).unwrap_err();
        assert!(matches!(err, Error::ProtocolDesync { .. }));
    }

    #[test]
    fn fetch_items_with_uid_and_flags() {
        let r = parse_response(b"* 12 FETCH (UID 457 FLAGS (\\Seen) RFC822.SIZE 30000)\r\n")
            .unwrap();
        match r {
            ServerResponse::Untagged(Untagged::Fetch { seq, items }) => {
                assert_eq!(seq, 12);
                assert_eq!(items[0], ("UID".into(), Value::Atom("457".into())));
                assert_eq!(items[2], ("RFC822.SIZE".into(), Value::Atom("30000".into())));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }
}
