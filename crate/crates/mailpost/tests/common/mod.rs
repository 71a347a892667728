//! Shared helpers for the integration suites: independently written
//! reference encoders, a search-key grammar checker, brute-force
//! analytics oracles, and fixture plumbing. The reference code here is
//! deliberately written from the relevant RFC text rather than reusing
//! the library's implementations, so the two can check each other.

#![allow(dead_code)]

use std::path::PathBuf;

use mailpost::mockserver::{self, FixtureMailbox, MockEndpoint};
use mailpost::protocol::Envelope;
use mailpost::session::{ImapConfig, Session};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fig2_mailbox() -> FixtureMailbox {
    mockserver::load_fixture_dir(&fixture_dir().join("fig2")).expect("fixture loads")
}

/// Authenticated session against a fresh stateful mock of the bundled
/// fixture mailbox.
pub fn fixture_session() -> (Session, MockEndpoint) {
    session_for(fig2_mailbox())
}

pub fn session_for(mailbox: FixtureMailbox) -> (Session, MockEndpoint) {
    let password = mailbox
        .expected_password
        .clone()
        .unwrap_or_else(|| "pw".into());
    let mut endpoint = mockserver::start_stateful(mailbox);
    let config = ImapConfig::new("imaps://mock.invalid", "user@company.com").password(password);
    let session =
        Session::configure_with_transport(endpoint.connect(), &config).expect("mock login");
    (session, endpoint)
}

// ---- reference base64 (RFC 4648 §4, table-driven, no shared code) ----

const B64_ALPHABET: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

pub fn ref_base64_encode(data: &[u8]) -> String {
    let mut out = String::with_capacity(data.len().div_ceil(3) * 4);
    for chunk in data.chunks(3) {
        let b0 = chunk[0] as u32;
        let b1 = chunk.get(1).copied().unwrap_or(0) as u32;
        let b2 = chunk.get(2).copied().unwrap_or(0) as u32;
        let n = (b0 << 16) | (b1 << 8) | b2;
        out.push(B64_ALPHABET[(n >> 18) as usize & 63] as char);
        out.push(B64_ALPHABET[(n >> 12) as usize & 63] as char);
        out.push(if chunk.len() > 1 {
            B64_ALPHABET[(n >> 6) as usize & 63] as char
        } else {
            '='
        });
        out.push(if chunk.len() > 2 {
            B64_ALPHABET[n as usize & 63] as char
        } else {
            '='
        });
    }
    out
}

pub fn ref_base64_decode(text: &str) -> Option<Vec<u8>> {
    let mut vals = Vec::new();
    let mut pad = 0usize;
    for c in text.chars().filter(|c| !c.is_ascii_whitespace()) {
        if c == '=' {
            pad += 1;
            continue;
        }
        if pad > 0 {
            return None;
        }
        let v = B64_ALPHABET.iter().position(|&a| a as char == c)?;
        vals.push(v as u32);
    }
    if (vals.len() + pad) % 4 != 0 || pad > 2 {
        return None;
    }
    let mut out = Vec::new();
    for group in vals.chunks(4) {
        let mut n = 0u32;
        for (k, v) in group.iter().enumerate() {
            n |= v << (18 - 6 * k);
        }
        out.push((n >> 16) as u8);
        if group.len() > 2 {
            out.push((n >> 8) as u8);
        }
        if group.len() > 3 {
            out.push(n as u8);
        }
    }
    Some(out)
}

// ---- reference quoted-printable (RFC 2045 §6.7) ----

/// Encodes every byte outside the safe printable range as `=XX` and
/// inserts soft breaks to keep lines under 76 characters. Trailing
/// spaces and tabs are always escaped so they survive transport.
pub fn ref_qp_encode(data: &[u8]) -> String {
    let mut out = String::new();
    let mut col = 0usize;
    let push = |s: &str, col: &mut usize, out: &mut String| {
        if *col + s.len() > 72 {
            out.push_str("=\r\n");
            *col = 0;
        }
        out.push_str(s);
        *col += s.len();
    };
    for (idx, &b) in data.iter().enumerate() {
        let at_end = idx + 1 == data.len() || data[idx + 1] == b'\r';
        let literal = matches!(b, 0x21..=0x3c | 0x3e..=0x7e) || ((b == b' ' || b == b'\t') && !at_end);
        if b == b'\r' && data.get(idx + 1) == Some(&b'\n') {
            out.push('\r');
            continue;
        }
        if b == b'\n' && idx > 0 && data[idx - 1] == b'\r' {
            out.push('\n');
            col = 0;
            continue;
        }
        if literal {
            push(&(b as char).to_string(), &mut col, &mut out);
        } else {
            push(&format!("={b:02X}"), &mut col, &mut out);
        }
    }
    out
}

// ---- RFC 3501 search-key grammar checker ----

/// Accepts one or more RFC 3501 search keys separated by single spaces.
/// Returns true when the whole string parses.
pub fn abnf_accepts_search_keys(input: &str) -> bool {
    let mut p = SearchParser { s: input.as_bytes(), i: 0 };
    if !p.key_sequence() {
        return false;
    }
    p.i == p.s.len()
}

struct SearchParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> SearchParser<'a> {
    fn key_sequence(&mut self) -> bool {
        if !self.key() {
            return false;
        }
        while self.peek() == Some(b' ') {
            let save = self.i;
            self.i += 1;
            if !self.key() {
                self.i = save;
                break;
            }
        }
        true
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn eat(&mut self, word: &str) -> bool {
        if self.s[self.i..].starts_with(word.as_bytes()) {
            self.i += word.len();
            true
        } else {
            false
        }
    }

    fn sp(&mut self) -> bool {
        if self.peek() == Some(b' ') {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn key(&mut self) -> bool {
        let save = self.i;
        // parenthesized key list
        if self.peek() == Some(b'(') {
            self.i += 1;
            if self.key_sequence() && self.peek() == Some(b')') {
                self.i += 1;
                return true;
            }
            self.i = save;
            return false;
        }
        for flag in [
            "ALL", "ANSWERED", "DELETED", "DRAFT", "FLAGGED", "RECENT", "SEEN", "UNANSWERED",
            "UNDELETED", "UNDRAFT", "UNFLAGGED", "UNSEEN", "NEW", "OLD",
        ] {
            if self.eat(flag) && self.at_boundary() {
                return true;
            }
            self.i = save;
        }
        for date_key in ["BEFORE", "ON", "SINCE", "SENTBEFORE", "SENTON", "SENTSINCE"] {
            if self.eat(date_key) {
                if self.sp() && self.date() {
                    return true;
                }
                self.i = save;
            }
        }
        for str_key in ["BCC", "BODY", "CC", "FROM", "SUBJECT", "TEXT", "TO"] {
            if self.eat(str_key) {
                if self.sp() && self.quoted() {
                    return true;
                }
                self.i = save;
            }
        }
        if self.eat("HEADER") {
            if self.sp() && self.header_name() && self.sp() && self.quoted() {
                return true;
            }
            self.i = save;
        }
        for num_key in ["LARGER", "SMALLER", "YOUNGER", "OLDER"] {
            if self.eat(num_key) {
                if self.sp() && self.number() {
                    return true;
                }
                self.i = save;
            }
        }
        if self.eat("NOT") {
            if self.sp() && self.key() {
                return true;
            }
            self.i = save;
        }
        if self.eat("OR") {
            if self.sp() && self.key() && self.sp() && self.key() {
                return true;
            }
            self.i = save;
        }
        false
    }

    /// Keyword keys must not run into following letters (SEEN vs SEENX).
    fn at_boundary(&self) -> bool {
        matches!(self.peek(), None | Some(b' ') | Some(b')'))
    }

    fn date(&mut self) -> bool {
        let save = self.i;
        let mut digits = 0;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.i += 1;
            digits += 1;
        }
        if !(1..=2).contains(&digits) || self.peek() != Some(b'-') {
            self.i = save;
            return false;
        }
        self.i += 1;
        let months = [
            "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
        ];
        if !months.iter().any(|m| self.eat(m)) || self.peek() != Some(b'-') {
            self.i = save;
            return false;
        }
        self.i += 1;
        for _ in 0..4 {
            if !self.peek().is_some_and(|b| b.is_ascii_digit()) {
                self.i = save;
                return false;
            }
            self.i += 1;
        }
        true
    }

    fn quoted(&mut self) -> bool {
        let save = self.i;
        if self.peek() != Some(b'"') {
            return false;
        }
        self.i += 1;
        while let Some(b) = self.peek() {
            match b {
                b'"' => {
                    self.i += 1;
                    return true;
                }
                b'\\' => {
                    // only \" and \\ are valid quoted-specials
                    match self.s.get(self.i + 1) {
                        Some(b'"') | Some(b'\\') => self.i += 2,
                        _ => {
                            self.i = save;
                            return false;
                        }
                    }
                }
                b'\r' | b'\n' => {
                    self.i = save;
                    return false;
                }
                _ => self.i += 1,
            }
        }
        self.i = save;
        false
    }

    fn header_name(&mut self) -> bool {
        let mut n = 0;
        while self
            .peek()
            .is_some_and(|b| b.is_ascii_graphic() && b != b':' && b != b'"' && b != b'(' && b != b')')
        {
            self.i += 1;
            n += 1;
        }
        n > 0
    }

    fn number(&mut self) -> bool {
        let mut n = 0;
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.i += 1;
            n += 1;
        }
        n > 0
    }
}

// ---- brute-force analytics oracles ----

/// Counts messages per first-from address with simple loops; returns
/// (email, count) sorted by count desc then email asc, truncated.
pub fn brute_force_frequency(
    envelopes: &[(mailpost::protocol::MessageId, Envelope)],
    top_n: usize,
) -> Vec<(String, usize)> {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for (_, env) in envelopes {
        let Some(addr) = env.from.first() else { continue };
        let email = addr.address().to_lowercase();
        match counts.iter_mut().find(|(e, _)| *e == email) {
            Some((_, c)) => *c += 1,
            None => counts.push((email, 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    counts.truncate(top_n);
    counts
}

/// Looks every token up in the raw word list and tallies category hits
/// one by one.
pub fn brute_force_sentiment(
    tokens: &[String],
    lexicon_rows: &[(String, String)],
) -> std::collections::BTreeMap<String, u32> {
    let mut counts = std::collections::BTreeMap::new();
    for cat in [
        "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust",
        "negative", "positive",
    ] {
        counts.insert(cat.to_string(), 0u32);
    }
    for token in tokens {
        for (word, category) in lexicon_rows {
            if word == token {
                *counts.get_mut(category).expect("known category") += 1;
            }
        }
    }
    counts
}
