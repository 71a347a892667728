//! Transfer decodings (base64, quoted-printable), charset conversion,
//! and RFC 2047 encoded-word header decoding.

use base64::engine::general_purpose::GeneralPurpose;
use base64::engine::{DecodePaddingMode, GeneralPurposeConfig};
use base64::{alphabet, Engine};

use crate::error::{Error, Result};

/// Standard-alphabet engine tolerant of missing padding (encoded-words
/// often drop it).
fn engine() -> GeneralPurpose {
    GeneralPurpose::new(
        &alphabet::STANDARD,
        GeneralPurposeConfig::new().with_decode_padding_mode(DecodePaddingMode::Indifferent),
    )
}

/// Decodes base64 text. Embedded whitespace and line breaks are ignored;
/// bad symbols or bad padding are rejected.
pub fn decode_base64(text: &str) -> Result<Vec<u8>> {
    let compact: String = text.chars().filter(|c| !c.is_ascii_whitespace()).collect();
    engine()
        .decode(compact.as_bytes())
        .map_err(|e| Error::InvalidBase64(e.to_string()))
}

/// Tolerant quoted-printable decoding: `=XY` hex escapes are decoded,
/// soft line breaks (`=` before CRLF) removed, and invalid escapes passed
/// through verbatim.
pub fn decode_quoted_printable(bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b != b'=' {
            out.push(b);
            i += 1;
            continue;
        }
        // soft break: =\r\n or =\n
        if bytes.get(i + 1) == Some(&b'\r') && bytes.get(i + 2) == Some(&b'\n') {
            i += 3;
            continue;
        }
        if bytes.get(i + 1) == Some(&b'\n') {
            i += 2;
            continue;
        }
        match (bytes.get(i + 1), bytes.get(i + 2)) {
            (Some(&h), Some(&l)) => match (hex_val(h), hex_val(l)) {
                (Some(h), Some(l)) => {
                    out.push(h * 16 + l);
                    i += 3;
                }
                _ => {
                    out.push(b);
                    i += 1;
                }
            },
            _ => {
                out.push(b);
                i += 1;
            }
        }
    }
    out
}

fn hex_val(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'A'..=b'F' => Some(b - b'A' + 10),
        b'a'..=b'f' => Some(b - b'a' + 10),
        _ => None,
    }
}

/// Charsets with built-in conversion. Anything else falls back to
/// Latin-1, which at least never loses bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Charset {
    Utf8,
    Ascii,
    Latin1,
    Windows1252,
}

impl Charset {
    pub fn from_label(label: &str) -> Option<Charset> {
        match label.trim().to_ascii_lowercase().as_str() {
            "utf-8" | "utf8" => Some(Charset::Utf8),
            "us-ascii" | "ascii" => Some(Charset::Ascii),
            "iso-8859-1" | "latin1" | "latin-1" => Some(Charset::Latin1),
            "windows-1252" | "cp1252" => Some(Charset::Windows1252),
            _ => None,
        }
    }

    pub fn decode(self, bytes: &[u8]) -> String {
        match self {
            Charset::Utf8 | Charset::Ascii => String::from_utf8_lossy(bytes).into_owned(),
            Charset::Latin1 => bytes.iter().map(|&b| b as char).collect(),
            Charset::Windows1252 => bytes.iter().map(|&b| cp1252_char(b)).collect(),
        }
    }
}

/// Windows-1252 differs from Latin-1 only in 0x80..0x9F.
fn cp1252_char(b: u8) -> char {
    const HIGH: [char; 32] = [
        '\u{20AC}', '\u{81}', '\u{201A}', '\u{0192}', '\u{201E}', '\u{2026}', '\u{2020}',
        '\u{2021}', '\u{02C6}', '\u{2030}', '\u{0160}', '\u{2039}', '\u{0152}', '\u{8D}',
        '\u{017D}', '\u{8F}', '\u{90}', '\u{2018}', '\u{2019}', '\u{201C}', '\u{201D}',
        '\u{2022}', '\u{2013}', '\u{2014}', '\u{02DC}', '\u{2122}', '\u{0161}', '\u{203A}',
        '\u{0153}', '\u{9D}', '\u{017E}', '\u{0178}',
    ];
    match b {
        0x80..=0x9f => HIGH[(b - 0x80) as usize],
        _ => b as char,
    }
}

/// Decodes bytes as UTF-8, falling back to Latin-1 when the content is
/// not valid UTF-8.
pub fn decode_text_lossy(bytes: &[u8], charset: Option<&str>) -> String {
    if let Some(cs) = charset.and_then(Charset::from_label) {
        return cs.decode(bytes);
    }
    match std::str::from_utf8(bytes) {
        Ok(s) => s.to_string(),
        Err(_) => Charset::Latin1.decode(bytes),
    }
}

/// Decodes every RFC 2047 `=?charset?B|Q?payload?=` encoded-word in a
/// header value. Adjacent encoded-words join without intervening space;
/// undecodable words stay verbatim.
pub fn decode_mime_header(input: &str) -> String {
    enum Seg {
        Plain(String),
        Word(String),
    }
    let mut segs: Vec<Seg> = Vec::new();
    let mut plain = String::new();
    let mut rest = input;
    while let Some(start) = rest.find("=?") {
        match parse_encoded_word(&rest[start..]) {
            Some((decoded, consumed)) => {
                plain.push_str(&rest[..start]);
                if !plain.is_empty() {
                    segs.push(Seg::Plain(std::mem::take(&mut plain)));
                }
                segs.push(Seg::Word(decoded));
                rest = &rest[start + consumed..];
            }
            None => {
                plain.push_str(&rest[..start + 2]);
                rest = &rest[start + 2..];
            }
        }
    }
    plain.push_str(rest);
    if !plain.is_empty() {
        segs.push(Seg::Plain(plain));
    }

    let mut out = String::new();
    for (i, seg) in segs.iter().enumerate() {
        match seg {
            Seg::Word(w) => out.push_str(w),
            Seg::Plain(p) => {
                let between_words = i > 0
                    && i + 1 < segs.len()
                    && matches!(segs[i - 1], Seg::Word(_))
                    && matches!(segs[i + 1], Seg::Word(_));
                if !(between_words && p.chars().all(char::is_whitespace)) {
                    out.push_str(p);
                }
            }
        }
    }
    out
}

/// Parses one encoded-word at the start of `s`; returns the decoded text
/// and the byte length consumed.
fn parse_encoded_word(s: &str) -> Option<(String, usize)> {
    let body = s.strip_prefix("=?")?;
    let q1 = body.find('?')?;
    let charset_label = &body[..q1];
    let rest = &body[q1 + 1..];
    let q2 = rest.find('?')?;
    let enc = &rest[..q2];
    let rest2 = &rest[q2 + 1..];
    let end = rest2.find("?=")?;
    let payload = &rest2[..end];
    let consumed = 2 + q1 + 1 + q2 + 1 + end + 2;

    // charset may carry an RFC 2231 language suffix: UTF-8*en
    let charset_label = charset_label.split('*').next().unwrap_or(charset_label);
    let charset = Charset::from_label(charset_label).unwrap_or(Charset::Latin1);

    let bytes = if enc.eq_ignore_ascii_case("B") {
        decode_base64(payload).ok()?
    } else if enc.eq_ignore_ascii_case("Q") {
        let replaced: Vec<u8> = payload
            .bytes()
            .map(|b| if b == b'_' { b' ' } else { b })
            .collect();
        decode_quoted_printable(&replaced)
    } else {
        return None;
    };
    Some((charset.decode(&bytes), consumed))
}
