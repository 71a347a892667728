//! MIME message parsing: header unfolding, content-type parameters, and
//! recursive multipart splitting on boundary delimiters.

use super::decode;
use crate::protocol::TransferEncoding;

/// A parsed MIME entity. Leaf bodies are stored still transfer-encoded;
/// decoding is an explicit step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MimeEntity {
    /// Unfolded (name, raw value) pairs in original order.
    pub headers: Vec<(String, String)>,
    pub media_type: String,
    pub subtype: String,
    pub charset: Option<String>,
    pub transfer_encoding: TransferEncoding,
    /// Raw body bytes (empty for multipart entities).
    pub body: Vec<u8>,
    pub children: Vec<MimeEntity>,
    pub disposition: Option<ContentDisposition>,
    /// Boundary parameter for multipart entities.
    pub boundary: Option<String>,
    /// Set when the closing boundary delimiter was missing and the tree
    /// was recovered best-effort.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentDisposition {
    pub kind: String,
    pub filename: Option<String>,
}

impl MimeEntity {
    pub fn is_multipart(&self) -> bool {
        !self.children.is_empty()
    }

    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    /// Raw filename from Content-Disposition or the Content-Type `name`
    /// parameter, RFC 2047 still encoded.
    pub fn raw_filename(&self) -> Option<String> {
        if let Some(d) = &self.disposition {
            if let Some(f) = &d.filename {
                return Some(f.clone());
            }
        }
        self.header("Content-Type")
            .and_then(|v| param_value(v, "name"))
    }

    pub fn is_attachment(&self) -> bool {
        self.disposition
            .as_ref()
            .map(|d| d.kind.eq_ignore_ascii_case("attachment"))
            .unwrap_or(false)
            || self.raw_filename().is_some()
    }

    /// Body bytes after transfer decoding.
    pub fn decoded_body(&self) -> Vec<u8> {
        match self.transfer_encoding {
            TransferEncoding::Base64 => {
                decode::decode_base64(&String::from_utf8_lossy(&self.body)).unwrap_or_default()
            }
            TransferEncoding::QuotedPrintable => decode::decode_quoted_printable(&self.body),
            _ => self.body.clone(),
        }
    }

    /// Depth-first leaf walk.
    pub fn leaves(&self) -> Vec<&MimeEntity> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a MimeEntity, out: &mut Vec<&'a MimeEntity>) {
            if e.children.is_empty() {
                out.push(e);
            } else {
                for c in &e.children {
                    walk(c, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// Re-serializes the entity: headers, blank line, then the body or
    /// boundary-delimited parts.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (name, value) in &self.headers {
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(b": ");
            out.extend_from_slice(value.as_bytes());
            out.extend_from_slice(b"\r\n");
        }
        out.extend_from_slice(b"\r\n");
        if let (true, Some(boundary)) = (self.is_multipart(), &self.boundary) {
            for child in &self.children {
                out.extend_from_slice(format!("--{boundary}\r\n").as_bytes());
                out.extend_from_slice(&child.to_bytes());
                if !out.ends_with(b"\r\n") {
                    out.extend_from_slice(b"\r\n");
                }
            }
            out.extend_from_slice(format!("--{boundary}--\r\n").as_bytes());
        } else {
            out.extend_from_slice(&self.body);
        }
        out
    }
}

/// Extracts a (possibly quoted) parameter from a structured header value
/// like `multipart/mixed; boundary="b1"`.
pub fn param_value(header_value: &str, param: &str) -> Option<String> {
    for piece in header_value.split(';').skip(1) {
        let (key, value) = piece.split_once('=')?;
        if key.trim().eq_ignore_ascii_case(param) {
            let v = value.trim();
            let v = v.strip_prefix('"').unwrap_or(v);
            let v = v.strip_suffix('"').unwrap_or(v);
            return Some(v.to_string());
        }
    }
    None
}

/// Splits raw bytes into an unfolded header list and the body. Lines that
/// do not look like headers end the header block (tolerates headerless
/// payloads such as BODY[TEXT] fetches).
fn split_headers(raw: &[u8]) -> (Vec<(String, String)>, Vec<u8>) {
    let mut headers: Vec<(String, String)> = Vec::new();
    let mut pos = 0;
    loop {
        let line_end = raw[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i + 1)
            .unwrap_or(raw.len());
        let line = &raw[pos..line_end];
        let trimmed = trim_eol(line);
        if trimmed.is_empty() {
            // blank line: body starts after it
            return (headers, raw[line_end..].to_vec());
        }
        if (trimmed[0] == b' ' || trimmed[0] == b'\t') && !headers.is_empty() {
            // continuation line
            let (_, last) = headers.last_mut().unwrap();
            last.push(' ');
            last.push_str(String::from_utf8_lossy(trimmed).trim());
        } else {
            match split_header_line(trimmed) {
                Some((name, value)) => headers.push((name, value)),
                // not a header: everything from here on is body
                None => return (headers, raw[pos..].to_vec()),
            }
        }
        pos = line_end;
        if pos >= raw.len() {
            return (headers, Vec::new());
        }
    }
}

fn split_header_line(line: &[u8]) -> Option<(String, String)> {
    let colon = line.iter().position(|&b| b == b':')?;
    let name = std::str::from_utf8(&line[..colon]).ok()?;
    if name.is_empty() || name.bytes().any(|b| b == b' ' || b < 0x21 || b > 0x7e) {
        return None;
    }
    let value = String::from_utf8_lossy(&line[colon + 1..]).trim().to_string();
    Some((name.to_string(), value))
}

fn trim_eol(line: &[u8]) -> &[u8] {
    let mut end = line.len();
    while end > 0 && (line[end - 1] == b'\r' || line[end - 1] == b'\n') {
        end -= 1;
    }
    &line[..end]
}

/// Parses a full message or a message part (headers + body) into a MIME
/// tree. A missing closing boundary yields a best-effort tree with the
/// `truncated` flag set.
pub fn parse_mime(raw: &[u8]) -> MimeEntity {
    let (headers, body) = split_headers(raw);

    let content_type = headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case("Content-Type"))
        .map(|(_, v)| v.clone());
    let (media_type, subtype) = content_type
        .as_deref()
        .and_then(|v| {
            let main = v.split(';').next()?.trim();
            let (t, s) = main.split_once('/')?;
            Some((t.trim().to_ascii_lowercase(), s.trim().to_ascii_lowercase()))
        })
        .unwrap_or_else(|| ("text".into(), "plain".into()));
    let charset = content_type.as_deref().and_then(|v| param_value(v, "charset"));
    let boundary = content_type.as_deref().and_then(|v| param_value(v, "boundary"));
    let transfer_encoding = headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case("Content-Transfer-Encoding"))
        .map(|(_, v)| TransferEncoding::from_token(v.trim()))
        .unwrap_or(TransferEncoding::SevenBit);
    let disposition = headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case("Content-Disposition"))
        .map(|(_, v)| ContentDisposition {
            kind: v.split(';').next().unwrap_or("").trim().to_ascii_lowercase(),
            filename: param_value(v, "filename"),
        });

    let mut entity = MimeEntity {
        headers,
        media_type: media_type.clone(),
        subtype,
        charset,
        transfer_encoding,
        body: Vec::new(),
        children: Vec::new(),
        disposition,
        boundary: boundary.clone(),
        truncated: false,
    };

    if media_type == "multipart" {
        if let Some(b) = &boundary {
            let (parts, truncated) = split_multipart(&body, b);
            entity.children = parts.iter().map(|p| parse_mime(p)).collect();
            entity.truncated = truncated;
            if !entity.children.is_empty() {
                return entity;
            }
        }
    }
    entity.body = body;
    entity
}

/// Splits a multipart body on `--boundary` delimiter lines. Returns the
/// part slices and whether the closing `--boundary--` was missing.
fn split_multipart<'a>(body: &'a [u8], boundary: &str) -> (Vec<&'a [u8]>, bool) {
    let delim = format!("--{boundary}");
    let close = format!("--{boundary}--");
    let mut parts = Vec::new();
    let mut current_start: Option<usize> = None;
    let mut closed = false;
    let mut pos = 0;
    while pos <= body.len() {
        let line_end = body[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i + 1)
            .unwrap_or(body.len());
        let line = trim_eol(&body[pos..line_end]);
        if line == close.as_bytes() {
            if let Some(start) = current_start.take() {
                parts.push(strip_final_eol(&body[start..pos]));
            }
            closed = true;
            break;
        }
        if line == delim.as_bytes() {
            if let Some(start) = current_start.take() {
                parts.push(strip_final_eol(&body[start..pos]));
            }
            current_start = Some(line_end);
        }
        if line_end >= body.len() {
            break;
        }
        pos = line_end;
    }
    if let Some(start) = current_start {
        // no closing delimiter: salvage the trailing part
        parts.push(strip_final_eol(&body[start..]));
    }
    (parts, !closed)
}

/// Drops the CRLF that belongs to the following boundary delimiter.
fn strip_final_eol(part: &[u8]) -> &[u8] {
    let mut end = part.len();
    if end > 0 && part[end - 1] == b'\n' {
        end -= 1;
    }
    if end > 0 && part[end - 1] == b'\r' {
        end -= 1;
    }
    &part[..end]
}

/// Boundary inference for headerless payloads (BODY[TEXT] fetches): when
/// the content opens with a `--token` line, treat that token as the
/// boundary and parse the parts.
pub fn parse_headerless_multipart(raw: &[u8]) -> Option<Vec<MimeEntity>> {
    let first_line = trim_eol(raw.split(|&b| b == b'\n').next()?);
    let boundary = std::str::from_utf8(first_line.strip_prefix(b"--")?).ok()?;
    if boundary.is_empty() || boundary.ends_with("--") {
        return None;
    }
    let (parts, _) = split_multipart(raw, boundary);
    if parts.is_empty() {
        return None;
    }
    Some(parts.iter().map(|p| parse_mime(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &[u8] = b"Content-Type: text/plain; charset=utf-8\r\n\
Content-Transfer-Encoding: quoted-printable\r\n\
\r\n\
caf=C3=A9\r\n";

    fn three_part() -> Vec<u8> {
        b"Content-Type: multipart/mixed; boundary=\"b1\"\r\n\r\n\
preamble ignored\r\n\
--b1\r\n\
Content-Type: text/plain\r\n\r\n\
one\r\n\
--b1\r\n\
Content-Type: text/plain\r\n\r\n\
two\r\n\
--b1\r\n\
Content-Type: application/octet-stream; name=\"x.bin\"\r\n\
Content-Transfer-Encoding: base64\r\n\
Content-Disposition: attachment; filename=\"x.bin\"\r\n\r\n\
aGVsbG8=\r\n\
--b1--\r\n"
            .to_vec()
    }

    #[test]
    fn single_part_leaf() {
        let e = parse_mime(SINGLE);
        assert!(!e.is_multipart());
        assert_eq!(e.media_type, "text");
        assert_eq!(e.charset.as_deref(), Some("utf-8"));
        assert_eq!(e.transfer_encoding, TransferEncoding::QuotedPrintable);
        assert_eq!(e.body, b"caf=C3=A9\r\n");
        assert_eq!(e.decoded_body(), "caf\u{e9}\r\n".as_bytes());
    }

    #[test]
    fn multipart_three_children_in_order() {
        let e = parse_mime(&three_part());
        assert!(e.is_multipart());
        assert!(!e.truncated);
        assert_eq!(e.children.len(), 3);
        assert_eq!(e.children[0].body, b"one");
        assert_eq!(e.children[1].body, b"two");
        let att = &e.children[2];
        assert!(att.is_attachment());
        assert_eq!(att.raw_filename().as_deref(), Some("x.bin"));
        assert_eq!(att.decoded_body(), b"hello");
    }

    #[test]
    fn missing_close_sets_truncated() {
        let raw = b"Content-Type: multipart/mixed; boundary=b\r\n\r\n--b\r\n\r\nhi\r\n";
        let e = parse_mime(raw);
        assert!(e.truncated);
        assert_eq!(e.children.len(), 1);
        assert_eq!(e.children[0].body, b"hi");
    }

    #[test]
    fn folded_header_unfolds() {
        let raw = b"Subject: a very\r\n long subject\r\n\r\nbody";
        let e = parse_mime(raw);
        assert_eq!(e.header("Subject"), Some("a very long subject"));
    }

    #[test]
    fn reserialize_reparse_is_structurally_equal() {
        let e = parse_mime(&three_part());
        let round = parse_mime(&e.to_bytes());
        assert_eq!(round.children.len(), e.children.len());
        for (a, b) in round.children.iter().zip(e.children.iter()) {
            assert_eq!(a.headers, b.headers);
            assert_eq!(a.body, b.body);
        }
    }

    #[test]
    fn headerless_multipart_inference() {
        let raw = b"--b1\r\nContent-Type: text/plain\r\n\r\nhi\r\n--b1--\r\n";
        let parts = parse_headerless_multipart(raw).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].body, b"hi");
        assert!(parse_headerless_multipart(b"plain text").is_none());
    }
}
