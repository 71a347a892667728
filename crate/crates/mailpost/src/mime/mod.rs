//! MIME machinery: transfer decoding, RFC 2047 header decoding, multipart
//! parsing, text cleanup, and attachment extraction to disk.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::fetch::{FetchItem, FetchResult};
use crate::protocol::MessageId;

mod decode;
mod parse;

pub use decode::{
    decode_base64, decode_mime_header, decode_quoted_printable, decode_text_lossy, Charset,
};
pub use parse::{parse_headerless_multipart, parse_mime, param_value, ContentDisposition, MimeEntity};

/// Attachment metadata discovered in a message, extraction pending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttachmentInfo {
    pub source_id: MessageId,
    /// Sanitized, RFC 2047 decoded filename.
    pub filename: String,
    pub media_type: String,
}

/// A decoded attachment payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attachment {
    pub info: AttachmentInfo,
    pub content: Vec<u8>,
}

/// Strips directory components, leading dots, and control characters from
/// an attachment filename. Empty results fall back to `part-<n>.bin`.
pub fn sanitize_filename(raw: &str, part_index: usize) -> String {
    let last = raw
        .replace('\\', "/")
        .split('/')
        .rev()
        .find(|seg| !seg.is_empty())
        .unwrap_or("")
        .to_string();
    let cleaned: String = last
        .chars()
        .filter(|c| !c.is_control())
        .collect::<String>()
        .trim_start_matches('.')
        .trim()
        .to_string();
    if cleaned.is_empty() {
        format!("part-{part_index}.bin")
    } else {
        cleaned
    }
}

fn attachment_leaves(entity: &MimeEntity) -> Vec<&MimeEntity> {
    entity
        .leaves()
        .into_iter()
        .filter(|leaf| leaf.is_attachment())
        .collect()
}

fn info_for(leaf: &MimeEntity, id: MessageId, index: usize) -> AttachmentInfo {
    let raw = leaf.raw_filename().unwrap_or_default();
    let decoded = decode_mime_header(&raw);
    AttachmentInfo {
        source_id: id,
        filename: sanitize_filename(&decoded, index),
        media_type: format!("{}/{}", leaf.media_type, leaf.subtype),
    }
}

/// Lists attachment parts (disposition `attachment` or any part carrying
/// a filename) in tree order. No content is decoded.
pub fn list_attachments(entity: &MimeEntity, id: MessageId) -> Vec<AttachmentInfo> {
    attachment_leaves(entity)
        .iter()
        .enumerate()
        .map(|(i, leaf)| info_for(leaf, id, i + 1))
        .collect()
}

/// Like [`list_attachments`] but with transfer-decoded content.
pub fn extract_attachments(entity: &MimeEntity, id: MessageId) -> Vec<Attachment> {
    attachment_leaves(entity)
        .iter()
        .enumerate()
        .map(|(i, leaf)| Attachment {
            info: info_for(leaf, id, i + 1),
            content: leaf.decoded_body(),
        })
        .collect()
}

/// Parses fetched Body/Text payloads and writes their attachments under
/// `<dest>/<username>/<folder>/<message id>/<filename>`. Existing files
/// are overwritten; collisions within one message get a numeric suffix.
/// Per-file I/O errors are collected, not fatal to the batch.
pub fn get_attachments(
    fetched: &[FetchResult],
    dest_dir: &Path,
    username: &str,
    folder: &str,
) -> Result<Vec<PathBuf>> {
    let mut groups = Vec::new();
    for result in fetched {
        let payload = match &result.item {
            FetchItem::Body(bytes) | FetchItem::Text(bytes) => bytes,
            _ => continue,
        };
        groups.push((result.id, attachments_from_payload(payload, result.id)));
    }
    write_attachment_groups(&groups, dest_dir, username, folder)
}

/// Writes per-message attachment groups into the
/// `<dest>/<username>/<folder>/<message id>/<filename>` layout.
/// [`get_attachments`] and the direct per-part fetch path both funnel
/// through here so the trees they produce are identical.
pub fn write_attachment_groups(
    groups: &[(MessageId, Vec<Attachment>)],
    dest_dir: &Path,
    username: &str,
    folder: &str,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut io_errors: Vec<(PathBuf, std::io::Error)> = Vec::new();
    for (id, attachments) in groups {
        if attachments.is_empty() {
            continue;
        }
        let msg_dir = dest_dir
            .join(sanitize_filename(username, 0))
            .join(sanitize_filename(folder, 0))
            .join(id.value.to_string());
        if let Err(e) = std::fs::create_dir_all(&msg_dir) {
            io_errors.push((msg_dir.clone(), e));
            continue;
        }
        let mut used: HashSet<String> = HashSet::new();
        for att in attachments {
            let name = dedupe_name(&att.info.filename, &mut used);
            let path = msg_dir.join(&name);
            match std::fs::write(&path, &att.content) {
                Ok(()) => written.push(path.canonicalize().unwrap_or(path)),
                Err(e) => io_errors.push((path, e)),
            }
        }
    }
    if written.is_empty() {
        if let Some((path, e)) = io_errors.into_iter().next() {
            return Err(crate::error::Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            )));
        }
    }
    Ok(written)
}

/// MIME-parses a fetched payload, inferring the boundary when the payload
/// is a headerless BODY[TEXT] section.
pub fn attachments_from_payload(payload: &[u8], id: MessageId) -> Vec<Attachment> {
    let entity = parse_mime(payload);
    let direct = extract_attachments(&entity, id);
    if !direct.is_empty() {
        return direct;
    }
    if let Some(parts) = parse_headerless_multipart(payload) {
        let mut out = Vec::new();
        let mut index = 0;
        for part in &parts {
            for leaf in attachment_leaves(part) {
                index += 1;
                out.push(Attachment {
                    info: info_for(leaf, id, index),
                    content: leaf.decoded_body(),
                });
            }
        }
        return out;
    }
    Vec::new()
}

fn dedupe_name(name: &str, used: &mut HashSet<String>) -> String {
    if used.insert(name.to_string()) {
        return name.to_string();
    }
    let (stem, ext) = match name.rsplit_once('.') {
        Some((s, e)) if !s.is_empty() => (s.to_string(), format!(".{e}")),
        _ => (name.to_string(), String::new()),
    };
    for k in 1.. {
        let candidate = format!("{stem}-{k}{ext}");
        if used.insert(candidate.clone()) {
            return candidate;
        }
    }
    unreachable!()
}

/// Text cleanup for fetched payloads: per payload, apply transfer decoding
/// when headers announce it (or the content is recognizably encoded),
/// convert to text (UTF-8 with Latin-1 fallback), and normalize line
/// endings to `\n`.
pub fn clean_msg_text(payloads: &[Vec<u8>]) -> Vec<String> {
    payloads.iter().map(|p| clean_one(p)).collect()
}

fn clean_one(payload: &[u8]) -> String {
    let entity = parse_mime(payload);
    let (bytes, charset) = if !entity.headers.is_empty() || entity.is_multipart() {
        // prefer the first text leaf of a structured message
        let leaf = entity
            .leaves()
            .into_iter()
            .find(|l| l.media_type == "text")
            .cloned();
        match leaf {
            Some(l) => (l.decoded_body(), l.charset.clone()),
            None => (entity.decoded_body(), entity.charset.clone()),
        }
    } else {
        (heuristic_decode(payload), None)
    };
    let text = decode_text_lossy(&bytes, charset.as_deref());
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// Headerless payloads: decode base64 when the whole payload is base64
/// shaped, otherwise run the (identity-on-plain-text) QP decoder.
fn heuristic_decode(payload: &[u8]) -> Vec<u8> {
    let text = String::from_utf8_lossy(payload);
    let compact: String = text.chars().filter(|c| !c.is_ascii_whitespace()).collect();
    if !compact.is_empty()
        && compact.len() % 4 == 0
        && compact
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'+' | b'/' | b'='))
        && compact.len() >= 8
    {
        if let Ok(decoded) = decode_base64(&compact) {
            return decoded;
        }
    }
    decode_quoted_printable(payload)
}
