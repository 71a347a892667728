//! Message content retrieval: whole bodies, headers, text sections,
//! metadata attributes, and attachment parts. All fetches use BODY.PEEK
//! so they never set \Seen as a side effect.

use std::collections::HashMap;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mime::{self, Attachment};
use crate::protocol::{
    envelope_from_value, node_from_value, Arg, BodyStructureNode, Envelope, IdKind, MessageId,
    ServerResponse, Status, TransferEncoding, Untagged,
};
use crate::protocol::value::Value;
use crate::session::{Phase, Session};

/// One fetched payload for one message.
#[derive(Debug, Clone, PartialEq)]
pub struct FetchResult {
    pub id: MessageId,
    pub item: FetchItem,
}

/// What was fetched. Bytes are the raw wire payload; decoding is the
/// mime module's job.
#[derive(Debug, Clone, PartialEq)]
pub enum FetchItem {
    /// Full RFC 822 message (`BODY[]`).
    Body(Vec<u8>),
    /// Header block, full or field-filtered.
    Header(Vec<u8>),
    /// `BODY[TEXT]`: the body without the top-level header.
    Text(Vec<u8>),
    Metadata(MetadataMap),
    /// One MIME part addressed by its dotted part number.
    Part { part_number: String, bytes: Vec<u8> },
}

/// Metadata attributes returned by [`Session::fetch_metadata`]. Only the
/// requested attributes are populated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetadataMap {
    pub envelope: Option<Envelope>,
    pub internal_date: Option<String>,
    pub flags: Option<Vec<String>>,
    pub size: Option<u32>,
    pub uid: Option<u32>,
}

/// Fetchable metadata attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribute {
    Envelope,
    InternalDate,
    Flags,
    Rfc822Size,
    Uid,
}

impl Attribute {
    pub fn keyword(self) -> &'static str {
        match self {
            Attribute::Envelope => "ENVELOPE",
            Attribute::InternalDate => "INTERNALDATE",
            Attribute::Flags => "FLAGS",
            Attribute::Rfc822Size => "RFC822.SIZE",
            Attribute::Uid => "UID",
        }
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Attribute> {
        match s.to_ascii_uppercase().as_str() {
            "ENVELOPE" => Ok(Attribute::Envelope),
            "INTERNALDATE" => Ok(Attribute::InternalDate),
            "FLAGS" => Ok(Attribute::Flags),
            "RFC822.SIZE" | "SIZE" => Ok(Attribute::Rfc822Size),
            "UID" => Ok(Attribute::Uid),
            _ => Err(Error::UnknownAttribute(s.to_string())),
        }
    }
}

/// Per-message outcome of a batch fetch; order matches the input ids.
pub type FetchOutcome = std::result::Result<FetchResult, Error>;

impl Session {
    /// Fetches full message bodies, or a single top-level MIME part when
    /// `mime_level` is given. One FETCH command covers the whole batch.
    pub fn fetch_body(
        &mut self,
        ids: &[MessageId],
        mime_level: Option<u32>,
    ) -> Result<Vec<FetchOutcome>> {
        let section = match mime_level {
            None => "BODY.PEEK[]".to_string(),
            Some(0) => return Err(Error::InvalidArgument("MIME part numbers start at 1".into())),
            Some(k) => format!("BODY.PEEK[{k}]"),
        };
        let part = mime_level.map(|k| k.to_string());
        self.fetch_section(ids, &section, move |bytes| match &part {
            None => FetchItem::Body(bytes),
            Some(p) => FetchItem::Part { part_number: p.clone(), bytes },
        })
    }

    /// Fetches header blocks. `fields` filters to specific header names;
    /// `None` or an empty list fetches the full header.
    pub fn fetch_header(
        &mut self,
        ids: &[MessageId],
        fields: Option<&[String]>,
    ) -> Result<Vec<FetchOutcome>> {
        let section = match fields {
            Some(names) if !names.is_empty() => {
                for name in names {
                    if name.is_empty() || !name.bytes().all(|b| b.is_ascii_graphic()) {
                        return Err(Error::InvalidArgument(format!(
                            "bad header field name `{name}`"
                        )));
                    }
                }
                let upper: Vec<String> =
                    names.iter().map(|n| n.to_ascii_uppercase()).collect();
                format!("BODY.PEEK[HEADER.FIELDS ({})]", upper.join(" "))
            }
            _ => "BODY.PEEK[HEADER]".to_string(),
        };
        self.fetch_section(ids, &section, FetchItem::Header)
    }

    /// Fetches `BODY[TEXT]`: everything after the top-level header.
    pub fn fetch_text(&mut self, ids: &[MessageId]) -> Result<Vec<FetchOutcome>> {
        self.fetch_section(ids, "BODY.PEEK[TEXT]", FetchItem::Text)
    }

    /// Fetches the requested metadata attributes in one command.
    pub fn fetch_metadata(
        &mut self,
        ids: &[MessageId],
        attrs: &[Attribute],
    ) -> Result<Vec<FetchOutcome>> {
        if attrs.is_empty() {
            return Err(Error::InvalidArgument("no attributes requested".into()));
        }
        let keywords: Vec<&str> = attrs.iter().map(|a| a.keyword()).collect();
        let spec = format!("({})", keywords.join(" "));
        let by_id = self.run_fetch(ids, &spec)?;
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            out.push(match by_id.get(&id.value) {
                None => Err(Error::NoSuchMessage(id.value)),
                Some(items) => metadata_from_items(items).map(|map| FetchResult {
                    id,
                    item: FetchItem::Metadata(map),
                }),
            });
        }
        Ok(out)
    }

    /// Fetches the BODYSTRUCTURE of each message.
    pub fn fetch_bodystructure(
        &mut self,
        ids: &[MessageId],
    ) -> Result<Vec<std::result::Result<(MessageId, BodyStructureNode), Error>>> {
        let by_id = self.run_fetch(ids, "BODYSTRUCTURE")?;
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            out.push(match by_id.get(&id.value) {
                None => Err(Error::NoSuchMessage(id.value)),
                Some(items) => match lookup(items, "BODYSTRUCTURE") {
                    Some(v) => node_from_value(v, "").map(|node| (id, node)),
                    None => Err(Error::MalformedResponse(
                        "FETCH response lacks BODYSTRUCTURE".into(),
                    )),
                },
            });
        }
        Ok(out)
    }

    /// Fetches and transfer-decodes every attachment of each message:
    /// BODYSTRUCTURE first, then one FETCH per message covering all its
    /// attachment parts. A message without attachments yields
    /// [`Error::NoAttachments`].
    pub fn fetch_attachments(
        &mut self,
        ids: &[MessageId],
    ) -> Result<Vec<std::result::Result<Vec<Attachment>, Error>>> {
        let structures = self.fetch_bodystructure(ids)?;
        let mut out = Vec::with_capacity(ids.len());
        for entry in structures {
            let (id, node) = match entry {
                Ok(pair) => pair,
                Err(e) => {
                    out.push(Err(e));
                    continue;
                }
            };
            out.push(self.attachments_for(id, &node));
        }
        Ok(out)
    }

    fn attachments_for(
        &mut self,
        id: MessageId,
        node: &BodyStructureNode,
    ) -> std::result::Result<Vec<Attachment>, Error> {
        let leaves: Vec<&BodyStructureNode> = node
            .leaves()
            .into_iter()
            .filter(|leaf| leaf.is_attachment())
            .collect();
        if leaves.is_empty() {
            return Err(Error::NoAttachments(id.value));
        }
        let sections: Vec<String> = leaves
            .iter()
            .map(|leaf| format!("BODY.PEEK[{}]", leaf.part_number))
            .collect();
        let spec = format!("({})", sections.join(" "));
        let by_id = self.run_fetch(&[id], &spec)?;
        let items = by_id
            .get(&id.value)
            .ok_or(Error::NoSuchMessage(id.value))?;
        let mut atts = Vec::with_capacity(leaves.len());
        for (i, leaf) in leaves.iter().enumerate() {
            let key_section = format!("[{}]", leaf.part_number);
            let bytes = items
                .iter()
                .find(|(k, _)| body_section(k) == Some(key_section.as_str()))
                .and_then(|(_, v)| str_bytes(v))
                .ok_or_else(|| {
                    Error::MalformedResponse(format!(
                        "FETCH response lacks BODY{key_section}"
                    ))
                })?;
            let content = decode_part(&bytes, leaf.transfer_encoding)?;
            let raw_name = leaf.raw_filename().unwrap_or_default();
            let decoded = mime::decode_mime_header(&raw_name);
            atts.push(Attachment {
                info: mime::AttachmentInfo {
                    source_id: id,
                    filename: mime::sanitize_filename(&decoded, i + 1),
                    media_type: format!("{}/{}", leaf.media_type, leaf.subtype),
                },
                content,
            });
        }
        Ok(atts)
    }

    /// Shared path for single-section fetches: run the batch, then map
    /// each id's echoed section payload through `wrap`.
    fn fetch_section(
        &mut self,
        ids: &[MessageId],
        section: &str,
        wrap: impl Fn(Vec<u8>) -> FetchItem,
    ) -> Result<Vec<FetchOutcome>> {
        let by_id = self.run_fetch(ids, section)?;
        let mut out = Vec::with_capacity(ids.len());
        for &id in ids {
            out.push(match by_id.get(&id.value) {
                None => Err(Error::NoSuchMessage(id.value)),
                Some(items) => match items
                    .iter()
                    .find(|(k, _)| body_section(k).is_some())
                    .and_then(|(_, v)| str_bytes(v))
                {
                    Some(bytes) => Ok(FetchResult { id, item: wrap(bytes) }),
                    None => Err(Error::MalformedResponse(
                        "FETCH response lacks the requested section".into(),
                    )),
                },
            });
        }
        Ok(out)
    }

    /// Issues one FETCH (or UID FETCH) for the whole id set and indexes
    /// the untagged FETCH data by message id. Multiple responses for one
    /// id merge their item lists.
    fn run_fetch(
        &mut self,
        ids: &[MessageId],
        spec: &str,
    ) -> Result<HashMap<u32, Vec<(String, Value)>>> {
        self.require_phase(Phase::Selected, "fetch")?;
        if ids.is_empty() {
            return Err(Error::InvalidArgument("empty id list".into()));
        }
        let expected_kind = if self.use_uid { IdKind::Uid } else { IdKind::SequenceNumber };
        if ids.iter().any(|id| id.kind != expected_kind) {
            return Err(Error::InvalidArgument(
                "id kind does not match the session's addressing mode".into(),
            ));
        }
        let set = ids
            .iter()
            .map(|id| id.value.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let verb = if self.use_uid { "UID FETCH" } else { "FETCH" };
        let (responses, status, text) =
            self.exec(verb, &[Arg::Raw(set), Arg::Raw(spec.to_string())])?;
        if status != Status::Ok {
            return Err(Error::FolderOpFailed(text));
        }
        let mut by_id: HashMap<u32, Vec<(String, Value)>> = HashMap::new();
        for r in responses {
            if let ServerResponse::Untagged(Untagged::Fetch { seq, items }) = r {
                let key = if self.use_uid {
                    match lookup(&items, "UID").and_then(Value::as_number) {
                        Some(uid) => uid,
                        // a FETCH response without UID in uid mode is
                        // unsolicited; ignore it
                        None => continue,
                    }
                } else {
                    seq
                };
                by_id.entry(key).or_default().extend(items);
            }
        }
        Ok(by_id)
    }
}

fn lookup<'a>(items: &'a [(String, Value)], key: &str) -> Option<&'a Value> {
    items
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(key))
        .map(|(_, v)| v)
}

/// For a key like `BODY[TEXT]` returns `[TEXT]`; `None` for non-BODY keys.
fn body_section(key: &str) -> Option<&str> {
    let rest = key
        .strip_prefix("BODY")
        .or_else(|| key.strip_prefix("body"))?;
    if rest.starts_with('[') && rest.ends_with(']') {
        Some(rest)
    } else {
        None
    }
}

fn str_bytes(v: &Value) -> Option<Vec<u8>> {
    match v {
        Value::Str(b) => Some(b.clone()),
        Value::Atom(a) if a != "NIL" => Some(a.clone().into_bytes()),
        _ => None,
    }
}

fn metadata_from_items(items: &[(String, Value)]) -> std::result::Result<MetadataMap, Error> {
    let mut map = MetadataMap::default();
    for (key, value) in items {
        match key.to_ascii_uppercase().as_str() {
            "ENVELOPE" => map.envelope = Some(envelope_from_value(value)?),
            "INTERNALDATE" => map.internal_date = value.as_text(),
            "FLAGS" => {
                map.flags = value
                    .as_list()
                    .map(|list| list.iter().filter_map(Value::as_text).collect())
            }
            "RFC822.SIZE" => map.size = value.as_number(),
            "UID" => map.uid = value.as_number(),
            _ => {}
        }
    }
    Ok(map)
}

fn decode_part(bytes: &[u8], encoding: TransferEncoding) -> Result<Vec<u8>> {
    Ok(match encoding {
        TransferEncoding::Base64 => {
            mime::decode_base64(&String::from_utf8_lossy(bytes))?
        }
        TransferEncoding::QuotedPrintable => mime::decode_quoted_printable(bytes),
        _ => bytes.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attribute_from_str() {
        assert_eq!("envelope".parse::<Attribute>().unwrap(), Attribute::Envelope);
        assert_eq!("RFC822.SIZE".parse::<Attribute>().unwrap(), Attribute::Rfc822Size);
        assert!(matches!(
            "SNEEZE".parse::<Attribute>(),
            Err(Error::UnknownAttribute(_))
        ));
    }

    #[test]
    fn body_section_extraction() {
        assert_eq!(body_section("BODY[]"), Some("[]"));
        assert_eq!(body_section("BODY[HEADER.FIELDS (FROM)]"), Some("[HEADER.FIELDS (FROM)]"));
        assert_eq!(body_section("BODY[2.1]"), Some("[2.1]"));
        assert_eq!(body_section("UID"), None);
        assert_eq!(body_section("BODYSTRUCTURE"), None);
    }

    #[test]
    fn metadata_map_population() {
        let items = vec![
            ("UID".to_string(), Value::Atom("457".into())),
            ("RFC822.SIZE".to_string(), Value::Atom("30000".into())),
            (
                "FLAGS".to_string(),
                Value::List(vec![Value::Atom("\\Seen".into())]),
            ),
            (
                "INTERNALDATE".to_string(),
                Value::Str(b"17-Nov-2020 09:30:00 +0000".to_vec()),
            ),
        ];
        let map = metadata_from_items(&items).unwrap();
        assert_eq!(map.uid, Some(457));
        assert_eq!(map.size, Some(30000));
        assert_eq!(map.flags.as_deref(), Some(&["\\Seen".to_string()][..]));
        assert_eq!(map.internal_date.as_deref(), Some("17-Nov-2020 09:30:00 +0000"));
        assert!(map.envelope.is_none());
    }

    #[test]
    fn decode_part_by_encoding() {
        assert_eq!(
            decode_part(b"aGVsbG8=", TransferEncoding::Base64).unwrap(),
            b"hello"
        );
        assert_eq!(
            decode_part(b"caf=C3=A9", TransferEncoding::QuotedPrintable).unwrap(),
            "café".as_bytes()
        );
        assert_eq!(
            decode_part(b"as-is", TransferEncoding::SevenBit).unwrap(),
            b"as-is"
        );
    }
}
