//! BODYSTRUCTURE parsing into a part tree with dotted part numbers, the
//! prerequisite for locating and fetching attachment parts.

use std::collections::BTreeMap;

use super::value::{Reader, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferEncoding {
    SevenBit,
    EightBit,
    Binary,
    QuotedPrintable,
    Base64,
}

impl TransferEncoding {
    pub fn from_token(tok: &str) -> TransferEncoding {
        match tok.to_ascii_lowercase().as_str() {
            "8bit" => TransferEncoding::EightBit,
            "binary" => TransferEncoding::Binary,
            "quoted-printable" => TransferEncoding::QuotedPrintable,
            "base64" => TransferEncoding::Base64,
            // unknown encodings pass bytes through untouched
            _ => TransferEncoding::SevenBit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispositionKind {
    Attachment,
    Inline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disposition {
    pub kind: DispositionKind,
    pub params: BTreeMap<String, String>,
}

impl Disposition {
    pub fn filename(&self) -> Option<&str> {
        self.params.get("filename").map(String::as_str)
    }
}

/// One node of a message's MIME tree as reported by the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BodyStructureNode {
    /// Dotted path ("1", "2.1"); empty for a multipart root.
    pub part_number: String,
    pub media_type: String,
    pub subtype: String,
    pub parameters: BTreeMap<String, String>,
    pub transfer_encoding: TransferEncoding,
    pub disposition: Option<Disposition>,
    pub size_octets: u32,
    pub children: Vec<BodyStructureNode>,
}

impl BodyStructureNode {
    pub fn is_multipart(&self) -> bool {
        !self.children.is_empty()
    }

    /// Depth-first walk over leaf parts.
    pub fn leaves(&self) -> Vec<&BodyStructureNode> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a BodyStructureNode, out: &mut Vec<&'a BodyStructureNode>) {
            if node.children.is_empty() {
                out.push(node);
            } else {
                for c in &node.children {
                    walk(c, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// Filename from the disposition or content-type parameters, raw
    /// (possibly RFC 2047 encoded).
    pub fn raw_filename(&self) -> Option<&str> {
        self.disposition
            .as_ref()
            .and_then(|d| d.filename())
            .or_else(|| self.parameters.get("name").map(String::as_str))
    }

    /// True for parts worth extracting: an explicit attachment
    /// disposition, or any part carrying a filename (inline images
    /// included).
    pub fn is_attachment(&self) -> bool {
        matches!(
            self.disposition.as_ref().map(|d| d.kind),
            Some(DispositionKind::Attachment)
        ) || self.raw_filename().is_some()
    }
}

fn err(msg: &str) -> Error {
    Error::MalformedBodyStructure(msg.into())
}

fn params_map(v: &Value) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    if let Value::List(items) = v {
        for pair in items.chunks(2) {
            if let [k, val] = pair {
                if let (Some(k), Some(val)) = (k.as_text(), val.as_text()) {
                    map.insert(k.to_ascii_lowercase(), val);
                }
            }
        }
    }
    map
}

fn disposition(v: &Value) -> Option<Disposition> {
    let items = v.as_list()?;
    let kind = items.first()?.as_text()?;
    let kind = if kind.eq_ignore_ascii_case("inline") {
        DispositionKind::Inline
    } else {
        DispositionKind::Attachment
    };
    let params = items.get(1).map(params_map).unwrap_or_default();
    Some(Disposition { kind, params })
}

/// Parses a BODYSTRUCTURE payload. Children of a multipart root are
/// numbered "1", "2", ...; nesting appends ".k". A non-multipart message
/// is a single leaf numbered "1".
pub fn parse_bodystructure(payload: &[u8]) -> Result<BodyStructureNode> {
    let mut r = Reader::new(payload);
    let v = r
        .read_value()
        .map_err(|e| Error::MalformedBodyStructure(e.to_string()))?;
    node_from_value(&v, "")
}

pub(crate) fn node_from_value(v: &Value, path: &str) -> Result<BodyStructureNode> {
    let items = v.as_list().ok_or_else(|| err("body is not a list"))?;
    if items.is_empty() {
        return Err(err("empty body list"));
    }

    if matches!(items[0], Value::List(_)) {
        // multipart: (body)+ subtype [ext...]
        let mut children = Vec::new();
        let mut idx = 0;
        while idx < items.len() && matches!(items[idx], Value::List(_)) {
            let child_path = if path.is_empty() {
                format!("{}", idx + 1)
            } else {
                format!("{path}.{}", idx + 1)
            };
            children.push(node_from_value(&items[idx], &child_path)?);
            idx += 1;
        }
        let subtype = items
            .get(idx)
            .and_then(Value::as_text)
            .ok_or_else(|| err("multipart without subtype"))?;
        let parameters = items.get(idx + 1).map(params_map).unwrap_or_default();
        let dispo = items.get(idx + 2).and_then(disposition);
        Ok(BodyStructureNode {
            part_number: path.to_string(),
            media_type: "multipart".into(),
            subtype: subtype.to_ascii_lowercase(),
            parameters,
            transfer_encoding: TransferEncoding::SevenBit,
            disposition: dispo,
            size_octets: 0,
            children,
        })
    } else {
        // leaf: type subtype params id description encoding size [...]
        if items.len() < 7 {
            return Err(err("leaf body with fewer than 7 fields"));
        }
        let media_type = items[0]
            .as_text()
            .ok_or_else(|| err("bad media type"))?
            .to_ascii_lowercase();
        let subtype = items[1]
            .as_text()
            .ok_or_else(|| err("bad media subtype"))?
            .to_ascii_lowercase();
        let parameters = params_map(&items[2]);
        let encoding = items[5]
            .as_opt_text()
            .map(|t| TransferEncoding::from_token(&t))
            .unwrap_or(TransferEncoding::SevenBit);
        let size = items[6].as_number().unwrap_or(0);

        // optional extension fields: [lines] md5 disposition language location
        let mut ext = &items[7..];
        if media_type == "text" && !ext.is_empty() {
            ext = &ext[1..]; // line count
        }
        // message/rfc822 extensions (envelope, body, lines) are skipped:
        // such parts are treated as opaque leaves
        if media_type == "message" && subtype == "rfc822" && ext.len() >= 3 {
            ext = &ext[3..];
        }
        let dispo = ext.get(1).and_then(disposition);

        let part_number = if path.is_empty() { "1".to_string() } else { path.to_string() };
        Ok(BodyStructureNode {
            part_number,
            media_type,
            subtype,
            parameters,
            transfer_encoding: encoding,
            disposition: dispo,
            size_octets: size,
            children: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SINGLE: &[u8] =
        br#"("text" "plain" ("charset" "utf-8") NIL NIL "7bit" 345 10)"#;

    const MIXED_PDF: &[u8] = br#"(("text" "plain" ("charset" "utf-8") NIL NIL "quoted-printable" 120 4)("application" "pdf" ("name" "staa2072.pdf") NIL NIL "base64" 40000 NIL ("attachment" ("filename" "staa2072.pdf")) NIL NIL) "mixed" ("boundary" "b1") NIL NIL NIL)"#;

    const NESTED: &[u8] = br#"((("text" "plain" ("charset" "utf-8") NIL NIL "7bit" 10 1)("text" "html" ("charset" "utf-8") NIL NIL "7bit" 20 1) "alternative" ("boundary" "b2") NIL NIL NIL)("image" "png" ("name" "p.png") NIL NIL "base64" 300 NIL ("inline" ("filename" "p.png")) NIL NIL) "mixed" ("boundary" "b1") NIL NIL NIL)"#;

    #[test]
    fn single_text_part_is_leaf_one() {
        let node = parse_bodystructure(SINGLE).unwrap();
        assert_eq!(node.part_number, "1");
        assert_eq!(node.media_type, "text");
        assert_eq!(node.subtype, "plain");
        assert_eq!(node.size_octets, 345);
        assert!(node.children.is_empty());
    }

    #[test]
    fn mixed_with_pdf_attachment() {
        let root = parse_bodystructure(MIXED_PDF).unwrap();
        assert!(root.is_multipart());
        assert_eq!(root.subtype, "mixed");
        assert_eq!(root.children.len(), 2);
        assert_eq!(root.children[0].part_number, "1");
        let pdf = &root.children[1];
        assert_eq!(pdf.part_number, "2");
        assert_eq!(pdf.transfer_encoding, TransferEncoding::Base64);
        let d = pdf.disposition.as_ref().unwrap();
        assert_eq!(d.kind, DispositionKind::Attachment);
        assert_eq!(d.filename(), Some("staa2072.pdf"));
        assert!(pdf.is_attachment());
    }

    #[test]
    fn nested_multipart_numbering() {
        let root = parse_bodystructure(NESTED).unwrap();
        let numbers: Vec<&str> = root.leaves().iter().map(|l| l.part_number.as_str()).collect();
        assert_eq!(numbers, vec!["1.1", "1.2", "2"]);
        // inline image with a filename still counts as an attachment
        assert!(root.leaves()[2].is_attachment());
    }

    #[test]
    fn malformed_rejected() {
        assert!(matches!(
            parse_bodystructure(b"(\"text\" \"plain\")"),
            Err(Error::MalformedBodyStructure(_))
        ));
        assert!(matches!(
            parse_bodystructure(b"notalist"),
            Err(Error::MalformedBodyStructure(_))
        ));
    }
}
