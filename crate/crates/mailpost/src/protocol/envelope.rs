//! ENVELOPE structure parsing. RFC 2047 encoded-words in subjects and
//! display names are left encoded here; decoding lives in the mime module.

use super::value::{Reader, Value};
use crate::error::{Error, Result};

/// One address from an envelope address list. `mailbox@host` is the
/// joined form used by the analytics module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Address {
    pub name: Option<String>,
    pub mailbox: String,
    pub host: String,
}

impl Address {
    pub fn address(&self) -> String {
        format!("{}@{}", self.mailbox, self.host)
    }
}

/// Structured message envelope. NIL fields are `None`, never empty
/// strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Envelope {
    /// Server INTERNALDATE when fetched alongside the envelope.
    pub internal_date: Option<String>,
    pub date: Option<String>,
    pub subject: Option<String>,
    pub from: Vec<Address>,
    pub to: Vec<Address>,
    pub cc: Vec<Address>,
    pub bcc: Vec<Address>,
    pub message_id: Option<String>,
}

fn err(msg: &str) -> Error {
    Error::MalformedEnvelope(msg.into())
}

fn addresses(v: &Value) -> Result<Vec<Address>> {
    match v {
        Value::Nil => Ok(Vec::new()),
        Value::List(items) => {
            let mut out = Vec::new();
            for item in items {
                let fields = item.as_list().ok_or_else(|| err("address is not a list"))?;
                if fields.len() < 4 {
                    return Err(err("address with fewer than 4 fields"));
                }
                let name = fields[0].as_opt_text();
                // fields[1] is the source route, obsolete
                let mailbox = fields[2].as_opt_text();
                let host = fields[3].as_opt_text();
                match (mailbox, host) {
                    (Some(mailbox), Some(host)) if !mailbox.is_empty() && !host.is_empty() => {
                        out.push(Address { name, mailbox, host });
                    }
                    // group-syntax markers (NIL host) carry no address
                    _ => {}
                }
            }
            Ok(out)
        }
        _ => Err(err("address list is neither NIL nor a list")),
    }
}

/// Parses the parenthesized ENVELOPE payload of a FETCH response.
pub fn parse_envelope(payload: &[u8]) -> Result<Envelope> {
    let mut r = Reader::new(payload);
    let v = r
        .read_value()
        .map_err(|e| Error::MalformedEnvelope(e.to_string()))?;
    envelope_from_value(&v)
}

pub(crate) fn envelope_from_value(v: &Value) -> Result<Envelope> {
    let fields = v.as_list().ok_or_else(|| err("envelope is not a list"))?;
    if fields.len() < 10 {
        return Err(err("envelope with fewer than 10 fields"));
    }
    Ok(Envelope {
        internal_date: None,
        date: fields[0].as_opt_text(),
        subject: fields[1].as_opt_text(),
        from: addresses(&fields[2])?,
        // fields[3] sender, fields[4] reply-to: not surfaced
        to: addresses(&fields[5])?,
        cc: addresses(&fields[6])?,
        bcc: addresses(&fields[7])?,
        // fields[8] in-reply-to
        message_id: fields[9].as_opt_text(),
    })
}
