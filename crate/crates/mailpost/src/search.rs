//! Composable search criteria rendered to RFC 3501 search keys, plus the
//! single-criterion convenience methods and the multi-criteria `search`.

use std::fmt;

use crate::error::{Error, Result};
use crate::protocol::{Arg, MessageId, ServerResponse, Status, Untagged};
use crate::session::{Phase, Session};

const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

/// A calendar date rendered as `DD-Mon-YYYY` (two-digit day).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImapDate {
    day: u8,
    month: u8, // 1..=12
    year: u16,
}

impl ImapDate {
    pub fn new(day: u8, month: u8, year: u16) -> Result<ImapDate> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidArgument(format!("bad month {month}")));
        }
        if day < 1 || day > days_in_month(month, year) {
            return Err(Error::InvalidArgument(format!(
                "bad day {day} for month {month}/{year}"
            )));
        }
        Ok(ImapDate { day, month, year })
    }

    /// Parses `01-Nov-2020`.
    pub fn parse(s: &str) -> Result<ImapDate> {
        let mut parts = s.split('-');
        let (d, m, y) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(m), Some(y), None) => (d, m, y),
            _ => return Err(Error::InvalidArgument(format!("bad date `{s}`"))),
        };
        let day: u8 = d
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad day `{d}`")))?;
        let month = MONTHS
            .iter()
            .position(|name| name.eq_ignore_ascii_case(m))
            .ok_or_else(|| Error::InvalidArgument(format!("bad month `{m}`")))?
            as u8
            + 1;
        let year: u16 = y
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad year `{y}`")))?;
        ImapDate::new(day, month, year)
    }

    pub fn day(&self) -> u8 {
        self.day
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    pub fn year(&self) -> u16 {
        self.year
    }

    /// (year, month, day) ordinal for comparisons.
    pub fn ordinal(&self) -> (u16, u8, u8) {
        (self.year, self.month, self.day)
    }
}

impl PartialOrd for ImapDate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ImapDate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ordinal().cmp(&other.ordinal())
    }
}

impl fmt::Display for ImapDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:02}-{}-{}",
            self.day,
            MONTHS[(self.month - 1) as usize],
            self.year
        )
    }
}

fn days_in_month(month: u8, year: u16) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

/// Header-ish field a string search targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StringField {
    From,
    To,
    Cc,
    Bcc,
    Subject,
    Body,
    Text,
    /// Arbitrary header field: renders `HEADER <name> <expr>`.
    Header(String),
}

impl StringField {
    fn keyword(&self) -> String {
        match self {
            StringField::From => "FROM".into(),
            StringField::To => "TO".into(),
            StringField::Cc => "CC".into(),
            StringField::Bcc => "BCC".into(),
            StringField::Subject => "SUBJECT".into(),
            StringField::Body => "BODY".into(),
            StringField::Text => "TEXT".into(),
            StringField::Header(name) => format!("HEADER {name}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    Seen,
    Answered,
    Flagged,
    Deleted,
    Draft,
    Recent,
}

impl Flag {
    fn keyword(self) -> &'static str {
        match self {
            Flag::Seen => "SEEN",
            Flag::Answered => "ANSWERED",
            Flag::Flagged => "FLAGGED",
            Flag::Deleted => "DELETED",
            Flag::Draft => "DRAFT",
            Flag::Recent => "RECENT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeRelation {
    Larger,
    Smaller,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WithinRelation {
    Younger,
    Older,
}

/// Composable search predicate AST. `Or` is strictly binary, mirroring
/// the IMAP OR key.
#[derive(Debug, Clone, PartialEq)]
pub enum SearchCriterion {
    /// Matches every message.
    All,
    Since(ImapDate),
    Before(ImapDate),
    OnDate(ImapDate),
    StringMatch { field: StringField, expr: String },
    FlagSet { flag: Flag, negated: bool },
    Size { relation: SizeRelation, octets: u32 },
    Within { relation: WithinRelation, seconds: u32 },
    And(Vec<SearchCriterion>),
    Or(Box<SearchCriterion>, Box<SearchCriterion>),
    Not(Box<SearchCriterion>),
}

impl SearchCriterion {
    /// Enforces the invariants the AST shape cannot: non-empty And,
    /// non-empty string expressions, positive sizes and windows.
    pub fn validate(&self) -> Result<()> {
        match self {
            SearchCriterion::And(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidArgument("empty AND".into()));
                }
                list.iter().try_for_each(SearchCriterion::validate)
            }
            SearchCriterion::Or(a, b) => {
                a.validate()?;
                b.validate()
            }
            SearchCriterion::Not(inner) => inner.validate(),
            SearchCriterion::StringMatch { expr, .. } => {
                if expr.is_empty() {
                    return Err(Error::InvalidArgument("empty search expression".into()));
                }
                if expr.contains('\r') || expr.contains('\n') {
                    return Err(Error::InvalidArgument("CR/LF in search expression".into()));
                }
                Ok(())
            }
            SearchCriterion::Size { octets, .. } => {
                if *octets == 0 {
                    Err(Error::InvalidArgument("size must be >= 1 octet".into()))
                } else {
                    Ok(())
                }
            }
            SearchCriterion::Within { seconds, .. } => {
                if *seconds == 0 {
                    Err(Error::InvalidArgument("window must be >= 1 second".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn uses_within(&self) -> bool {
        match self {
            SearchCriterion::Within { .. } => true,
            SearchCriterion::And(list) => list.iter().any(SearchCriterion::uses_within),
            SearchCriterion::Or(a, b) => a.uses_within() || b.uses_within(),
            SearchCriterion::Not(inner) => inner.uses_within(),
            _ => false,
        }
    }
}

fn quote(expr: &str) -> String {
    let mut out = String::with_capacity(expr.len() + 2);
    out.push('"');
    for c in expr.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Renders a criterion to its RFC 3501 search-key string.
pub fn render_criterion(c: &SearchCriterion) -> String {
    match c {
        SearchCriterion::All => "ALL".to_string(),
        SearchCriterion::Since(d) => format!("SINCE {d}"),
        SearchCriterion::Before(d) => format!("BEFORE {d}"),
        SearchCriterion::OnDate(d) => format!("ON {d}"),
        SearchCriterion::StringMatch { field, expr } => {
            format!("{} {}", field.keyword(), quote(expr))
        }
        SearchCriterion::FlagSet { flag, negated } => {
            if *negated {
                format!("NOT {}", flag.keyword())
            } else {
                flag.keyword().to_string()
            }
        }
        SearchCriterion::Size { relation, octets } => match relation {
            SizeRelation::Larger => format!("LARGER {octets}"),
            SizeRelation::Smaller => format!("SMALLER {octets}"),
        },
        SearchCriterion::Within { relation, seconds } => match relation {
            WithinRelation::Younger => format!("YOUNGER {seconds}"),
            WithinRelation::Older => format!("OLDER {seconds}"),
        },
        SearchCriterion::And(list) => list
            .iter()
            .map(render_criterion)
            .collect::<Vec<_>>()
            .join(" "),
        SearchCriterion::Or(a, b) => {
            format!("OR {} {}", render_operand(a), render_operand(b))
        }
        SearchCriterion::Not(inner) => format!("NOT {}", render_operand(inner)),
    }
}

/// OR and NOT take exactly one key each; a multi-key AND operand must be
/// parenthesized to stay a single key.
fn render_operand(c: &SearchCriterion) -> String {
    match c {
        SearchCriterion::And(list) if list.len() != 1 => format!("({})", render_criterion(c)),
        _ => render_criterion(c),
    }
}

impl Session {
    /// Executes a search against the selected folder, `UID SEARCH` by
    /// default. Results come back in server order.
    pub fn search(&mut self, criterion: &SearchCriterion) -> Result<Vec<MessageId>> {
        self.require_phase(Phase::Selected, "search")?;
        criterion.validate()?;
        if criterion.uses_within() && !self.has_capability("WITHIN") {
            return Err(Error::CapabilityMissing("WITHIN"));
        }
        let verb = if self.use_uid { "UID SEARCH" } else { "SEARCH" };
        let rendered = render_criterion(criterion);
        let (responses, status, text) = self.exec(verb, &[Arg::Raw(rendered)])?;
        if status != Status::Ok {
            return Err(Error::SearchRefused(text));
        }
        let kind = if self.use_uid {
            crate::protocol::IdKind::Uid
        } else {
            crate::protocol::IdKind::SequenceNumber
        };
        let mut ids = Vec::new();
        for r in &responses {
            if let ServerResponse::Untagged(Untagged::Search(values)) = r {
                ids.extend(values.iter().map(|&value| MessageId { value, kind }));
            }
        }
        Ok(ids)
    }

    /// `SINCE since BEFORE before`; requires since < before.
    pub fn search_period(&mut self, since: ImapDate, before: ImapDate) -> Result<Vec<MessageId>> {
        if since >= before {
            return Err(Error::InvalidRange);
        }
        self.search(&SearchCriterion::And(vec![
            SearchCriterion::Since(since),
            SearchCriterion::Before(before),
        ]))
    }

    pub fn search_string(&mut self, expr: &str, field: StringField) -> Result<Vec<MessageId>> {
        self.search(&SearchCriterion::StringMatch {
            field,
            expr: expr.to_string(),
        })
    }

    pub fn search_flag(&mut self, flag: Flag, negated: bool) -> Result<Vec<MessageId>> {
        self.search(&SearchCriterion::FlagSet { flag, negated })
    }

    pub fn search_size(&mut self, relation: SizeRelation, octets: u32) -> Result<Vec<MessageId>> {
        self.search(&SearchCriterion::Size { relation, octets })
    }

    pub fn search_within(
        &mut self,
        relation: WithinRelation,
        seconds: u32,
    ) -> Result<Vec<MessageId>> {
        self.search(&SearchCriterion::Within { relation, seconds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> ImapDate {
        ImapDate::parse(s).unwrap()
    }

    #[test]
    fn date_renders_two_digit_day() {
        assert_eq!(date("01-Nov-2020").to_string(), "01-Nov-2020");
        assert_eq!(date("5-Jan-2021").to_string(), "05-Jan-2021");
    }

    #[test]
    fn date_rejects_invalid() {
        assert!(ImapDate::new(31, 2, 2020).is_err());
        assert!(ImapDate::new(29, 2, 2021).is_err());
        assert!(ImapDate::new(29, 2, 2020).is_ok()); // leap year
        assert!(ImapDate::new(29, 2, 2000).is_ok()); // 400-rule
        assert!(ImapDate::new(29, 2, 1900).is_err()); // 100-rule
        assert!(ImapDate::parse("2020-11-01").is_err());
    }

    #[test]
    fn date_ordering() {
        assert!(date("01-Nov-2020") < date("01-Dec-2020"));
        assert!(date("31-Dec-2020") < date("01-Jan-2021"));
    }

    #[test]
    fn render_period_and() {
        let c = SearchCriterion::And(vec![
            SearchCriterion::Since(date("01-Nov-2020")),
            SearchCriterion::Before(date("01-Dec-2020")),
        ]);
        assert_eq!(render_criterion(&c), "SINCE 01-Nov-2020 BEFORE 01-Dec-2020");
    }

    #[test]
    fn render_string_match() {
        let c = SearchCriterion::StringMatch {
            field: StringField::From,
            expr: "@ksu.edu".into(),
        };
        assert_eq!(render_criterion(&c), "FROM \"@ksu.edu\"");
    }

    #[test]
    fn render_not_seen() {
        let c = SearchCriterion::Not(Box::new(SearchCriterion::FlagSet {
            flag: Flag::Seen,
            negated: false,
        }));
        assert_eq!(render_criterion(&c), "NOT SEEN");
    }

    #[test]
    fn render_or_size_within() {
        let c = SearchCriterion::Or(
            Box::new(SearchCriterion::Size {
                relation: SizeRelation::Larger,
                octets: 512000,
            }),
            Box::new(SearchCriterion::Within {
                relation: WithinRelation::Younger,
                seconds: 3600,
            }),
        );
        assert_eq!(render_criterion(&c), "OR LARGER 512000 YOUNGER 3600");
    }

    #[test]
    fn render_header_field() {
        let c = SearchCriterion::StringMatch {
            field: StringField::Header("X-Priority".into()),
            expr: "1".into(),
        };
        assert_eq!(render_criterion(&c), "HEADER X-Priority \"1\"");
    }

    #[test]
    fn validate_rejects_degenerate() {
        assert!(SearchCriterion::And(vec![]).validate().is_err());
        assert!(SearchCriterion::StringMatch {
            field: StringField::Text,
            expr: String::new()
        }
        .validate()
        .is_err());
        assert!(SearchCriterion::Size {
            relation: SizeRelation::Larger,
            octets: 0
        }
        .validate()
        .is_err());
        assert!(SearchCriterion::Within {
            relation: WithinRelation::Older,
            seconds: 0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn uses_within_recurses() {
        let c = SearchCriterion::Not(Box::new(SearchCriterion::Or(
            Box::new(SearchCriterion::Since(date("01-Nov-2020"))),
            Box::new(SearchCriterion::Within {
                relation: WithinRelation::Younger,
                seconds: 60,
            }),
        )));
        assert!(c.uses_within());
        assert!(!SearchCriterion::Since(date("01-Nov-2020")).uses_within());
    }
}
