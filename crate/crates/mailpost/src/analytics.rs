//! Mailbox analytics: sender-frequency reporting with an SVG chart, and
//! lexicon-based sentiment counting over cleaned message text.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mime::decode_mime_header;
use crate::protocol::{Envelope, MessageId};
use crate::search::ImapDate;

/// The ten sentiment categories, in canonical column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Category {
    Anger,
    Anticipation,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Trust,
    Negative,
    Positive,
}

pub const CATEGORIES: [Category; 10] = [
    Category::Anger,
    Category::Anticipation,
    Category::Disgust,
    Category::Fear,
    Category::Joy,
    Category::Sadness,
    Category::Surprise,
    Category::Trust,
    Category::Negative,
    Category::Positive,
];

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Anger => "anger",
            Category::Anticipation => "anticipation",
            Category::Disgust => "disgust",
            Category::Fear => "fear",
            Category::Joy => "joy",
            Category::Sadness => "sadness",
            Category::Surprise => "surprise",
            Category::Trust => "trust",
            Category::Negative => "negative",
            Category::Positive => "positive",
        }
    }

    pub fn from_name(s: &str) -> Option<Category> {
        CATEGORIES.iter().copied().find(|c| c.name() == s)
    }
}

/// One row of the sender-frequency table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyRow {
    /// Lowercase-normalized from-address.
    pub email: String,
    /// First-seen decoded display name for that address; may be empty.
    pub name: String,
    pub count: u32,
}

/// Sender-frequency analysis over one search period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyReport {
    /// Sorted by count descending, address ascending on ties.
    pub rows: Vec<FrequencyRow>,
    pub period: (ImapDate, ImapDate),
    /// Envelopes without any from address.
    pub skipped: u32,
}

/// Counts messages per from-address (first from address per envelope)
/// and keeps the `top_n` most frequent senders.
pub fn sender_frequency(
    envelopes: &[(MessageId, Envelope)],
    top_n: usize,
    period: (ImapDate, ImapDate),
) -> FrequencyReport {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    let mut skipped = 0u32;
    for (_, env) in envelopes {
        let Some(addr) = env.from.first() else {
            skipped += 1;
            continue;
        };
        let email = addr.address().to_ascii_lowercase();
        *counts.entry(email.clone()).or_insert(0) += 1;
        if let Some(name) = &addr.name {
            names
                .entry(email)
                .or_insert_with(|| decode_mime_header(name));
        }
    }
    let mut rows: Vec<FrequencyRow> = counts
        .into_iter()
        .map(|(email, count)| FrequencyRow {
            name: names.get(&email).cloned().unwrap_or_default(),
            email,
            count,
        })
        .collect();
    // count descending; ties by address ascending
    rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.email.cmp(&b.email)));
    rows.truncate(top_n);
    FrequencyReport { rows, period, skipped }
}

/// CSV rendering of a frequency report: `email,name,count` with a header.
pub fn frequency_csv(report: &FrequencyReport) -> String {
    let mut out = String::from("email,name,count\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{}\n",
            csv_field(&row.email),
            csv_field(&row.name),
            row.count
        ));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Splits text into lowercase alphabetic tokens, applying the cleaning
/// steps in order: line breaks become spaces; split on single spaces;
/// drop tokens containing digits, underscores, "http", "www", "nbsp",
/// "@", or a lowercase-to-uppercase transition; strip non-word
/// characters and lowercase; strip any remaining non-alphabetic
/// characters; drop empties.
pub fn tokenize_clean(text: &str) -> Vec<String> {
    let spaced: String = text
        .chars()
        .map(|c| if c == '\r' || c == '\n' { ' ' } else { c })
        .collect();
    spaced
        .split(' ')
        .filter(|tok| {
            !(tok.chars().any(|c| c.is_ascii_digit())
                || tok.contains('_')
                || tok.contains("http")
                || tok.contains("www")
                || tok.contains("nbsp")
                || tok.contains('@')
                || has_case_transition(tok))
        })
        .map(|tok| {
            // strip non-word characters, lowercase, then keep letters only
            let worded: String = tok
                .chars()
                .filter(|c| c.is_ascii_alphanumeric() || *c == '_')
                .collect();
            worded
                .to_lowercase()
                .chars()
                .filter(|c| c.is_ascii_alphabetic())
                .collect::<String>()
        })
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// True when a lowercase letter is immediately followed by an uppercase
/// letter (`camelCase`).
fn has_case_transition(tok: &str) -> bool {
    tok.chars()
        .zip(tok.chars().skip(1))
        .any(|(a, b)| a.is_lowercase() && b.is_uppercase())
}

/// Word to sentiment-category set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentimentLexicon {
    pub entries: BTreeMap<String, BTreeSet<Category>>,
}

impl SentimentLexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses lexicon CSV lines `word,category`, aggregating categories per
/// word. Blank lines are skipped; anything else malformed is an error
/// carrying its 1-based line number.
pub fn parse_lexicon(text: &str) -> Result<SentimentLexicon> {
    let mut lexicon = SentimentLexicon::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((word, category)) = line.split_once(',') else {
            return Err(Error::BadLexiconLine {
                line: line_no,
                reason: "expected `word,category`".into(),
            });
        };
        let word = word.trim().to_lowercase();
        if word.is_empty() || !word.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(Error::BadLexiconLine {
                line: line_no,
                reason: format!("word `{word}` is not a lowercase alphabetic token"),
            });
        }
        let category = category.trim();
        let Some(cat) = Category::from_name(category) else {
            return Err(Error::BadLexiconLine {
                line: line_no,
                reason: format!("unknown category `{category}`"),
            });
        };
        lexicon.entries.entry(word).or_default().insert(cat);
    }
    Ok(lexicon)
}

pub fn load_lexicon(path: &Path) -> Result<SentimentLexicon> {
    parse_lexicon(&std::fs::read_to_string(path)?)
}

/// Per-category counts over a token list: each token found in the
/// lexicon increments every category in its set. All ten categories are
/// present in the result.
pub fn sentiment_counts(
    tokens: &[String],
    lexicon: &SentimentLexicon,
) -> BTreeMap<Category, u32> {
    let mut counts: BTreeMap<Category, u32> =
        CATEGORIES.iter().map(|&c| (c, 0)).collect();
    for tok in tokens {
        if let Some(cats) = lexicon.entries.get(tok) {
            for &c in cats {
                *counts.get_mut(&c).unwrap() += 1;
            }
        }
    }
    counts
}

/// One labeled row of sentiment counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentimentRow {
    /// "body1", "body2", ... by input position.
    pub label: String,
    pub counts: BTreeMap<Category, u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentimentReport {
    pub rows: Vec<SentimentRow>,
}

/// Runs tokenize + count over each cleaned message body.
pub fn sentiment_report(bodies: &[String], lexicon: &SentimentLexicon) -> SentimentReport {
    let rows = bodies
        .iter()
        .enumerate()
        .map(|(i, body)| SentimentRow {
            label: format!("body{}", i + 1),
            counts: sentiment_counts(&tokenize_clean(body), lexicon),
        })
        .collect();
    SentimentReport { rows }
}

/// CSV rendering: `label,anger,...,positive` with a header row.
pub fn sentiment_csv(report: &SentimentReport) -> String {
    let mut out = String::from("label");
    for c in CATEGORIES {
        out.push(',');
        out.push_str(c.name());
    }
    out.push('\n');
    for row in &report.rows {
        out.push_str(&csv_field(&row.label));
        for c in CATEGORIES {
            out.push_str(&format!(",{}", row.counts.get(&c).copied().unwrap_or(0)));
        }
        out.push('\n');
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Subtitle text: `Period: 01-Nov to 01-Dec-2020`.
fn period_label(period: (ImapDate, ImapDate)) -> String {
    let since = period.0.to_string();
    let short_since = if period.0.year() == period.1.year() {
        since[..6].to_string()
    } else {
        since
    };
    format!("Period: {short_since} to {}", period.1)
}

/// Writes a standalone SVG horizontal bar chart: one bar per row,
/// labeled with the address and count, period in the subtitle.
pub fn render_frequency_chart(report: &FrequencyReport, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, frequency_chart_svg(report)?)?)
}

/// The SVG document for [`render_frequency_chart`].
pub fn frequency_chart_svg(report: &FrequencyReport) -> Result<String> {
    if report.rows.is_empty() {
        return Err(Error::InvalidArgument("empty frequency report".into()));
    }
    let bar_h = 24;
    let gap = 12;
    let left = 240;
    let top = 70;
    let max_bar = 420;
    let width = left + max_bar + 80;
    let height = top + report.rows.len() * (bar_h + gap) + 20;
    let max_count = report.rows.iter().map(|r| r.count).max().unwrap_or(1).max(1);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(
        "  <text x=\"16\" y=\"26\" font-family=\"sans-serif\" font-size=\"16\" \
font-weight=\"bold\">Messages per sender</text>\n",
    );
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"48\" font-family=\"sans-serif\" font-size=\"12\" \
fill=\"#555\">{}</text>\n",
        xml_escape(&period_label(report.period))
    ));
    for (i, row) in report.rows.iter().enumerate() {
        let y = top + i * (bar_h + gap);
        let w = (u64::from(row.count) * max_bar as u64 / u64::from(max_count)) as usize;
        let w = w.max(2);
        let label = if row.name.is_empty() {
            row.email.clone()
        } else {
            format!("{} <{}>", row.name, row.email)
        };
        svg.push_str(&format!(
            "  <text x=\"{x}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"12\" \
text-anchor=\"end\">{label}</text>\n",
            x = left - 10,
            ty = y + bar_h / 2 + 4,
            label = xml_escape(&label)
        ));
        svg.push_str(&format!(
            "  <rect x=\"{left}\" y=\"{y}\" width=\"{w}\" height=\"{bar_h}\" \
fill=\"#4878a8\"/>\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{cx}\" y=\"{ty}\" font-family=\"sans-serif\" font-size=\"12\">{c}</text>\n",
            cx = left + w + 8,
            ty = y + bar_h / 2 + 4,
            c = row.count
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
