//! The `mailpost` command line: folder management, search, fetch,
//! attachment extraction, and the two mailbox reports.
//!
//! The whole CLI runs through [`run`], which takes its I/O streams,
//! environment, and session connector as parameters so tests can drive
//! it in-process against a mock server.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analytics;
use crate::error::{Error, Result};
use crate::fetch::{Attribute, FetchItem, FetchOutcome};
use crate::mime;
use crate::protocol::MessageId;
use crate::search::{Flag, ImapDate, SearchCriterion, SizeRelation, StringField, WithinRelation};
use crate::session::{ImapConfig, Session};

/// Produces an authenticated session from a resolved config. The default
/// connector dials TLS; tests substitute a mock pipe.
pub type Connector<'a> = Box<dyn FnMut(&ImapConfig) -> Result<Session> + 'a>;

/// Everything `run` touches outside its arguments.
pub struct CliIo<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
    pub stdin: &'a mut dyn BufRead,
    pub env: HashMap<String, String>,
    pub connector: Connector<'a>,
}

impl<'a> CliIo<'a> {
    pub fn new(
        out: &'a mut dyn Write,
        err: &'a mut dyn Write,
        stdin: &'a mut dyn BufRead,
        env: HashMap<String, String>,
        connector: Connector<'a>,
    ) -> Self {
        CliIo { out, err, stdin, env, connector }
    }
}

/// The default connector: TLS to the configured endpoint.
pub fn tls_connector() -> Connector<'static> {
    Box::new(|config| Session::configure_imap(config.clone()))
}

#[derive(Parser)]
#[command(
    name = "mailpost",
    version,
    about = "IMAP mailbox client: search, fetch, attachments, and reports",
    disable_help_subcommand = true
)]
struct Cli {
    /// Config file (key=value lines); default $MAILPOST_CONFIG or ~/.mailpost
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Server url, e.g. imaps://imap.example.com
    #[arg(long, global = true)]
    url: Option<String>,
    /// Account user name
    #[arg(long, global = true)]
    user: Option<String>,
    /// Read timeout in milliseconds
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
    /// Environment variable holding the password (default MAILPOST_PASSWORD)
    #[arg(long, global = true)]
    password_env: Option<String>,
    /// Environment variable holding an OAuth2 bearer token; overrides the password
    #[arg(long, global = true)]
    bearer_env: Option<String>,
    /// Skip TLS certificate verification
    #[arg(long, global = true)]
    no_verify_tls: bool,
    /// Machine-readable JSON output where applicable
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// List server capabilities
    Capabilities,
    /// Folder operations
    Folders {
        #[command(subcommand)]
        op: FoldersOp,
    },
    /// Search a folder; prints matching ids one per line
    Search(SearchArgs),
    /// Fetch message content by id
    Fetch(FetchArgs),
    /// Extract attachments to a directory tree
    Attachments(AttachArgs),
    /// Mailbox reports
    Report {
        #[command(subcommand)]
        kind: ReportKind,
    },
}

#[derive(Subcommand)]
enum FoldersOp {
    /// List folders
    List,
    /// Create a folder
    Create { name: String },
    /// Rename a folder
    Rename { from: String, to: String },
    /// Delete a folder
    Delete { name: String },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value = "INBOX")]
    folder: String,
    /// Internal date on or after (DD-Mon-YYYY)
    #[arg(long)]
    since: Option<String>,
    /// Internal date strictly before (DD-Mon-YYYY)
    #[arg(long)]
    before: Option<String>,
    /// Internal date exactly on (DD-Mon-YYYY)
    #[arg(long)]
    on: Option<String>,
    /// From header contains
    #[arg(long)]
    from: Option<String>,
    /// Subject header contains
    #[arg(long)]
    subject: Option<String>,
    /// Anywhere in the message
    #[arg(long)]
    text: Option<String>,
    /// Body contains
    #[arg(long)]
    body: Option<String>,
    /// Flag is set: seen, answered, flagged, deleted, draft, recent
    #[arg(long)]
    flag: Vec<String>,
    /// Larger than N octets
    #[arg(long)]
    larger: Option<u32>,
    /// Smaller than N octets
    #[arg(long)]
    smaller: Option<u32>,
    /// Younger than N seconds (WITHIN extension)
    #[arg(long)]
    younger: Option<u32>,
    /// Older than N seconds (WITHIN extension)
    #[arg(long)]
    older: Option<u32>,
    /// Combine criteria with OR instead of AND
    #[arg(long)]
    or: bool,
    /// Negate the whole query
    #[arg(long)]
    not: bool,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long, default_value = "INBOX")]
    folder: String,
    /// Comma-separated message ids
    #[arg(long)]
    ids: Option<String>,
    /// Read ids from stdin, one per line
    #[arg(long)]
    stdin: bool,
    /// What to fetch: body, header, text, or metadata
    #[arg(long, default_value = "body")]
    part: String,
    /// Fetch a single top-level MIME part instead of the whole body
    #[arg(long)]
    mime_level: Option<u32>,
    /// Header field filter for --part header (comma-separated)
    #[arg(long)]
    fields: Option<String>,
    /// Metadata attributes (comma-separated: ENVELOPE, INTERNALDATE, FLAGS, RFC822.SIZE, UID)
    #[arg(long)]
    attrs: Option<String>,
    /// Output directory; payloads land in <out>/<id>.<part>
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttachArgs {
    #[arg(long, default_value = "INBOX")]
    folder: String,
    #[arg(long)]
    ids: Option<String>,
    #[arg(long)]
    stdin: bool,
    /// Destination root for the attachment tree
    #[arg(long)]
    dest: PathBuf,
    /// Fetch attachment parts individually via BODYSTRUCTURE instead of
    /// parsing the full body
    #[arg(long)]
    direct: bool,
}

#[derive(Subcommand)]
enum ReportKind {
    /// Messages per sender over a period
    Frequency {
        #[arg(long, default_value = "INBOX")]
        folder: String,
        #[arg(long)]
        since: String,
        #[arg(long)]
        before: String,
        /// Keep the top N senders
        #[arg(long, default_value_t = 5)]
        top: usize,
        /// Also write an SVG bar chart here
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Per-message sentiment category counts
    Sentiment {
        #[arg(long, default_value = "INBOX")]
        folder: String,
        #[arg(long)]
        since: Option<String>,
        #[arg(long)]
        before: Option<String>,
        /// Lexicon CSV (word,category)
        #[arg(long)]
        lexicon: PathBuf,
    },
}

/// Maps an error to the process exit code: 2 for configuration and
/// argument problems, 3 for connection and authentication failures,
/// 4 for everything the server or protocol refused.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        "UnsupportedScheme" | "MalformedUrl" | "InvalidTimeout" | "InvalidArgument"
        | "InvalidRange" | "BadLexiconLine" | "UnknownAttribute" => 2,
        "ConnectTimeout" | "TlsFailure" | "Refused" | "ConnectionClosed" | "ReadTimeout"
        | "AuthFailed" => 3,
        _ => 4,
    }
}

/// Runs one CLI invocation. `args` includes the program name.
pub fn run(args: &[String], io: &mut CliIo) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = io.out.write_all(rendered.as_bytes());
                0
            } else {
                let _ = io.err.write_all(rendered.as_bytes());
                2
            };
        }
    };
    match dispatch(&cli, io) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(io.err, "mailpost: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, io: &mut CliIo) -> Result<i32> {
    let config = resolve_config(cli, io)?;
    let mut session = (io.connector)(&config)?;
    let code = execute(cli, io, &mut session);
    session.logout();
    code
}

/// Merges config file and flags into a connection config, then resolves
/// the credential. Passwords come from the environment or the prompt,
/// never from argv.
fn resolve_config(cli: &Cli, io: &mut CliIo) -> Result<ImapConfig> {
    let mut file_conf: HashMap<String, String> = HashMap::new();
    let path = cli
        .config
        .clone()
        .or_else(|| io.env.get("MAILPOST_CONFIG").map(PathBuf::from))
        .or_else(|| io.env.get("HOME").map(|h| Path::new(h).join(".mailpost")));
    if let Some(path) = path {
        if path.is_file() {
            file_conf = parse_config_file(&std::fs::read_to_string(&path)?)?;
        } else if cli.config.is_some() {
            return Err(Error::InvalidArgument(format!(
                "config file not found: {}",
                path.display()
            )));
        }
    }

    let url = cli
        .url
        .clone()
        .or_else(|| file_conf.get("url").cloned())
        .ok_or_else(|| Error::InvalidArgument("no server url (flag --url or config `url`)".into()))?;
    let user = cli
        .user
        .clone()
        .or_else(|| file_conf.get("username").cloned())
        .ok_or_else(|| Error::InvalidArgument("no user name (flag --user or config `username`)".into()))?;

    let mut config = ImapConfig::new(url, user);
    let timeout = cli.timeout_ms.or_else(|| {
        file_conf.get("timeout_ms").and_then(|t| t.parse().ok())
    });
    if let Some(ms) = timeout {
        if ms == 0 {
            return Err(Error::InvalidTimeout);
        }
        config = config.timeout_ms(ms);
    }
    if cli.no_verify_tls || file_conf.get("verify_tls").map(String::as_str) == Some("false") {
        config = config.verify_tls(false);
    }

    let bearer_var = cli
        .bearer_env
        .clone()
        .or_else(|| file_conf.get("bearer_env").cloned());
    if let Some(var) = bearer_var {
        let token = io
            .env
            .get(&var)
            .ok_or_else(|| Error::InvalidArgument(format!("environment variable {var} is not set")))?;
        return Ok(config.xoauth2_bearer(token.clone()));
    }

    let password_var = cli
        .password_env
        .clone()
        .or_else(|| file_conf.get("password_env").cloned())
        .unwrap_or_else(|| "MAILPOST_PASSWORD".to_string());
    let password = match io.env.get(&password_var) {
        Some(p) => p.clone(),
        None => {
            // interactive fallback; the prompt goes to stderr so stdout
            // stays pipeable
            write!(io.err, "Password for {}: ", config.username)?;
            io.err.flush()?;
            let mut line = String::new();
            io.stdin.read_line(&mut line)?;
            let line = line.trim_end_matches(['\r', '\n']).to_string();
            if line.is_empty() {
                return Err(Error::AuthFailed("no password provided".into()));
            }
            line
        }
    };
    Ok(config.password(password))
}

/// Flat `key=value` lines; `#` starts a comment.
fn parse_config_file(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidArgument(format!(
                "config line {}: expected key=value",
                idx + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn execute(cli: &Cli, io: &mut CliIo, session: &mut Session) -> Result<i32> {
    match &cli.cmd {
        Cmd::Capabilities => {
            let caps = session.list_server_capabilities()?;
            if cli.json {
                writeln!(io.out, "{}", serde_json::to_string(&caps).expect("serializable"))?;
            } else {
                writeln!(io.out, "{}", caps.join(" "))?;
            }
            Ok(0)
        }
        Cmd::Folders { op } => match op {
            FoldersOp::List => {
                let folders = session.list_folders()?;
                if cli.json {
                    writeln!(io.out, "{}", serde_json::to_string(&folders).expect("serializable"))?;
                } else {
                    for f in folders {
                        writeln!(io.out, "{f}")?;
                    }
                }
                Ok(0)
            }
            FoldersOp::Create { name } => {
                session.create_folder(name)?;
                Ok(0)
            }
            FoldersOp::Rename { from, to } => {
                session.rename_folder(from, to)?;
                Ok(0)
            }
            FoldersOp::Delete { name } => {
                session.delete_folder(name)?;
                Ok(0)
            }
        },
        Cmd::Search(args) => cmd_search(cli, args, io, session),
        Cmd::Fetch(args) => cmd_fetch(cli, args, io, session),
        Cmd::Attachments(args) => cmd_attachments(cli, args, io, session),
        Cmd::Report { kind } => cmd_report(cli, kind, io, session),
    }
}

fn parse_date(s: &str) -> Result<ImapDate> {
    ImapDate::parse(s)
}

fn parse_flag(s: &str) -> Result<Flag> {
    match s.to_ascii_lowercase().as_str() {
        "seen" => Ok(Flag::Seen),
        "answered" => Ok(Flag::Answered),
        "flagged" => Ok(Flag::Flagged),
        "deleted" => Ok(Flag::Deleted),
        "draft" => Ok(Flag::Draft),
        "recent" => Ok(Flag::Recent),
        _ => Err(Error::InvalidArgument(format!("unknown flag `{s}`"))),
    }
}

fn build_criterion(args: &SearchArgs) -> Result<SearchCriterion> {
    let mut crits: Vec<SearchCriterion> = Vec::new();
    if let (Some(s), Some(b)) = (&args.since, &args.before) {
        if parse_date(s)? >= parse_date(b)? {
            return Err(Error::InvalidRange);
        }
    }
    if let Some(d) = &args.since {
        crits.push(SearchCriterion::Since(parse_date(d)?));
    }
    if let Some(d) = &args.before {
        crits.push(SearchCriterion::Before(parse_date(d)?));
    }
    if let Some(d) = &args.on {
        crits.push(SearchCriterion::OnDate(parse_date(d)?));
    }
    let strings = [
        (&args.from, StringField::From),
        (&args.subject, StringField::Subject),
        (&args.text, StringField::Text),
        (&args.body, StringField::Body),
    ];
    for (value, field) in strings {
        if let Some(expr) = value {
            crits.push(SearchCriterion::StringMatch {
                field,
                expr: expr.clone(),
            });
        }
    }
    for f in &args.flag {
        crits.push(SearchCriterion::FlagSet {
            flag: parse_flag(f)?,
            negated: false,
        });
    }
    if let Some(n) = args.larger {
        crits.push(SearchCriterion::Size { relation: SizeRelation::Larger, octets: n });
    }
    if let Some(n) = args.smaller {
        crits.push(SearchCriterion::Size { relation: SizeRelation::Smaller, octets: n });
    }
    if let Some(n) = args.younger {
        crits.push(SearchCriterion::Within { relation: WithinRelation::Younger, seconds: n });
    }
    if let Some(n) = args.older {
        crits.push(SearchCriterion::Within { relation: WithinRelation::Older, seconds: n });
    }
    if crits.is_empty() {
        return Err(Error::InvalidArgument(
            "no search criteria given; see `mailpost search --help`".into(),
        ));
    }
    let mut combined = if args.or {
        // OR is binary; fold right so all criteria participate
        let mut iter = crits.into_iter().rev();
        let mut acc = iter.next().unwrap();
        for c in iter {
            acc = SearchCriterion::Or(Box::new(c), Box::new(acc));
        }
        acc
    } else if crits.len() == 1 {
        crits.pop().unwrap()
    } else {
        SearchCriterion::And(crits)
    };
    if args.not {
        combined = SearchCriterion::Not(Box::new(combined));
    }
    combined.validate()?;
    Ok(combined)
}

fn cmd_search(cli: &Cli, args: &SearchArgs, io: &mut CliIo, session: &mut Session) -> Result<i32> {
    let criterion = build_criterion(args)?;
    session.select_folder(&args.folder)?;
    let ids = session.search(&criterion)?;
    if cli.json {
        let values: Vec<u32> = ids.iter().map(|id| id.value).collect();
        writeln!(io.out, "{}", serde_json::to_string(&values).expect("serializable"))?;
    } else {
        for id in ids {
            writeln!(io.out, "{id}")?;
        }
    }
    Ok(0)
}

/// Ids from `--ids a,b,c` or stdin lines; the session's addressing mode
/// decides their kind.
fn gather_ids(
    ids: &Option<String>,
    use_stdin: bool,
    io: &mut CliIo,
    session: &Session,
) -> Result<Vec<MessageId>> {
    let mut raw: Vec<String> = Vec::new();
    if let Some(list) = ids {
        raw.extend(list.split(',').map(|s| s.trim().to_string()));
    }
    if use_stdin {
        let mut text = String::new();
        io.stdin.read_to_string(&mut text)?;
        raw.extend(text.split_whitespace().map(|s| s.to_string()));
    }
    raw.retain(|s| !s.is_empty());
    if raw.is_empty() {
        return Err(Error::InvalidArgument(
            "no message ids (use --ids or --stdin)".into(),
        ));
    }
    let make = if session.uses_uid() { MessageId::uid } else { MessageId::seq };
    raw.iter()
        .map(|s| {
            s.parse::<u32>()
                .map(make)
                .map_err(|_| Error::InvalidArgument(format!("bad message id `{s}`")))
        })
        .collect()
}

fn cmd_fetch(cli: &Cli, args: &FetchArgs, io: &mut CliIo, session: &mut Session) -> Result<i32> {
    let _ = cli;
    let ids = gather_ids(&args.ids, args.stdin, io, session)?;
    session.select_folder(&args.folder)?;
    let part = args.part.to_ascii_lowercase();
    let outcomes: Vec<FetchOutcome> = match part.as_str() {
        "body" => session.fetch_body(&ids, args.mime_level)?,
        "header" => {
            let fields: Option<Vec<String>> = args.fields.as_ref().map(|f| {
                f.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            });
            session.fetch_header(&ids, fields.as_deref())?
        }
        "text" => session.fetch_text(&ids)?,
        "metadata" => {
            let attrs: Vec<Attribute> = match &args.attrs {
                Some(list) => list
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?,
                None => vec![Attribute::Envelope],
            };
            session.fetch_metadata(&ids, &attrs)?
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown part `{other}` (body, header, text, metadata)"
            )))
        }
    };

    let mut failed = false;
    if part == "metadata" {
        write_metadata_csv(io.out, &outcomes, &mut |e| {
            failed = true;
            let _ = writeln!(io.err, "mailpost: {e}");
        })?;
    } else if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        for outcome in &outcomes {
            match outcome {
                Ok(r) => {
                    let path = dir.join(format!("{}.{part}", r.id));
                    std::fs::write(&path, payload_of(&r.item))?;
                    writeln!(io.out, "{}", path.display())?;
                }
                Err(e) => {
                    failed = true;
                    writeln!(io.err, "mailpost: {e}")?;
                }
            }
        }
    } else if outcomes.len() == 1 {
        match &outcomes[0] {
            Ok(r) => io.out.write_all(&payload_of(&r.item))?,
            Err(e) => {
                failed = true;
                writeln!(io.err, "mailpost: {e}")?;
            }
        }
    } else {
        return Err(Error::InvalidArgument(
            "multiple ids need --out <dir>".into(),
        ));
    }
    Ok(if failed { 4 } else { 0 })
}

fn payload_of(item: &FetchItem) -> Vec<u8> {
    match item {
        FetchItem::Body(b) | FetchItem::Header(b) | FetchItem::Text(b) => b.clone(),
        FetchItem::Part { bytes, .. } => bytes.clone(),
        FetchItem::Metadata(_) => Vec::new(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_metadata_csv(
    out: &mut dyn Write,
    outcomes: &[FetchOutcome],
    on_error: &mut dyn FnMut(&Error),
) -> Result<()> {
    writeln!(
        out,
        "id,date,subject,from,to,message_id,internal_date,flags,size,uid"
    )?;
    for outcome in outcomes {
        let r = match outcome {
            Ok(r) => r,
            Err(e) => {
                on_error(e);
                continue;
            }
        };
        let FetchItem::Metadata(m) = &r.item else {
            continue;
        };
        let env = m.envelope.clone().unwrap_or_default();
        let join = |addrs: &[crate::protocol::Address]| {
            addrs
                .iter()
                .map(|a| a.address())
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.id,
            csv_field(env.date.as_deref().unwrap_or("")),
            csv_field(&env.subject.map(|s| mime::decode_mime_header(&s)).unwrap_or_default()),
            csv_field(&join(&env.from)),
            csv_field(&join(&env.to)),
            csv_field(env.message_id.as_deref().unwrap_or("")),
            csv_field(m.internal_date.as_deref().unwrap_or("")),
            csv_field(&m.flags.clone().unwrap_or_default().join(" ")),
            m.size.map(|n| n.to_string()).unwrap_or_default(),
            m.uid.map(|n| n.to_string()).unwrap_or_default(),
        )?;
    }
    Ok(())
}

fn cmd_attachments(
    cli: &Cli,
    args: &AttachArgs,
    io: &mut CliIo,
    session: &mut Session,
) -> Result<i32> {
    let ids = gather_ids(&args.ids, args.stdin, io, session)?;
    session.select_folder(&args.folder)?;
    let username = session.username().to_string();
    let mut failed = false;

    let written = if args.direct {
        let outcomes = session.fetch_attachments(&ids)?;
        let mut groups = Vec::new();
        for (id, outcome) in ids.iter().zip(outcomes) {
            match outcome {
                Ok(atts) => groups.push((*id, atts)),
                // a message without attachments contributes no paths
                Err(Error::NoAttachments(_)) => {}
                Err(e) => {
                    failed = true;
                    writeln!(io.err, "mailpost: {e}")?;
                }
            }
        }
        mime::write_attachment_groups(&groups, &args.dest, &username, &args.folder)?
    } else {
        let outcomes = session.fetch_body(&ids, None)?;
        let mut fetched = Vec::new();
        for outcome in outcomes {
            match outcome {
                Ok(r) => fetched.push(r),
                Err(e) => {
                    failed = true;
                    writeln!(io.err, "mailpost: {e}")?;
                }
            }
        }
        mime::get_attachments(&fetched, &args.dest, &username, &args.folder)?
    };

    if cli.json {
        let paths: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
        writeln!(io.out, "{}", serde_json::to_string(&paths).expect("serializable"))?;
    } else {
        for path in &written {
            writeln!(io.out, "{}", path.display())?;
        }
    }
    Ok(if failed { 4 } else { 0 })
}

fn cmd_report(_cli: &Cli, kind: &ReportKind, io: &mut CliIo, session: &mut Session) -> Result<i32> {
    match kind {
        ReportKind::Frequency { folder, since, before, top, svg } => {
            let since = parse_date(since)?;
            let before = parse_date(before)?;
            if since >= before {
                return Err(Error::InvalidRange);
            }
            if *top == 0 {
                return Err(Error::InvalidArgument("--top must be at least 1".into()));
            }
            session.select_folder(folder)?;
            let ids = session.search_period(since, before)?;
            let mut envelopes = Vec::new();
            let mut failed = false;
            if !ids.is_empty() {
                for outcome in session.fetch_metadata(&ids, &[Attribute::Envelope])? {
                    match outcome {
                        Ok(r) => {
                            if let FetchItem::Metadata(m) = r.item {
                                if let Some(env) = m.envelope {
                                    envelopes.push((r.id, env));
                                }
                            }
                        }
                        Err(e) => {
                            failed = true;
                            writeln!(io.err, "mailpost: {e}")?;
                        }
                    }
                }
            }
            let report = analytics::sender_frequency(&envelopes, *top, (since, before));
            io.out.write_all(analytics::frequency_csv(&report).as_bytes())?;
            if let Some(path) = svg {
                analytics::render_frequency_chart(&report, path)?;
            }
            Ok(if failed { 4 } else { 0 })
        }
        ReportKind::Sentiment { folder, since, before, lexicon } => {
            let criterion = match (since, before) {
                (Some(s), Some(b)) => {
                    let (s, b) = (parse_date(s)?, parse_date(b)?);
                    if s >= b {
                        return Err(Error::InvalidRange);
                    }
                    SearchCriterion::And(vec![
                        SearchCriterion::Since(s),
                        SearchCriterion::Before(b),
                    ])
                }
                (Some(s), None) => SearchCriterion::Since(parse_date(s)?),
                (None, Some(b)) => SearchCriterion::Before(parse_date(b)?),
                (None, None) => SearchCriterion::All,
            };
            let lexicon = analytics::load_lexicon(lexicon)?;
            session.select_folder(folder)?;
            let ids = session.search(&criterion)?;
            let mut payloads = Vec::new();
            let mut failed = false;
            if !ids.is_empty() {
                for outcome in session.fetch_text(&ids)? {
                    match outcome {
                        Ok(r) => {
                            if let FetchItem::Text(bytes) = r.item {
                                payloads.push(bytes);
                            }
                        }
                        Err(e) => {
                            failed = true;
                            writeln!(io.err, "mailpost: {e}")?;
                        }
                    }
                }
            }
            let bodies = mime::clean_msg_text(&payloads);
            let report = analytics::sentiment_report(&bodies, &lexicon);
            io.out.write_all(analytics::sentiment_csv(&report).as_bytes())?;
            Ok(if failed { 4 } else { 0 })
        }
    }
}
