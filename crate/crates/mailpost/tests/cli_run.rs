//! CLI behavior through the in-process runner: argument handling, exit
//! codes, output formats, credential sourcing, and subcommand piping.

mod common;

use std::collections::HashMap;
use std::io::Cursor;
use std::sync::{Arc, Mutex};

use mailpost::cli::{self, CliIo, Connector};
use mailpost::mockserver::{self, FixtureMailbox};
use mailpost::session::Session;

struct CliOutcome {
    code: i32,
    stdout: Vec<u8>,
    stderr: String,
}

fn run_against(
    mailbox: FixtureMailbox,
    args: &[&str],
    env: &[(&str, &str)],
    stdin: &str,
) -> CliOutcome {
    let state = Arc::new(Mutex::new(mailbox));
    run_shared(&state, args, env, stdin)
}

fn run_shared(
    state: &Arc<Mutex<FixtureMailbox>>,
    args: &[&str],
    env: &[(&str, &str)],
    stdin: &str,
) -> CliOutcome {
    let state = state.clone();
    let connector: Connector = Box::new(move |config| {
        let mut endpoint = mockserver::start_stateful_shared(state.clone());
        Session::configure_with_transport(endpoint.connect(), config)
    });
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut stdin = Cursor::new(stdin.as_bytes().to_vec());
    let env: HashMap<String, String> = env
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let argv: Vec<String> = std::iter::once("mailpost".to_string())
        .chain(args.iter().map(|s| s.to_string()))
        .collect();
    let code = {
        let mut io = CliIo::new(&mut out, &mut err, &mut stdin, env, connector);
        cli::run(&argv, &mut io)
    };
    CliOutcome {
        code,
        stdout: out,
        stderr: String::from_utf8(err).unwrap(),
    }
}

const BASE: &[&str] = &["--url", "imaps://mock.invalid", "--user", "user@company.com"];
const PW: &[(&str, &str)] = &[("MAILPOST_PASSWORD", "fixture-pass")];

fn with_base<'a>(args: &'a [&'a str]) -> Vec<&'a str> {
    BASE.iter().chain(args).copied().collect()
}

#[test]
fn capabilities_lists_tokens() {
    let r = run_against(common::fig2_mailbox(), &with_base(&["capabilities"]), PW, "");
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let out = String::from_utf8(r.stdout).unwrap();
    assert!(out.to_uppercase().contains("IMAP4REV1"));
    assert!(out.contains("WITHIN"));
}

#[test]
fn folders_list_and_json() {
    let r = run_against(common::fig2_mailbox(), &with_base(&["folders", "list"]), PW, "");
    assert_eq!(r.code, 0);
    assert_eq!(String::from_utf8(r.stdout).unwrap(), "INBOX\n");

    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["--json", "folders", "list"]),
        PW,
        "",
    );
    assert_eq!(String::from_utf8(r.stdout).unwrap(), "[\"INBOX\"]\n");
}

#[test]
fn folder_lifecycle_round_trip() {
    let state = Arc::new(Mutex::new(common::fig2_mailbox()));
    let r = run_shared(&state, &with_base(&["folders", "create", "Projects"]), PW, "");
    assert_eq!(r.code, 0);
    let r = run_shared(
        &state,
        &with_base(&["folders", "rename", "Projects", "Archive"]),
        PW,
        "",
    );
    assert_eq!(r.code, 0);
    let r = run_shared(&state, &with_base(&["folders", "list"]), PW, "");
    assert_eq!(String::from_utf8(r.stdout).unwrap(), "Archive\nINBOX\n");
    let r = run_shared(&state, &with_base(&["folders", "delete", "Archive"]), PW, "");
    assert_eq!(r.code, 0);
    // deleting again is a downstream refusal
    let r = run_shared(&state, &with_base(&["folders", "delete", "Archive"]), PW, "");
    assert_eq!(r.code, 4);
}

#[test]
fn search_prints_ids_one_per_line() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["search", "--since", "01-Nov-2020", "--before", "01-Dec-2020"]),
        PW,
        "",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(String::from_utf8(r.stdout).unwrap(), "141\n144\n");
}

#[test]
fn search_without_criteria_is_a_usage_error() {
    let r = run_against(common::fig2_mailbox(), &with_base(&["search"]), PW, "");
    assert_eq!(r.code, 2);
    assert!(r.stdout.is_empty());
    assert!(!r.stderr.is_empty());
}

#[test]
fn search_inverted_period_is_a_usage_error() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["search", "--since", "01-Dec-2020", "--before", "01-Nov-2020"]),
        PW,
        "",
    );
    assert_eq!(r.code, 2);
}

#[test]
fn fetch_single_id_streams_raw_body() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["fetch", "--ids", "141"]),
        PW,
        "",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let raw = std::fs::read(common::fixture_dir().join("fig2/msg141.eml")).unwrap();
    assert_eq!(r.stdout, raw);
}

#[test]
fn fetch_multiple_ids_need_out_dir() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["fetch", "--ids", "141,144"]),
        PW,
        "",
    );
    assert_eq!(r.code, 2);

    let dir = tempfile::tempdir().unwrap();
    let dir_arg = dir.path().to_str().unwrap();
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["fetch", "--ids", "141,144", "--out", dir_arg]),
        PW,
        "",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    for uid in [141u32, 144] {
        let raw = std::fs::read(common::fixture_dir().join(format!("fig2/msg{uid}.eml"))).unwrap();
        assert_eq!(std::fs::read(dir.path().join(format!("{uid}.body"))).unwrap(), raw);
    }
}

#[test]
fn fetch_metadata_emits_csv() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&[
            "fetch",
            "--ids",
            "141,144",
            "--part",
            "metadata",
            "--attrs",
            "ENVELOPE,FLAGS,RFC822.SIZE,UID",
        ]),
        PW,
        "",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let out = String::from_utf8(r.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(
        lines[0],
        "id,date,subject,from,to,message_id,internal_date,flags,size,uid"
    );
    assert!(lines[1].starts_with("141,"));
    assert!(lines[1].contains("alice@ksu.edu"));
    assert!(lines[1].contains("Galaxy survey results"));
    assert!(lines[2].starts_with("144,"));
}

#[test]
fn fetch_unknown_attribute_is_usage_error() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["fetch", "--ids", "141", "--part", "metadata", "--attrs", "NONSENSE"]),
        PW,
        "",
    );
    assert_eq!(r.code, 2);
}

#[test]
fn fetch_missing_message_exits_protocol_failure() {
    let dir = tempfile::tempdir().unwrap();
    let dir_arg = dir.path().to_str().unwrap();
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["fetch", "--ids", "141,999", "--out", dir_arg]),
        PW,
        "",
    );
    assert_eq!(r.code, 4);
    // the present message was still written
    assert!(dir.path().join("141.body").is_file());
    assert!(r.stderr.contains("999"));
}

#[test]
fn search_pipes_into_fetch_stdin() {
    let search = run_against(
        common::fig2_mailbox(),
        &with_base(&["search", "--subject", "Shiny"]),
        PW,
        "",
    );
    assert_eq!(search.code, 0);
    let piped = String::from_utf8(search.stdout).unwrap();
    let via_stdin = run_against(
        common::fig2_mailbox(),
        &with_base(&["fetch", "--stdin"]),
        PW,
        &piped,
    );
    let via_ids = run_against(
        common::fig2_mailbox(),
        &with_base(&["fetch", "--ids", "144"]),
        PW,
        "",
    );
    assert_eq!(via_stdin.code, 0);
    assert_eq!(via_stdin.stdout, via_ids.stdout);
}

#[test]
fn attachments_direct_and_default_agree() {
    let default_dir = tempfile::tempdir().unwrap();
    let direct_dir = tempfile::tempdir().unwrap();
    let r1 = run_against(
        common::fig2_mailbox(),
        &with_base(&[
            "attachments",
            "--ids",
            "141,144",
            "--dest",
            default_dir.path().to_str().unwrap(),
        ]),
        PW,
        "",
    );
    assert_eq!(r1.code, 0, "stderr: {}", r1.stderr);
    let r2 = run_against(
        common::fig2_mailbox(),
        &with_base(&[
            "attachments",
            "--ids",
            "141,144",
            "--dest",
            direct_dir.path().to_str().unwrap(),
            "--direct",
        ]),
        PW,
        "",
    );
    assert_eq!(r2.code, 0, "stderr: {}", r2.stderr);

    let rel = |root: &std::path::Path| {
        let mut files = Vec::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    files.push(path.strip_prefix(root).unwrap().to_path_buf());
                }
            }
        }
        files.sort();
        files
    };
    let left = rel(default_dir.path());
    assert_eq!(left, rel(direct_dir.path()));
    assert_eq!(left.len(), 6);
    for file in &left {
        assert_eq!(
            std::fs::read(default_dir.path().join(file)).unwrap(),
            std::fs::read(direct_dir.path().join(file)).unwrap(),
            "differs: {}",
            file.display()
        );
    }
}

#[test]
fn report_frequency_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg_path = dir.path().join("chart.svg");
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&[
            "report",
            "frequency",
            "--since",
            "01-Nov-2020",
            "--before",
            "01-Dec-2020",
            "--top",
            "5",
            "--svg",
            svg_path.to_str().unwrap(),
        ]),
        PW,
        "",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let out = String::from_utf8(r.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "email,name,count");
    assert!(lines.contains(&"alice@ksu.edu,Alice Reviewer,1"));
    assert!(lines.contains(&"bruno@stat.example.org,Bruno Mendes,1"));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.contains("Period: 01-Nov to 01-Dec-2020"));
}

#[test]
fn report_frequency_rejects_inverted_period() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&[
            "report", "frequency", "--since", "01-Dec-2020", "--before", "01-Nov-2020",
        ]),
        PW,
        "",
    );
    assert_eq!(r.code, 2);
}

#[test]
fn report_sentiment_has_ten_category_columns() {
    let lexicon = common::fixture_dir().join("lexicon.csv");
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["report", "sentiment", "--lexicon", lexicon.to_str().unwrap()]),
        PW,
        "",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let out = String::from_utf8(r.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "label,anger,anticipation,disgust,fear,joy,sadness,surprise,trust,negative,positive"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("body1,"));
    assert!(lines[2].starts_with("body2,"));
}

#[test]
fn missing_url_is_config_error() {
    let r = run_against(
        common::fig2_mailbox(),
        &["--user", "user@company.com", "capabilities"],
        PW,
        "",
    );
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("url"));
}

#[test]
fn config_file_supplies_connection_values() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("mailpost.conf");
    std::fs::write(
        &conf,
        "url = imaps://mock.invalid\nusername = user@company.com\n",
    )
    .unwrap();
    let r = run_against(
        common::fig2_mailbox(),
        &["--config", conf.to_str().unwrap(), "folders", "list"],
        PW,
        "",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(String::from_utf8(r.stdout).unwrap(), "INBOX\n");
}

#[test]
fn password_prompt_reads_stdin_not_argv() {
    // no MAILPOST_PASSWORD in env: the CLI prompts on stderr and reads
    // the credential from stdin
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["folders", "list"]),
        &[],
        "fixture-pass\n",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stderr.contains("Password for user@company.com"));
    assert_eq!(String::from_utf8(r.stdout).unwrap(), "INBOX\n");
}

#[test]
fn custom_password_env_name() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["--password-env", "MY_SECRET", "folders", "list"]),
        &[("MY_SECRET", "fixture-pass")],
        "",
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
}

#[test]
fn wrong_password_is_auth_error_and_never_echoed() {
    let r = run_against(
        common::fig2_mailbox(),
        &with_base(&["folders", "list"]),
        &[("MAILPOST_PASSWORD", "super-wrong-secret")],
        "",
    );
    assert_eq!(r.code, 3);
    assert!(!r.stderr.contains("super-wrong-secret"));
    assert!(r.stdout.is_empty());
}

#[test]
fn help_exits_zero_and_never_mentions_a_password_flag() {
    let r = run_against(common::fig2_mailbox(), &["--help"], &[], "");
    assert_eq!(r.code, 0);
    let help = String::from_utf8(r.stdout).unwrap();
    assert!(help.contains("--password-env"));
    // the credential itself can only arrive via env, config, or prompt
    assert!(!help.contains("--password "));
    assert!(!help.contains("--password\n"));
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let args = with_base(&["search", "--since", "01-Nov-2020", "--before", "01-Dec-2020"]);
    let a = run_against(common::fig2_mailbox(), &args, PW, "");
    let b = run_against(common::fig2_mailbox(), &args, PW, "");
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
}
