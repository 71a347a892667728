//! Session-based IMAP4rev1 client library with message search, selective
//! fetching, MIME decoding, attachment extraction, and two small e-mail
//! analytics pipelines (sender frequency and lexicon sentiment counts).
//!
//! The usual flow mirrors an IMAP session: configure a connection, select
//! a folder, search, then fetch the matched messages or their parts.
//!
//! ```no_run
//! use mailpost::session::{ImapConfig, Session};
//! use mailpost::search::StringField;
//!
//! # fn main() -> mailpost::error::Result<()> {
//! let config = ImapConfig::new("imaps://outlook.office365.com", "user@agency.gov")
//!     .password("secret");
//! let mut con = Session::configure_imap(config)?;
//! con.select_folder("INBOX")?;
//! let ids = con.search_string("@ksu.edu", StringField::From)?;
//! let bodies = con.fetch_body(&ids, Some(1))?;
//! # let _ = bodies;
//! # Ok(())
//! # }
//! ```
//!
//! A scriptable in-process mock server ([`mockserver`]) lets the whole
//! pipeline run in tests without a live account.

pub mod analytics;
pub mod cli;
pub mod error;
pub mod fetch;
pub mod mime;
pub mod mockserver;
pub mod protocol;
pub mod search;
pub mod session;
pub mod transport;

pub use error::{Error, Result};
