//! Proxy access-log records.
//!
//! Two line layouts are understood, selected explicitly by [`LogFormat`]:
//!
//! * Squid native, ten whitespace-separated fields:
//!   `timestamp elapsed client result_tag/status bytes method url ident hierarchy/peer content-type`
//! * Common log format:
//!   `host ident authuser [dd/Mon/yyyy:HH:MM:SS +zzzz] "method url protocol" status bytes`
//!
//! Parsing never aborts a stream: a bad line yields [`Malformed`] and the
//! caller counts it in [`ParseStats`].

use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use chrono::DateTime;

/// Log line layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LogFormat {
    SquidNative,
    CommonLog,
}

impl FromStr for LogFormat {
    type Err = UnknownFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squid" | "squid-native" => Ok(LogFormat::SquidNative),
            "clf" | "common-log" | "common" => Ok(LogFormat::CommonLog),
            _ => Err(UnknownFormat),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown log format (expected `squid` or `clf`)")]
pub struct UnknownFormat;

/// One parsed log line.
#[derive(Clone, Debug, PartialEq)]
pub struct RequestRecord {
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
    pub method: String,
    pub status: u16,
    pub url: String,
    /// Cache result token, e.g. `TCP_MISS` in Squid's `TCP_MISS/200`.
    pub result_tag: Option<String>,
}

/// Why a line or URL was rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Malformed {
    #[error("wrong field count")]
    FieldCount,
    #[error("unparseable timestamp")]
    Timestamp,
    #[error("unparseable status")]
    Status,
    #[error("invalid method token")]
    Method,
    #[error("invalid request field")]
    Request,
    #[error("empty url")]
    EmptyUrl,
    #[error("url has no `//`")]
    NoHost,
    #[error("empty host name")]
    EmptyHost,
}

/// Lowercase website name without port.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hostname(String);

impl Hostname {
    /// Validates and case-folds `name`. Fails on empty names or names that
    /// contain `/` or `:`.
    pub fn new(name: &str) -> Result<Self, Malformed> {
        if name.is_empty() {
            return Err(Malformed::EmptyHost);
        }
        if name.contains(['/', ':']) {
            return Err(Malformed::NoHost);
        }
        Ok(Hostname(name.to_ascii_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Hostname {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Hostname {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Line counters. `lines_total == accepted + rejected_malformed + rejected_filtered`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub lines_total: u64,
    pub accepted: u64,
    pub rejected_malformed: u64,
    pub rejected_filtered: u64,
}

impl ParseStats {
    pub fn merge(&mut self, other: &ParseStats) {
        self.lines_total += other.lines_total;
        self.accepted += other.accepted;
        self.rejected_malformed += other.rejected_malformed;
        self.rejected_filtered += other.rejected_filtered;
    }

    pub fn is_consistent(&self) -> bool {
        self.lines_total == self.accepted + self.rejected_malformed + self.rejected_filtered
    }
}

impl fmt::Display for ParseStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lines_total={} accepted={} rejected_malformed={} rejected_filtered={}",
            self.lines_total, self.accepted, self.rejected_malformed, self.rejected_filtered
        )
    }
}

/// Parses a single line (no trailing newline) in the given layout.
pub fn parse_line(line: &str, format: LogFormat) -> Result<RequestRecord, Malformed> {
    match format {
        LogFormat::SquidNative => parse_squid(line),
        LogFormat::CommonLog => parse_common(line),
    }
}

/// The analysis keeps only successful GET requests.
pub fn accept(record: &RequestRecord) -> bool {
    record.method == "GET" && record.status == 200
}

/// Website name of a URL: the text after the first `//` up to the next `/`
/// (or end of string), without any `:port` suffix, lowercased.
pub fn extract_site(url: &str) -> Result<Hostname, Malformed> {
    let start = url.find("//").ok_or(Malformed::NoHost)? + 2;
    let rest = &url[start..];
    let site = match rest.find('/') {
        Some(end) => &rest[..end],
        None => rest,
    };
    let name = match site.find(':') {
        Some(colon) => &site[..colon],
        None => site,
    };
    Hostname::new(name)
}

fn parse_squid(line: &str) -> Result<RequestRecord, Malformed> {
    let mut fields = [""; 10];
    let mut it = line.split_ascii_whitespace();
    for slot in fields.iter_mut() {
        *slot = it.next().ok_or(Malformed::FieldCount)?;
    }
    if it.next().is_some() {
        return Err(Malformed::FieldCount);
    }
    let [timestamp, _elapsed, _client, code, _bytes, method, url, _ident, _peer, _ctype] = fields;

    let timestamp = parse_epoch(timestamp)?;
    let (tag, status) = code.rsplit_once('/').ok_or(Malformed::Status)?;
    let status = parse_status(status)?;
    check_method(method)?;

    Ok(RequestRecord {
        timestamp,
        method: method.to_string(),
        status,
        url: url.to_string(),
        result_tag: (!tag.is_empty()).then(|| tag.to_string()),
    })
}

fn parse_common(line: &str) -> Result<RequestRecord, Malformed> {
    let mut rest = line.trim();

    let mut head = [""; 3];
    for slot in head.iter_mut() {
        let (tok, tail) = next_token(rest).ok_or(Malformed::FieldCount)?;
        *slot = tok;
        rest = tail;
    }

    let rest_dt = rest.trim_start().strip_prefix('[').ok_or(Malformed::FieldCount)?;
    let close = rest_dt.find(']').ok_or(Malformed::FieldCount)?;
    let timestamp = parse_clf_datetime(&rest_dt[..close])?;
    rest = rest_dt[close + 1..].trim_start();

    let rest_req = rest.strip_prefix('"').ok_or(Malformed::FieldCount)?;
    let close = rest_req.find('"').ok_or(Malformed::FieldCount)?;
    let request = &rest_req[..close];
    rest = &rest_req[close + 1..];

    let (status, tail) = next_token(rest).ok_or(Malformed::FieldCount)?;
    let (_bytes, tail) = next_token(tail).ok_or(Malformed::FieldCount)?;
    if !tail.trim().is_empty() {
        return Err(Malformed::FieldCount);
    }
    let status = parse_status(status)?;

    let mut parts = request.split_ascii_whitespace();
    let method = parts.next().ok_or(Malformed::Request)?;
    let url = parts.next().ok_or(Malformed::Request)?;
    // protocol is optional (HTTP/0.9 request lines)
    let _protocol = parts.next();
    if parts.next().is_some() {
        return Err(Malformed::Request);
    }
    check_method(method)?;

    Ok(RequestRecord { timestamp, method: method.to_string(), status, url: url.to_string(), result_tag: None })
}

fn next_token(s: &str) -> Option<(&str, &str)> {
    let s = s.trim_start();
    if s.is_empty() {
        return None;
    }
    match s.find(|c: char| c.is_ascii_whitespace()) {
        Some(end) => Some((&s[..end], &s[end..])),
        None => Some((s, "")),
    }
}

fn parse_epoch(s: &str) -> Result<f64, Malformed> {
    let t: f64 = s.parse().map_err(|_| Malformed::Timestamp)?;
    if t.is_finite() && t >= 0.0 {
        Ok(t)
    } else {
        Err(Malformed::Timestamp)
    }
}

fn parse_clf_datetime(s: &str) -> Result<f64, Malformed> {
    let dt = DateTime::parse_from_str(s, "%d/%b/%Y:%H:%M:%S %z").map_err(|_| Malformed::Timestamp)?;
    Ok(dt.timestamp() as f64)
}

fn parse_status(s: &str) -> Result<u16, Malformed> {
    if s.is_empty() || s.len() > 3 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Malformed::Status);
    }
    s.parse().map_err(|_| Malformed::Status)
}

fn check_method(m: &str) -> Result<(), Malformed> {
    if !m.is_empty() && m.bytes().all(|b| b.is_ascii_uppercase() || b == b'_' || b == b'-') {
        Ok(())
    } else {
        Err(Malformed::Method)
    }
}
