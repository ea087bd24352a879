//! The rank-distribution TSV format.
//!
//! ```text
//! # total_requests=4
//! # unique_sites=2
//! # source=ingest format=squid
//! 1    3    0.75    a.example
//! 2    1    0.25    b.example
//! ```
//!
//! Rows are `rank`, `count`, `fraction` and `site`, separated by single tabs.
//! Fractions carry 17 significant digits (C `%.17g`), so they read back to
//! the identical `f64`. A site column of `-` marks a stripped distribution.

use std::io::{self, BufRead, Write};

use webzipf_core::rankdist::RankError;
use webzipf_core::{Hostname, RankDistribution};

/// A distribution together with its `source` header.
#[derive(Clone, Debug, PartialEq)]
pub struct DistFile {
    pub dist: RankDistribution,
    pub source: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TsvError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `# total_requests=` header")]
    MissingTotal,
    #[error(transparent)]
    Rank(#[from] RankError),
}

/// Formats `x` like C's `printf("%.17g", x)`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    // `{:.16e}` rounds to 17 significant digits and fixes the exponent of
    // the rounded value, which is what decides between the two styles.
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction_zeros(mantissa), exp.abs())
    } else {
        let fixed = format!("{:.*}", (16 - exp) as usize, x);
        trim_fraction_zeros(&fixed).to_string()
    }
}

fn trim_fraction_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_distribution<W: Write>(mut w: W, dist: &RankDistribution, source: &str) -> io::Result<()> {
    let source = source.replace(['\n', '\r'], " ");
    writeln!(w, "# total_requests={}", dist.total_requests())?;
    writeln!(w, "# unique_sites={}", dist.unique_sites())?;
    writeln!(w, "# source={source}")?;
    for e in dist.entries() {
        let site = e.site.as_ref().map_or("-", Hostname::as_str);
        writeln!(w, "{}\t{}\t{}\t{}", e.rank, e.count, format_g17(e.fraction), site)?;
    }
    w.flush()
}

pub fn read_distribution<R: BufRead>(r: R) -> Result<DistFile, TsvError> {
    let mut total = None;
    let mut source = String::new();
    let mut rows = Vec::new();
    let mut fractions = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let err = |msg: &str| TsvError::Syntax { line: lineno, msg: msg.to_string() };
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim_start();
            if let Some(v) = header.strip_prefix("total_requests=") {
                total = Some(v.trim().parse::<u64>().map_err(|_| err("bad total_requests"))?);
            } else if let Some(v) = header.strip_prefix("source=") {
                source = v.to_string();
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [rank, count, fraction, site] = fields[..] else {
            return Err(err("expected 4 tab-separated fields"));
        };
        let rank = rank.parse::<u64>().map_err(|_| err("bad rank"))?;
        let count = count.parse::<u64>().map_err(|_| err("bad count"))?;
        let fraction = fraction.parse::<f64>().map_err(|_| err("bad fraction"))?;
        let site = match site {
            "-" => None,
            s => Some(Hostname::new(s).map_err(|_| err("bad site"))?),
        };
        rows.push((rank, count, site));
        fractions.push((lineno, fraction));
    }
    let total = total.ok_or(TsvError::MissingTotal)?;
    let dist = RankDistribution::from_rows(rows, total)?;
    for (e, (line, f)) in dist.entries().iter().zip(fractions) {
        if e.fraction != f {
            return Err(TsvError::Syntax { line, msg: "fraction differs from count/total_requests".into() });
        }
    }
    Ok(DistFile { dist, source })
}
