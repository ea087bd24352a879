//! Per-site request counts and the normalized rank distribution built from them.

use alloc::collections::btree_map::{self, BTreeMap};
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::logparse::{accept, extract_site, parse_line, Hostname, LogFormat, ParseStats, RequestRecord};

/// Sites requested fewer times than this fall in the noisy tail.
pub const TAIL_COUNT_THRESHOLD: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RankError {
    #[error("no requests to rank")]
    EmptyCounts,
    #[error("ranks must start at 1 and strictly increase")]
    BadRanks,
    #[error("counts must be positive and non-increasing in rank")]
    BadCounts,
    #[error("entry counts exceed total_requests")]
    TotalTooSmall,
}

/// Request tally per website. Every stored count is at least 1 and `total`
/// is their sum.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SiteCounts {
    counts: BTreeMap<Hostname, u64>,
    total: u64,
}

impl SiteCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `n` requests for `site`. Adding zero is a no-op.
    pub fn add(&mut self, site: Hostname, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(site).or_insert(0) += n;
        self.total += n;
    }

    pub fn get(&self, site: &Hostname) -> u64 {
        self.counts.get(site).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn unique_sites(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, Hostname, u64> {
        self.counts.iter()
    }

    /// Folds `other` into `self`.
    pub fn absorb(&mut self, other: SiteCounts) {
        if self.counts.len() < other.counts.len() {
            let mine = core::mem::replace(self, other);
            return self.absorb(mine);
        }
        for (site, n) in other.counts {
            *self.counts.entry(site).or_insert(0) += n;
        }
        self.total += other.total;
    }
}

impl Extend<Hostname> for SiteCounts {
    fn extend<T: IntoIterator<Item = Hostname>>(&mut self, iter: T) {
        for site in iter {
            self.add(site, 1);
        }
    }
}

impl FromIterator<Hostname> for SiteCounts {
    fn from_iter<T: IntoIterator<Item = Hostname>>(iter: T) -> Self {
        let mut c = SiteCounts::new();
        c.extend(iter);
        c
    }
}

/// Tallies already-accepted records by site. Records whose URL has no
/// extractable site are skipped; the second value is how many were.
pub fn count_requests<'a, I>(records: I) -> (SiteCounts, u64)
where
    I: IntoIterator<Item = &'a RequestRecord>,
{
    let mut counts = SiteCounts::new();
    let mut skipped = 0;
    for rec in records {
        match extract_site(&rec.url) {
            Ok(site) => counts.add(site, 1),
            Err(_) => skipped += 1,
        }
    }
    (counts, skipped)
}

/// Sums per-site counts. Commutative and associative, with the empty table
/// as identity.
pub fn merge(x: &SiteCounts, y: &SiteCounts) -> SiteCounts {
    let mut out = x.clone();
    out.absorb(y.clone());
    out
}

/// Streaming line-to-count accumulator. Shards over disjoint parts of the
/// input can be combined with [`LogIngest::merge`].
#[derive(Clone, Debug)]
pub struct LogIngest {
    format: LogFormat,
    counts: SiteCounts,
    stats: ParseStats,
}

impl LogIngest {
    pub fn new(format: LogFormat) -> Self {
        LogIngest { format, counts: SiteCounts::new(), stats: ParseStats::default() }
    }

    pub fn feed_line(&mut self, line: &str) {
        self.stats.lines_total += 1;
        let rec = match parse_line(line, self.format) {
            Ok(rec) => rec,
            Err(_) => {
                self.stats.rejected_malformed += 1;
                return;
            }
        };
        if !accept(&rec) {
            self.stats.rejected_filtered += 1;
            return;
        }
        match extract_site(&rec.url) {
            Ok(site) => {
                self.stats.accepted += 1;
                self.counts.add(site, 1);
            }
            Err(_) => self.stats.rejected_malformed += 1,
        }
    }

    /// Counts a line that could not even be decoded as text.
    pub fn feed_undecodable(&mut self) {
        self.stats.lines_total += 1;
        self.stats.rejected_malformed += 1;
    }

    pub fn merge(&mut self, other: LogIngest) {
        self.stats.merge(&other.stats);
        self.counts.absorb(other.counts);
    }

    pub fn stats(&self) -> &ParseStats {
        &self.stats
    }

    pub fn counts(&self) -> &SiteCounts {
        &self.counts
    }

    pub fn into_parts(self) -> (SiteCounts, ParseStats) {
        (self.counts, self.stats)
    }
}

/// One row of a rank distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct RankEntry {
    pub rank: u64,
    pub site: Option<Hostname>,
    pub count: u64,
    /// `count / total_requests`.
    pub fraction: f64,
}

/// Sites ordered by popularity with their request fractions `f_r`.
///
/// Built from counts, ranks are contiguous from 1 and the fractions sum to
/// one. A distribution read back from a truncated file may stop early; its
/// rows still have increasing ranks and non-increasing counts.
#[derive(Clone, Debug, PartialEq)]
pub struct RankDistribution {
    entries: Vec<RankEntry>,
    total_requests: u64,
}

impl RankDistribution {
    /// Rebuilds a distribution from stored rows. Fractions are recomputed
    /// from the counts.
    pub fn from_rows<I>(rows: I, total_requests: u64) -> Result<Self, RankError>
    where
        I: IntoIterator<Item = (u64, u64, Option<Hostname>)>,
    {
        let mut entries = Vec::new();
        let mut prev_rank = 0;
        let mut prev_count = u64::MAX;
        let mut sum: u64 = 0;
        for (rank, count, site) in rows {
            if rank <= prev_rank {
                return Err(RankError::BadRanks);
            }
            if count == 0 || count > prev_count {
                return Err(RankError::BadCounts);
            }
            sum = sum.checked_add(count).ok_or(RankError::TotalTooSmall)?;
            prev_rank = rank;
            prev_count = count;
            entries.push(RankEntry { rank, site, count, fraction: 0.0 });
        }
        if entries.is_empty() || total_requests == 0 {
            return Err(RankError::EmptyCounts);
        }
        if sum > total_requests {
            return Err(RankError::TotalTooSmall);
        }
        if entries[0].rank != 1 {
            return Err(RankError::BadRanks);
        }
        let total = total_requests as f64;
        for e in &mut entries {
            e.fraction = e.count as f64 / total;
        }
        Ok(RankDistribution { entries, total_requests })
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn total_requests(&self) -> u64 {
        self.total_requests
    }

    /// Number of ranked sites present.
    pub fn unique_sites(&self) -> usize {
        self.entries.len()
    }

    pub fn max_rank(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.rank)
    }

    /// Entry at rank `r`, if present.
    pub fn get(&self, rank: u64) -> Option<&RankEntry> {
        let idx = usize::try_from(rank.checked_sub(1)?).ok()?;
        match self.entries.get(idx) {
            Some(e) if e.rank == rank => Some(e),
            _ => self.entries.binary_search_by_key(&rank, |e| e.rank).ok().map(|i| &self.entries[i]),
        }
    }

    /// Entries with `lo <= rank <= hi`.
    pub fn range(&self, lo: u64, hi: u64) -> &[RankEntry] {
        let start = self.entries.partition_point(|e| e.rank < lo);
        let end = self.entries.partition_point(|e| e.rank <= hi);
        &self.entries[start..end.max(start)]
    }

    /// Drops site names, keeping ranks and counts.
    pub fn strip_sites(mut self) -> Self {
        for e in &mut self.entries {
            e.site = None;
        }
        self
    }

    pub(crate) fn from_parts(entries: Vec<RankEntry>, total_requests: u64) -> Self {
        RankDistribution { entries, total_requests }
    }
}

/// Ranks sites by descending count, ties broken by ascending hostname.
pub fn to_rank_distribution(counts: &SiteCounts) -> Result<RankDistribution, RankError> {
    if counts.total == 0 {
        return Err(RankError::EmptyCounts);
    }
    let mut rows: Vec<(&Hostname, u64)> = counts.counts.iter().map(|(h, &n)| (h, n)).collect();
    // BTreeMap iteration is already hostname-ascending, so a stable sort
    // on count alone gives the tie order.
    rows.sort_by_key(|row| Reverse(row.1));
    let total = counts.total as f64;
    let entries = rows
        .into_iter()
        .enumerate()
        .map(|(i, (site, count))| RankEntry {
            rank: i as u64 + 1,
            site: Some(site.clone()),
            count,
            fraction: count as f64 / total,
        })
        .collect();
    Ok(RankDistribution { entries, total_requests: counts.total })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub total_requests: u64,
    pub unique_sites: usize,
    /// The `top_k` most popular entries.
    pub top: Vec<RankEntry>,
    /// First rank whose count is below [`TAIL_COUNT_THRESHOLD`], if any.
    pub tail_threshold_rank: Option<u64>,
}

pub fn summary(dist: &RankDistribution, top_k: usize) -> Summary {
    Summary {
        total_requests: dist.total_requests,
        unique_sites: dist.unique_sites(),
        top: dist.entries.iter().take(top_k).cloned().collect(),
        tail_threshold_rank: dist.entries.iter().find(|e| e.count < TAIL_COUNT_THRESHOLD).map(|e| e.rank),
    }
}
