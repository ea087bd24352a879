//! Synthetic request streams and the idealized trickle-down cache filter.
//!
//! Popularity follows a Zipf–Mandelbrot law truncated to `n_sites` sites,
//! `p_r ∝ (c + r)^(−alpha)`. Requests are drawn with Vose's alias method.
//!
//! # Random stream
//!
//! Draws come from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `SeedableRng::seed_from_u64(seed)` on stream 0. Each request consumes two
//! 64-bit outputs `u1, u2`:
//!
//! * column `k = (u1 · n_sites) >> 64` (128-bit product),
//! * coin `(u2 >> 11) · 2⁻⁵³`, keeping `k` when below the column's
//!   threshold and taking its alias otherwise.
//!
//! Both ChaCha8 and the seed expansion are fixed, portable algorithms, so a
//! seed yields the same counts on every platform. The first outputs for
//! seed 0 are pinned in the tests as reference vectors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::logparse::Hostname;
use crate::rankdist::{RankDistribution, RankEntry, SiteCounts};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("cannot remove the top {n} of {unique_sites} sites")]
    TrickleTooLarge { n: u64, unique_sites: usize },
}

/// Truncated Zipf–Mandelbrot sampling configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub alpha: f64,
    pub c: f64,
    pub n_sites: usize,
    pub n_requests: u64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        check_params(self.alpha, self.c, self.n_sites)?;
        if self.n_requests == 0 {
            return Err(SynthError::InvalidParameter("n_requests must be positive"));
        }
        Ok(())
    }
}

fn check_params(alpha: f64, c: f64, n_sites: usize) -> Result<(), SynthError> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(SynthError::InvalidParameter("alpha must be positive"));
    }
    if !c.is_finite() || c <= -1.0 {
        return Err(SynthError::InvalidParameter("c must exceed -1"));
    }
    if n_sites == 0 {
        return Err(SynthError::InvalidParameter("n_sites must be positive"));
    }
    Ok(())
}

/// `p_r = (c + r)^(−alpha) / Σ_s (c + s)^(−alpha)` for `r = 1..=n_sites`.
pub fn make_probabilities(alpha: f64, c: f64, n_sites: usize) -> Result<Vec<f64>, SynthError> {
    check_params(alpha, c, n_sites)?;
    let mut p: Vec<f64> = (1..=n_sites).map(|r| libm::pow(c + r as f64, -alpha)).collect();
    // smallest terms first
    let norm: f64 = p.iter().rev().sum();
    p.iter_mut().for_each(|x| *x /= norm);
    Ok(p)
}

/// Alias table for O(1) draws from a discrete distribution.
#[derive(Clone, Debug)]
pub struct AliasTable {
    threshold: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds the table for non-negative `weights` (not necessarily normalized).
    pub fn new(weights: &[f64]) -> Result<Self, SynthError> {
        let n = weights.len();
        if n == 0 || n > u32::MAX as usize {
            return Err(SynthError::InvalidParameter("weights must be non-empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(SynthError::InvalidParameter("weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(SynthError::InvalidParameter("weights must not all be zero"));
        }
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / sum).collect();
        let mut threshold = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<u32>, Vec<u32>) = (0..n as u32).partition(|&i| scaled[i as usize] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            threshold[s as usize] = scaled[s as usize];
            alias[s as usize] = l;
            scaled[l as usize] -= 1.0 - scaled[s as usize];
            if scaled[l as usize] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        for i in small.into_iter().chain(large) {
            threshold[i as usize] = 1.0;
        }
        Ok(AliasTable { threshold, alias })
    }

    pub fn len(&self) -> usize {
        self.threshold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threshold.is_empty()
    }

    /// Zero-based outcome index for a pair of raw 64-bit draws.
    #[inline]
    pub fn pick(&self, u1: u64, u2: u64) -> usize {
        let k = ((u1 as u128 * self.threshold.len() as u128) >> 64) as usize;
        let coin = (u2 >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        if coin < self.threshold[k] {
            k
        } else {
            self.alias[k] as usize
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> usize {
        let u1 = rng.next_u64();
        let u2 = rng.next_u64();
        self.pick(u1, u2)
    }
}

/// The portable generator behind [`sample_requests`].
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-rank request counts (index 0 is rank 1).
pub fn sample_rank_counts(spec: &GeneratorSpec) -> Result<Vec<u64>, SynthError> {
    spec.validate()?;
    let p = make_probabilities(spec.alpha, spec.c, spec.n_sites)?;
    let table = AliasTable::new(&p)?;
    let mut rng = seeded_rng(spec.seed);
    let mut counts = vec![0u64; spec.n_sites];
    for _ in 0..spec.n_requests {
        counts[table.sample(&mut rng)] += 1;
    }
    Ok(counts)
}

/// Draws `n_requests` site visits; sites are named `site<rank>`.
pub fn sample_requests(spec: &GeneratorSpec) -> Result<SiteCounts, SynthError> {
    let counts = sample_rank_counts(spec)?;
    let mut out = SiteCounts::new();
    for (i, &n) in counts.iter().enumerate() {
        if n > 0 {
            out.add(Hostname::new(&format!("site{}", i + 1)).expect("valid synthetic name"), n);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrickleReport {
    pub n_removed: u64,
    /// Share of the input's requests absorbed by the filter.
    pub removed_fraction: f64,
}

/// Removes the `n` most popular sites, as a downstream cache holding exactly
/// those sites would. Survivors are renormalized over the requests that get
/// through and re-ranked from 1.
pub fn trickle_down(dist: &RankDistribution, n: u64) -> Result<(RankDistribution, TrickleReport), SynthError> {
    let unique_sites = dist.unique_sites();
    if n as u128 >= unique_sites as u128 {
        return Err(SynthError::TrickleTooLarge { n, unique_sites });
    }
    let cut = n as usize;
    let removed: u64 = dist.entries()[..cut].iter().map(|e| e.count).sum();
    let total = dist.total_requests() - removed;
    let first_rank = dist.entries()[cut].rank;
    let entries = dist.entries()[cut..]
        .iter()
        .map(|e| RankEntry {
            rank: e.rank - first_rank + 1,
            site: e.site.clone(),
            count: e.count,
            fraction: e.count as f64 / total as f64,
        })
        .collect();
    let report = TrickleReport { n_removed: n, removed_fraction: removed as f64 / dist.total_requests() as f64 };
    Ok((RankDistribution::from_parts(entries, total), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankdist::to_rank_distribution;
    use proptest::prelude::*;
    use rand_core::RngCore;

    fn dist_of(counts: &[u64]) -> RankDistribution {
        let total = counts.iter().sum();
        RankDistribution::from_rows(counts.iter().enumerate().map(|(i, &c)| (i as u64 + 1, c, None)), total).unwrap()
    }

    #[test]
    fn probabilities_small_cases() {
        let p = make_probabilities(1.0, 0.0, 2).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = make_probabilities(1.0, 1.0, 2).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.4).abs() < 1e-15);
        assert!(make_probabilities(0.0, 0.0, 2).is_err());
        assert!(make_probabilities(1.0, -1.0, 2).is_err());
        assert!(make_probabilities(1.0, 0.0, 0).is_err());
    }

    #[test]
    fn reference_vectors() {
        // ChaCha8, seed_from_u64(0), stream 0
        let mut rng = seeded_rng(0);
        let got: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(got, REFERENCE_SEED0);
        let spec = GeneratorSpec { alpha: 1.0, c: 0.0, n_sites: 4, n_requests: 20, seed: 0 };
        assert_eq!(sample_rank_counts(&spec).unwrap(), REFERENCE_COUNTS);
    }

    const REFERENCE_SEED0: [u64; 3] = [13080132717333068652, 8594738769458413623, 12896916468484187878];
    const REFERENCE_COUNTS: [u64; 4] = [12, 2, 4, 2];

    #[test]
    fn single_site_takes_everything() {
        let spec = GeneratorSpec { alpha: 1.3, c: 2.0, n_sites: 1, n_requests: 1000, seed: 9 };
        let c = sample_requests(&spec).unwrap();
        assert_eq!(c.unique_sites(), 1);
        assert_eq!(c.get(&Hostname::new("site1").unwrap()), 1000);
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = GeneratorSpec { alpha: 1.0, c: 10.0, n_sites: 500, n_requests: 20_000, seed: 42 };
        assert_eq!(sample_requests(&spec).unwrap(), sample_requests(&spec).unwrap());
        let other = GeneratorSpec { seed: 43, ..spec };
        assert_ne!(sample_rank_counts(&spec).unwrap(), sample_rank_counts(&other).unwrap());
    }

    #[test]
    fn alias_table_reproduces_weights_exactly() {
        // integrate pick() over a fine uniform grid of coin values per column
        let w = [5.0, 1.0, 0.0, 3.0, 1.0];
        let table = AliasTable::new(&w).unwrap();
        let n = w.len() as f64;
        let mut mass = [0.0; 5];
        for k in 0..w.len() {
            mass[k] += table.threshold[k] / n;
            mass[table.alias[k] as usize] += (1.0 - table.threshold[k]) / n;
        }
        for (m, x) in mass.iter().zip(w) {
            assert!((m - x / 10.0).abs() < 1e-15, "{mass:?}");
        }
    }

    #[test]
    fn trickle_examples() {
        let d = dist_of(&[5, 3, 2]);
        let (out, rep) = trickle_down(&d, 1).unwrap();
        let f: Vec<f64> = out.entries().iter().map(|e| e.fraction).collect();
        assert_eq!(f, vec![0.6, 0.4]);
        assert_eq!(out.entries()[0].rank, 1);
        assert_eq!(rep.removed_fraction, 0.5);

        let (same, rep) = trickle_down(&d, 0).unwrap();
        assert_eq!(same, d);
        assert_eq!(rep.removed_fraction, 0.0);

        assert_eq!(trickle_down(&d, 3), Err(SynthError::TrickleTooLarge { n: 3, unique_sites: 3 }));
    }

    #[test]
    fn trickle_keeps_site_names() {
        let mut c = SiteCounts::new();
        c.add(Hostname::new("a").unwrap(), 4);
        c.add(Hostname::new("b").unwrap(), 2);
        c.add(Hostname::new("c").unwrap(), 1);
        let (out, _) = trickle_down(&to_rank_distribution(&c).unwrap(), 1).unwrap();
        assert_eq!(out.entries()[0].site.as_ref().unwrap().as_str(), "b");
    }

    proptest! {
        #[test]
        fn probabilities_normalized_and_decreasing(alpha in 0.1f64..3.0, c in -0.9f64..100.0, n in 1usize..5000) {
            let p = make_probabilities(alpha, c, n).unwrap();
            prop_assert!(p.iter().all(|&x| x > 0.0));
            prop_assert!(p.windows(2).all(|w| w[0] > w[1]));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn trickle_composes(counts in prop::collection::vec(1u64..1000, 3..60), m in 0u64..20, n in 0u64..20) {
            let mut counts = counts;
            counts.sort_unstable_by(|a, b| b.cmp(a));
            let d = dist_of(&counts);
            prop_assume!(((m + n) as usize) < counts.len());
            let (once, rep) = trickle_down(&d, m + n).unwrap();
            let (first, _) = trickle_down(&d, m).unwrap();
            let (twice, _) = trickle_down(&first, n).unwrap();
            prop_assert_eq!(&once, &twice);
            let dropped: f64 = d.entries()[..(m + n) as usize].iter().map(|e| e.fraction).sum();
            prop_assert!((rep.removed_fraction - dropped).abs() <= 1e-12);
            // survivors keep their count ratios, so fraction ratios match
            let base = &d.entries()[(m + n) as usize..];
            for (x, y) in once.entries().iter().zip(base).skip(1) {
                let r_out = x.fraction / once.entries()[0].fraction;
                let r_in = y.fraction / base[0].fraction;
                prop_assert!((r_out - r_in).abs() <= 1e-15 * r_in.max(1.0));
            }
            let s: f64 = once.entries().iter().map(|e| e.fraction).sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }
}
