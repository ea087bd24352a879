//! Website rank-popularity distributions from proxy logs and their fits to
//! the Zipf family of laws.
//!
//! The crate is `no_std` (with `alloc`); file and terminal IO live in the
//! `webzipf` crate.
//!
//! Pipeline: [`logparse`] turns log lines into records, [`rankdist`] tallies
//! them into a normalized rank distribution, [`fit`] fits a [`models`] law
//! over a rank window with the Levenberg–Marquardt engine in [`lm`], and
//! [`synth`] provides synthetic popularity data and the trickle-down filter
//! for checking the whole chain.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod fit;
pub mod lm;
pub mod logparse;
pub mod models;
pub mod rankdist;
pub mod synth;
mod uncertainty;

pub use fit::{
    decade_windows, default_init, fit, fit_curve, fit_from, initial_guess, scan_windows, CurveFit, FitError, FitResult,
    FitWindow, ResidualSpace,
};
pub use logparse::{accept, extract_site, parse_line, Hostname, LogFormat, Malformed, ParseStats, RequestRecord};
pub use models::{eval, gradient, straighten, FitParams, ModelKind, Param};
pub use rankdist::{
    count_requests, merge, summary, to_rank_distribution, LogIngest, RankDistribution, RankEntry, SiteCounts,
};
pub use synth::{make_probabilities, sample_requests, trickle_down, GeneratorSpec, TrickleReport};
pub use uncertainty::format_uncertainty;
