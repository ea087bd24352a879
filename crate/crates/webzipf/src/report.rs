//! Text output for fits, window scans, summaries and straightened plot data.

use std::fmt::Write as _;

use webzipf_core::lm::Termination;
use webzipf_core::models::Straightened;
use webzipf_core::rankdist::Summary;
use webzipf_core::{format_uncertainty, FitResult, Hostname, Param};

use crate::tsv::format_g17;

const PARAMS: [Param; 4] = [Param::A, Param::B, Param::C, Param::Alpha];

fn termination_name(t: Option<Termination>) -> &'static str {
    match t {
        None => "failed",
        Some(Termination::ZeroResidual) => "zero_residual",
        Some(Termination::SseTolerance) => "sse_tolerance",
        Some(Termination::GradientTolerance) => "gradient_tolerance",
        Some(Termination::Stalled) => "stalled",
        Some(Termination::MaxIterations) => "max_iterations",
    }
}

/// `key=value` lines followed by the free parameters in `value(uncertainty)`
/// notation, e.g. `alpha = 1.04(3)`.
pub fn fit_report(fit: &FitResult, unique_sites: usize) -> String {
    let mut out = String::new();
    let p = &fit.params;
    let _ = writeln!(out, "kind={}", fit.kind.name());
    let _ = writeln!(out, "window={}", fit.window);
    let _ = writeln!(out, "residual_space={}", fit.residual_space.name());
    for param in PARAMS {
        let _ = writeln!(out, "{}={}", param.name(), format_g17(p.get(param)));
    }
    for param in PARAMS {
        let _ = writeln!(out, "stderr_{}={}", param.name(), format_g17(fit.stderr_of(param)));
    }
    let _ = writeln!(out, "a_times_sites={}", format_g17(p.a * unique_sites as f64));
    let _ = writeln!(out, "sse={}", format_g17(fit.sse));
    let _ = writeln!(out, "n_points={}", fit.n_points);
    let _ = writeln!(out, "iterations={}", fit.iterations);
    let _ = writeln!(out, "converged={}", fit.converged);
    let _ = writeln!(out, "termination={}", termination_name(fit.termination));
    for w in &fit.warnings {
        let _ = writeln!(out, "warning={w}");
    }
    for &param in fit.kind.free_params() {
        let _ = writeln!(out, "{} = {}", param.name(), format_uncertainty(p.get(param), fit.stderr_of(param)));
    }
    out
}

pub const SCAN_HEADER: &str = "window\tn_points\ta\tb\tc\talpha\tstderr_alpha\tsse\tconverged\talpha_fmt\twarnings";

/// One tab-separated row per window under [`SCAN_HEADER`].
pub fn scan_table(fits: &[FitResult]) -> String {
    let mut out = String::from(SCAN_HEADER);
    out.push('\n');
    for f in fits {
        let p = &f.params;
        let alpha_err = f.stderr_of(Param::Alpha);
        let warnings = if f.warnings.is_empty() { "-".to_string() } else { f.warnings.join("; ") };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            f.window,
            f.n_points,
            format_g17(p.a),
            format_g17(p.b),
            format_g17(p.c),
            format_g17(p.alpha),
            format_g17(alpha_err),
            format_g17(f.sse),
            f.converged,
            format_uncertainty(p.alpha, alpha_err),
            warnings
        );
    }
    out
}

pub fn summary_text(s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "total_requests={}", s.total_requests);
    let _ = writeln!(out, "unique_sites={}", s.unique_sites);
    match s.tail_threshold_rank {
        Some(r) => {
            let _ = writeln!(out, "tail_threshold_rank={r}");
        }
        None => out.push_str("tail_threshold_rank=-\n"),
    }
    for e in &s.top {
        let site = e.site.as_ref().map_or("-", Hostname::as_str);
        let _ = writeln!(out, "top\t{}\t{}\t{}\t{}", e.rank, e.count, format_g17(e.fraction), site);
    }
    out
}

/// Two whitespace-separated columns `r+c f_r-a` under a dropped-point header.
pub fn straightened_text(s: &Straightened) -> String {
    let mut out = format!("# dropped_points={}\n", s.dropped);
    for &(x, y) in &s.points {
        let _ = writeln!(out, "{} {}", format_g17(x), format_g17(y));
    }
    out
}
