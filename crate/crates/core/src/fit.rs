//! Windowed least-squares fits of rank distributions.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::lm::{lm_minimize, LmError, LmOptions, Termination};
use crate::models::{eval, gradient, FitParams, ModelKind};
use crate::rankdist::RankDistribution;

/// Distributions with fewer requests than this give unstable exponents.
pub const STABLE_SAMPLE_REQUESTS: u64 = 200_000;

/// Smallest admissible `c + r_min` during a fit.
const MIN_SHIFTED_RANK: f64 = 1e-9;

/// Inclusive rank interval `[r_min, r_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FitWindow {
    r_min: u64,
    r_max: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum WindowError {
    #[error("window bounds must satisfy 1 <= r_min <= r_max")]
    Bounds,
    #[error("window must look like `rmin:rmax`")]
    Syntax,
}

impl FitWindow {
    pub fn new(r_min: u64, r_max: u64) -> Result<Self, WindowError> {
        if r_min >= 1 && r_min <= r_max {
            Ok(FitWindow { r_min, r_max })
        } else {
            Err(WindowError::Bounds)
        }
    }

    /// Window covering every rank of `dist`.
    pub fn full(dist: &RankDistribution) -> Self {
        FitWindow { r_min: 1, r_max: dist.max_rank().max(1) }
    }

    pub fn r_min(&self) -> u64 {
        self.r_min
    }

    pub fn r_max(&self) -> u64 {
        self.r_max
    }
}

impl fmt::Display for FitWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.r_min, self.r_max)
    }
}

impl FromStr for FitWindow {
    type Err = WindowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s.split_once(':').ok_or(WindowError::Syntax)?;
        let lo = lo.trim().parse().map_err(|_| WindowError::Syntax)?;
        let hi = hi.trim().parse().map_err(|_| WindowError::Syntax)?;
        FitWindow::new(lo, hi)
    }
}

/// Where residuals are measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ResidualSpace {
    /// `f_r − model(r)`
    #[default]
    Linear,
    /// `ln f_r − ln model(r)`. Every rank counts equally, so on sampled data
    /// the long run of count-1 and count-2 sites in the tail dominates.
    Log,
}

impl ResidualSpace {
    pub fn name(self) -> &'static str {
        match self {
            ResidualSpace::Linear => "linear",
            ResidualSpace::Log => "log",
        }
    }
}

impl fmt::Display for ResidualSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown residual space (expected `log` or `linear`)")]
pub struct UnknownResidualSpace;

impl FromStr for ResidualSpace {
    type Err = UnknownResidualSpace;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "log" => Ok(ResidualSpace::Log),
            "linear" | "lin" => Ok(ResidualSpace::Linear),
            _ => Err(UnknownResidualSpace),
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("window {0} contains no ranks of the distribution")]
    EmptyWindow(FitWindow),
    #[error("insufficient points: {n_points} in window for {n_free} free parameters")]
    InsufficientPoints { n_points: usize, n_free: usize },
    #[error("model is non-positive inside the window; log residuals undefined")]
    NonPositiveModel,
    #[error("log residuals need positive fractions")]
    NonPositiveData,
    #[error(transparent)]
    Solver(#[from] LmError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub kind: ModelKind,
    /// Fitted parameters; fixed ones are zero.
    pub params: FitParams,
    /// Standard errors of the free parameters, in `kind.free_params()` order.
    pub stderr: Vec<f64>,
    pub sse: f64,
    pub n_points: usize,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Option<Termination>,
    pub window: FitWindow,
    pub residual_space: ResidualSpace,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// Standard error of `param`, zero for fixed parameters.
    pub fn stderr_of(&self, param: crate::models::Param) -> f64 {
        self.kind.free_params().iter().position(|&p| p == param).map_or(0.0, |i| self.stderr[i])
    }
}

/// Starting point: `alpha = 1`, `c = 1` (0 for zipf-like), `a = 0`, and `b`
/// chosen so the model passes through the first point of the window.
pub fn default_init(dist: &RankDistribution, kind: ModelKind, window: FitWindow) -> FitParams {
    let (rank, fraction) = dist
        .range(window.r_min, window.r_max)
        .first()
        .or_else(|| dist.entries().first())
        .map_or((window.r_min, 1.0), |e| (e.rank, e.fraction));
    initial_guess(kind, rank as f64, fraction)
}

/// [`default_init`] for a curve whose first point is `(rank, fraction)`.
pub fn initial_guess(kind: ModelKind, rank: f64, fraction: f64) -> FitParams {
    let alpha = 1.0;
    let c = if kind == ModelKind::ZipfLike { 0.0 } else { 1.0 };
    FitParams::new(0.0, fraction * libm::pow(c + rank, alpha), c, alpha)
}

/// Outcome of [`fit_curve`].
#[derive(Clone, Debug, PartialEq)]
pub struct CurveFit {
    pub params: FitParams,
    pub stderr: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl CurveFit {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

/// Fits `kind` to raw `(rank, fraction)` points, ranks ascending.
pub fn fit_curve(
    points: &[(f64, f64)],
    kind: ModelKind,
    space: ResidualSpace,
    init: FitParams,
    opts: &LmOptions,
) -> Result<CurveFit, FitError> {
    let n_free = kind.n_free();
    if points.len() <= n_free {
        return Err(FitError::InsufficientPoints { n_points: points.len(), n_free });
    }
    let min_rank = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let log_data: Vec<f64> = match space {
        ResidualSpace::Log => {
            if points.iter().any(|&(_, f)| f.is_nan() || f <= 0.0) {
                return Err(FitError::NonPositiveData);
            }
            points.iter().map(|&(_, f)| libm::log(f)).collect()
        }
        ResidualSpace::Linear => Vec::new(),
    };

    let residuals = |v: &[f64], out: &mut [f64]| -> bool {
        let p = FitParams::from_free(kind, v);
        if p.c + min_rank <= MIN_SHIFTED_RANK {
            return false;
        }
        for (i, (&(r, f), o)) in points.iter().zip(out.iter_mut()).enumerate() {
            let m = match eval(kind, &p, r) {
                Ok(m) if m.is_finite() => m,
                _ => return false,
            };
            *o = match space {
                ResidualSpace::Linear => f - m,
                ResidualSpace::Log if m > 0.0 => log_data[i] - libm::log(m),
                ResidualSpace::Log => return false,
            };
        }
        true
    };
    let jacobian = |v: &[f64], jac: &mut [f64]| {
        let p = FitParams::from_free(kind, v);
        for (&(r, _), row) in points.iter().zip(jac.chunks_exact_mut(n_free)) {
            // only called at feasible points, where the model is defined
            let g = gradient(kind, &p, r).expect("jacobian at infeasible point");
            let inv = match space {
                ResidualSpace::Linear => 1.0,
                ResidualSpace::Log => eval(kind, &p, r).map_or(f64::NAN, |m| 1.0 / m),
            };
            for (j, d) in row.iter_mut().zip(g.as_slice()) {
                *j = -d * inv;
            }
        }
    };

    let init = init.restricted(kind);
    let sol = match lm_minimize(points.len(), residuals, jacobian, &init.free_values(kind), opts) {
        Err(LmError::InfeasibleStart) if space == ResidualSpace::Log => return Err(FitError::NonPositiveModel),
        other => other?,
    };
    Ok(CurveFit {
        params: FitParams::from_free(kind, &sol.params),
        stderr: sol.std_errors(),
        sse: sol.sse,
        iterations: sol.iterations,
        termination: sol.termination,
    })
}

/// Fits `kind` to the ranks of `dist` inside `window` from [`default_init`].
pub fn fit(
    dist: &RankDistribution,
    kind: ModelKind,
    window: FitWindow,
    space: ResidualSpace,
) -> Result<FitResult, FitError> {
    fit_from(dist, kind, window, space, default_init(dist, kind, window), &LmOptions::default())
}

pub fn fit_from(
    dist: &RankDistribution,
    kind: ModelKind,
    window: FitWindow,
    space: ResidualSpace,
    init: FitParams,
    opts: &LmOptions,
) -> Result<FitResult, FitError> {
    let points: Vec<(f64, f64)> =
        dist.range(window.r_min, window.r_max).iter().map(|e| (e.rank as f64, e.fraction)).collect();
    if points.is_empty() {
        return Err(FitError::EmptyWindow(window));
    }
    let curve = fit_curve(&points, kind, space, init, opts)?;

    let mut warnings = Vec::new();
    if dist.total_requests() < STABLE_SAMPLE_REQUESTS {
        warnings.push(format!(
            "small sample: total_requests={} is below {}; fitted parameters may be unstable",
            dist.total_requests(),
            STABLE_SAMPLE_REQUESTS
        ));
    }
    if window.r_max > dist.max_rank() {
        warnings.push(format!("window {} clipped to the data's rank range 1:{}", window, dist.max_rank()));
    }
    if !curve.converged() {
        warnings.push(format!("not converged after {} iterations", curve.iterations));
    }

    let converged = curve.converged();
    Ok(FitResult {
        kind,
        params: curve.params,
        stderr: curve.stderr,
        sse: curve.sse,
        n_points: points.len(),
        iterations: curve.iterations,
        converged,
        termination: Some(curve.termination),
        window,
        residual_space: space,
        warnings,
    })
}

/// Fits every window in order. A failing window yields a non-converged
/// result whose warnings carry the error.
pub fn scan_windows(
    dist: &RankDistribution,
    kind: ModelKind,
    windows: &[FitWindow],
    space: ResidualSpace,
) -> Vec<FitResult> {
    windows
        .iter()
        .map(|&w| {
            fit(dist, kind, w, space).unwrap_or_else(|e| FitResult {
                kind,
                params: default_init(dist, kind, w).restricted(kind),
                stderr: vec![f64::NAN; kind.n_free()],
                sse: f64::NAN,
                n_points: dist.range(w.r_min, w.r_max).len(),
                iterations: 0,
                converged: false,
                termination: None,
                window: w,
                residual_space: space,
                warnings: vec![format!("fit failed: {e}")],
            })
        })
        .collect()
}

/// Decade windows `1:10, 10:100, …`, the last one ending at `max_rank`.
pub fn decade_windows(max_rank: u64) -> Vec<FitWindow> {
    let mut out = Vec::new();
    let mut lo = 1u64;
    while lo < max_rank {
        let hi = lo.saturating_mul(10).min(max_rank);
        out.push(FitWindow { r_min: lo, r_max: hi });
        lo = hi;
    }
    out
}
