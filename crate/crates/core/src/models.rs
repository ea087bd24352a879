//! The Zipf family of rank-popularity laws.
//!
//! All three kinds are special cases of
//!
//! ```text
//! f(r) = a + b / (c + r)^alpha
//! ```
//!
//! * [`ModelKind::ZipfLike`]: `a = 0`, `c = 0`
//! * [`ModelKind::ZipfMandelbrot`]: `a = 0`
//! * [`ModelKind::Modified`]: all four parameters free. `a` is usually a
//!   small negative offset absorbing finite-sample effects in the tail and
//!   `c` a rank shift produced by request filtering in downstream caches.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::rankdist::RankDistribution;

#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
#[error("model undefined at c + r = {shifted_rank} (must be positive)")]
pub struct DomainError {
    pub shifted_rank: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelKind {
    ZipfLike,
    ZipfMandelbrot,
    Modified,
}

/// A model parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Param {
    A,
    B,
    C,
    Alpha,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::A => "a",
            Param::B => "b",
            Param::C => "c",
            Param::Alpha => "alpha",
        }
    }
}

impl ModelKind {
    /// Free parameters, in the order used for parameter vectors.
    pub fn free_params(self) -> &'static [Param] {
        match self {
            ModelKind::ZipfLike => &[Param::B, Param::Alpha],
            ModelKind::ZipfMandelbrot => &[Param::B, Param::C, Param::Alpha],
            ModelKind::Modified => &[Param::A, Param::B, Param::C, Param::Alpha],
        }
    }

    pub fn n_free(self) -> usize {
        self.free_params().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ZipfLike => "zipf",
            ModelKind::ZipfMandelbrot => "zm",
            ModelKind::Modified => "modified",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown model (expected `zipf`, `zm` or `modified`)")]
pub struct UnknownModel;

impl FromStr for ModelKind {
    type Err = UnknownModel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zipf" | "zipf-like" => Ok(ModelKind::ZipfLike),
            "zm" | "zipf-mandelbrot" => Ok(ModelKind::ZipfMandelbrot),
            "modified" => Ok(ModelKind::Modified),
            _ => Err(UnknownModel),
        }
    }
}

/// Parameters of `a + b / (c + r)^alpha`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
}

impl FitParams {
    pub fn new(a: f64, b: f64, c: f64, alpha: f64) -> Self {
        FitParams { a, b, c, alpha }
    }

    pub fn get(&self, p: Param) -> f64 {
        match p {
            Param::A => self.a,
            Param::B => self.b,
            Param::C => self.c,
            Param::Alpha => self.alpha,
        }
    }

    pub fn set(&mut self, p: Param, v: f64) {
        match p {
            Param::A => self.a = v,
            Param::B => self.b = v,
            Param::C => self.c = v,
            Param::Alpha => self.alpha = v,
        }
    }

    /// Returns a copy with the kind's fixed parameters set to zero.
    pub fn restricted(mut self, kind: ModelKind) -> Self {
        match kind {
            ModelKind::ZipfLike => {
                self.a = 0.0;
                self.c = 0.0;
            }
            ModelKind::ZipfMandelbrot => self.a = 0.0,
            ModelKind::Modified => {}
        }
        self
    }

    /// Free parameter values in `kind.free_params()` order.
    pub fn free_values(&self, kind: ModelKind) -> Vec<f64> {
        kind.free_params().iter().map(|&p| self.get(p)).collect()
    }

    /// Inverse of [`FitParams::free_values`]; fixed parameters are zero.
    pub fn from_free(kind: ModelKind, values: &[f64]) -> Self {
        let mut p = FitParams::new(0.0, 0.0, 0.0, 0.0);
        for (&name, &v) in kind.free_params().iter().zip(values) {
            p.set(name, v);
        }
        p
    }
}

/// Partial derivatives of the model with respect to the free parameters of
/// one kind, in `kind.free_params()` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gradient {
    values: [f64; 4],
    len: usize,
}

impl Gradient {
    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len]
    }
}

fn shifted(kind: ModelKind, params: &FitParams, r: f64) -> Result<(FitParams, f64), DomainError> {
    let p = params.restricted(kind);
    let x = p.c + r;
    if x > 0.0 && x.is_finite() {
        Ok((p, x))
    } else {
        Err(DomainError { shifted_rank: x })
    }
}

/// `a + b·(c+r)^(−alpha)` with the kind's fixed parameters applied.
pub fn eval(kind: ModelKind, params: &FitParams, r: f64) -> Result<f64, DomainError> {
    let (p, x) = shifted(kind, params, r)?;
    Ok(p.a + p.b * libm::pow(x, -p.alpha))
}

/// Analytic derivatives of [`eval`].
pub fn gradient(kind: ModelKind, params: &FitParams, r: f64) -> Result<Gradient, DomainError> {
    let (p, x) = shifted(kind, params, r)?;
    let power = libm::pow(x, -p.alpha);
    let mut values = [0.0; 4];
    for (slot, &param) in values.iter_mut().zip(kind.free_params()) {
        *slot = match param {
            Param::A => 1.0,
            Param::B => power,
            Param::C => -p.alpha * p.b * power / x,
            Param::Alpha => -p.b * libm::log(x) * power,
        };
    }
    Ok(Gradient { values, len: kind.n_free() })
}

/// Shifted coordinates `(r + c, f_r − a)`. On log-log axes data following
/// the modified law becomes a straight line of slope `−alpha`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Straightened {
    pub points: Vec<(f64, f64)>,
    /// Points with a non-positive coordinate, left out of `points`.
    pub dropped: usize,
}

pub fn straighten(dist: &RankDistribution, a: f64, c: f64) -> Straightened {
    let mut out = Straightened::default();
    for e in dist.entries() {
        let x = e.rank as f64 + c;
        let y = e.fraction - a;
        if x > 0.0 && y > 0.0 {
            out.points.push((x, y));
        } else {
            out.dropped += 1;
        }
    }
    out
}
