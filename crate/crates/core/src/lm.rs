//! Levenberg–Marquardt nonlinear least squares.
//!
//! Minimizes `S(p) = Σ rᵢ(p)²` given the residual vector `r(p)` and its
//! Jacobian `J = ∂r/∂p`. Each iteration solves the damped normal equations
//!
//! ```text
//! (JᵀJ + λ·diag(JᵀJ)) δ = −Jᵀr
//! ```
//!
//! in column-scaled form, so the iteration is invariant to rescaling any
//! single parameter. A step is accepted only if it strictly lowers `S` and
//! the residual function reports the trial point as feasible; otherwise
//! `λ` grows and the step is re-solved. Accepted SSE is therefore
//! monotonically non-increasing.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    /// Factor applied to `λ` on a rejected step (divided on accepted ones).
    pub damping_factor: f64,
    pub min_damping: f64,
    pub max_damping: f64,
    /// Stop when an accepted step lowers SSE by less than this fraction.
    pub sse_rel_tol: f64,
    /// Stop when `max |Jᵀr|` falls below this.
    pub gradient_tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_factor: 10.0,
            min_damping: 1e-12,
            max_damping: 1e12,
            sse_rel_tol: 1e-10,
            gradient_tol: 1e-12,
        }
    }
}

/// Why the iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ZeroResidual,
    SseTolerance,
    GradientTolerance,
    /// No lower-SSE step exists even at maximum damping: the point is
    /// stationary to working precision.
    Stalled,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxIterations)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error("dimension mismatch: {residuals} residuals for {params} parameters")]
    DimensionMismatch { residuals: usize, params: usize },
    #[error("residuals undefined at the initial parameters")]
    InfeasibleStart,
    #[error("normal equations are singular")]
    SingularNormalEquations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// `sse / (n − p) · (JᵀJ)⁻¹`, row-major `p × p`.
    pub covariance: Vec<f64>,
    pub sse: f64,
    /// Accepted steps taken.
    pub iterations: usize,
    pub termination: Termination,
    /// Damping in effect when the iteration stopped.
    pub damping: f64,
}

impl LmSolution {
    pub fn converged(&self) -> bool {
        self.termination.converged()
    }

    /// Square roots of the covariance diagonal.
    pub fn std_errors(&self) -> Vec<f64> {
        let p = self.params.len();
        (0..p).map(|i| libm::sqrt(self.covariance[i * p + i].max(0.0))).collect()
    }
}

/// Runs Levenberg–Marquardt from `init`.
///
/// `residuals(p, out)` fills the `n_residuals` residuals and returns `false`
/// when `p` lies outside the model's domain; such trial points are rejected
/// like an SSE increase. `jacobian(p, out)` fills `∂rᵢ/∂pⱼ` row-major into an
/// `n_residuals × init.len()` buffer; it is only called at feasible points.
pub fn lm_minimize<R, J>(
    n_residuals: usize,
    mut residuals: R,
    mut jacobian: J,
    init: &[f64],
    opts: &LmOptions,
) -> Result<LmSolution, LmError>
where
    R: FnMut(&[f64], &mut [f64]) -> bool,
    J: FnMut(&[f64], &mut [f64]),
{
    let n = n_residuals;
    let p = init.len();
    if p == 0 || n <= p {
        return Err(LmError::DimensionMismatch { residuals: n, params: p });
    }

    let mut params = init.to_vec();
    let mut r = vec![0.0; n];
    if !residuals(&params, &mut r) {
        return Err(LmError::InfeasibleStart);
    }
    let mut sse = sum_sq(&r);
    if !sse.is_finite() {
        return Err(LmError::InfeasibleStart);
    }

    let mut jac = vec![0.0; n * p];
    let mut normal = vec![0.0; p * p];
    let mut grad = vec![0.0; p];
    let mut scale = vec![0.0; p];
    let mut system = vec![0.0; p * p];
    let mut step = vec![0.0; p];
    let mut trial = vec![0.0; p];
    let mut trial_r = vec![0.0; n];

    let mut lambda = opts.initial_damping;
    let mut iterations = 0;

    let termination = 'outer: loop {
        if sse == 0.0 {
            break Termination::ZeroResidual;
        }
        jacobian(&params, &mut jac);
        normal_equations(&jac, &r, p, &mut normal, &mut grad);
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < opts.gradient_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        column_scale(&normal, p, &mut scale);

        let mut factored_once = false;
        loop {
            // scaled system: (Â + λI) δ̂ = −ĝ with Â = S⁻¹AS⁻¹, δ = S⁻¹δ̂
            for i in 0..p {
                for j in 0..p {
                    system[i * p + j] = normal[i * p + j] / (scale[i] * scale[j]);
                }
                system[i * p + i] += lambda;
                step[i] = -grad[i] / scale[i];
            }
            let solved = cholesky(&mut system, p) && {
                cholesky_solve(&system, p, &mut step);
                step.iter().all(|s| s.is_finite())
            };
            if solved {
                factored_once = true;
                for i in 0..p {
                    trial[i] = params[i] + step[i] / scale[i];
                }
                if residuals(&trial, &mut trial_r) {
                    let trial_sse = sum_sq(&trial_r);
                    if trial_sse < sse {
                        let rel = (sse - trial_sse) / sse;
                        core::mem::swap(&mut params, &mut trial);
                        core::mem::swap(&mut r, &mut trial_r);
                        sse = trial_sse;
                        lambda = (lambda / opts.damping_factor).max(opts.min_damping);
                        iterations += 1;
                        if rel < opts.sse_rel_tol {
                            break 'outer Termination::SseTolerance;
                        }
                        continue 'outer;
                    }
                }
            }
            lambda *= opts.damping_factor;
            if lambda > opts.max_damping {
                lambda = opts.max_damping;
                if !factored_once {
                    return Err(LmError::SingularNormalEquations);
                }
                break 'outer Termination::Stalled;
            }
        }
    };

    let covariance = covariance(&mut jacobian, &params, &mut jac, n, sse)?;
    Ok(LmSolution { params, covariance, sse, iterations, termination, damping: lambda })
}

fn covariance<J>(jacobian: &mut J, params: &[f64], jac: &mut [f64], n: usize, sse: f64) -> Result<Vec<f64>, LmError>
where
    J: FnMut(&[f64], &mut [f64]),
{
    let p = params.len();
    jacobian(params, jac);
    let mut normal = vec![0.0; p * p];
    let mut grad = vec![0.0; p];
    let zeros = vec![0.0; n];
    normal_equations(jac, &zeros, p, &mut normal, &mut grad);
    let mut scale = vec![0.0; p];
    column_scale(&normal, p, &mut scale);
    for i in 0..p {
        for j in 0..p {
            normal[i * p + j] /= scale[i] * scale[j];
        }
    }
    if !cholesky(&mut normal, p) {
        return Err(LmError::SingularNormalEquations);
    }
    let sigma2 = sse / (n - p) as f64;
    let mut cov = vec![0.0; p * p];
    let mut col = vec![0.0; p];
    for j in 0..p {
        col.iter_mut().for_each(|x| *x = 0.0);
        col[j] = 1.0;
        cholesky_solve(&normal, p, &mut col);
        for i in 0..p {
            cov[i * p + j] = sigma2 * col[i] / (scale[i] * scale[j]);
        }
    }
    if cov.iter().any(|x| !x.is_finite()) {
        return Err(LmError::SingularNormalEquations);
    }
    Ok(cov)
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// `normal = JᵀJ`, `grad = Jᵀr`.
fn normal_equations(jac: &[f64], r: &[f64], p: usize, normal: &mut [f64], grad: &mut [f64]) {
    normal.iter_mut().for_each(|x| *x = 0.0);
    grad.iter_mut().for_each(|x| *x = 0.0);
    for (row, &ri) in jac.chunks_exact(p).zip(r) {
        for i in 0..p {
            grad[i] += row[i] * ri;
            for j in 0..=i {
                normal[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            normal[j * p + i] = normal[i * p + j];
        }
    }
}

/// `sqrt(diag(JᵀJ))`, with zero columns given the largest scale so they
/// stay solvable under damping.
fn column_scale(normal: &[f64], p: usize, scale: &mut [f64]) {
    let max = (0..p).map(|i| normal[i * p + i]).fold(0.0f64, f64::max);
    let floor = if max > 0.0 { max } else { 1.0 };
    for i in 0..p {
        let d = normal[i * p + i];
        scale[i] = libm::sqrt(if d > 0.0 && d.is_finite() { d } else { floor });
    }
}

/// In-place lower Cholesky factor. Returns `false` if `a` is not
/// numerically positive definite.
fn cholesky(a: &mut [f64], p: usize) -> bool {
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !d.is_finite() || d <= 1e-14 * a[j * p + j].abs().max(f64::MIN_POSITIVE) {
            return false;
        }
        let d = libm::sqrt(d);
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], p: usize, b: &mut [f64]) {
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= l[k * p + i] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
}
