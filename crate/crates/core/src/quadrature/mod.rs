//! Exponentially weighted time integrals with certified error estimates.
//!
//! The restarted kernel, the invariant measure and the moment formula all
//! reduce to integrals of the form `∫ λ e^{-λs} f(s) ds` over `[0, t]` or
//! `[0, ∞)`. Diffusion integrands carry an `s^{-1/2}` singularity at the
//! origin when the target point coincides with the start point, and a
//! Gaussian bump that moves with `s`. Both are handled by a square-root
//! substitution on an initial segment followed by globally adaptive
//! Gauss–Kronrod bisection. Semi-infinite ranges are truncated at a point
//! past which the discarded mass is provably below a budget, given a growth
//! bound `|f(s)| ≤ C e^{ηs}` with `η < λ`.
//!
//! Error estimates are the difference between the nested Gauss and Kronrod
//! rules (floored at a rounding term), summed over panels, plus the tail
//! budget when truncation was applied.

mod gauss_kronrod;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use gauss_kronrod::pairwise_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("growth rate eta = {eta} is not below lambda = {lambda}; the integral may diverge")]
    TailBoundViolated { lambda: f64, eta: f64 },

    #[error("error estimate {estimate:e} exceeds tolerance {tolerance:e} after {nodes_used} evaluations")]
    ToleranceNotMet {
        estimate: f64,
        tolerance: f64,
        nodes_used: usize,
    },

    #[error("invalid integration interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("integrand is not finite at {at}")]
    NonFinite { at: f64 },

    #[error("invalid quadrature parameter: {0}")]
    InvalidParameter(String),
}

/// Tolerances shared by every integration routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Tail budget for truncated semi-infinite integrals, relative to the
    /// growth constant `C`.
    pub tail_eps: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_panels: 4000,
            tail_eps: 1e-16,
        }
    }
}

impl QuadratureOptions {
    pub fn with_rel_tol(self, rel_tol: f64) -> Self {
        Self { rel_tol, ..self }
    }

    pub fn with_abs_tol(self, abs_tol: f64) -> Self {
        Self { abs_tol, ..self }
    }

    fn validate(&self) -> Result<(), QuadratureError> {
        let ok = self.rel_tol >= 0.0
            && self.abs_tol >= 0.0
            && (self.rel_tol > 0.0 || self.abs_tol > 0.0)
            && self.tail_eps > 0.0
            && self.max_panels >= 1;
        if ok {
            Ok(())
        } else {
            Err(QuadratureError::InvalidParameter(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub nodes_used: usize,
    /// The tolerance the estimate was measured against.
    pub tolerance: f64,
    /// False when the estimate exceeds the tolerance.
    pub reliable: bool,
}

impl QuadratureResult {
    fn exact(value: f64) -> Self {
        Self {
            value,
            abs_error_estimate: 0.0,
            nodes_used: 0,
            tolerance: 0.0,
            reliable: true,
        }
    }

    /// Turns an unreliable result into [`QuadratureError::ToleranceNotMet`].
    pub fn require(self) -> Result<Self, QuadratureError> {
        if self.reliable {
            Ok(self)
        } else {
            Err(QuadratureError::ToleranceNotMet {
                estimate: self.abs_error_estimate,
                tolerance: self.tolerance,
                nodes_used: self.nodes_used,
            })
        }
    }
}

/// Growth bound `|f(s)| ≤ c · e^{eta s}` used to truncate `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailGrowth {
    pub c: f64,
    pub eta: f64,
}

impl TailGrowth {
    /// Bound for probabilities and other functions with `|f| ≤ 1`.
    pub const BOUNDED: TailGrowth = TailGrowth { c: 1.0, eta: 0.0 };

    pub fn new(c: f64, eta: f64) -> Self {
        Self { c, eta }
    }
}

/// Upper limit of an exponentially weighted integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upper {
    Finite(f64),
    Infinite(TailGrowth),
}

/// Smallest `s*` with `C·λ/(λ−η)·e^{−(λ−η)s*} ≤ eps`, so the integral of
/// `λe^{−λs} C e^{ηs}` over `[s*, ∞)` is at most `eps`.
pub fn tail_truncation_point(lambda: f64, eta: f64, c: f64, eps: f64) -> f64 {
    debug_assert!(eta < lambda && c > 0.0 && eps > 0.0);
    let gap = lambda - eta;
    ((c * lambda / gap) / eps).ln().max(0.0) / gap
}

/// `∫₀^upper λ e^{−λs} f(s) ds`.
///
/// Fails with [`QuadratureError::TailBoundViolated`] when an infinite upper
/// limit is paired with a growth rate `η ≥ λ`, and with
/// [`QuadratureError::ToleranceNotMet`] when the panel budget runs out.
pub fn exp_weighted_integral<F>(
    f: F,
    lambda: f64,
    upper: Upper,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    exp_weighted_integral_unchecked(f, lambda, upper, opts)?.require()
}

/// As [`exp_weighted_integral`] but returns unreliable results flagged
/// instead of failing.
pub fn exp_weighted_integral_unchecked<F>(
    f: F,
    lambda: f64,
    upper: Upper,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    opts.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(QuadratureError::InvalidParameter(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let (end, tail) = match upper {
        Upper::Finite(t) => {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(QuadratureError::InvalidInterval { a: 0.0, b: t });
            }
            (t, 0.0)
        }
        Upper::Infinite(g) => {
            if !(g.eta < lambda) {
                return Err(QuadratureError::TailBoundViolated {
                    lambda,
                    eta: g.eta,
                });
            }
            if !(g.c > 0.0 && g.c.is_finite()) {
                return Err(QuadratureError::InvalidParameter(format!(
                    "growth constant must be positive, got {}",
                    g.c
                )));
            }
            let budget = opts.tail_eps * g.c;
            (tail_truncation_point(lambda, g.eta, g.c, budget), budget)
        }
    };
    if end == 0.0 {
        return Ok(QuadratureResult::exact(0.0));
    }

    // s = u² on [0, split], then linear with matching slope.
    let split = end.min(1.0 / lambda);
    let u0 = split.sqrt();
    let u_end = u0 + (end - split) / (2.0 * u0);
    let map = |u: f64| -> (f64, f64) {
        if u <= u0 {
            (u * u, 2.0 * u)
        } else {
            (split + 2.0 * u0 * (u - u0), 2.0 * u0)
        }
    };
    let g = |u: f64| {
        let (s, jac) = map(u);
        let w = lambda * (-lambda * s).exp() * jac;
        if w == 0.0 {
            0.0
        } else {
            w * f(s)
        }
    };
    let breaks: Vec<f64> = if u_end > u0 {
        vec![0.0, u0, u_end]
    } else {
        vec![0.0, u0]
    };
    let mut res = gauss_kronrod::adaptive(&g, &breaks, opts)?;
    res.abs_error_estimate += tail;
    res.tolerance += tail;
    Ok(res)
}

/// `∫_lo^hi f(x) dx` with optional interior breakpoints; either end may be
/// infinite.
pub fn integrate<F>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    opts: &QuadratureOptions,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    integrate_unchecked(f, lo, hi, breaks, opts)?.require()
}

pub fn integrate_unchecked<F>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    opts: &QuadratureOptions,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    opts.validate()?;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(QuadratureError::InvalidInterval { a: lo, b: hi });
    }
    if lo == hi {
        return Ok(QuadratureResult::exact(0.0));
    }
    let mut points: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    points.sort_by(f64::total_cmp);
    points.dedup();

    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let mut all = vec![lo];
            all.extend(points);
            all.push(hi);
            gauss_kronrod::adaptive(&f, &all, opts)
        }
        _ => {
            // One variable v covers the whole line so a single adaptive run
            // shares the tolerance: v ∈ [−1, 0) maps to x = left − u/(1−u)
            // with u = −v, v ∈ [0, L] to x = left + v, and v ∈ (L, L+1] to
            // x = right + u/(1−u) with u = v − L.
            let left = if lo.is_finite() {
                lo
            } else {
                points.first().copied().unwrap_or(if hi.is_finite() { hi } else { 0.0 })
            };
            let right = if hi.is_finite() {
                hi
            } else {
                points.last().copied().unwrap_or(left)
            };
            let span = right - left;
            let g = |v: f64| {
                if v < 0.0 {
                    let d = 1.0 + v;
                    if d <= 0.0 {
                        return 0.0;
                    }
                    f(left + v / d) / (d * d)
                } else if v <= span {
                    f(left + v)
                } else {
                    let d = 1.0 - (v - span);
                    if d <= 0.0 {
                        return 0.0;
                    }
                    f(right + (v - span) / d) / (d * d)
                }
            };
            let mut all = Vec::new();
            if !lo.is_finite() {
                all.extend([-1.0, -0.5]);
            }
            all.push(0.0);
            all.extend(points.iter().filter(|p| **p > left && **p < right).map(|p| p - left));
            if span > 0.0 {
                all.push(span);
            }
            if !hi.is_finite() {
                all.extend([span + 0.5, span + 1.0]);
            }
            gauss_kronrod::adaptive(&g, &all, opts)
        }
    }
}
