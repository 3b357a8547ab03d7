//! Moment dynamics of the restarted process and their stationary limits.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, Warning};
use crate::kernel::{GrowthConstant, MarkovKernel, RestartSpec, RestartedProcess};
use crate::processes::{BrownianWithDrift, GeometricBrownian};
use crate::quadrature::{exp_weighted_integral, Upper};
use crate::simulation::EstimatorReport;

/// A moment that is either a finite number or known to grow without bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MomentValue {
    Finite {
        value: f64,
    },
    Divergent {
        growth: String,
        /// Value at the requested finite time, when one was requested.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value_at_t: Option<f64>,
    },
}

impl MomentValue {
    pub fn finite(&self) -> Option<f64> {
        match self {
            MomentValue::Finite { value } => Some(*value),
            MomentValue::Divergent { .. } => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, MomentValue::Divergent { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub k: u32,
    pub t: f64,
    pub x: f64,
    pub analytic: MomentValue,
    /// Long-run upper bound from the certified growth of the base moments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical: Option<EstimatorReport>,
    /// Restart rate at and below which the stationary moment diverges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finiteness_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

impl MomentReport {
    pub fn with_empirical(mut self, empirical: EstimatorReport) -> Self {
        self.warnings.extend(empirical.warnings.iter().cloned());
        self.empirical = Some(empirical);
        self
    }

    /// `|analytic − estimate| ≤ 3·SE`, when both sides exist.
    pub fn passes(&self) -> Option<bool> {
        let value = self.analytic.finite()?;
        let e = self.empirical.as_ref()?;
        Some((value - e.estimate).abs() <= 3.0 * e.std_error)
    }
}

/// `E_x[X̃(t)^k] = e^{−λt} E_x[X(t)^k] + ∫∫_0^t λe^{−λs} E_y[X(s)^k] ds ν(dy)`.
///
/// The inner integral is taken in closed form when the kernel provides it
/// and by quadrature otherwise. A warning is attached when the integrability
/// of `|X|^k` that licenses the formula cannot be certified from the
/// absolute moments of the restart law.
pub fn modified_moment<K: MarkovKernel>(proc: &RestartedProcess<K>, k: u32, t: f64, x: f64) -> Result<MomentReport> {
    let lambda = proc.restart().require_positive_rate()?;
    if k == 0 {
        return Err(invalid("k", "moment order must be positive"));
    }
    RestartedProcess::<K>::check_time(t)?;
    proc.check_state(x)?;
    let base = proc.base();
    let nu = proc.restart().nu();

    let own = base.moment(k, t, x).ok_or_else(|| Error::MomentUnavailable {
        k,
        reason: "the base kernel has no closed-form moments".into(),
    })?;

    let mut warnings = Vec::new();
    match nu.abs_moment(k) {
        Some(m) if m.is_finite() => {}
        _ => warnings.push(Warning::FubiniUnverified {
            reason: format!("absolute moment of order {k} of the restart law is not known to be finite"),
        }),
    }

    let growth = base.moment_growth(k);
    let finiteness_threshold = growth.filter(|g| g.exact).map(|g| g.eta);
    let nu_k = nu.moment(k);

    if let (Some(g), Some(m)) = (growth, nu_k) {
        if g.exact && g.eta == lambda {
            // Resonance: the two exponentials cancel and the moment grows
            // linearly in t.
            let value = g.c.eval(x) + lambda * t * m;
            return Ok(MomentReport {
                k,
                t,
                x,
                analytic: MomentValue::Divergent {
                    growth: format!("linear growth x^k + lambda*t*m_k with m_k = {m}"),
                    value_at_t: Some(value),
                },
                bound: None,
                empirical: None,
                finiteness_threshold,
                warnings,
            });
        }
    }

    let mixed = match base.discounted_moment(k, lambda, t, nu) {
        Some(v) => v,
        None => {
            let opts = proc.options();
            nu.integrate(
                |y| {
                    exp_weighted_integral(|s| base.moment(k, s, y).unwrap_or(f64::NAN), lambda, Upper::Finite(t), opts)
                        .map_err(Error::from)
                },
                opts,
            )?
            .value
        }
    };
    let value = proc.restart().no_restart_weight(t) * own + mixed;

    let bound = growth.and_then(|g| {
        let c_bar = match g.c {
            GrowthConstant::Power { k } => nu.moment(k)?,
            GrowthConstant::Uniform { c } => c,
        };
        (g.eta < lambda).then(|| c_bar * lambda / (lambda - g.eta))
    });

    Ok(MomentReport {
        k,
        t,
        x,
        analytic: MomentValue::Finite { value },
        bound,
        empirical: None,
        finiteness_threshold,
        warnings,
    })
}

/// Which moment a growth bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `E_x[X(t)^k] ≤ c(x)e^{ηt}` bounds `limsup E_x[X̃(t)^k]` from above.
    #[default]
    Signed,
    /// `E_x|X(t)|^k ≤ c(x)e^{ηt}` bounds `limsup E_x|X̃(t)|^k`.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub kind: BoundKind,
    /// `∫c(y)ν(dy)`.
    pub c_bar: f64,
    pub eta: f64,
    pub lambda: f64,
    /// `c̄λ/(λ−η)`.
    pub value: f64,
}

/// Long-run bound `c̄λ/(λ−η)` with `c̄ = ∫c(y)ν(dy)`.
///
/// The caller certifies that the growth pair `(c, η)` holds for the moment
/// selected by `kind`; the arithmetic is the same for both kinds.
pub fn moment_bound<F>(restart: &RestartSpec, c_fn: F, eta: f64, kind: BoundKind) -> Result<MomentBound>
where
    F: Fn(f64) -> f64,
{
    let lambda = restart.require_positive_rate()?;
    if !(eta < lambda) {
        return Err(Error::EtaNotLessThanLambda { eta, lambda });
    }
    let opts = crate::quadrature::QuadratureOptions::default();
    let c_bar = restart.nu().expect(c_fn, &opts)?;
    if !c_bar.is_finite() {
        return Err(invalid("c", format!("integral of the growth constant against the restart law is {c_bar}")));
    }
    Ok(MomentBound {
        kind,
        c_bar,
        eta,
        lambda,
        value: c_bar * lambda / (lambda - eta),
    })
}

/// A uniform bound `E_x[X(t)^k] ≤ c` carries over unchanged to the
/// restarted process.
pub fn uniform_moment_bound(c: f64) -> f64 {
    c
}

/// Stationary mean, second moment and variance of restarted Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianStationaryMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

/// Limits of the first two moments as `t → ∞`, independent of the start.
pub fn bm_stationary_moments(p: &BrownianWithDrift, restart: &RestartSpec) -> Result<BrownianStationaryMoments> {
    let lambda = restart.require_positive_rate()?;
    let nu = restart.nu();
    let unavailable = |k| Error::MomentUnavailable {
        k,
        reason: "restart law has no known moment of this order".into(),
    };
    let m1 = nu.moment(1).ok_or_else(|| unavailable(1))?;
    let m2 = nu.moment(2).ok_or_else(|| unavailable(2))?;
    let (mu, s2) = (p.mu(), p.sigma() * p.sigma());
    let drift = mu / lambda;
    Ok(BrownianStationaryMoments {
        mean: m1 + drift,
        second_moment: s2 / lambda + 2.0 * drift * drift + 2.0 * drift * m1 + m2,
        variance: m2 - m1 * m1 + s2 / lambda + drift * drift,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmStationaryMoment {
    pub k: u32,
    pub lambda: f64,
    /// Growth exponent of the k-th base moment.
    pub threshold: f64,
    pub value: MomentValue,
    /// Largest order whose stationary moment is finite at this rate.
    pub max_finite_order: u32,
}

/// `λ/(λ−η_k)·∫y^k ν(dy)` when `λ > η_k`, divergent otherwise.
pub fn gbm_stationary_moment(p: &GeometricBrownian, restart: &RestartSpec, k: u32) -> Result<GbmStationaryMoment> {
    let lambda = restart.require_positive_rate()?;
    if k == 0 {
        return Err(invalid("k", "moment order must be positive"));
    }
    let m_k = restart.nu().moment(k).ok_or_else(|| Error::MomentUnavailable {
        k,
        reason: "restart law has no known moment of this order".into(),
    })?;
    let eta = p.moment_exponent(k);
    let value = if lambda > eta {
        MomentValue::Finite {
            value: lambda / (lambda - eta) * m_k,
        }
    } else if lambda == eta {
        MomentValue::Divergent {
            growth: "linear in t".into(),
            value_at_t: None,
        }
    } else {
        MomentValue::Divergent {
            growth: format!("exponential at rate {}", eta - lambda),
            value_at_t: None,
        }
    };
    Ok(GbmStationaryMoment {
        k,
        lambda,
        threshold: eta,
        value,
        max_finite_order: max_finite_moment_order(p, lambda),
    })
}

/// Largest `k` with `λ > η_k`, or 0 when even the mean diverges.
pub fn max_finite_moment_order(p: &GeometricBrownian, lambda: f64) -> u32 {
    // η_k is a convex quadratic in k vanishing at 0, so {k : η_k < λ} is an
    // interval; start from the positive root and correct for rounding.
    let s2 = p.sigma() * p.sigma();
    let a = p.log_drift();
    let root = (-a + (a * a + 2.0 * s2 * lambda).sqrt()) / s2;
    let mut k = root.floor().clamp(0.0, f64::from(u32::MAX - 1)) as u32;
    while k > 0 && !(lambda > p.moment_exponent(k)) {
        k -= 1;
    }
    while lambda > p.moment_exponent(k + 1) {
        k += 1;
    }
    k
}
