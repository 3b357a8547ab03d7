//! The kernel abstraction and its composition with a Poisson restart clock.
//!
//! For a base kernel `P`, restart rate `λ` and restart law `ν`, the
//! restarted process has transition function
//!
//! ```text
//! P̃(t, x, Γ) = e^{−λt} P(t, x, Γ) + ∫_E ∫_0^t λ e^{−λs} P(s, y, Γ) ds ν(dy)
//! ```
//!
//! and invariant probability `q_ν(Γ) = ∫_E ∫_0^∞ λ e^{−λs} P(s, y, Γ) ds ν(dy)`.
//! The time integral is always the inner one; discrete restart laws make
//! the outer integral an exact weighted sum.
//!
//! The order swap behind the moment formula assumes
//! `∫∫ λe^{−λs} E_y|X(s)|^k ds ν(dy) < ∞`; see `analysis::modified_moment`
//! for where that is checked.

use rand::RngCore;

use crate::distribution::Distribution;
use crate::error::{invalid, Error, Result};
use crate::quadrature::{
    exp_weighted_integral, QuadratureOptions, QuadratureResult, TailGrowth, Upper,
};
use crate::space::{StateSpace, Target};

/// An honest, time-homogeneous transition function.
///
/// Methods take already-validated arguments: `x` inside the state space,
/// `t ≥ 0` (strictly positive for densities). The restarted-process
/// operations perform that validation.
pub trait MarkovKernel: Send + Sync {
    fn state_space(&self) -> &StateSpace;

    /// `P(t, x, Γ)`; the indicator of `x ∈ Γ` at `t = 0`.
    fn transition_probability(&self, t: f64, x: f64, target: &Target) -> f64;

    /// `p(t, x, z)` for `t > 0`, or `None` when the law has no density.
    fn transition_density(&self, _t: f64, _x: f64, _z: f64) -> Option<f64> {
        None
    }

    /// Bound `p(s, y, z) ≤ C e^{ηs}` for `s ≥ 0.01`, uniform in `y`.
    fn density_growth(&self, _z: f64) -> TailGrowth {
        TailGrowth::BOUNDED
    }

    /// One draw from `P(t, x, ·)`, exact in law.
    fn sample_transition(&self, t: f64, x: f64, rng: &mut dyn RngCore) -> f64;

    /// `E_x[X(t)^k]` in closed form.
    fn moment(&self, _k: u32, _t: f64, _x: f64) -> Option<f64> {
        None
    }

    /// Certified growth `E_x[X(t)^k] ≤ c_k(x) e^{η_k t}`.
    fn moment_growth(&self, _k: u32) -> Option<MomentGrowth> {
        None
    }

    /// `∫_E ∫_0^horizon λ e^{−λs} E_y[X(s)^k] ds ν(dy)` in closed form;
    /// `horizon` may be infinite, in which case a divergent integral is
    /// reported as `+∞`.
    fn discounted_moment(&self, _k: u32, _lambda: f64, _horizon: f64, _nu: &Distribution) -> Option<f64> {
        None
    }

    /// Stationary law of the base process, for ergodic finite chains.
    fn stationary_law(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Constant part of a certified moment growth bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GrowthConstant {
    /// `c(y) = y^k`.
    Power { k: u32 },
    /// `c(y) = c` for every `y`.
    Uniform { c: f64 },
}

impl GrowthConstant {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            GrowthConstant::Power { k } => y.powi(k as i32),
            GrowthConstant::Uniform { c } => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MomentGrowth {
    pub c: GrowthConstant,
    pub eta: f64,
    /// True when `c(x) e^{ηt}` equals the moment rather than bounding it.
    pub exact: bool,
}

macro_rules! forward_kernel {
    ($ty:ty) => {
        impl<K: MarkovKernel + ?Sized> MarkovKernel for $ty {
            fn state_space(&self) -> &StateSpace {
                (**self).state_space()
            }
            fn transition_probability(&self, t: f64, x: f64, target: &Target) -> f64 {
                (**self).transition_probability(t, x, target)
            }
            fn transition_density(&self, t: f64, x: f64, z: f64) -> Option<f64> {
                (**self).transition_density(t, x, z)
            }
            fn density_growth(&self, z: f64) -> TailGrowth {
                (**self).density_growth(z)
            }
            fn sample_transition(&self, t: f64, x: f64, rng: &mut dyn RngCore) -> f64 {
                (**self).sample_transition(t, x, rng)
            }
            fn moment(&self, k: u32, t: f64, x: f64) -> Option<f64> {
                (**self).moment(k, t, x)
            }
            fn moment_growth(&self, k: u32) -> Option<MomentGrowth> {
                (**self).moment_growth(k)
            }
            fn discounted_moment(&self, k: u32, lambda: f64, horizon: f64, nu: &Distribution) -> Option<f64> {
                (**self).discounted_moment(k, lambda, horizon, nu)
            }
            fn stationary_law(&self) -> Option<Vec<f64>> {
                (**self).stationary_law()
            }
        }
    };
}

forward_kernel!(Box<K>);
forward_kernel!(&K);

/// Restart rate and restart law.
#[derive(Debug, Clone)]
pub struct RestartSpec {
    rate: f64,
    nu: Distribution,
}

impl RestartSpec {
    pub fn new(rate: f64, nu: Distribution) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("lambda", format!("restart rate must be positive and finite, got {rate}")));
        }
        Ok(Self { rate, nu })
    }

    /// A clock that never rings. Only the simulator accepts it; every
    /// analytic operation requires a positive rate.
    pub fn without_restarts(nu: Distribution) -> Self {
        Self { rate: 0.0, nu }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn nu(&self) -> &Distribution {
        &self.nu
    }

    /// Weight `e^{−λt}` of the no-restart term.
    pub fn no_restart_weight(&self, t: f64) -> f64 {
        (-self.rate * t).exp()
    }

    pub(crate) fn require_positive_rate(&self) -> Result<f64> {
        if self.rate > 0.0 {
            Ok(self.rate)
        } else {
            Err(invalid("lambda", "this operation needs a positive restart rate"))
        }
    }
}

/// A base kernel composed with a restart clock.
#[derive(Debug, Clone)]
pub struct RestartedProcess<K> {
    base: K,
    restart: RestartSpec,
    opts: QuadratureOptions,
}

impl<K: MarkovKernel> RestartedProcess<K> {
    pub fn new(base: K, restart: RestartSpec) -> Result<Self> {
        if !restart.nu.supported_in(base.state_space()) {
            return Err(Error::StateSpaceMismatch(format!(
                "restart law charges states outside {:?}",
                base.state_space()
            )));
        }
        Ok(Self {
            base,
            restart,
            opts: QuadratureOptions::default(),
        })
    }

    pub fn with_options(mut self, opts: QuadratureOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn base(&self) -> &K {
        &self.base
    }

    pub fn restart(&self) -> &RestartSpec {
        &self.restart
    }

    pub fn options(&self) -> &QuadratureOptions {
        &self.opts
    }

    pub fn state_space(&self) -> &StateSpace {
        self.base.state_space()
    }

    pub(crate) fn check_state(&self, x: f64) -> Result<()> {
        if self.state_space().contains(x) {
            Ok(())
        } else if self.state_space().is_finite() {
            Err(Error::UnknownState(x))
        } else {
            Err(Error::DomainError(format!("state {x} lies outside {:?}", self.state_space())))
        }
    }

    pub(crate) fn check_time(t: f64) -> Result<()> {
        if t >= 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(invalid("t", format!("time must be finite and non-negative, got {t}")))
        }
    }

    fn require_density(&self) -> Result<()> {
        let probe = match self.state_space() {
            StateSpace::HalfLinePositive => 1.0,
            StateSpace::RealLine => 0.0,
            StateSpace::FiniteSet { .. } => return Err(Error::DensityUnavailable),
        };
        match self.base.transition_density(1.0, probe, probe) {
            Some(_) => Ok(()),
            None => Err(Error::DensityUnavailable),
        }
    }

    /// `P̃(t, x, Γ)`.
    pub fn restarted_transition(&self, t: f64, x: f64, target: &Target) -> Result<QuadratureResult> {
        let lambda = self.restart.require_positive_rate()?;
        Self::check_time(t)?;
        self.check_state(x)?;
        target.validate(self.state_space())?;

        let stay = self.restart.no_restart_weight(t) * self.base.transition_probability(t, x, target);
        let mix = self.restart.nu.integrate(
            |y| {
                exp_weighted_integral(
                    |s| self.base.transition_probability(s, y, target),
                    lambda,
                    Upper::Finite(t),
                    &self.opts,
                )
                .map_err(Error::from)
            },
            &self.opts,
        )?;
        Ok(shift(mix, stay))
    }

    /// `p̃(t, x, z)` for `t > 0`.
    pub fn restarted_density(&self, t: f64, x: f64, z: f64) -> Result<QuadratureResult> {
        let lambda = self.restart.require_positive_rate()?;
        if t == 0.0 {
            return Err(Error::SingularityAtOrigin);
        }
        Self::check_time(t)?;
        self.require_density()?;
        self.check_state(x)?;
        self.check_state(z)?;

        let stay = self.restart.no_restart_weight(t) * self.base.transition_density(t, x, z).unwrap_or(0.0);
        let mix = self.restart.nu.integrate(
            |y| {
                exp_weighted_integral(
                    |s| self.base.transition_density(s, y, z).unwrap_or(0.0),
                    lambda,
                    Upper::Finite(t),
                    &self.opts,
                )
                .map_err(Error::from)
            },
            &self.opts,
        )?;
        Ok(shift(mix, stay))
    }

    /// `q_ν(Γ)`.
    pub fn invariant_measure(&self, target: &Target) -> Result<QuadratureResult> {
        let lambda = self.restart.require_positive_rate()?;
        target.validate(self.state_space())?;
        self.restart.nu.integrate(
            |y| {
                exp_weighted_integral(
                    |s| self.base.transition_probability(s, y, target),
                    lambda,
                    Upper::Infinite(TailGrowth::BOUNDED),
                    &self.opts,
                )
                .map_err(Error::from)
            },
            &self.opts,
        )
    }

    /// Density of `q_ν` at `z`.
    pub fn invariant_density(&self, z: f64) -> Result<QuadratureResult> {
        let lambda = self.restart.require_positive_rate()?;
        self.require_density()?;
        self.check_state(z)?;
        let growth = self.base.density_growth(z);
        self.restart.nu.integrate(
            |y| {
                exp_weighted_integral(
                    |s| self.base.transition_density(s, y, z).unwrap_or(0.0),
                    lambda,
                    Upper::Infinite(growth),
                    &self.opts,
                )
                .map_err(Error::from)
            },
            &self.opts,
        )
    }

    /// Row `P̃(t, x, {j})` over every state of a finite chain.
    pub fn restarted_row(&self, t: f64, x: f64) -> Result<Vec<f64>> {
        let values = self.finite_values()?;
        values
            .iter()
            .map(|&v| self.restarted_transition(t, x, &Target::singleton(v)).map(|r| r.value))
            .collect()
    }

    /// `q_ν({j})` over every state of a finite chain.
    pub fn invariant_law(&self) -> Result<Vec<f64>> {
        let values = self.finite_values()?;
        values
            .iter()
            .map(|&v| self.invariant_measure(&Target::singleton(v)).map(|r| r.value))
            .collect()
    }

    fn finite_values(&self) -> Result<Vec<f64>> {
        self.state_space()
            .finite_values()
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::UnsupportedTarget("state-by-state rows need a finite state set".into()))
    }
}

fn shift(mut r: QuadratureResult, by: f64) -> QuadratureResult {
    r.value += by;
    r
}

/// Resolvent `R(y, Γ) = ∫_0^∞ e^{−λs} P(s, y, Γ) ds`.
pub fn resolvent<K: MarkovKernel + ?Sized>(
    kernel: &K,
    lambda: f64,
    y: f64,
    target: &Target,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive and finite, got {lambda}")));
    }
    if !kernel.state_space().contains(y) {
        return Err(Error::DomainError(format!("state {y} lies outside the state space")));
    }
    target.validate(kernel.state_space())?;
    let r = exp_weighted_integral(
        |s| kernel.transition_probability(s, y, target),
        lambda,
        Upper::Infinite(TailGrowth::BOUNDED),
        opts,
    )?;
    Ok(QuadratureResult {
        value: r.value / lambda,
        abs_error_estimate: r.abs_error_estimate / lambda,
        tolerance: r.tolerance / lambda,
        ..r
    })
}

/// `∫ λ R(y, Γ) ν(dy)`: the invariant measure assembled from resolvents.
pub fn invariant_from_resolvent<K: MarkovKernel + ?Sized>(
    kernel: &K,
    restart: &RestartSpec,
    target: &Target,
    opts: &QuadratureOptions,
) -> Result<QuadratureResult> {
    let lambda = restart.require_positive_rate()?;
    restart.nu().integrate(
        |y| {
            resolvent(kernel, lambda, y, target, opts).map(|r| QuadratureResult {
                value: lambda * r.value,
                abs_error_estimate: lambda * r.abs_error_estimate,
                tolerance: lambda * r.tolerance,
                ..r
            })
        },
        opts,
    )
}
