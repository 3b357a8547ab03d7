//! Initial and restart distributions.

use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution as _, Exp, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{self, QuadratureOptions, QuadratureResult};
use crate::space::StateSpace;

/// A law with a density on the real line or the positive half-line.
pub trait ContinuousLaw: Debug + Send + Sync {
    fn pdf(&self, x: f64) -> f64;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
    /// `RealLine` or `HalfLinePositive`.
    fn support(&self) -> StateSpace;
    /// Finite bounds of the support, if any, as (lo, hi).
    fn bounds(&self) -> (f64, f64) {
        match self.support() {
            StateSpace::HalfLinePositive => (0.0, f64::INFINITY),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
    /// Points where the density has kinks or concentrates; used as
    /// quadrature breakpoints.
    fn landmarks(&self) -> Vec<f64> {
        Vec::new()
    }
    fn moment(&self, _k: u32) -> Option<f64> {
        None
    }
    fn abs_moment(&self, _k: u32) -> Option<f64> {
        None
    }
}

/// Parametric densities understood by the config layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityFamily {
    Normal { mean: f64, sd: f64 },
    LogNormal { log_mean: f64, log_sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Exponential { rate: f64 },
}

impl DensityFamily {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DensityFamily::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            DensityFamily::LogNormal { log_mean, log_sd } => {
                log_mean.is_finite() && log_sd > 0.0 && log_sd.is_finite()
            }
            DensityFamily::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            DensityFamily::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("density", format!("invalid parameters {self:?}")))
        }
    }
}

fn double_factorial_odd(j: u32) -> f64 {
    // (j-1)!! for even j
    (1..j).step_by(2).map(f64::from).product()
}

/// E[Z^j] for a standard normal Z.
pub(crate) fn standard_normal_moment(j: u32) -> f64 {
    if j % 2 == 1 {
        0.0
    } else {
        double_factorial_odd(j)
    }
}

/// E|Z|^j for a standard normal Z.
fn standard_normal_abs_moment(j: u32) -> f64 {
    if j.is_multiple_of(2) {
        double_factorial_odd(j)
    } else {
        // E|Z|^{2m+1} = 2^m m! sqrt(2/pi)
        let m = (j - 1) / 2;
        let fact: f64 = (1..=m).map(f64::from).product();
        2f64.powi(m as i32) * fact * (2.0 / std::f64::consts::PI).sqrt()
    }
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

impl ContinuousLaw for DensityFamily {
    fn pdf(&self, x: f64) -> f64 {
        match *self {
            DensityFamily::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            DensityFamily::LogNormal { log_mean, log_sd } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let z = (x.ln() - log_mean) / log_sd;
                (-0.5 * z * z).exp() / (x * log_sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            DensityFamily::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            DensityFamily::Exponential { rate } => {
                if x < 0.0 {
                    0.0
                } else {
                    rate * (-rate * x).exp()
                }
            }
        }
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            DensityFamily::Normal { mean, sd } => Normal::new(mean, sd).unwrap().sample(rng),
            DensityFamily::LogNormal { log_mean, log_sd } => {
                LogNormal::new(log_mean, log_sd).unwrap().sample(rng)
            }
            DensityFamily::Uniform { lo, hi } => rng.random_range(lo..hi),
            DensityFamily::Exponential { rate } => Exp::new(rate).unwrap().sample(rng),
        }
    }

    fn support(&self) -> StateSpace {
        match *self {
            DensityFamily::Normal { .. } => StateSpace::RealLine,
            DensityFamily::Uniform { lo, .. } if lo <= 0.0 => StateSpace::RealLine,
            _ => StateSpace::HalfLinePositive,
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            DensityFamily::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DensityFamily::Uniform { lo, hi } => (lo, hi),
            _ => (0.0, f64::INFINITY),
        }
    }

    fn landmarks(&self) -> Vec<f64> {
        match *self {
            DensityFamily::Normal { mean, .. } => vec![mean],
            DensityFamily::LogNormal { log_mean, .. } => vec![log_mean.exp()],
            DensityFamily::Uniform { .. } => Vec::new(),
            DensityFamily::Exponential { rate } => vec![1.0 / rate],
        }
    }

    fn moment(&self, k: u32) -> Option<f64> {
        Some(match *self {
            DensityFamily::Normal { mean, sd } => (0..=k)
                .map(|j| binomial(k, j) * mean.powi((k - j) as i32) * sd.powi(j as i32) * standard_normal_moment(j))
                .sum(),
            DensityFamily::LogNormal { log_mean, log_sd } => {
                let k = f64::from(k);
                (k * log_mean + 0.5 * k * k * log_sd * log_sd).exp()
            }
            DensityFamily::Uniform { lo, hi } => {
                let p = (k + 1) as i32;
                (hi.powi(p) - lo.powi(p)) / (f64::from(k + 1) * (hi - lo))
            }
            DensityFamily::Exponential { rate } => {
                (1..=k).map(f64::from).product::<f64>() / rate.powi(k as i32)
            }
        })
    }

    fn abs_moment(&self, k: u32) -> Option<f64> {
        match *self {
            DensityFamily::Normal { mean, sd } => {
                // Bound via (|m| + sd|Z|)^k, exact when mean = 0.
                Some(
                    (0..=k)
                        .map(|j| {
                            binomial(k, j)
                                * mean.abs().powi((k - j) as i32)
                                * sd.powi(j as i32)
                                * standard_normal_abs_moment(j)
                        })
                        .sum(),
                )
            }
            DensityFamily::Uniform { lo, hi } if lo < 0.0 => {
                let m = lo.abs().max(hi.abs());
                Some(m.powi(k as i32))
            }
            _ => self.moment(k),
        }
    }
}

/// A probability law on a state space: the restart distribution ν or the
/// initial distribution.
#[derive(Debug, Clone)]
pub enum Distribution {
    PointMass(f64),
    /// (state, weight) pairs with weights summing to one.
    FiniteSupport(Vec<(f64, f64)>),
    Density(Arc<dyn ContinuousLaw>),
}

impl Distribution {
    pub fn point(x: f64) -> Self {
        Distribution::PointMass(x)
    }

    /// Validates weights: non-negative, finite, summing to one within 1e-12.
    pub fn finite(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("nu", "finite support must be non-empty"));
        }
        let mut total = 0.0;
        for (i, &(x, w)) in points.iter().enumerate() {
            if !x.is_finite() || !w.is_finite() || w < 0.0 {
                return Err(invalid("nu", format!("support point {i} = ({x}, {w}) is invalid")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("nu", format!("weights sum to {total}, expected 1")));
        }
        Ok(Distribution::FiniteSupport(points))
    }

    /// Uniform law over the given states.
    pub fn uniform_over(states: &[f64]) -> Result<Self> {
        let w = 1.0 / states.len() as f64;
        Self::finite(states.iter().map(|&x| (x, w)).collect())
    }

    pub fn density<L: ContinuousLaw + 'static>(law: L) -> Self {
        Distribution::Density(Arc::new(law))
    }

    pub fn family(family: DensityFamily) -> Result<Self> {
        family.validate()?;
        Ok(Self::density(family))
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match self {
            Distribution::PointMass(x) => *x,
            Distribution::FiniteSupport(points) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(x, w) in points {
                    acc += w;
                    if u < acc {
                        return x;
                    }
                }
                // Rounding left u above the final partial sum.
                points.iter().rev().find(|p| p.1 > 0.0).map_or(points[0].0, |p| p.0)
            }
            Distribution::Density(law) => law.sample(rng),
        }
    }

    /// Atoms of a discrete law.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Distribution::PointMass(x) => Some(vec![(*x, 1.0)]),
            Distribution::FiniteSupport(p) => Some(p.clone()),
            Distribution::Density(_) => None,
        }
    }

    pub fn moment(&self, k: u32) -> Option<f64> {
        match self {
            Distribution::Density(law) => law.moment(k),
            _ => Some(
                self.atoms()
                    .unwrap()
                    .iter()
                    .map(|&(x, w)| w * x.powi(k as i32))
                    .sum(),
            ),
        }
    }

    /// `∫|y|^k ν(dy)`, or an upper bound on it, when known in closed form.
    pub fn abs_moment(&self, k: u32) -> Option<f64> {
        match self {
            Distribution::Density(law) => law.abs_moment(k),
            _ => Some(
                self.atoms()
                    .unwrap()
                    .iter()
                    .map(|&(x, w)| w * x.abs().powi(k as i32))
                    .sum(),
            ),
        }
    }

    /// Points used to split quadrature over the state variable.
    pub fn landmarks(&self) -> Vec<f64> {
        match self {
            Distribution::Density(law) => law.landmarks(),
            _ => self.atoms().unwrap().iter().map(|p| p.0).collect(),
        }
    }

    /// Whether every state charged by the law lies in `space`.
    pub fn supported_in(&self, space: &StateSpace) -> bool {
        match self {
            Distribution::Density(law) => matches!(
                (law.support(), space),
                (_, StateSpace::RealLine) | (StateSpace::HalfLinePositive, StateSpace::HalfLinePositive)
            ),
            _ => self.atoms().unwrap().iter().all(|&(x, w)| w == 0.0 || space.contains(x)),
        }
    }

    /// `∫ f(y) ν(dy)` where each `f(y)` is itself a quadrature result.
    ///
    /// Discrete laws are summed exactly; densities are integrated with
    /// `opts`, and the reported error adds the outer estimate to the
    /// largest inner one.
    pub fn integrate<F>(&self, f: F, opts: &QuadratureOptions) -> Result<QuadratureResult>
    where
        F: Fn(f64) -> Result<QuadratureResult>,
    {
        match self {
            Distribution::Density(law) => {
                let first_err = std::cell::RefCell::new(None::<Error>);
                let worst_inner = std::cell::Cell::new(0.0f64);
                let inner_nodes = std::cell::Cell::new(0usize);
                let g = |y: f64| {
                    let p = law.pdf(y);
                    if p == 0.0 {
                        return 0.0;
                    }
                    match f(y) {
                        Ok(r) => {
                            worst_inner.set(worst_inner.get().max(r.abs_error_estimate));
                            inner_nodes.set(inner_nodes.get() + r.nodes_used);
                            p * r.value
                        }
                        Err(e) => {
                            first_err.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                };
                let (lo, hi) = law.bounds();
                let outer = quadrature::integrate(g, lo, hi, &law.landmarks(), opts);
                if let Some(e) = first_err.into_inner() {
                    return Err(e);
                }
                let mut outer = outer?;
                outer.abs_error_estimate += worst_inner.get();
                outer.tolerance += worst_inner.get();
                outer.nodes_used += inner_nodes.get();
                Ok(outer)
            }
            _ => {
                let mut value = 0.0;
                let mut err = 0.0;
                let mut tol = 0.0;
                let mut nodes = 0;
                for (y, w) in self.atoms().unwrap() {
                    if w == 0.0 {
                        continue;
                    }
                    let r = f(y)?;
                    value += w * r.value;
                    err += w * r.abs_error_estimate;
                    tol += w * r.tolerance;
                    nodes += r.nodes_used;
                }
                Ok(QuadratureResult {
                    value,
                    abs_error_estimate: err,
                    nodes_used: nodes,
                    tolerance: tol,
                    reliable: true,
                })
            }
        }
    }

    /// `∫ f(y) ν(dy)` for a plain function.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F, opts: &QuadratureOptions) -> Result<f64> {
        self.integrate(|y| Ok(exact(f(y))), opts).map(|r| r.value)
    }
}

pub(crate) fn exact(value: f64) -> QuadratureResult {
    QuadratureResult {
        value,
        abs_error_estimate: 0.0,
        nodes_used: 1,
        tolerance: 0.0,
        reliable: true,
    }
}

/// Draws a standard normal variate.
pub(crate) fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weights_must_sum_to_one() {
        assert!(Distribution::finite(vec![(0.0, 0.5), (1.0, 0.4)]).is_err());
        assert!(Distribution::finite(vec![(0.0, -0.5), (1.0, 1.5)]).is_err());
        assert!(Distribution::finite(vec![(0.0, 0.25), (1.0, 0.75)]).is_ok());
    }

    #[test]
    fn family_densities_integrate_to_one() {
        let opts = QuadratureOptions::default();
        for fam in [
            DensityFamily::Normal { mean: 1.0, sd: 0.3 },
            DensityFamily::LogNormal { log_mean: 0.2, log_sd: 0.5 },
            DensityFamily::Uniform { lo: -1.0, hi: 2.0 },
            DensityFamily::Exponential { rate: 3.0 },
        ] {
            let d = Distribution::family(fam).unwrap();
            let mass = d.expect(|_| 1.0, &opts).unwrap();
            assert!((mass - 1.0).abs() < 1e-9, "{fam:?}: {mass}");
            for k in 1..=3 {
                let q = d.expect(|y| y.powi(k as i32), &opts).unwrap();
                let m = d.moment(k).unwrap();
                assert!((q - m).abs() < 1e-8 * m.abs().max(1.0), "{fam:?} k={k}: {q} vs {m}");
            }
        }
    }

    #[test]
    fn finite_sampler_frequencies() {
        let d = Distribution::finite(vec![(0.0, 0.2), (5.0, 0.8)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let hits = (0..n).filter(|_| d.sample(&mut rng) == 5.0).count() as f64 / n as f64;
        let se = (0.8f64 * 0.2 / n as f64).sqrt();
        assert!((hits - 0.8).abs() < 3.0 * se);
    }

    #[test]
    fn normal_abs_moments() {
        assert!((standard_normal_abs_moment(1) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(standard_normal_abs_moment(4), 3.0);
        assert_eq!(standard_normal_moment(6), 15.0);
    }
}
