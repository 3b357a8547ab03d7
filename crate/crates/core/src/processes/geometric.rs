use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::distribution::{standard_normal, Distribution};
use crate::error::{invalid, Error, Result};
use crate::kernel::{GrowthConstant, MarkovKernel, MomentGrowth};
use crate::quadrature::TailGrowth;
use crate::space::{StateSpace, Target};

use super::{normal_interval_probability, require_positive_time, SQRT_2PI};

/// `dX = μX dt + σX dW` on `(0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricBrownian {
    mu: f64,
    sigma: f64,
}

const HALF_LINE: StateSpace = StateSpace::HalfLinePositive;

impl GeometricBrownian {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(invalid("mu", format!("drift must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid("sigma", format!("volatility must be positive, got {sigma}")));
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Drift of `ln X`.
    pub fn log_drift(&self) -> f64 {
        self.mu - 0.5 * self.sigma * self.sigma
    }

    /// Growth exponent of the k-th moment: `k(μ − σ²/2) + k²σ²/2`.
    ///
    /// The restarted process has a finite stationary k-th moment exactly
    /// when the restart rate exceeds this value.
    pub fn moment_exponent(&self, k: u32) -> f64 {
        let k = f64::from(k);
        k * self.log_drift() + 0.5 * k * k * self.sigma * self.sigma
    }

    /// Log-normal density with log-mean `ln x + (μ − σ²/2)t` and
    /// log-variance `σ²t`.
    pub fn density(&self, t: f64, x: f64, z: f64) -> Result<f64> {
        require_positive_time(t)?;
        if !(x > 0.0) {
            return Err(Error::DomainError(format!("start state must be positive, got {x}")));
        }
        if !(z > 0.0) {
            return Err(Error::DomainError(format!("target state must be positive, got {z}")));
        }
        Ok(self.density_unchecked(t, x, z))
    }

    pub fn mean(&self, t: f64, x: f64) -> f64 {
        x * (self.mu * t).exp()
    }

    pub fn variance(&self, t: f64, x: f64) -> f64 {
        x * x * (2.0 * self.mu * t).exp() * (self.sigma * self.sigma * t).exp_m1()
    }

    fn density_unchecked(&self, t: f64, x: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        let sd = self.sigma * t.sqrt();
        let d = z.ln() - x.ln() - self.log_drift() * t;
        (-d * d / (2.0 * sd * sd)).exp() / (SQRT_2PI * z * sd)
    }
}

impl MarkovKernel for GeometricBrownian {
    fn state_space(&self) -> &StateSpace {
        &HALF_LINE
    }

    fn transition_probability(&self, t: f64, x: f64, target: &Target) -> f64 {
        let (lo, hi) = match target {
            Target::Whole => return 1.0,
            Target::Interval { lo, hi } => (*lo, *hi),
            Target::Subset { .. } => return 0.0,
        };
        if hi <= 0.0 {
            return 0.0;
        }
        if t == 0.0 {
            return if target.contains(x) { 1.0 } else { 0.0 };
        }
        let m = x.ln() + self.log_drift() * t;
        let sd = self.sigma * t.sqrt();
        let log_lo = if lo <= 0.0 { f64::NEG_INFINITY } else { lo.ln() };
        normal_interval_probability((log_lo - m) / sd, (hi.ln() - m) / sd)
    }

    fn transition_density(&self, t: f64, x: f64, z: f64) -> Option<f64> {
        Some(self.density_unchecked(t, x, z))
    }

    fn density_growth(&self, z: f64) -> TailGrowth {
        TailGrowth::new(1.0 / (z * self.sigma * SQRT_2PI * 0.1), 0.0)
    }

    fn sample_transition(&self, t: f64, x: f64, rng: &mut dyn RngCore) -> f64 {
        x * (self.log_drift() * t + self.sigma * t.sqrt() * standard_normal(rng)).exp()
    }

    fn moment(&self, k: u32, t: f64, x: f64) -> Option<f64> {
        Some(x.powi(k as i32) * (self.moment_exponent(k) * t).exp())
    }

    fn moment_growth(&self, k: u32) -> Option<MomentGrowth> {
        Some(MomentGrowth {
            c: GrowthConstant::Power { k },
            eta: self.moment_exponent(k),
            exact: true,
        })
    }

    fn discounted_moment(&self, k: u32, lambda: f64, horizon: f64, nu: &Distribution) -> Option<f64> {
        let m_k = nu.moment(k)?;
        let gap = lambda - self.moment_exponent(k);
        if horizon.is_infinite() {
            return Some(if gap > 0.0 { lambda / gap * m_k } else { f64::INFINITY });
        }
        // λ ∫_0^T e^{−(λ−η)s} ds, continuous through gap = 0.
        let integral = if gap == 0.0 {
            horizon
        } else {
            -(-gap * horizon).exp_m1() / gap
        };
        Some(lambda * integral * m_k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadratureOptions};
    use std::f64::consts::E;

    #[test]
    fn closed_form_mean_and_variance() {
        let g = GeometricBrownian::new(0.2, 0.4).unwrap();
        assert!((g.mean(1.0, 1.0) - 0.2f64.exp()).abs() < 1e-15);
        assert!((g.mean(1.0, 1.0) - 1.221_403).abs() < 1e-6);
        let g = GeometricBrownian::new(0.0, 1.0).unwrap();
        assert!((g.variance(1.0, 1.0) - (E - 1.0)).abs() < 1e-15);
        assert!((g.variance(1.0, 1.0) - 1.718_282).abs() < 1e-6);
    }

    #[test]
    fn kth_moment_with_compensated_drift() {
        // μ = σ²/2 leaves only the k²σ²t/2 term.
        let sigma: f64 = 0.7;
        let g = GeometricBrownian::new(0.5 * sigma * sigma, sigma).unwrap();
        for k in 1..=4u32 {
            let expected = (f64::from(k * k) * sigma * sigma * 1.3 / 2.0).exp();
            let m = g.moment(k, 1.3, 1.0).unwrap();
            assert!((m - expected).abs() < 1e-13 * expected);
        }
    }

    #[test]
    fn moments_by_quadrature_of_density() {
        let g = GeometricBrownian::new(0.1, 0.3).unwrap();
        let opts = QuadratureOptions::default().with_rel_tol(1e-12);
        let (t, x) = (2.0, 1.5);
        for k in 0..=4u32 {
            let q = integrate(
                |z| z.powi(k as i32) * g.density_unchecked(t, x, z),
                0.0,
                f64::INFINITY,
                &[g.mean(t, x)],
                &opts,
            )
            .unwrap();
            let m = g.moment(k, t, x).unwrap();
            assert!((q.value - m).abs() < 1e-8 * m, "k={k}: {} vs {m}", q.value);
        }
    }

    #[test]
    fn rejects_non_positive_states() {
        let g = GeometricBrownian::new(0.1, 0.3).unwrap();
        assert!(matches!(g.density(1.0, 0.0, 1.0), Err(Error::DomainError(_))));
        assert!(matches!(g.density(1.0, 1.0, -1.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn degenerate_discount_is_linear() {
        let g = GeometricBrownian::new(0.5, 1.0).unwrap();
        let nu = Distribution::point(1.0);
        // η₁ = 0.5: λ = 0.5 gives λT·m₁.
        let v = g.discounted_moment(1, 0.5, 4.0, &nu).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        assert!(g.discounted_moment(2, 1.0, f64::INFINITY, &nu).unwrap().is_infinite());
    }
}
