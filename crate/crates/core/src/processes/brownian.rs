use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::distribution::{binomial, standard_normal, standard_normal_moment, Distribution};
use crate::error::{invalid, Result};
use crate::kernel::MarkovKernel;
use crate::quadrature::TailGrowth;
use crate::space::{StateSpace, Target};

use super::{discounted_power, normal_interval_probability, require_positive_time, SQRT_2PI};

/// `dX = μ dt + σ dW` on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianWithDrift {
    mu: f64,
    sigma: f64,
}

const REAL_LINE: StateSpace = StateSpace::RealLine;

impl BrownianWithDrift {
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

    /// Gaussian density with mean `x + μt` and variance `σ²t`.
    pub fn density(&self, t: f64, x: f64, z: f64) -> Result<f64> {
        require_positive_time(t)?;
        Ok(self.density_unchecked(t, x, z))
    }

    pub fn mean(&self, t: f64, x: f64) -> f64 {
        x + self.mu * t
    }

    pub fn variance(&self, t: f64) -> f64 {
        self.sigma * self.sigma * t
    }

    fn density_unchecked(&self, t: f64, x: f64, z: f64) -> f64 {
        let var = self.variance(t);
        let d = z - self.mean(t, x);
        (-d * d / (2.0 * var)).exp() / (SQRT_2PI * var.sqrt())
    }

    /// Coefficients `a_m` with `E_y[X(s)^k] = Σ_i C(k,i) y^{k−i} Σ_m a_{i,m} s^m`.
    /// Returns, for each power `i` of the increment, the polynomial in `s`.
    fn increment_moment_polys(&self, k: u32) -> Vec<Vec<f64>> {
        (0..=k)
            .map(|i| {
                // E[(μs + σ√s Z)^i] = Σ_{j even} C(i,j) μ^{i−j} σ^j E[Z^j] s^{i−j/2}
                let mut poly = vec![0.0; i as usize + 1];
                for j in (0..=i).step_by(2) {
                    let power = (i - j / 2) as usize;
                    poly[power] += binomial(i, j)
                        * self.mu.powi((i - j) as i32)
                        * self.sigma.powi(j as i32)
                        * standard_normal_moment(j);
                }
                poly
            })
            .collect()
    }
}

impl MarkovKernel for BrownianWithDrift {
    fn state_space(&self) -> &StateSpace {
        &REAL_LINE
    }

    fn transition_probability(&self, t: f64, x: f64, target: &Target) -> f64 {
        let (lo, hi) = match target {
            Target::Whole => return 1.0,
            Target::Interval { lo, hi } => (*lo, *hi),
            Target::Subset { .. } => return 0.0,
        };
        if t == 0.0 {
            return if target.contains(x) { 1.0 } else { 0.0 };
        }
        let m = self.mean(t, x);
        let sd = self.variance(t).sqrt();
        normal_interval_probability((lo - m) / sd, (hi - m) / sd)
    }

    fn transition_density(&self, t: f64, x: f64, z: f64) -> Option<f64> {
        Some(self.density_unchecked(t, x, z))
    }

    fn density_growth(&self, _z: f64) -> TailGrowth {
        TailGrowth::new(1.0 / (self.sigma * SQRT_2PI * 0.1), 0.0)
    }

    fn sample_transition(&self, t: f64, x: f64, rng: &mut dyn RngCore) -> f64 {
        self.mean(t, x) + self.variance(t).sqrt() * standard_normal(rng)
    }

    fn moment(&self, k: u32, t: f64, x: f64) -> Option<f64> {
        let m = self.mean(t, x);
        let sd = self.variance(t).sqrt();
        Some(
            (0..=k)
                .step_by(2)
                .map(|j| binomial(k, j) * m.powi((k - j) as i32) * sd.powi(j as i32) * standard_normal_moment(j))
                .sum(),
        )
    }

    fn discounted_moment(&self, k: u32, lambda: f64, horizon: f64, nu: &Distribution) -> Option<f64> {
        let polys = self.increment_moment_polys(k);
        let mut total = 0.0;
        for (i, poly) in polys.iter().enumerate() {
            let i = i as u32;
            let nu_moment = nu.moment(k - i)?;
            let time_part: f64 = poly
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(m, c)| c * discounted_power(m as u32, lambda, horizon))
                .sum();
            total += binomial(k, i) * nu_moment * time_part;
        }
        Some(total)
    }
}
