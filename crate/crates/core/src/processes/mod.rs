//! Concrete kernels with closed-form transition laws.

mod brownian;
mod ctmc;
mod geometric;

pub use brownian::BrownianWithDrift;
pub use ctmc::{CtmcFile, CtmcLoadError, FiniteCtmc, ROW_SUM_TOL};
pub use geometric::GeometricBrownian;

use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};

pub(crate) const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn require_positive_time(t: f64) -> Result<()> {
    if t == 0.0 {
        Err(Error::SingularityAtOrigin)
    } else if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(invalid("t", format!("time must be positive and finite, got {t}")))
    }
}

/// `Φ(x)` via the complementary error function.
pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ(b) − Φ(a)` without cancellation in either tail.
pub(crate) fn normal_interval_probability(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a > 0.0 {
        normal_cdf(-a) - normal_cdf(-b)
    } else {
        normal_cdf(b) - normal_cdf(a)
    }
}

/// `∫_0^T λ e^{−λs} s^m ds = m!/λ^m · P(m+1, λT)` with `P` the regularised
/// lower incomplete gamma function; `T` may be infinite.
pub(crate) fn discounted_power(m: u32, lambda: f64, horizon: f64) -> f64 {
    let scale = (1..=m).map(f64::from).product::<f64>() / lambda.powi(m as i32);
    if horizon.is_infinite() {
        return scale;
    }
    scale * regularized_lower_gamma(m + 1, lambda * horizon)
}

/// `P(n, x)` for integer `n ≥ 1`.
fn regularized_lower_gamma(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < f64::from(n) + 1.0 {
        // e^{−x} Σ_{j ≥ n} x^j / j!, summed until terms vanish.
        let mut term = (-x).exp() * x.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = 0.0;
        let mut j = n;
        while term > sum * f64::EPSILON * 0.5 || sum == 0.0 {
            sum += term;
            j += 1;
            term *= x / f64::from(j);
            if term == 0.0 {
                break;
            }
        }
        sum
    } else {
        // 1 − e^{−x} Σ_{j < n} x^j / j!
        let mut term = (-x).exp();
        let mut sum = 0.0;
        for j in 0..n {
            sum += term;
            term *= x / f64::from(j + 1);
        }
        1.0 - sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_tail_probabilities() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        let p = normal_interval_probability(8.0, 9.0);
        let expected = 6.220_960_574_271_785e-16 - 1.128_588_405_953_840_8e-19;
        assert!((p - expected).abs() < 1e-10 * expected, "{p}");
        assert!((normal_interval_probability(f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-16);
    }

    #[test]
    fn discounted_powers() {
        // λ∫_0^1 e^{−s} s ds = 1 − 2/e
        assert!((discounted_power(1, 1.0, 1.0) - (1.0 - 2.0 / std::f64::consts::E)).abs() < 1e-15);
        assert!((discounted_power(0, 3.0, 2.0) - (1.0 - (-6.0f64).exp())).abs() < 1e-15);
        assert!((discounted_power(3, 2.0, f64::INFINITY) - 6.0 / 8.0).abs() < 1e-15);
        // Small λT: (λT)^{m+1}/(m+1) · (1 − (m+1)λT/(m+2) + …)/λ^m
        let v = discounted_power(4, 1.0, 1e-3);
        let expected = 1e-15 / 5.0 * (1.0 - 5.0 / 6.0 * 1e-3);
        assert!((v - expected).abs() < 1e-6 * expected, "{v}");
    }
}
