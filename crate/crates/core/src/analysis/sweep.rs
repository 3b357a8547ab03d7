//! The invariant measure as the restart rate goes to zero.
//!
//! For an ergodic finite chain `q_ν(λ)` tends to the stationary law of the
//! base chain, and the sweep reports the `ℓ¹` distance along the grid with
//! a fitted power-law rate. Diffusions have no stationary law; there the
//! sweep only tabulates `q_ν(Γ; λ)`, which for bounded sets drains away as
//! mass escapes to infinity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{invalid, Result};
use crate::kernel::{MarkovKernel, RestartSpec, RestartedProcess};
use crate::quadrature::QuadratureOptions;
use crate::space::Target;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    /// `q_ν(Γ; λ)` for each target set.
    pub values: Vec<f64>,
    /// Full invariant law on finite chains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<Vec<f64>>,
    /// `‖q_ν(λ) − π‖₁` when the base chain has a stationary law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1_to_stationary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<Vec<f64>>,
    /// Least-squares slope of `ln ‖q − π‖₁` against `ln λ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_order: Option<f64>,
    /// Whether the distance to `π` never increases along the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone: Option<bool>,
}

/// Evaluates `q_ν` on each target for every rate in a decreasing grid.
pub fn small_lambda_sweep<K: MarkovKernel>(
    kernel: &K,
    nu: &Distribution,
    targets: &[Target],
    lambda_grid: &[f64],
    opts: &QuadratureOptions,
) -> Result<SweepReport> {
    if lambda_grid.is_empty() {
        return Err(invalid("lambda_grid", "must not be empty"));
    }
    if lambda_grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(invalid("lambda_grid", "rates must be positive and finite"));
    }
    if lambda_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("lambda_grid", "rates must be strictly decreasing"));
    }
    let finite = kernel.state_space().is_finite();
    let stationary = if finite { kernel.stationary_law() } else { None };

    let rows: Vec<SweepRow> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let proc = RestartedProcess::new(kernel, RestartSpec::new(lambda, nu.clone())?)?.with_options(*opts);
            let values = targets
                .iter()
                .map(|g| proc.invariant_measure(g).map(|r| r.value))
                .collect::<Result<Vec<_>>>()?;
            let law = if finite { Some(proc.invariant_law()?) } else { None };
            let l1_to_stationary = match (&law, &stationary) {
                (Some(q), Some(pi)) => Some(q.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()),
                _ => None,
            };
            Ok(SweepRow {
                lambda,
                values,
                law,
                l1_to_stationary,
            })
        })
        .collect::<Result<_>>()?;

    let devs: Option<Vec<f64>> = rows.iter().map(|r| r.l1_to_stationary).collect();
    let (convergence_order, monotone) = match devs {
        Some(d) => (
            fit_order(lambda_grid, &d),
            Some(d.windows(2).all(|w| w[1] <= w[0])),
        ),
        None => (None, None),
    };
    Ok(SweepReport {
        rows,
        stationary,
        convergence_order,
        monotone,
    })
}

/// Slope of the least-squares line through `(ln λ, ln d)`, skipping
/// distances at rounding level.
fn fit_order(lambdas: &[f64], devs: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(devs)
        .filter(|(_, &d)| d > 1e-13)
        .map(|(&l, &d)| (l.ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{BrownianWithDrift, FiniteCtmc};

    #[test]
    fn two_state_converges_linearly() {
        let chain = FiniteCtmc::with_index_labels(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let grid = [1.0, 0.3, 0.1, 0.03, 0.01];
        let r = small_lambda_sweep(&chain, &Distribution::point(0.0), &[], &grid, &QuadratureOptions::default())
            .unwrap();
        assert_eq!(r.monotone, Some(true));
        // q_0 = (λ+1)/(λ+2), so ‖q − π‖₁ = λ/(λ+2).
        for row in &r.rows {
            let exact = row.lambda / (row.lambda + 2.0);
            assert!((row.l1_to_stationary.unwrap() - exact).abs() < 1e-9);
        }
        assert!((r.convergence_order.unwrap() - 1.0).abs() < 0.2);
    }

    #[test]
    fn starting_at_stationarity_stays_there() {
        let chain = FiniteCtmc::with_index_labels(vec![vec![-2.0, 2.0], vec![3.0, -3.0]]).unwrap();
        let pi = Distribution::finite(vec![(0.0, 0.6), (1.0, 0.4)]).unwrap();
        let r = small_lambda_sweep(&chain, &pi, &[], &[1.0, 0.01], &QuadratureOptions::default()).unwrap();
        for row in r.rows {
            assert!(row.l1_to_stationary.unwrap() < 1e-12);
        }
    }

    #[test]
    fn brownian_mass_escapes() {
        let bm = BrownianWithDrift::new(0.0, 1.0).unwrap();
        let r = small_lambda_sweep(
            &bm,
            &Distribution::point(0.0),
            &[Target::interval(-1.0, 1.0)],
            &[1.0, 0.1, 0.01],
            &QuadratureOptions::default(),
        )
        .unwrap();
        assert!(r.stationary.is_none());
        let v: Vec<f64> = r.rows.iter().map(|r| r.values[0]).collect();
        // q = 1 − e^{−√(2λ)} for driftless unit Brownian motion.
        for (row, &val) in r.rows.iter().zip(&v) {
            assert!((val - (1.0 - (-(2.0 * row.lambda).sqrt()).exp())).abs() < 1e-8);
        }
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_grids() {
        let bm = BrownianWithDrift::new(0.0, 1.0).unwrap();
        let nu = Distribution::point(0.0);
        let o = QuadratureOptions::default();
        assert!(small_lambda_sweep(&bm, &nu, &[], &[0.1, 1.0], &o).is_err());
        assert!(small_lambda_sweep(&bm, &nu, &[], &[1.0, 0.0], &o).is_err());
        assert!(small_lambda_sweep(&bm, &nu, &[], &[], &o).is_err());
    }
}
