//! Checks of the uniform convergence `|q_ν(Γ) − P̃(t, x, Γ)| ≤ e^{−λt}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{MarkovKernel, RestartedProcess};
use crate::space::{StateSpace, Target};

/// Bins and captured mass of the partition used to approximate total
/// variation on continuous state spaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub bins: usize,
    pub mass: f64,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        Self {
            bins: 400,
            mass: 0.9999,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErgodicityOptions {
    pub tolerance: f64,
    /// Continuous spaces only; `None` skips the partition distance.
    pub partition: Option<PartitionSpec>,
}

impl Default for ErgodicityOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            partition: Some(PartitionSpec::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityRow {
    pub t: f64,
    /// `max_Γ |q_ν(Γ) − P̃(t, x, Γ)|` over the tested sets.
    pub max_deviation: f64,
    /// Index into the tested sets attaining the maximum.
    pub worst_set: usize,
    /// `e^{−λt}`.
    pub bound: f64,
    /// `Σ_j |q_j − P̃(t, x, j)|`, the total variation norm, on finite
    /// chains; on continuous spaces the same sum over partition cells plus
    /// the mass outside the window, which bounds the norm from below.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv_norm: Option<f64>,
    /// `2e^{−λt}`.
    pub tv_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub lambda: f64,
    pub x: f64,
    pub tolerance: f64,
    /// `q_ν(Γ)` for each tested set.
    pub invariant_values: Vec<f64>,
    pub rows: Vec<ErgodicityRow>,
    pub pass: bool,
}

/// Evaluates the deviation from the invariant law over `t_grid × test_sets`.
///
/// A row passes when every set stays within `e^{−λt} + tolerance` and the
/// total variation figure, when computed, within `2e^{−λt} + tolerance`.
pub fn ergodicity_check<K: MarkovKernel>(
    proc: &RestartedProcess<K>,
    x: f64,
    t_grid: &[f64],
    test_sets: &[Target],
    opts: &ErgodicityOptions,
) -> Result<ErgodicityReport> {
    let lambda = proc.restart().require_positive_rate()?;
    proc.check_state(x)?;
    if test_sets.is_empty() && !proc.state_space().is_finite() && opts.partition.is_none() {
        return Err(invalid("test_sets", "nothing to check"));
    }
    for &t in t_grid {
        RestartedProcess::<K>::check_time(t)?;
    }
    let q: Vec<f64> = test_sets
        .par_iter()
        .map(|g| proc.invariant_measure(g).map(|r| r.value))
        .collect::<Result<_>>()?;

    let tv_setup = match proc.state_space() {
        StateSpace::FiniteSet { .. } => Some(TvCells::Finite(proc.invariant_law()?)),
        _ => match opts.partition {
            Some(spec) => Some(partition_cells(proc, spec)?),
            None => None,
        },
    };

    let rows: Vec<ErgodicityRow> = t_grid
        .par_iter()
        .map(|&t| {
            let bound = (-lambda * t).exp();
            let mut max_deviation: f64 = 0.0;
            let mut worst_set = 0;
            for (i, g) in test_sets.iter().enumerate() {
                let p = proc.restarted_transition(t, x, g)?.value;
                let d = (q[i] - p).abs();
                if d > max_deviation {
                    max_deviation = d;
                    worst_set = i;
                }
            }
            let tv_norm = match &tv_setup {
                None => None,
                Some(cells) => Some(cells.tv_norm(proc, t, x)?),
            };
            let tv_bound = 2.0 * bound;
            let pass = max_deviation <= bound + opts.tolerance
                && tv_norm.is_none_or(|tv| tv <= tv_bound + opts.tolerance);
            Ok(ErgodicityRow {
                t,
                max_deviation,
                worst_set,
                bound,
                tv_norm,
                tv_bound,
                pass,
            })
        })
        .collect::<Result<_>>()?;

    Ok(ErgodicityReport {
        lambda,
        x,
        tolerance: opts.tolerance,
        invariant_values: q,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

enum TvCells {
    Finite(Vec<f64>),
    Partition { edges: Vec<f64>, q: Vec<f64> },
}

impl TvCells {
    fn tv_norm<K: MarkovKernel>(&self, proc: &RestartedProcess<K>, t: f64, x: f64) -> Result<f64> {
        match self {
            TvCells::Finite(q) => {
                let row = proc.restarted_row(t, x)?;
                Ok(q.iter().zip(&row).map(|(a, b)| (a - b).abs()).sum())
            }
            TvCells::Partition { edges, q } => {
                let mut sum = 0.0;
                let mut inside_p = 0.0;
                let mut inside_q = 0.0;
                let last = edges.len() - 2;
                for (i, (w, qi)) in edges.windows(2).zip(q).enumerate() {
                    let p = proc.restarted_transition(t, x, &cell(w[0], w[1], i == last))?.value;
                    sum += (qi - p).abs();
                    inside_p += p;
                    inside_q += qi;
                }
                // Mass outside the window is the last cell.
                Ok(sum + (inside_p - inside_q).abs())
            }
        }
    }
}

/// Cells are half-open `[lo, hi)` except the last, so an atom on an edge
/// (the start state at `t = 0`) is counted once.
fn cell(lo: f64, hi: f64, closed: bool) -> Target {
    Target::interval(lo, if closed { hi } else { hi.next_down() })
}

/// Finds a window holding at least `spec.mass` of `q_ν` by doubling, then
/// splits it into equal cells.
fn partition_cells<K: MarkovKernel>(proc: &RestartedProcess<K>, spec: PartitionSpec) -> Result<TvCells> {
    if spec.bins == 0 || !(spec.mass > 0.0 && spec.mass < 1.0) {
        return Err(invalid("partition", "need bins > 0 and mass in (0, 1)"));
    }
    let landmarks = proc.restart().nu().landmarks();
    let center = if landmarks.is_empty() {
        0.0
    } else {
        landmarks.iter().sum::<f64>() / landmarks.len() as f64
    };
    let half_line = matches!(proc.state_space(), StateSpace::HalfLinePositive);
    let mut width: f64 = 1.0;
    let mut last_mass = 0.0;
    for _ in 0..64 {
        let (lo, hi) = if half_line {
            (0.0, center.max(0.0) + width)
        } else {
            (center - width, center + width)
        };
        last_mass = proc.invariant_measure(&Target::interval(lo, hi))?.value;
        if last_mass >= spec.mass {
            let step = (hi - lo) / spec.bins as f64;
            let edges: Vec<f64> = (0..=spec.bins).map(|i| lo + step * i as f64).collect();
            let q = edges
                .par_windows(2)
                .enumerate()
                .map(|(i, w)| proc.invariant_measure(&cell(w[0], w[1], i + 1 == spec.bins)).map(|r| r.value))
                .collect::<Result<_>>()?;
            return Ok(TvCells::Partition { edges, q });
        }
        width *= 2.0;
    }
    Err(Error::WindowTooNarrow {
        lo: center - width,
        hi: center + width,
        mass: last_mass,
        required: spec.mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Distribution;
    use crate::kernel::RestartSpec;
    use crate::processes::{BrownianWithDrift, FiniteCtmc};

    #[test]
    fn vacuous_at_time_zero() {
        let chain = FiniteCtmc::with_index_labels(vec![vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap();
        let p = RestartedProcess::new(chain, RestartSpec::new(2.0, Distribution::point(1.0)).unwrap()).unwrap();
        let r = ergodicity_check(&p, 0.0, &[0.0, 1.0], &[Target::singleton(1.0)], &ErgodicityOptions::default())
            .unwrap();
        assert!(r.pass);
        assert_eq!(r.rows[0].bound, 1.0);
        assert!((r.rows[0].max_deviation - r.invariant_values[0]).abs() < 1e-12);
        let tv = r.rows[1].tv_norm.unwrap();
        assert!(tv < r.rows[1].tv_bound);
    }

    #[test]
    fn brownian_half_line() {
        let bm = BrownianWithDrift::new(0.0, 1.0).unwrap();
        let p = RestartedProcess::new(bm, RestartSpec::new(1.0, Distribution::point(0.0)).unwrap()).unwrap();
        let opts = ErgodicityOptions {
            partition: Some(PartitionSpec { bins: 40, mass: 0.999 }),
            ..Default::default()
        };
        let r = ergodicity_check(&p, 0.0, &[0.5, 1.0, 2.0, 4.0], &[Target::interval(0.0, f64::INFINITY)], &opts)
            .unwrap();
        assert!((r.invariant_values[0] - 0.5).abs() < 1e-9);
        assert!(r.pass, "{r:?}");
    }
}
