use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{GrowthConstant, MarkovKernel, MomentGrowth};
use crate::linalg::{expm, solve_left};
use crate::space::{StateSpace, Target};

/// Tolerance on generator row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// On-disk form: `{"Q": [[...]], "values": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmcFile {
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

/// A finite continuous-time Markov chain with real state labels.
#[derive(Debug, Clone)]
pub struct FiniteCtmc {
    q: DMatrix<f64>,
    space: StateSpace,
    // Embedded jump chain: exit rate and cumulative jump probabilities.
    exit_rates: Vec<f64>,
    jump_cdf: Vec<Vec<f64>>,
}

impl FiniteCtmc {
    pub fn new(q: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let n = q.len();
        if n == 0 {
            return Err(Error::InvalidRateMatrix {
                row: 0,
                col: None,
                reason: "matrix is empty".into(),
            });
        }
        if values.len() != n {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: format!("{} labels for {n} states", values.len()),
            });
        }
        for (i, row) in q.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidRateMatrix {
                    row: i,
                    col: None,
                    reason: format!("row has {} entries, expected {n}", row.len()),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidRateMatrix {
                        row: i,
                        col: Some(j),
                        reason: format!("entry {v} is not finite"),
                    });
                }
                if i != j && v < 0.0 {
                    return Err(Error::InvalidRateMatrix {
                        row: i,
                        col: Some(j),
                        reason: format!("off-diagonal rate {v} is negative"),
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() >= ROW_SUM_TOL {
                return Err(Error::InvalidRateMatrix {
                    row: i,
                    col: None,
                    reason: format!("row sums to {sum:e}, expected 0"),
                });
            }
        }
        let space = StateSpace::finite(values)?;
        let exit_rates: Vec<f64> = (0..n).map(|i| -q[i][i]).collect();
        let jump_cdf = (0..n)
            .map(|i| {
                let mut acc = 0.0;
                (0..n)
                    .map(|j| {
                        if i != j && exit_rates[i] > 0.0 {
                            acc += q[i][j] / exit_rates[i];
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        let q = DMatrix::from_fn(n, n, |i, j| q[i][j]);
        Ok(Self {
            q,
            space,
            exit_rates,
            jump_cdf,
        })
    }

    /// Chain with labels `0, 1, ..., n−1`.
    pub fn with_index_labels(q: Vec<Vec<f64>>) -> Result<Self> {
        let values = (0..q.len()).map(|i| i as f64).collect();
        Self::new(q, values)
    }

    pub fn from_file(file: CtmcFile) -> Result<Self> {
        Self::new(file.q, file.values)
    }

    pub fn from_json_str(s: &str) -> std::result::Result<Self, CtmcLoadError> {
        let file: CtmcFile = serde_json::from_str(s).map_err(CtmcLoadError::Parse)?;
        Self::from_file(file).map_err(CtmcLoadError::Invalid)
    }

    pub fn to_file(&self) -> CtmcFile {
        let n = self.len();
        CtmcFile {
            q: (0..n).map(|i| (0..n).map(|j| self.q[(i, j)]).collect()).collect(),
            values: self.values().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn values(&self) -> &[f64] {
        self.space.finite_values().unwrap()
    }

    /// `e^{Qt}` by scaling and squaring.
    pub fn transition_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("time must be finite and non-negative, got {t}"),
            });
        }
        expm(&(&self.q * t))
    }

    /// Solves `πQ = 0`, `Σπ = 1`. Fails for chains without a unique
    /// stationary law.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let n = self.len();
        // Replace the last column of Q (one redundant equation of πQ = 0)
        // with ones to impose normalisation.
        let mut a = self.q.clone();
        for i in 0..n {
            a[(i, n - 1)] = 1.0;
        }
        let mut rhs = vec![0.0; n];
        rhs[n - 1] = 1.0;
        let pi = solve_left(&a, &rhs)?;
        if pi.iter().any(|p| !p.is_finite() || *p < -1e-12) {
            return Err(Error::SingularSystem("chain has no unique stationary law".into()));
        }
        Ok(pi)
    }

    fn index(&self, x: f64) -> usize {
        self.values().iter().position(|&v| v == x).unwrap_or(usize::MAX)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CtmcLoadError {
    #[error("malformed chain file: {0}")]
    Parse(serde_json::Error),
    #[error(transparent)]
    Invalid(Error),
}

impl MarkovKernel for FiniteCtmc {
    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn transition_probability(&self, t: f64, x: f64, target: &Target) -> f64 {
        let i = self.index(x);
        if i == usize::MAX {
            return f64::NAN;
        }
        let selected = target.indices(self.values());
        if selected.len() == self.len() {
            return 1.0;
        }
        if t == 0.0 {
            return if selected.contains(&i) { 1.0 } else { 0.0 };
        }
        match self.transition_matrix(t) {
            Ok(p) => selected.iter().map(|&j| p[(i, j)]).sum(),
            Err(_) => f64::NAN,
        }
    }

    fn sample_transition(&self, t: f64, x: f64, rng: &mut dyn RngCore) -> f64 {
        let mut i = self.index(x);
        let mut clock = 0.0;
        loop {
            let rate = self.exit_rates[i];
            if rate <= 0.0 {
                break;
            }
            let hold: f64 = Exp1.sample(rng);
            clock += hold / rate;
            if clock > t {
                break;
            }
            let u: f64 = rng.random();
            let cdf = &self.jump_cdf[i];
            i = cdf
                .iter()
                .position(|&c| u < c)
                .unwrap_or_else(|| (0..self.len()).rev().find(|&j| j != i && self.q[(i, j)] > 0.0).unwrap());
        }
        self.values()[i]
    }

    fn moment(&self, k: u32, t: f64, x: f64) -> Option<f64> {
        let i = self.values().iter().position(|&v| v == x)?;
        let p = self.transition_matrix(t).ok()?;
        Some(
            self.values()
                .iter()
                .enumerate()
                .map(|(j, v)| p[(i, j)] * v.powi(k as i32))
                .sum(),
        )
    }

    fn moment_growth(&self, k: u32) -> Option<MomentGrowth> {
        let c = self
            .values()
            .iter()
            .map(|v| v.powi(k as i32))
            .fold(f64::NEG_INFINITY, f64::max);
        Some(MomentGrowth {
            c: GrowthConstant::Uniform { c },
            eta: 0.0,
            exact: false,
        })
    }

    fn stationary_law(&self) -> Option<Vec<f64>> {
        self.stationary_distribution().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state() -> FiniteCtmc {
        FiniteCtmc::with_index_labels(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap()
    }

    #[test]
    fn identity_at_zero() {
        let c = two_state();
        assert_eq!(c.transition_matrix(0.0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn two_state_closed_form() {
        // P00(t) = (1 + e^{-2t}) / 2 from the eigendecomposition.
        let c = two_state();
        let t = 2f64.ln() / 2.0;
        let p = c.transition_matrix(t).unwrap();
        assert!((p[(0, 0)] - 0.75).abs() < 1e-15);
        for &t in &[0.01, 0.3, 1.7, 12.0] {
            let p = c.transition_matrix(t).unwrap();
            assert!((p[(0, 0)] - 0.5 * (1.0 + (-2.0 * t).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn validation_reports_indices() {
        let e = FiniteCtmc::with_index_labels(vec![vec![-1.0, 1.0], vec![-0.5, 0.5]]).unwrap_err();
        assert!(matches!(e, Error::InvalidRateMatrix { row: 1, col: Some(0), .. }), "{e}");
        let e = FiniteCtmc::with_index_labels(vec![vec![-1.0, 2.0], vec![1.0, -1.0]]).unwrap_err();
        assert!(matches!(e, Error::InvalidRateMatrix { row: 0, col: None, .. }), "{e}");
        let e = FiniteCtmc::with_index_labels(vec![vec![-1.0, 1.0], vec![1.0]]).unwrap_err();
        assert!(matches!(e, Error::InvalidRateMatrix { row: 1, .. }));
        let e = FiniteCtmc::new(vec![vec![0.0]], vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(e, Error::InvalidParameter { name: "values", .. }));
    }

    #[test]
    fn json_roundtrip_and_errors() {
        let c = FiniteCtmc::from_json_str(r#"{"Q": [[-2, 2], [3, -3]], "values": [1.5, -1]}"#).unwrap();
        assert_eq!(c.values(), &[1.5, -1.0]);
        let back = FiniteCtmc::from_file(c.to_file()).unwrap();
        assert_eq!(back.generator(), c.generator());
        assert!(matches!(
            FiniteCtmc::from_json_str(r#"{"Q": [[-2, 2]], "values": [1], "extra": 0}"#),
            Err(CtmcLoadError::Parse(_))
        ));
        match FiniteCtmc::from_json_str(r#"{"Q": [[-2, 2], [-3, 3]], "values": [0, 1]}"#) {
            Err(CtmcLoadError::Invalid(e)) => assert!(e.to_string().contains("row 1, col 0"), "{e}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stationary_law_of_asymmetric_chain() {
        let c = FiniteCtmc::with_index_labels(vec![vec![-2.0, 2.0], vec![3.0, -3.0]]).unwrap();
        let pi = c.stationary_distribution().unwrap();
        assert!((pi[0] - 0.6).abs() < 1e-15 && (pi[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn sampled_frequencies_match_matrix_exponential() {
        let c = FiniteCtmc::with_index_labels(vec![
            vec![-3.0, 2.0, 1.0],
            vec![0.5, -1.0, 0.5],
            vec![1.0, 1.0, -2.0],
        ])
        .unwrap();
        let t = 0.8;
        let p = c.transition_matrix(t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[c.sample_transition(t, 0.0, &mut rng) as usize] += 1;
        }
        for j in 0..3 {
            let f = counts[j] as f64 / n as f64;
            let se = (p[(0, j)] * (1.0 - p[(0, j)]) / n as f64).sqrt();
            assert!((f - p[(0, j)]).abs() < 3.0 * se, "state {j}: {f} vs {}", p[(0, j)]);
        }
    }
}
