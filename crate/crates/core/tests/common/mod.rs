//! Reference computations that share no code path with the library's
//! quadrature: dense matrix algebra on the restarted generator.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use restartk::{Distribution, FiniteCtmc};

pub const SEED: u64 = 20261015;

/// A random chain with its restart law and rate.
pub struct ChainCase {
    pub q: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub nu: Vec<f64>,
    pub lambda: f64,
}

impl ChainCase {
    pub fn chain(&self) -> FiniteCtmc {
        FiniteCtmc::new(self.q.clone(), self.values.clone()).unwrap()
    }

    pub fn restart_law(&self) -> Distribution {
        Distribution::finite(self.values.iter().copied().zip(self.nu.iter().copied()).collect()).unwrap()
    }

    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.q.len();
        DMatrix::from_fn(n, n, |i, j| self.q[i][j])
    }

    /// `Q + λ(𝟙νᵀ − I)`.
    pub fn restarted_generator(&self) -> DMatrix<f64> {
        let n = self.q.len();
        let nu = DVector::from_column_slice(&self.nu);
        self.generator() + (DVector::from_element(n, 1.0) * nu.transpose() - DMatrix::identity(n, n)) * self.lambda
    }

    /// `e^{Q̃t}` through nalgebra's matrix exponential.
    pub fn restarted_matrix(&self, t: f64) -> DMatrix<f64> {
        (self.restarted_generator() * t).exp()
    }

    /// `λνᵀ(λI − Q)⁻¹` by an LU solve.
    pub fn invariant_law(&self) -> Vec<f64> {
        let n = self.q.len();
        let a = (DMatrix::identity(n, n) * self.lambda - self.generator()).transpose();
        let b = DVector::from_column_slice(&self.nu) * self.lambda;
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    /// `πQ = 0`, `Σπ = 1` by least squares on the stacked system.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.q.len();
        let mut a = DMatrix::zeros(n + 1, n);
        a.view_mut((0, 0), (n, n)).copy_from(&self.generator().transpose());
        a.row_mut(n).fill(1.0);
        let mut b = DVector::zeros(n + 1);
        b[n] = 1.0;
        let at = a.transpose();
        (&at * &a).lu().solve(&(&at * b)).unwrap().iter().copied().collect()
    }
}

/// Dense irreducible chain with rates in `[0.1, 2]`, distinct labels and a
/// strictly positive restart law.
pub fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> ChainCase {
    let mut q = vec![vec![0.0; n]; n];
    for (i, row) in q.iter_mut().enumerate() {
        let mut total = 0.0;
        for (j, cell) in row.iter_mut().enumerate() {
            if i != j {
                *cell = rng.random_range(0.1..2.0);
                total += *cell;
            }
        }
        row[i] = -total;
    }
    let values: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 - 2.0).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    ChainCase {
        q,
        values,
        nu: w.iter().map(|x| x / s).collect(),
        lambda: rng.random_range(0.2..3.0),
    }
}

pub fn chain_rng(stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    rng.set_stream(stream);
    rng
}

/// Symmetric birth–death chain on `{0, …, n−1}` with unit rates.
pub fn birth_death(n: usize) -> Vec<Vec<f64>> {
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        if i > 0 {
            q[i][i - 1] = 1.0;
        }
        if i + 1 < n {
            q[i][i + 1] = 1.0;
        }
        q[i][i] = -q[i].iter().sum::<f64>();
    }
    q
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
