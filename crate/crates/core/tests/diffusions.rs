//! Closed-form checks of invariant measures, moments and ergodicity for the
//! diffusion kernels, and the chain moment formula against the matrix
//! exponential.

mod common;

use common::{birth_death, ChainCase, SEED};
use restartk::analysis::{
    bm_stationary_moments, ergodicity_check, gbm_stationary_moment, modified_moment, ErgodicityOptions, MomentValue,
};
use restartk::quadrature::{self, QuadratureOptions};
use restartk::simulation::{states_at, PathConfig};
use restartk::{BrownianWithDrift, Distribution, GeometricBrownian, RestartSpec, RestartedProcess, Target};

fn bm(mu: f64, sigma: f64, lambda: f64, nu: Distribution) -> RestartedProcess<BrownianWithDrift> {
    RestartedProcess::new(BrownianWithDrift::new(mu, sigma).unwrap(), RestartSpec::new(lambda, nu).unwrap()).unwrap()
}

fn gbm(mu: f64, sigma: f64, lambda: f64, nu: Distribution) -> RestartedProcess<GeometricBrownian> {
    RestartedProcess::new(GeometricBrownian::new(mu, sigma).unwrap(), RestartSpec::new(lambda, nu).unwrap()).unwrap()
}

#[test]
fn laplace_invariant_density() {
    // Driftless unit Brownian motion reset to 0 at rate 2 has stationary
    // density e^{−2|z|}.
    let p = bm(0.0, 1.0, 2.0, Distribution::point(0.0));
    for z in [-2.0, -0.5, 0.1, 1.0, 3.0] {
        let q = p.invariant_density(z).unwrap().value;
        let exact = (-2.0 * f64::abs(z)).exp();
        assert!((q - exact).abs() < 1e-9 * exact.max(1e-3), "z={z}: {q} vs {exact}");
    }
    let q1 = p.invariant_density(1.0).unwrap().value;
    assert!((q1 - 0.135_335).abs() < 1e-6);
}

#[test]
fn half_line_mass_is_one_half() {
    let p = bm(0.0, 1.0, 1.0, Distribution::point(0.0));
    let q = p.invariant_measure(&Target::interval(0.0, f64::INFINITY)).unwrap().value;
    assert!((q - 0.5).abs() < 1e-12);
}

#[test]
fn brownian_stationary_moments_match_density_quadrature() {
    let opts = QuadratureOptions::default().with_rel_tol(1e-11).with_abs_tol(1e-10);
    for (mu, sigma, lambda, nu) in [
        (1.0, 1.0, 2.0, Distribution::point(0.0)),
        (0.0, 1.3, 0.7, Distribution::point(0.0)),
        (-0.4, 0.8, 1.5, Distribution::finite(vec![(-1.0, 0.5), (2.0, 0.5)]).unwrap()),
    ] {
        let p = bm(mu, sigma, lambda, nu.clone());
        let s = bm_stationary_moments(p.base(), p.restart()).unwrap();
        let mut breaks = nu.landmarks();
        breaks.push(mu / lambda);
        let moment = |k: i32| {
            quadrature::integrate(
                |z| z.powi(k) * p.invariant_density(z).unwrap().value,
                f64::NEG_INFINITY,
                f64::INFINITY,
                &breaks,
                &opts,
            )
            .unwrap()
            .value
        };
        let (m1, m2) = (moment(1), moment(2));
        assert!((m1 - s.mean).abs() < 1e-6, "{m1} vs {}", s.mean);
        assert!((m2 - s.second_moment).abs() < 1e-6, "{m2} vs {}", s.second_moment);
        assert!((m2 - m1 * m1 - s.variance).abs() < 1e-6);
    }
}

#[test]
fn geometric_invariant_mean() {
    // E_q[X] = λ/(λ−μ) · ∫y dν for λ > μ.
    let (mu, lambda) = (0.3, 1.0);
    let p = gbm(mu, 0.5, lambda, Distribution::point(1.0));
    let opts = QuadratureOptions::default().with_rel_tol(1e-11);
    let mean = quadrature::integrate(
        |z| if z > 0.0 { z * p.invariant_density(z).unwrap().value } else { 0.0 },
        0.0,
        f64::INFINITY,
        &[1.0],
        &opts,
    )
    .unwrap()
    .value;
    assert!((mean - lambda / (lambda - mu)).abs() < 1e-6, "{mean}");
    let g = gbm_stationary_moment(p.base(), p.restart(), 1).unwrap();
    assert!((g.value.finite().unwrap() - lambda / (lambda - mu)).abs() < 1e-14);
}

#[test]
fn geometric_moment_approaches_limit() {
    let p = gbm(0.5, 1.0, 1.0, Distribution::point(1.0));
    let at = |t: f64| modified_moment(&p, 1, t, 1.0).unwrap().analytic.finite().unwrap();
    assert!((at(0.0) - 1.0).abs() < 1e-15);
    assert!((at(40.0) - 2.0).abs() < 1e-8);
    assert!(at(5.0) < at(10.0));
    let r = modified_moment(&p, 2, 5.0, 1.0).unwrap();
    assert_eq!(r.finiteness_threshold, Some(2.0));
    assert!(r.bound.is_none());
}

#[test]
fn chain_moment_matches_matrix_exponential() {
    let case = ChainCase {
        q: birth_death(4),
        values: vec![-1.0, 0.5, 2.0, 3.0],
        nu: vec![0.4, 0.3, 0.2, 0.1],
        lambda: 1.3,
    };
    let p = RestartedProcess::new(case.chain(), RestartSpec::new(case.lambda, case.restart_law()).unwrap()).unwrap();
    for t in [0.3, 1.0, 4.0] {
        let m = case.restarted_matrix(t);
        for (i, &x) in case.values.iter().enumerate() {
            for k in 1..=3u32 {
                let exact: f64 = (0..4).map(|j| m[(i, j)] * case.values[j].powi(k as i32)).sum();
                let r = modified_moment(&p, k, t, x).unwrap();
                assert!(r.warnings.is_empty());
                match r.analytic {
                    MomentValue::Finite { value } => assert!((value - exact).abs() < 1e-10, "{value} vs {exact}"),
                    other => panic!("{other:?}"),
                }
            }
        }
    }
}

#[test]
fn chain_tv_strictly_below_bound() {
    let case = ChainCase {
        q: vec![vec![-1.0, 0.6, 0.4], vec![0.5, -1.5, 1.0], vec![0.2, 0.8, -1.0]],
        values: vec![0.0, 1.0, 2.0],
        nu: vec![0.0, 0.0, 1.0],
        lambda: 2.0,
    };
    let p = RestartedProcess::new(case.chain(), RestartSpec::new(2.0, case.restart_law()).unwrap()).unwrap();
    let r = ergodicity_check(&p, 0.0, &[1.0], &[], &ErgodicityOptions::default()).unwrap();
    let tv = r.rows[0].tv_norm.unwrap();
    assert!(tv < 2.0 * (-2.0f64).exp());
    assert!(r.pass);
}

#[test]
fn brownian_ergodicity_example() {
    let p = bm(0.0, 1.0, 1.0, Distribution::point(0.0));
    let opts = ErgodicityOptions {
        partition: None,
        ..Default::default()
    };
    let r = ergodicity_check(&p, 0.0, &[0.5, 1.0, 2.0, 4.0], &[Target::interval(0.0, f64::INFINITY)], &opts).unwrap();
    assert!(r.pass);
    assert!(r.rows.iter().all(|row| row.max_deviation <= row.bound + 1e-6));
}

#[test]
fn ergodicity_is_vacuous_at_time_zero() {
    // x ∉ Γ at t = 0, so the deviation is q(Γ) itself.
    let p = bm(0.0, 1.0, 1.0, Distribution::point(0.0));
    let g = Target::interval(0.5, 3.0);
    let r = ergodicity_check(&p, 0.0, &[0.0], std::slice::from_ref(&g), &ErgodicityOptions { partition: None, ..Default::default() })
        .unwrap();
    let q = p.invariant_measure(&g).unwrap().value;
    assert!((r.rows[0].max_deviation - q).abs() < 1e-12);
    assert!(r.pass);
}

/// Median over 8 disjoint blocks of `max x^k` at each block size.
fn median_block_maxima(xs: &[f64], k: i32, ladder: &[usize]) -> Vec<f64> {
    let mut offset = 0;
    ladder
        .iter()
        .map(|&n| {
            let mut maxima: Vec<f64> = (0..8)
                .map(|b| {
                    let block = &xs[offset + b * n..offset + (b + 1) * n];
                    block.iter().map(|x| x.powi(k)).fold(f64::NEG_INFINITY, f64::max)
                })
                .collect();
            offset += 8 * n;
            maxima.sort_by(f64::total_cmp);
            0.5 * (maxima[3] + maxima[4])
        })
        .collect()
}

#[test]
fn divergent_regime_running_maxima_keep_growing() {
    // k = 2 with λ = 1 < η₂ = 2: the stationary second moment is infinite
    // and X̃² has tail index below one, so typical maxima grow faster than
    // n. With λ = 3 the first moment is finite with a light enough tail
    // that maxima grow far more slowly.
    let ladder = [100, 1_000, 10_000, 100_000];
    let total = 8 * ladder.iter().sum::<usize>();

    let heavy = gbm(0.5, 1.0, 1.0, Distribution::point(1.0));
    assert!(gbm_stationary_moment(heavy.base(), heavy.restart(), 2).unwrap().value.is_divergent());
    let cfg = PathConfig::at(SEED, 30.0, total, 1.0).unwrap();
    let m = median_block_maxima(&states_at(&heavy, &cfg, 30.0).unwrap(), 2, &ladder);
    assert!(m.windows(2).all(|w| w[1] > w[0]), "{m:?}");
    assert!(m[3] / m[0] > 1e3, "{m:?}");

    let light = gbm(0.5, 1.0, 3.0, Distribution::point(1.0));
    let m = median_block_maxima(&states_at(&light, &cfg, 30.0).unwrap(), 1, &ladder);
    assert!(m[3] / m[0] < 1e3, "{m:?}");
}
