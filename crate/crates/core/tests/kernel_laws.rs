//! Structural laws of the restarted kernel, checked on randomly generated
//! chains and diffusion parameters.

mod common;

use common::{l1, random_chain, ChainCase};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use restartk::quadrature::{self, QuadratureOptions};
use restartk::{
    invariant_from_resolvent, BrownianWithDrift, Distribution, Error, FiniteCtmc, GeometricBrownian, RestartSpec,
    RestartedProcess, Target,
};

fn chain_case(seed: u64, n: usize) -> ChainCase {
    random_chain(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn restarted(case: &ChainCase) -> RestartedProcess<FiniteCtmc> {
    RestartedProcess::new(case.chain(), RestartSpec::new(case.lambda, case.restart_law()).unwrap()).unwrap()
}

fn bm(mu: f64, sigma: f64, lambda: f64, y: f64) -> RestartedProcess<BrownianWithDrift> {
    RestartedProcess::new(
        BrownianWithDrift::new(mu, sigma).unwrap(),
        RestartSpec::new(lambda, Distribution::point(y)).unwrap(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chain_rows_are_probability_vectors(seed in any::<u64>(), n in 2usize..=6, t in 0.0f64..6.0) {
        let case = chain_case(seed, n);
        let p = restarted(&case);
        for &x in &case.values {
            let row = p.restarted_row(t, x).unwrap();
            prop_assert!(row.iter().all(|&v| v >= -1e-12));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn chain_matches_restarted_generator(seed in any::<u64>(), n in 2usize..=6, t in 0.01f64..6.0) {
        let case = chain_case(seed, n);
        let p = restarted(&case);
        let oracle = case.restarted_matrix(t);
        for (i, &x) in case.values.iter().enumerate() {
            let row = p.restarted_row(t, x).unwrap();
            for (j, v) in row.iter().enumerate() {
                prop_assert!((v - oracle[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn chapman_kolmogorov(seed in any::<u64>(), n in 2usize..=5, s in 0.05f64..2.0, t in 0.05f64..2.0) {
        let case = chain_case(seed, n);
        let p = restarted(&case);
        let x = case.values[0];
        let direct = p.restarted_row(s + t, x).unwrap();
        let first = p.restarted_row(s, x).unwrap();
        let mut composed = vec![0.0; n];
        for (k, &y) in case.values.iter().enumerate() {
            let second = p.restarted_row(t, y).unwrap();
            for j in 0..n {
                composed[j] += first[k] * second[j];
            }
        }
        prop_assert!(l1(&direct, &composed) < 1e-9);
    }

    #[test]
    fn invariant_law_is_preserved(seed in any::<u64>(), n in 2usize..=6, t in 0.1f64..8.0) {
        let case = chain_case(seed, n);
        let p = restarted(&case);
        let q = p.invariant_law().unwrap();
        prop_assert!(l1(&q, &case.invariant_law()) < 1e-10);
        let mut pushed = vec![0.0; n];
        for (i, &x) in case.values.iter().enumerate() {
            for (j, v) in p.restarted_row(t, x).unwrap().iter().enumerate() {
                pushed[j] += q[i] * v;
            }
        }
        prop_assert!(l1(&pushed, &q) < 1e-9);
    }

    #[test]
    fn resolvent_route_agrees(seed in any::<u64>(), n in 2usize..=5) {
        let case = chain_case(seed, n);
        let p = restarted(&case);
        let opts = QuadratureOptions::default();
        for &v in &case.values {
            let target = Target::singleton(v);
            let a = p.invariant_measure(&target).unwrap().value;
            let b = invariant_from_resolvent(p.base(), p.restart(), &target, &opts).unwrap().value;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn brownian_is_honest(mu in -1.0f64..1.0, sigma in 0.3f64..2.0, lambda in 0.2f64..4.0,
                          t in 0.05f64..5.0, x in -2.0f64..2.0, cut in -3.0f64..3.0) {
        let p = bm(mu, sigma, lambda, 0.0);
        let below = p.restarted_transition(t, x, &Target::interval(f64::NEG_INFINITY, cut)).unwrap().value;
        let above = p.restarted_transition(t, x, &Target::interval(cut, f64::INFINITY)).unwrap().value;
        prop_assert!((below + above - 1.0).abs() < 1e-9);
        let whole = p.restarted_transition(t, x, &Target::Whole).unwrap().value;
        prop_assert!((whole - 1.0).abs() < 1e-12);
        let q_lo = p.invariant_measure(&Target::interval(f64::NEG_INFINITY, cut)).unwrap().value;
        let q_hi = p.invariant_measure(&Target::interval(cut, f64::INFINITY)).unwrap().value;
        prop_assert!((q_lo + q_hi - 1.0).abs() < 1e-9);
    }

    #[test]
    fn time_zero_is_identity(mu in -1.0f64..1.0, x in -2.0f64..2.0, a in -3.0f64..0.0, w in 0.0f64..3.0) {
        let p = bm(mu, 1.0, 1.5, 0.7);
        let target = Target::interval(a, a + w);
        let v = p.restarted_transition(0.0, x, &target).unwrap().value;
        prop_assert_eq!(v, if target.contains(x) { 1.0 } else { 0.0 });
    }

    #[test]
    fn density_integrates_to_set_probability(mu in -0.5f64..0.5, lambda in 0.5f64..3.0,
                                             t in 0.2f64..3.0, a in -2.0f64..1.0, w in 0.1f64..2.0) {
        let p = bm(mu, 1.0, lambda, 0.0);
        let opts = QuadratureOptions::default().with_rel_tol(1e-10);
        let x = 0.3;
        let by_density = quadrature::integrate(
            |z| p.restarted_density(t, x, z).unwrap().value, a, a + w, &[0.0, x], &opts,
        ).unwrap().value;
        let direct = p.restarted_transition(t, x, &Target::interval(a, a + w)).unwrap().value;
        prop_assert!((by_density - direct).abs() < 1e-8);
    }

    #[test]
    fn geometric_density_integrates_to_set_probability(lambda in 0.5f64..3.0, t in 0.2f64..3.0,
                                                       a in 0.1f64..2.0, w in 0.1f64..3.0) {
        let p = RestartedProcess::new(
            GeometricBrownian::new(0.2, 0.6).unwrap(),
            RestartSpec::new(lambda, Distribution::point(1.0)).unwrap(),
        ).unwrap();
        let opts = QuadratureOptions::default().with_rel_tol(1e-10);
        let x = 1.5;
        let by_density = quadrature::integrate(
            |z| p.restarted_density(t, x, z).unwrap().value, a, a + w, &[1.0, x], &opts,
        ).unwrap().value;
        let direct = p.restarted_transition(t, x, &Target::interval(a, a + w)).unwrap().value;
        prop_assert!((by_density - direct).abs() < 1e-8);
    }

    #[test]
    fn no_restart_weight_decreases(lambda in 0.01f64..10.0, t in 0.0f64..5.0, dt in 0.001f64..1.0) {
        let spec = RestartSpec::new(lambda, Distribution::point(0.0)).unwrap();
        prop_assert!(spec.no_restart_weight(t + dt) < spec.no_restart_weight(t));
        prop_assert!(spec.no_restart_weight(0.0) == 1.0);
    }
}

#[test]
fn rejects_invalid_inputs() {
    let p = bm(0.0, 1.0, 1.0, 0.0);
    assert!(matches!(p.restarted_density(0.0, 0.0, 0.0), Err(Error::SingularityAtOrigin)));
    assert!(matches!(
        p.restarted_transition(1.0, 0.0, &Target::interval(2.0, 1.0)),
        Err(Error::UnsupportedTarget(_))
    ));
    assert!(RestartSpec::new(0.0, Distribution::point(0.0)).is_err());
    assert!(RestartSpec::new(-1.0, Distribution::point(0.0)).is_err());

    let chain = FiniteCtmc::with_index_labels(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let p = RestartedProcess::new(chain.clone(), RestartSpec::new(1.0, Distribution::point(0.0)).unwrap()).unwrap();
    assert!(matches!(p.restarted_transition(1.0, 7.0, &Target::Whole), Err(Error::UnknownState(_))));
    assert!(matches!(p.restarted_density(1.0, 0.0, 0.0), Err(Error::DensityUnavailable)));
    assert!(matches!(
        RestartedProcess::new(chain, RestartSpec::new(1.0, Distribution::point(3.0)).unwrap()),
        Err(Error::StateSpaceMismatch(_))
    ));

    let g = GeometricBrownian::new(0.1, 0.5).unwrap();
    assert!(matches!(
        RestartedProcess::new(g, RestartSpec::new(1.0, Distribution::point(-1.0)).unwrap()),
        Err(Error::StateSpaceMismatch(_))
    ));
}
