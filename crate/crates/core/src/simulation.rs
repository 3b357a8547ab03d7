//! Exact event-driven Monte Carlo for restarted processes.
//!
//! Each path merges the Poisson restart epochs with the recording grid and
//! moves the base process between consecutive events with its exact
//! transition sampler, so estimates carry no discretisation bias. Path `i`
//! draws from the ChaCha stream `i` of the configured seed, which makes
//! every path reproducible on its own and the collection independent of
//! how many worker threads run it.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::Distribution;
use crate::error::{invalid, Error, Result, Warning};
use crate::kernel::{MarkovKernel, RestartedProcess};
use crate::quadrature::{self, QuadratureOptions};

/// Sample kurtosis above which a moment estimate is flagged unstable.
pub const KURTOSIS_ALERT: f64 = 1_000.0;

#[derive(Debug, Clone)]
pub struct PathConfig {
    pub seed: u64,
    pub horizon: f64,
    pub record_grid: Vec<f64>,
    pub n_paths: usize,
    pub initial: Distribution,
}

impl PathConfig {
    pub fn new(seed: u64, horizon: f64, record_grid: Vec<f64>, n_paths: usize, initial: Distribution) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid("horizon", format!("must be positive and finite, got {horizon}")));
        }
        if n_paths == 0 {
            return Err(invalid("n_paths", "at least one path is required"));
        }
        if record_grid.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(invalid("record_grid", "times must be sorted"));
        }
        if record_grid.iter().any(|&g| !(0.0..=horizon).contains(&g)) {
            return Err(invalid("record_grid", format!("times must lie in [0, {horizon}]")));
        }
        Ok(Self {
            seed,
            horizon,
            record_grid,
            n_paths,
            initial,
        })
    }

    /// Grid `{t}` with horizon `t` and a fixed start.
    pub fn at(seed: u64, t: f64, n_paths: usize, x: f64) -> Result<Self> {
        Self::new(seed, t, vec![t], n_paths, Distribution::point(x))
    }

    fn grid_index(&self, t: f64) -> Result<usize> {
        self.record_grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| invalid("t", format!("{t} is not on the recording grid")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    /// State at each recording-grid time.
    pub states: Vec<f64>,
    /// Restart epochs up to the horizon, increasing.
    pub restart_times: Vec<f64>,
    /// State drawn from the restart law at each epoch.
    pub restart_states: Vec<f64>,
    pub n_restarts_at_horizon: usize,
}

/// Per-stream generator for path `index`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

trait Observer {
    fn grid(&mut self, t: f64, state: f64);
    fn restart(&mut self, t: f64, state: f64);
}

fn run_path<K: MarkovKernel, O: Observer>(proc: &RestartedProcess<K>, cfg: &PathConfig, index: u64, obs: &mut O) {
    let mut rng = path_rng(cfg.seed, index);
    let lambda = proc.restart().rate();
    let clock = (lambda > 0.0).then(|| Exp::new(lambda).expect("positive rate"));
    let next_gap = |rng: &mut ChaCha8Rng| clock.map_or(f64::INFINITY, |c| c.sample(rng));

    let mut state = cfg.initial.sample(&mut rng);
    let mut last = 0.0;
    let mut next_restart = next_gap(&mut rng);
    let nu = proc.restart().nu();

    for &g in &cfg.record_grid {
        while next_restart <= g {
            state = nu.sample(&mut rng);
            last = next_restart;
            obs.restart(next_restart, state);
            next_restart += next_gap(&mut rng);
        }
        if g > last {
            state = proc.base().sample_transition(g - last, state, &mut rng);
            last = g;
        }
        obs.grid(g, state);
    }
    while next_restart <= cfg.horizon {
        let s = nu.sample(&mut rng);
        obs.restart(next_restart, s);
        next_restart += next_gap(&mut rng);
    }
}

impl Observer for PathSample {
    fn grid(&mut self, _t: f64, state: f64) {
        self.states.push(state);
    }
    fn restart(&mut self, t: f64, state: f64) {
        self.restart_times.push(t);
        self.restart_states.push(state);
        self.n_restarts_at_horizon += 1;
    }
}

struct AtGridIndex {
    target: usize,
    seen: usize,
    value: f64,
}

impl Observer for AtGridIndex {
    fn grid(&mut self, _t: f64, state: f64) {
        if self.seen == self.target {
            self.value = state;
        }
        self.seen += 1;
    }
    fn restart(&mut self, _t: f64, _state: f64) {}
}

#[derive(Default)]
struct LastRestart {
    count: usize,
    last: Option<f64>,
}

impl Observer for LastRestart {
    fn grid(&mut self, _t: f64, _state: f64) {}
    fn restart(&mut self, t: f64, _state: f64) {
        self.count += 1;
        self.last = Some(t);
    }
}

/// One full path with its restart history.
pub fn simulate_path<K: MarkovKernel>(proc: &RestartedProcess<K>, cfg: &PathConfig, path_index: u64) -> PathSample {
    let mut sample = PathSample {
        states: Vec::with_capacity(cfg.record_grid.len()),
        restart_times: Vec::new(),
        restart_states: Vec::new(),
        n_restarts_at_horizon: 0,
    };
    run_path(proc, cfg, path_index, &mut sample);
    sample
}

/// All `cfg.n_paths` paths, in path-index order.
pub fn simulate_paths<K: MarkovKernel>(proc: &RestartedProcess<K>, cfg: &PathConfig) -> Vec<PathSample> {
    (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(proc, cfg, i))
        .collect()
}

/// `X̃(t)` on every path, in path-index order; `t` must be a grid time.
pub fn states_at<K: MarkovKernel>(proc: &RestartedProcess<K>, cfg: &PathConfig, t: f64) -> Result<Vec<f64>> {
    let target = cfg.grid_index(t)?;
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut obs = AtGridIndex {
                target,
                seen: 0,
                value: f64::NAN,
            };
            run_path(proc, cfg, i, &mut obs);
            obs.value
        })
        .collect())
}

/// Sample mean with standard error `sd / √n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<Warning>,
}

impl EstimatorReport {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = quadrature::pairwise_sum(values) / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            estimate: mean,
            std_error: (var / n as f64).sqrt(),
            n,
            warnings: Vec::new(),
        }
    }

    /// Whether `value` lies within `z` standard errors of the estimate.
    pub fn agrees_with(&self, value: f64, z: f64) -> bool {
        (self.estimate - value).abs() <= z * self.std_error
    }

    pub fn z_score(&self, value: f64) -> f64 {
        (self.estimate - value) / self.std_error
    }
}

/// Ratio of the fourth central moment to the squared variance.
pub fn sample_kurtosis(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(a, b), v| {
        let d = (v - mean) * (v - mean);
        (a + d, b + d * d)
    });
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 == 0.0 {
        0.0
    } else {
        m4 / (m2 * m2)
    }
}

/// Monte Carlo estimate of `E[X̃(t)^k]`.
pub fn monte_carlo_moment<K: MarkovKernel>(
    proc: &RestartedProcess<K>,
    cfg: &PathConfig,
    k: u32,
    t: f64,
) -> Result<EstimatorReport> {
    if k == 0 {
        return Err(invalid("k", "moment order must be positive"));
    }
    moment_from_states(&states_at(proc, cfg, t)?, k)
}

/// Estimate of the `k`-th moment from already simulated states, with the
/// same heavy-tail diagnostics as [`monte_carlo_moment`].
pub fn moment_from_states(states: &[f64], k: u32) -> Result<EstimatorReport> {
    if k == 0 {
        return Err(invalid("k", "moment order must be positive"));
    }
    if states.is_empty() {
        return Err(invalid("states", "no samples"));
    }
    let values: Vec<f64> = states.iter().map(|x| x.powi(k as i32)).collect();
    let mut report = EstimatorReport::from_samples(&values);
    if !report.estimate.is_finite() {
        report.warnings.push(Warning::MomentUnstable {
            reason: "sample mean overflowed".into(),
        });
    } else {
        let kurt = sample_kurtosis(&values);
        if kurt > KURTOSIS_ALERT || !kurt.is_finite() {
            report.warnings.push(Warning::MomentUnstable {
                reason: format!("sample kurtosis {kurt:.3e} exceeds {KURTOSIS_ALERT:e}"),
            });
        }
    }
    Ok(report)
}

/// Monte Carlo estimate of `Var[X̃(t)]`, with a delta-method standard error
/// `√((m₄ − m₂²)/n)` from the central sample moments.
pub fn monte_carlo_variance<K: MarkovKernel>(
    proc: &RestartedProcess<K>,
    cfg: &PathConfig,
    t: f64,
) -> Result<EstimatorReport> {
    let values = states_at(proc, cfg, t)?;
    Ok(variance_report(&values))
}

pub fn variance_report(values: &[f64]) -> EstimatorReport {
    let n = values.len();
    let mean = quadrature::pairwise_sum(values) / n as f64;
    let (m2, m4) = values.iter().fold((0.0, 0.0), |(a, b), v| {
        let d = (v - mean) * (v - mean);
        (a + d, b + d * d)
    });
    let (m2, m4) = (m2 / n as f64, m4 / n as f64);
    EstimatorReport {
        estimate: m2 * n as f64 / (n.max(2) - 1) as f64,
        std_error: ((m4 - m2 * m2).max(0.0) / n as f64).sqrt(),
        n,
        warnings: Vec::new(),
    }
}

/// Goodness of fit of the age since the last restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeReport {
    pub lambda: f64,
    pub t: f64,
    pub n: usize,
    /// `sup_{s<t} |P̂[S ≤ s, N(t) > 0] − (1 − e^{−λs})|`.
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Fraction of paths with at least one restart.
    pub restarted_fraction: f64,
    pub pass: bool,
}

/// Compares the empirical sub-distribution of the age `S = t − T_{N(t)}` on
/// `{N(t) > 0}` with `1 − e^{−λs}` on `[0, t)`, at tolerance `3/√n`.
pub fn age_distribution_test<K: MarkovKernel>(
    proc: &RestartedProcess<K>,
    t: f64,
    n_paths: usize,
    seed: u64,
) -> Result<AgeReport> {
    let lambda = proc.restart().rate();
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "age test needs a positive restart rate"));
    }
    let start = match proc.restart().nu() {
        Distribution::PointMass(x) => Distribution::point(*x),
        other => other.clone(),
    };
    let cfg = PathConfig::new(seed, t, vec![t], n_paths, start)?;
    let mut ages: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .filter_map(|i| {
            let mut obs = LastRestart::default();
            run_path(proc, &cfg, i, &mut obs);
            obs.last.map(|r| t - r)
        })
        .collect();
    ages.sort_by(f64::total_cmp);

    let n = n_paths as f64;
    let cdf = |s: f64| -(-lambda * s).exp_m1();
    let mut max_dev: f64 = 0.0;
    for (i, &a) in ages.iter().enumerate() {
        let f = cdf(a);
        max_dev = max_dev.max((i as f64 / n - f).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    let restarted = ages.len() as f64 / n;
    max_dev = max_dev.max((restarted - cdf(t)).abs());
    let tolerance = 3.0 / n.sqrt();
    Ok(AgeReport {
        lambda,
        t,
        n: n_paths,
        max_deviation: max_dev,
        tolerance,
        restarted_fraction: restarted,
        pass: max_dev <= tolerance,
    })
}

/// Equal-width bins on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) || count == 0 {
            return Err(invalid("bins", format!("need lo < hi and count > 0, got [{lo}, {hi}] x {count}")));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.count).map(|i| self.lo + i as f64 * self.width()).collect()
    }

    /// Bin frequencies and the fraction of samples outside the window.
    pub fn histogram(&self, samples: &[f64]) -> (Vec<f64>, f64) {
        let mut counts = vec![0usize; self.count];
        let mut outside = 0usize;
        for &x in samples {
            if x < self.lo || x > self.hi || x.is_nan() {
                outside += 1;
            } else {
                let i = (((x - self.lo) / self.width()) as usize).min(self.count - 1);
                counts[i] += 1;
            }
        }
        let n = samples.len() as f64;
        (counts.into_iter().map(|c| c as f64 / n).collect(), outside as f64 / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramReport {
    pub t: f64,
    pub edges: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub reference: Vec<f64>,
    pub outside_frequency: f64,
    pub outside_reference: f64,
    /// Half the L1 distance between binned laws, with the outside mass as
    /// one more cell.
    pub tv_distance: f64,
    /// `√(bins / (2πn))`, the expected distance from sampling noise alone.
    pub noise_floor: f64,
    pub n: usize,
}

/// Minimum reference mass the window must capture.
pub const WINDOW_MASS: f64 = 1.0 - 1e-4;

/// Histogram of `X̃(t)` against a reference density binned by quadrature.
pub fn empirical_distribution<K, F>(
    proc: &RestartedProcess<K>,
    cfg: &PathConfig,
    t: f64,
    bins: Bins,
    reference: F,
) -> Result<HistogramReport>
where
    K: MarkovKernel,
    F: Fn(f64) -> f64,
{
    let samples = states_at(proc, cfg, t)?;
    let opts = QuadratureOptions::default().with_rel_tol(1e-8).with_abs_tol(1e-12);
    let edges = bins.edges();
    let mut reference_probs = Vec::with_capacity(bins.count);
    for w in edges.windows(2) {
        reference_probs.push(quadrature::integrate(&reference, w[0], w[1], &[], &opts)?.value);
    }
    let mass: f64 = reference_probs.iter().sum();
    if mass < WINDOW_MASS {
        return Err(Error::WindowTooNarrow {
            lo: bins.lo,
            hi: bins.hi,
            mass,
            required: WINDOW_MASS,
        });
    }
    let (frequencies, outside) = bins.histogram(&samples);
    let outside_reference = (1.0 - mass).max(0.0);
    let tv = 0.5
        * (frequencies
            .iter()
            .zip(&reference_probs)
            .map(|(f, r)| (f - r).abs())
            .sum::<f64>()
            + (outside - outside_reference).abs());
    let n = samples.len();
    Ok(HistogramReport {
        t,
        edges,
        frequencies,
        reference: reference_probs,
        outside_frequency: outside,
        outside_reference,
        tv_distance: tv,
        noise_floor: noise_floor(bins.count, n),
        n,
    })
}

pub fn noise_floor(bins: usize, n: usize) -> f64 {
    (bins as f64 / (2.0 * std::f64::consts::PI * n as f64)).sqrt()
}

/// Distance between the histograms of two sample sets over the same bins.
pub fn split_sample_tv(a: &[f64], b: &[f64], bins: Bins) -> f64 {
    let (fa, oa) = bins.histogram(a);
    let (fb, ob) = bins.histogram(b);
    0.5 * (fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).sum::<f64>() + (oa - ob).abs())
}

/// Streams `(path_id, time, state, event_type)` rows, grid and restart
/// events merged in time order.
pub fn write_path_log<W: Write>(out: &mut W, cfg: &PathConfig, paths: &[PathSample], first_id: usize) -> io::Result<()> {
    writeln!(out, "path_id,time,state,event_type")?;
    for (offset, path) in paths.iter().enumerate() {
        let id = first_id + offset;
        let mut events: Vec<(f64, u8, f64)> = cfg
            .record_grid
            .iter()
            .zip(&path.states)
            .map(|(&t, &x)| (t, 1, x))
            .chain(path.restart_times.iter().zip(&path.restart_states).map(|(&t, &x)| (t, 0, x)))
            .collect();
        // Restarts sort before a grid point at the same instant.
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (t, kind, x) in events {
            let kind = if kind == 0 { "restart" } else { "grid" };
            writeln!(out, "{id},{},{},{kind}", fmt_f64(t), fmt_f64(x))?;
        }
    }
    Ok(())
}

/// Locale-free scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::RestartSpec;
    use crate::processes::BrownianWithDrift;

    fn bm(lambda: f64) -> RestartedProcess<BrownianWithDrift> {
        RestartedProcess::new(
            BrownianWithDrift::new(1.0, 1.0).unwrap(),
            RestartSpec::new(lambda, Distribution::point(0.0)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(PathConfig::new(1, 1.0, vec![0.5, 0.2], 10, Distribution::point(0.0)).is_err());
        assert!(PathConfig::new(1, 1.0, vec![0.5, 2.0], 10, Distribution::point(0.0)).is_err());
        assert!(PathConfig::new(1, 1.0, vec![0.5], 0, Distribution::point(0.0)).is_err());
        let cfg = PathConfig::new(1, 2.0, vec![0.0, 1.0], 3, Distribution::point(0.0)).unwrap();
        assert!(cfg.grid_index(0.5).is_err());
    }

    #[test]
    fn restart_times_are_increasing_and_counted() {
        let p = bm(3.0);
        let cfg = PathConfig::new(9, 5.0, vec![1.0, 2.5], 20, Distribution::point(0.0)).unwrap();
        for i in 0..20 {
            let s = simulate_path(&p, &cfg, i);
            assert!(s.restart_times.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(s.n_restarts_at_horizon, s.restart_times.iter().filter(|&&t| t <= 5.0).count());
            assert!(s.restart_states.iter().all(|&x| x == 0.0));
            assert_eq!(s.states.len(), 2);
        }
    }

    #[test]
    fn time_zero_returns_initial_moments() {
        let p = bm(1.0);
        let cfg = PathConfig::new(3, 1.0, vec![0.0, 1.0], 50, Distribution::point(2.5)).unwrap();
        let r = monte_carlo_moment(&p, &cfg, 2, 0.0).unwrap();
        assert_eq!(r.estimate, 6.25);
        assert_eq!(r.std_error, 0.0);
    }

    #[test]
    fn path_is_deterministic_per_index() {
        let p = bm(2.0);
        let cfg = PathConfig::at(42, 3.0, 4, 0.0).unwrap();
        assert_eq!(simulate_path(&p, &cfg, 2), simulate_path(&p, &cfg, 2));
        assert_ne!(simulate_path(&p, &cfg, 2), simulate_path(&p, &cfg, 3));
    }

    #[test]
    fn estimator_report_standard_error() {
        let r = EstimatorReport::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.estimate, 2.5);
        assert!((r.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(r.agrees_with(2.0, 3.0));
    }

    #[test]
    fn path_log_orders_events() {
        let p = bm(2.0);
        let cfg = PathConfig::new(5, 2.0, vec![0.0, 1.0, 2.0], 2, Distribution::point(0.0)).unwrap();
        let paths = simulate_paths(&p, &cfg);
        let mut buf = Vec::new();
        write_path_log(&mut buf, &cfg, &paths, 0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("path_id,time,state,event_type"));
        let rows: Vec<_> = lines.collect();
        let expected = paths.iter().map(|p| 3 + p.restart_times.len()).sum::<usize>();
        assert_eq!(rows.len(), expected);
        let mut last = (0usize, f64::NEG_INFINITY);
        for row in rows {
            let f: Vec<_> = row.split(',').collect();
            let id: usize = f[0].parse().unwrap();
            let t: f64 = f[1].parse().unwrap();
            if id == last.0 {
                assert!(t >= last.1);
            }
            last = (id, t);
        }
    }

    #[test]
    fn fixed_width_formatting() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(-1234.5), "-1.2345000000000000e3");
    }
}
