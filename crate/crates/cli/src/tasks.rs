//! The six experiment tasks. Each returns its report as a table and as a
//! JSON document, and flags a property violation separately from errors so
//! the report can still be written before the run exits non-zero.
//!
//! CSV column contracts:
//!
//! * `kernel-eval`: `quantity,t,target_index,z,value,error_estimate` with
//!   `quantity` either `probability` (a target row) or `density`.
//! * `stationary`: `quantity,index,argument,value,error_estimate,finite`
//!   with `quantity` one of `measure`, `density`, `law`, `moment`,
//!   `variance`. For `law` the argument is the state label, for `moment`
//!   the order.
//! * `simulate`: `t,mean,std_error,second_moment,restarted_fraction,n_paths`.
//! * `moments`: `k,t,analytic,analytic_finite,bound,finiteness_threshold,
//!   stationary,mc_estimate,mc_std_error,n_paths,z_score,pass,warnings`.
//! * `ergodicity`: `t,max_deviation,worst_set,bound,tv_norm,tv_bound,pass`.
//! * `sweep-lambda`: `lambda,quantity,index,value` with `quantity` one of
//!   `measure`, `law`, `l1_to_stationary`, `convergence_order`.

use std::path::Path;

use restartk::analysis::{
    bm_stationary_moments, ergodicity_check, gbm_stationary_moment, modified_moment, small_lambda_sweep,
    ErgodicityOptions, MomentValue, PartitionSpec,
};
use restartk::simulation::{moment_from_states, simulate_paths, states_at, write_path_log, EstimatorReport, PathConfig};
use restartk::{
    BrownianWithDrift, Distribution, GeometricBrownian, MarkovKernel, QuadratureOptions, RestartedProcess, Target,
};
use serde::Serialize;

use crate::config::{BaseProcess, ExperimentConfig, TargetSpec, TaskBlock, SCHEMA_VERSION};
use crate::error::CliError;
use crate::report::{to_json, warning_tags, Cell, Envelope, Table};

/// Everything a finished task produced.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub json: Vec<u8>,
    /// CSV path log, for `simulate` when requested.
    pub path_log: Option<Vec<u8>>,
    /// Description of a violated property check.
    pub violation: Option<String>,
}

/// Family-specific closed forms that the generic tasks consult.
enum Family<'a> {
    Bm(&'a BrownianWithDrift),
    Gbm(&'a GeometricBrownian),
    Ctmc,
}

struct Run<'a, K> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    proc: RestartedProcess<K>,
    family: Family<'a>,
}

pub fn execute(cfg: &ExperimentConfig, seed: u64, base_dir: &Path) -> Result<Outcome, CliError> {
    let base = cfg.base_process(base_dir)?;
    let restart = cfg.restart_spec()?;
    let opts = cfg.tolerances.quadrature();
    let proc_err = |e| CliError::Invalid {
        field: "restart.nu".into(),
        source: e,
    };
    match &base {
        BaseProcess::Bm(b) => Run {
            cfg,
            seed,
            proc: RestartedProcess::new(*b, restart).map_err(proc_err)?.with_options(opts),
            family: Family::Bm(b),
        }
        .task(),
        BaseProcess::Gbm(g) => Run {
            cfg,
            seed,
            proc: RestartedProcess::new(*g, restart).map_err(proc_err)?.with_options(opts),
            family: Family::Gbm(g),
        }
        .task(),
        BaseProcess::Ctmc(c) => Run {
            cfg,
            seed,
            proc: RestartedProcess::new(c.clone(), restart).map_err(proc_err)?.with_options(opts),
            family: Family::Ctmc,
        }
        .task(),
    }
}

fn targets(specs: &[TargetSpec]) -> Vec<Target> {
    specs.iter().map(TargetSpec::to_target).collect()
}

/// Sorted, de-duplicated copy of a list of times.
fn time_grid(ts: &[f64]) -> Vec<f64> {
    let mut g = ts.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

#[derive(Serialize)]
struct KernelRow {
    quantity: &'static str,
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    value: f64,
    error_estimate: f64,
}

#[derive(Serialize)]
struct KernelReport {
    x: f64,
    targets: Vec<Target>,
    rows: Vec<KernelRow>,
}

#[derive(Serialize)]
struct StationaryRow {
    quantity: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    argument: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_estimate: Option<f64>,
    finite: bool,
}

#[derive(Serialize)]
struct StationaryReport {
    targets: Vec<Target>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_finite_order: Option<u32>,
    rows: Vec<StationaryRow>,
}

#[derive(Serialize)]
struct SimulateRow {
    t: f64,
    mean: EstimatorReport,
    second_moment: f64,
    restarted_fraction: f64,
}

#[derive(Serialize)]
struct SimulateReport {
    horizon: f64,
    n_paths: usize,
    rows: Vec<SimulateRow>,
}

#[derive(Serialize)]
struct MomentRow {
    #[serde(flatten)]
    report: restartk::analysis::MomentReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationary: Option<MomentValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    z_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pass: Option<bool>,
}

#[derive(Serialize)]
struct MomentsReport {
    x: f64,
    n_paths: usize,
    rows: Vec<MomentRow>,
}

impl<K: MarkovKernel + Clone> Run<'_, K> {
    fn task(&self) -> Result<Outcome, CliError> {
        match &self.cfg.task {
            TaskBlock::KernelEval {
                x,
                times,
                targets: t,
                density_points,
            } => self.kernel_eval(*x, times, &targets(t), density_points),
            TaskBlock::Stationary {
                targets: t,
                density_points,
                max_order,
            } => self.stationary(&targets(t), density_points, *max_order),
            TaskBlock::Simulate {
                initial,
                horizon,
                grid,
                n_paths,
            } => self.simulate(initial.to_distribution("task.initial")?, *horizon, grid, *n_paths),
            TaskBlock::Moments { x, orders, times, n_paths } => self.moments(*x, orders, times, *n_paths),
            TaskBlock::Ergodicity {
                x,
                times,
                targets: t,
                partition,
            } => self.ergodicity(*x, times, &targets(t), *partition),
            TaskBlock::SweepLambda { lambdas, targets: t } => self.sweep(lambdas, &targets(t)),
        }
    }

    fn envelope<T: Serialize>(&self, report: T) -> Vec<u8> {
        to_json(&Envelope {
            schema_version: SCHEMA_VERSION,
            task: self.cfg.task.name(),
            seed: self.seed,
            lambda: self.cfg.restart.lambda,
            report,
        })
    }

    fn outcome<T: Serialize>(&self, table: Table, report: T) -> Outcome {
        Outcome {
            table,
            json: self.envelope(report),
            path_log: None,
            violation: None,
        }
    }

    fn kernel_eval(&self, x: f64, times: &[f64], targets: &[Target], zs: &[f64]) -> Result<Outcome, CliError> {
        let mut rows = Vec::new();
        for &t in times {
            for (i, g) in targets.iter().enumerate() {
                let r = self.proc.restarted_transition(t, x, g)?;
                rows.push(KernelRow {
                    quantity: "probability",
                    t,
                    target_index: Some(i),
                    z: None,
                    value: r.value,
                    error_estimate: r.abs_error_estimate,
                });
            }
            for &z in zs {
                let r = self.proc.restarted_density(t, x, z)?;
                rows.push(KernelRow {
                    quantity: "density",
                    t,
                    target_index: None,
                    z: Some(z),
                    value: r.value,
                    error_estimate: r.abs_error_estimate,
                });
            }
        }
        let mut table = Table::new(&["quantity", "t", "target_index", "z", "value", "error_estimate"]);
        for r in &rows {
            table.push(vec![
                r.quantity.into(),
                r.t.into(),
                r.target_index.map_or(Cell::Empty, Cell::from),
                r.z.into(),
                r.value.into(),
                r.error_estimate.into(),
            ]);
        }
        Ok(self.outcome(
            table,
            KernelReport {
                x,
                targets: targets.to_vec(),
                rows,
            },
        ))
    }

    /// Stationary `k`-th moment from a closed form, when one is available.
    fn stationary_moment(&self, k: u32) -> Result<Option<MomentValue>, CliError> {
        Ok(match self.family {
            Family::Bm(b) if k <= 2 => {
                let s = bm_stationary_moments(b, self.proc.restart())?;
                Some(MomentValue::Finite {
                    value: if k == 1 { s.mean } else { s.second_moment },
                })
            }
            Family::Bm(_) => None,
            Family::Gbm(g) => Some(gbm_stationary_moment(g, self.proc.restart(), k)?.value),
            Family::Ctmc => {
                let law = self.proc.invariant_law()?;
                let labels = self.proc.state_space().finite_values().unwrap_or_default();
                Some(MomentValue::Finite {
                    value: law.iter().zip(labels).map(|(q, v)| q * v.powi(k as i32)).sum(),
                })
            }
        })
    }

    fn stationary(&self, targets: &[Target], zs: &[f64], max_order: u32) -> Result<Outcome, CliError> {
        let mut rows = Vec::new();
        for (i, g) in targets.iter().enumerate() {
            let r = self.proc.invariant_measure(g)?;
            rows.push(StationaryRow {
                quantity: "measure",
                index: Some(i),
                argument: None,
                value: Some(r.value),
                error_estimate: Some(r.abs_error_estimate),
                finite: true,
            });
        }
        for (i, &z) in zs.iter().enumerate() {
            let r = self.proc.invariant_density(z)?;
            rows.push(StationaryRow {
                quantity: "density",
                index: Some(i),
                argument: Some(z),
                value: Some(r.value),
                error_estimate: Some(r.abs_error_estimate),
                finite: true,
            });
        }
        if let Some(labels) = self.proc.state_space().finite_values() {
            for (i, (q, &v)) in self.proc.invariant_law()?.into_iter().zip(labels).enumerate() {
                rows.push(StationaryRow {
                    quantity: "law",
                    index: Some(i),
                    argument: Some(v),
                    value: Some(q),
                    error_estimate: None,
                    finite: true,
                });
            }
        }
        for k in 1..=max_order {
            if let Some(m) = self.stationary_moment(k)? {
                rows.push(StationaryRow {
                    quantity: "moment",
                    index: None,
                    argument: Some(f64::from(k)),
                    value: m.finite(),
                    error_estimate: None,
                    finite: !m.is_divergent(),
                });
            }
        }
        if let Family::Bm(b) = self.family {
            let s = bm_stationary_moments(b, self.proc.restart())?;
            rows.push(StationaryRow {
                quantity: "variance",
                index: None,
                argument: None,
                value: Some(s.variance),
                error_estimate: None,
                finite: true,
            });
        }
        let max_finite_order = match self.family {
            Family::Gbm(g) => Some(restartk::analysis::max_finite_moment_order(g, self.proc.restart().rate())),
            _ => None,
        };

        let mut table = Table::new(&["quantity", "index", "argument", "value", "error_estimate", "finite"]);
        for r in &rows {
            table.push(vec![
                r.quantity.into(),
                r.index.map_or(Cell::Empty, Cell::from),
                r.argument.into(),
                r.value.into(),
                r.error_estimate.into(),
                r.finite.into(),
            ]);
        }
        Ok(self.outcome(
            table,
            StationaryReport {
                targets: targets.to_vec(),
                max_finite_order,
                rows,
            },
        ))
    }

    fn simulate(&self, initial: Distribution, horizon: f64, grid: &[f64], n_paths: usize) -> Result<Outcome, CliError> {
        if !initial.supported_in(self.proc.state_space()) {
            return Err(CliError::Config {
                field: "task.initial".into(),
                reason: "initial law charges points outside the state space".into(),
            });
        }
        let cfg = PathConfig::new(self.seed, horizon, grid.to_vec(), n_paths, initial)?;
        let paths = simulate_paths(&self.proc, &cfg);

        let mut rows = Vec::new();
        for (i, &t) in grid.iter().enumerate() {
            let states: Vec<f64> = paths.iter().map(|p| p.states[i]).collect();
            let second = EstimatorReport::from_samples(&states.iter().map(|x| x * x).collect::<Vec<_>>());
            let restarted = paths
                .iter()
                .filter(|p| p.restart_times.first().is_some_and(|&r| r <= t))
                .count();
            rows.push(SimulateRow {
                t,
                mean: EstimatorReport::from_samples(&states),
                second_moment: second.estimate,
                restarted_fraction: restarted as f64 / n_paths as f64,
            });
        }
        let mut table = Table::new(&["t", "mean", "std_error", "second_moment", "restarted_fraction", "n_paths"]);
        for r in &rows {
            table.push(vec![
                r.t.into(),
                r.mean.estimate.into(),
                r.mean.std_error.into(),
                r.second_moment.into(),
                r.restarted_fraction.into(),
                n_paths.into(),
            ]);
        }
        let path_log = if self.cfg.output.path_log.is_some() {
            let mut buf = Vec::new();
            write_path_log(&mut buf, &cfg, &paths, 0).expect("writing to memory");
            Some(buf)
        } else {
            None
        };
        let mut out = self.outcome(table, SimulateReport { horizon, n_paths, rows });
        out.path_log = path_log;
        Ok(out)
    }

    fn moments(&self, x: f64, orders: &[u32], times: &[f64], n_paths: usize) -> Result<Outcome, CliError> {
        let z = self.cfg.tolerances.z_score;
        let slack = self.cfg.tolerances.check_tol;
        let grid = time_grid(times);
        let path_cfg = if n_paths > 0 {
            let horizon = grid.last().copied().filter(|&t| t > 0.0).unwrap_or(1.0);
            Some(PathConfig::new(self.seed, horizon, grid.clone(), n_paths, Distribution::point(x))?)
        } else {
            None
        };

        let mut rows = Vec::new();
        for &t in times {
            let states = match &path_cfg {
                Some(c) => Some(states_at(&self.proc, c, t)?),
                None => None,
            };
            for &k in orders {
                let mut report = modified_moment(&self.proc, k, t, x)?;
                if let Some(s) = &states {
                    report = report.with_empirical(moment_from_states(s, k)?);
                }
                let (z_score, pass) = match (report.analytic.finite(), &report.empirical) {
                    (Some(a), Some(e)) => {
                        let dev = (a - e.estimate).abs();
                        let z_score = if e.std_error > 0.0 { Some(e.z_score(a)) } else { None };
                        (z_score, Some(dev <= z * e.std_error + slack * a.abs().max(1.0)))
                    }
                    _ => (None, None),
                };
                rows.push(MomentRow {
                    stationary: self.stationary_moment(k)?,
                    report,
                    z_score,
                    pass,
                });
            }
        }

        // Estimates flagged as heavy-tailed are reported, not asserted.
        let failures: Vec<String> = rows
            .iter()
            .filter(|r| r.pass == Some(false) && r.report.warnings.is_empty())
            .map(|r| format!("k = {} at t = {}", r.report.k, r.report.t))
            .collect();

        let mut table = Table::new(&[
            "k",
            "t",
            "analytic",
            "analytic_finite",
            "bound",
            "finiteness_threshold",
            "stationary",
            "mc_estimate",
            "mc_std_error",
            "n_paths",
            "z_score",
            "pass",
            "warnings",
        ]);
        for r in &rows {
            let e = r.report.empirical.as_ref();
            table.push(vec![
                r.report.k.into(),
                r.report.t.into(),
                r.report.analytic.finite().into(),
                (!r.report.analytic.is_divergent()).into(),
                r.report.bound.into(),
                r.report.finiteness_threshold.into(),
                r.stationary.as_ref().and_then(MomentValue::finite).into(),
                e.map(|e| e.estimate).into(),
                e.map(|e| e.std_error).into(),
                e.map_or(Cell::Empty, |e| e.n.into()),
                r.z_score.into(),
                r.pass.into(),
                warning_tags(&r.report.warnings),
            ]);
        }
        let mut out = self.outcome(table, MomentsReport { x, n_paths, rows });
        if !failures.is_empty() {
            out.violation = Some(format!(
                "Monte Carlo disagrees with the analytic moment beyond {z} standard errors for {}",
                failures.join(", ")
            ));
        }
        Ok(out)
    }

    fn ergodicity(
        &self,
        x: f64,
        times: &[f64],
        targets: &[Target],
        partition: Option<crate::config::PartitionBlock>,
    ) -> Result<Outcome, CliError> {
        let opts = ErgodicityOptions {
            tolerance: self.cfg.tolerances.check_tol,
            partition: Some(partition.map_or_else(PartitionSpec::default, |p| PartitionSpec {
                bins: p.bins,
                mass: p.mass,
            })),
        };
        let report = ergodicity_check(&self.proc, x, times, targets, &opts)?;
        let mut table = Table::new(&["t", "max_deviation", "worst_set", "bound", "tv_norm", "tv_bound", "pass"]);
        for r in &report.rows {
            let worst = if targets.is_empty() { Cell::Empty } else { r.worst_set.into() };
            table.push(vec![
                r.t.into(),
                r.max_deviation.into(),
                worst,
                r.bound.into(),
                r.tv_norm.into(),
                r.tv_bound.into(),
                r.pass.into(),
            ]);
        }
        let violation = (!report.pass).then(|| {
            let bad: Vec<String> = report.rows.iter().filter(|r| !r.pass).map(|r| format!("t = {}", r.t)).collect();
            format!("distance to the invariant law exceeds the exponential bound at {}", bad.join(", "))
        });
        let mut out = self.outcome(table, report);
        out.violation = violation;
        Ok(out)
    }

    fn sweep(&self, lambdas: &[f64], targets: &[Target]) -> Result<Outcome, CliError> {
        if targets.is_empty() && !self.proc.state_space().is_finite() {
            return Err(CliError::Config {
                field: "task.targets".into(),
                reason: "a continuous state space needs at least one target".into(),
            });
        }
        let opts: &QuadratureOptions = self.proc.options();
        let report = small_lambda_sweep(self.proc.base(), self.proc.restart().nu(), targets, lambdas, opts)?;
        let mut table = Table::new(&["lambda", "quantity", "index", "value"]);
        for r in &report.rows {
            for (i, &v) in r.values.iter().enumerate() {
                table.push(vec![r.lambda.into(), "measure".into(), i.into(), v.into()]);
            }
            for (i, &v) in r.law.iter().flatten().enumerate() {
                table.push(vec![r.lambda.into(), "law".into(), i.into(), v.into()]);
            }
            if let Some(d) = r.l1_to_stationary {
                table.push(vec![r.lambda.into(), "l1_to_stationary".into(), Cell::Empty, d.into()]);
            }
        }
        if let Some(order) = report.convergence_order {
            table.push(vec![Cell::Empty, "convergence_order".into(), Cell::Empty, order.into()]);
        }
        Ok(self.outcome(table, report))
    }
}
