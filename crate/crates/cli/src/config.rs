//! Experiment configuration: the JSON schema, its validation and the
//! conversion into library objects.
//!
//! Every struct rejects unknown keys. Validation runs before any task
//! executes and reports the offending field by its dotted path.

use std::path::{Path, PathBuf};

use restartk::processes::CtmcFile;
use restartk::{
    BrownianWithDrift, DensityFamily, Distribution, FiniteCtmc, GeometricBrownian, QuadratureOptions, RestartSpec,
    Target,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The only schema version this runner understands.
pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that replaces the config seed when set.
pub const SEED_ENV: &str = "RESTARTK_SEED";

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub process: ProcessBlock,
    pub restart: RestartBlock,
    pub task: TaskBlock,
    pub output: OutputBlock,
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessBlock {
    Bm {
        mu: f64,
        sigma: f64,
    },
    Gbm {
        mu: f64,
        sigma: f64,
    },
    /// Either an inline generator or a chain file, never both.
    Ctmc {
        #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
        q: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RestartBlock {
    pub lambda: f64,
    pub nu: LawSpec,
}

/// A probability law on the state space.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Point { at: f64 },
    Finite { atoms: Vec<Atom> },
    Density { law: DensityFamily },
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub state: f64,
    pub weight: f64,
}

/// A measurable set. Missing interval ends are infinite; JSON has no
/// literal for infinity.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Whole,
    Interval {
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
    },
    Subset {
        states: Vec<f64>,
    },
}

impl TargetSpec {
    pub fn to_target(&self) -> Target {
        match self {
            TargetSpec::Whole => Target::Whole,
            TargetSpec::Interval { lo, hi } => {
                Target::interval(lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))
            }
            TargetSpec::Subset { states } => Target::Subset { states: states.clone() },
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskBlock {
    /// Restarted transition probabilities, and densities where they exist.
    KernelEval {
        x: f64,
        times: Vec<f64>,
        #[serde(default)]
        targets: Vec<TargetSpec>,
        #[serde(default)]
        density_points: Vec<f64>,
    },
    /// Invariant measure of the restarted process.
    Stationary {
        #[serde(default)]
        targets: Vec<TargetSpec>,
        #[serde(default)]
        density_points: Vec<f64>,
        #[serde(default = "default_max_order")]
        max_order: u32,
    },
    /// Path simulation with per-grid-time summaries.
    Simulate {
        initial: LawSpec,
        horizon: f64,
        grid: Vec<f64>,
        n_paths: usize,
    },
    /// Analytic moments, optionally against Monte Carlo.
    Moments {
        x: f64,
        orders: Vec<u32>,
        times: Vec<f64>,
        #[serde(default)]
        n_paths: usize,
    },
    /// Distance to the invariant law against the exponential bound.
    Ergodicity {
        x: f64,
        times: Vec<f64>,
        #[serde(default)]
        targets: Vec<TargetSpec>,
        #[serde(default)]
        partition: Option<PartitionBlock>,
    },
    /// Invariant measure along a decreasing grid of restart rates.
    SweepLambda {
        lambdas: Vec<f64>,
        #[serde(default)]
        targets: Vec<TargetSpec>,
    },
}

fn default_max_order() -> u32 {
    2
}

impl TaskBlock {
    pub fn name(&self) -> &'static str {
        match self {
            TaskBlock::KernelEval { .. } => "kernel-eval",
            TaskBlock::Stationary { .. } => "stationary",
            TaskBlock::Simulate { .. } => "simulate",
            TaskBlock::Moments { .. } => "moments",
            TaskBlock::Ergodicity { .. } => "ergodicity",
            TaskBlock::SweepLambda { .. } => "sweep-lambda",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionBlock {
    pub bins: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub format: Format,
    pub path: PathBuf,
    /// Per-event path log, written by the `simulate` task only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    pub tail_eps: f64,
    /// Slack added to analytic bounds before a property check fails.
    pub check_tol: f64,
    /// Standard errors allowed between an analytic value and its estimate.
    pub z_score: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let q = QuadratureOptions::default();
        Self {
            rel_tol: q.rel_tol,
            abs_tol: q.abs_tol,
            max_panels: q.max_panels,
            tail_eps: q.tail_eps,
            check_tol: 1e-6,
            z_score: 3.0,
        }
    }
}

impl Tolerances {
    pub fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_panels: self.max_panels,
            tail_eps: self.tail_eps,
        }
    }
}

/// The base process named by the config, ready to be restarted.
#[derive(Debug, Clone)]
pub enum BaseProcess {
    Bm(BrownianWithDrift),
    Gbm(GeometricBrownian),
    Ctmc(FiniteCtmc),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

fn times(field: &str, ts: &[f64]) -> Result<(), CliError> {
    if ts.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    for (i, &t) in ts.iter().enumerate() {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(invalid(format!("{field}[{i}]"), format!("must be a finite non-negative time, got {t}")));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a config.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        match &self.process {
            ProcessBlock::Bm { mu, sigma } | ProcessBlock::Gbm { mu, sigma } => {
                finite("process.mu", *mu)?;
                positive("process.sigma", *sigma)?;
            }
            ProcessBlock::Ctmc { q, values, file } => match (q, values, file) {
                (Some(_), Some(_), None) | (None, None, Some(_)) => {}
                _ => return Err(invalid("process", "give either `Q` with `values` or `file`")),
            },
        }
        positive("restart.lambda", self.restart.lambda)?;
        self.restart.nu.validate("restart.nu")?;

        match &self.task {
            TaskBlock::KernelEval {
                x,
                times: ts,
                targets,
                density_points,
            } => {
                finite("task.x", *x)?;
                times("task.times", ts)?;
                if targets.is_empty() && density_points.is_empty() {
                    return Err(invalid("task.targets", "give at least one target or density point"));
                }
            }
            TaskBlock::Stationary { max_order, .. } => {
                if *max_order > 16 {
                    return Err(invalid("task.max_order", "at most 16"));
                }
            }
            TaskBlock::Simulate {
                initial,
                horizon,
                grid,
                n_paths,
            } => {
                initial.validate("task.initial")?;
                positive("task.horizon", *horizon)?;
                times("task.grid", grid)?;
                if *n_paths == 0 {
                    return Err(invalid("task.n_paths", "must be positive"));
                }
            }
            TaskBlock::Moments { x, orders, times: ts, .. } => {
                finite("task.x", *x)?;
                times("task.times", ts)?;
                if orders.is_empty() || orders.contains(&0) {
                    return Err(invalid("task.orders", "must be a non-empty list of positive orders"));
                }
            }
            TaskBlock::Ergodicity {
                x, times: ts, partition, ..
            } => {
                finite("task.x", *x)?;
                times("task.times", ts)?;
                if let Some(p) = partition {
                    if p.bins == 0 {
                        return Err(invalid("task.partition.bins", "must be positive"));
                    }
                    if !(p.mass > 0.0 && p.mass < 1.0) {
                        return Err(invalid("task.partition.mass", "must lie in (0, 1)"));
                    }
                }
            }
            TaskBlock::SweepLambda { lambdas, .. } => {
                if lambdas.is_empty() {
                    return Err(invalid("task.lambdas", "must not be empty"));
                }
                for (i, &l) in lambdas.iter().enumerate() {
                    positive(&format!("task.lambdas[{i}]"), l)?;
                }
                if lambdas.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Less)) {
                    return Err(invalid("task.lambdas", "must be strictly decreasing"));
                }
            }
        }
        if self.output.path_log.is_some() && !matches!(self.task, TaskBlock::Simulate { .. }) {
            return Err(invalid("output.path_log", "only the simulate task writes a path log"));
        }
        if self.output.path.as_os_str().is_empty() {
            return Err(invalid("output.path", "must not be empty"));
        }

        let t = &self.tolerances;
        positive("tolerances.rel_tol", t.rel_tol)?;
        positive("tolerances.abs_tol", t.abs_tol)?;
        positive("tolerances.tail_eps", t.tail_eps)?;
        positive("tolerances.check_tol", t.check_tol)?;
        positive("tolerances.z_score", t.z_score)?;
        if t.max_panels == 0 {
            return Err(invalid("tolerances.max_panels", "must be positive"));
        }
        Ok(())
    }

    /// Builds the base process; chain files are read relative to `base_dir`.
    pub fn base_process(&self, base_dir: &Path) -> Result<BaseProcess, CliError> {
        let lib = |field: &str, e: restartk::Error| CliError::Invalid {
            field: field.to_string(),
            source: e,
        };
        Ok(match &self.process {
            ProcessBlock::Bm { mu, sigma } => {
                BaseProcess::Bm(BrownianWithDrift::new(*mu, *sigma).map_err(|e| lib("process", e))?)
            }
            ProcessBlock::Gbm { mu, sigma } => {
                BaseProcess::Gbm(GeometricBrownian::new(*mu, *sigma).map_err(|e| lib("process", e))?)
            }
            ProcessBlock::Ctmc { q, values, file } => {
                let spec = match (q, values, file) {
                    (Some(q), Some(v), _) => CtmcFile {
                        q: q.clone(),
                        values: v.clone(),
                    },
                    (_, _, Some(f)) => {
                        let path = base_dir.join(f);
                        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Read { path, source: e })?;
                        serde_json::from_str(&text).map_err(|e| invalid("process.file", e.to_string()))?
                    }
                    _ => unreachable!("checked by validate"),
                };
                BaseProcess::Ctmc(FiniteCtmc::from_file(spec).map_err(|e| lib("process.Q", e))?)
            }
        })
    }

    pub fn restart_spec(&self) -> Result<RestartSpec, CliError> {
        let nu = self.restart.nu.to_distribution("restart.nu")?;
        RestartSpec::new(self.restart.lambda, nu).map_err(|e| CliError::Invalid {
            field: "restart.lambda".into(),
            source: e,
        })
    }
}

impl LawSpec {
    fn validate(&self, field: &str) -> Result<(), CliError> {
        self.to_distribution(field).map(|_| ())
    }

    pub fn to_distribution(&self, field: &str) -> Result<Distribution, CliError> {
        let lib = |e| CliError::Invalid {
            field: field.to_string(),
            source: e,
        };
        match self {
            LawSpec::Point { at } => {
                finite(&format!("{field}.at"), *at)?;
                Ok(Distribution::point(*at))
            }
            LawSpec::Finite { atoms } => {
                Distribution::finite(atoms.iter().map(|a| (a.state, a.weight)).collect()).map_err(lib)
            }
            LawSpec::Density { law } => Distribution::family(*law).map_err(lib),
        }
    }
}

/// The seed in force: the environment variable when set, else the config.
pub fn effective_seed(config_seed: u64, env: Option<&str>) -> Result<u64, CliError> {
    match env {
        None => Ok(config_seed),
        Some(raw) => raw
            .trim()
            .parse()
            .map_err(|_| invalid(SEED_ENV, format!("`{raw}` is not an unsigned 64-bit integer"))),
    }
}
