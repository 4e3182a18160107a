//! Replicated runs, aggregation and report files.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use super::config::{
    ConfigError, ExperimentConfig, LinearConfig, ProblemConfig, ProjectorConfig, ScheduleConfig,
    SchemeKind,
};
use super::stats::{fit_rate, sup_error, RateFit, StatsError};
use crate::blackscholes::{contraction_constants, BlackScholesProblem};
use crate::drivers::{
    extend_fc, extension_constants, run_extended_pr, run_rm_observed, run_synthetic_observed,
    CompensatedSum, DriverError, ExtendedProblem, GaussianNoise, LinearDrift, Projector, RunSpec,
    SyntheticProblem, Trajectory,
};
use crate::estimator::{plan, LevelProblem};
use crate::schedules::{
    validate_ml, validate_pr, validate_rm, ContractionConstants, ExponentialSchedule,
    PolynomialSchedule, Schedule, ScheduleKind, ValidationReport,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot set up the run: {0}")]
    Setup(String),
    #[error("replication {index} failed: {source}")]
    Replication {
        index: u64,
        #[source]
        source: DriverError,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

impl HarnessError {
    /// Whether the failure lies in the configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Setup(_))
    }
}

fn setup<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Setup(e.to_string())
}

/// Problem, schedule and projector built from a configuration.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub constants: ContractionConstants,
    pub schedule: ScheduleKind,
    pub projector: Projector,
    /// Extension constant (averaging schemes on the multilevel problem).
    pub c: f64,
    model: Model,
}

enum Model {
    Rm(BlackScholesProblem),
    Pr(ExtendedProblem<BlackScholesProblem>),
    Linear(LinearDrift, GaussianNoise),
}

fn linear_parts(l: &LinearConfig) -> (LinearDrift, GaussianNoise) {
    (
        LinearDrift::new(l.slope, l.root.clone()),
        GaussianNoise::new(l.bias_direction.clone()),
    )
}

impl Prepared {
    pub fn new(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        let constants = match &config.problem {
            ProblemConfig::BlackScholes(p) => contraction_constants(p).map_err(setup)?,
            ProblemConfig::Linear(l) => LinearDrift::new(l.slope, l.root.clone()).constants(),
        };
        let (l, lp) = (constants.l, constants.l_prime);
        let schedule = match &config.schedule {
            ScheduleConfig::Poly {
                gamma0,
                r1,
                sigma0_sq,
                r2,
                eps0,
                rho,
                b0,
                r3,
            } => ScheduleKind::Poly(
                PolynomialSchedule::new(
                    gamma0.resolve(l, lp),
                    *r1,
                    sigma0_sq.sqrt(),
                    *r2,
                    *eps0,
                    *rho,
                    *b0,
                    *r3,
                )
                .map_err(setup)?,
            ),
            ScheduleConfig::Exp {
                gamma0,
                r1,
                decay,
                c,
            } => ScheduleKind::Exp(
                ExponentialSchedule::new(gamma0.resolve(l, lp), *r1, *decay, *c).map_err(setup)?,
            ),
        };
        let projector = match (&config.projector, &config.problem) {
            (ProjectorConfig::Domain, ProblemConfig::BlackScholes(p)) => {
                Projector::interval(p.theta_lo, p.theta_hi).map_err(setup)?
            }
            (ProjectorConfig::Domain | ProjectorConfig::Identity, _) => Projector::Identity,
            (ProjectorConfig::Box { lo, hi }, _) => {
                Projector::boxed(lo.clone(), hi.clone()).map_err(setup)?
            }
            (ProjectorConfig::Ball { center, radius }, _) => {
                Projector::ball(center.clone(), *radius).map_err(setup)?
            }
        };
        if let Some(d) = projector.dim() {
            if d != config.problem.dim() {
                return Err(HarnessError::Setup(format!(
                    "projector has dimension {d}, problem has {}",
                    config.problem.dim()
                )));
            }
        }
        if !projector.contains(&config.theta0) {
            return Err(HarnessError::Setup(format!(
                "theta0 = {:?} lies outside the domain",
                config.theta0
            )));
        }
        let c = config.c.resolve(l, lp);
        let model = match (&config.problem, config.scheme) {
            (ProblemConfig::BlackScholes(p), SchemeKind::Rm) => {
                Model::Rm(BlackScholesProblem::new(p.clone()).map_err(setup)?)
            }
            (ProblemConfig::BlackScholes(p), SchemeKind::Pr) => {
                let prob = BlackScholesProblem::new(p.clone()).map_err(setup)?;
                Model::Pr(extend_fc(prob, projector.clone(), c, lp).map_err(setup)?)
            }
            (ProblemConfig::Linear(lin), s) if s.is_synthetic() => {
                let (f, noise) = linear_parts(lin);
                Model::Linear(f, noise)
            }
            _ => return Err(HarnessError::Setup("scheme does not fit the problem".into())),
        };
        Ok(Self {
            config: config.clone(),
            constants,
            schedule,
            projector,
            c,
            model,
        })
    }

    fn root(&self) -> Vec<f64> {
        match &self.config.problem {
            ProblemConfig::BlackScholes(p) => vec![p.theta_star],
            ProblemConfig::Linear(l) => l.root.clone(),
        }
    }

    /// One trajectory to step `n_max`, calling `on_step(n)` after each step.
    pub fn run_replication(
        &self,
        replication: u64,
        n_max: u64,
        on_step: &mut dyn FnMut(u64),
    ) -> Result<Trajectory, DriverError> {
        let spec = RunSpec {
            theta0: self.config.theta0.clone(),
            n_max,
            seed: self.config.seed,
            replication,
        };
        match &self.model {
            Model::Rm(p) => run_rm_observed(p, &self.schedule, &self.projector, &spec, on_step),
            Model::Pr(ext) => run_extended_pr(ext, &self.schedule, &spec, on_step),
            Model::Linear(f, noise) => {
                let drift = |t: &[f64]| f.eval(t);
                let problem = SyntheticProblem {
                    drift: &drift,
                    noise,
                    root: Some(self.root()),
                };
                run_synthetic_observed(
                    &problem,
                    &self.schedule,
                    &self.projector,
                    &spec,
                    self.config.scheme.is_averaging(),
                    on_step,
                )
            }
        }
    }

    /// Admissibility reports for the configured schedule.
    pub fn validation(&self) -> Result<Vec<ValidationReport>, HarnessError> {
        let ScheduleKind::Poly(s) = &self.schedule else {
            return Ok(Vec::new());
        };
        let cfg = &self.config;
        let mut out = Vec::new();
        let q = cfg.q.unwrap_or(cfg.p / (1.0 + self.constants.lambda));
        match cfg.scheme {
            SchemeKind::Rm | SchemeKind::SyntheticRm => {
                out.push(validate_rm(s, &self.constants, cfg.p));
            }
            SchemeKind::Pr => {
                let delta = match &cfg.problem {
                    ProblemConfig::BlackScholes(p) => {
                        (p.theta_star - p.theta_lo).min(p.theta_hi - p.theta_star)
                    }
                    ProblemConfig::Linear(_) => f64::INFINITY,
                };
                let ext = extension_constants(self.c, &self.constants, delta.max(f64::MIN_POSITIVE))
                    .map_err(setup)?;
                out.push(validate_pr(s, &ext, cfg.p, q).map_err(setup)?);
            }
            SchemeKind::SyntheticPr => {
                out.push(validate_pr(s, &self.constants, cfg.p, q).map_err(setup)?);
            }
        }
        if let ProblemConfig::BlackScholes(_) = cfg.problem {
            out.push(validate_ml(s, 1.0, 1.0).map_err(setup)?);
        }
        Ok(out)
    }

    /// Deterministic cost_n at each checkpoint, from the level plan at θ*.
    ///
    /// Exact for problems whose Γ₁, Γ₂ do not depend on θ.
    pub fn planned_costs(&self) -> Result<Vec<f64>, HarnessError> {
        let root = self.root();
        let per_step = |n: u64| -> Result<f64, HarnessError> {
            let eps = self.schedule.eps(n).map_err(setup)?;
            let sigma = self.schedule.sigma(n).map_err(setup)?;
            let cost = match &self.model {
                Model::Rm(p) => plan(p, &root, eps, sigma).map_err(setup)?.cost,
                Model::Pr(p) => plan(p, &root, eps, sigma).map_err(setup)?.cost,
                Model::Linear(..) => 1.0,
            };
            Ok(cost)
        };
        let mut out = Vec::with_capacity(self.config.checkpoints.len());
        let mut total = 0.0;
        let mut n = 0;
        for &cp in &self.config.checkpoints {
            while n < cp {
                n += 1;
                total += per_step(n)?;
            }
            out.push(total);
        }
        Ok(out)
    }

    pub fn level_problem(&self) -> Option<&dyn LevelProblem> {
        match &self.model {
            Model::Rm(p) => Some(p),
            Model::Pr(p) => Some(p),
            Model::Linear(..) => None,
        }
    }
}

/// Execution options that do not change results.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Record wall time per checkpoint (breaks byte-identical CSVs).
    pub wall_time: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointRow {
    pub n: u64,
    pub rmse: f64,
    pub mean_cost: f64,
    pub wall_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupRow {
    pub k0: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub scheme: SchemeKind,
    pub rows: Vec<CheckpointRow>,
    pub error_fit: Option<RateFit>,
    pub cost_fit: Option<RateFit>,
    pub validation: Vec<ValidationReport>,
    pub sup: Vec<SupRow>,
    pub sup_fit: Option<RateFit>,
    pub norm_order: f64,
    pub replications: u64,
    pub seed: u64,
    pub config_hash: String,
}

struct ReplicationResult {
    errors: Vec<f64>,
    costs: Vec<f64>,
    wall_ms: Vec<f64>,
    sup: Vec<f64>,
}

fn replicate(prep: &Prepared, index: u64, opts: RunOptions) -> Result<ReplicationResult, HarnessError> {
    let cfg = &prep.config;
    let start = Instant::now();
    let mut times = Vec::new();
    let mut next = 0;
    let cps = &cfg.checkpoints;
    if opts.wall_time && cps[0] == 0 {
        times.push(0.0);
        next = 1;
    }
    let mut record = |n: u64| {
        if opts.wall_time && next < cps.len() && cps[next] == n {
            times.push(start.elapsed().as_secs_f64() * 1e3);
            next += 1;
        }
    };
    let traj = prep
        .run_replication(index, cfg.horizon(), &mut record)
        .map_err(|source| HarnessError::Replication { index, source })?;
    let errors = traj.reported_errors().ok_or(StatsError::MissingRoot)?;
    let sup = cfg
        .sup_k0
        .iter()
        .map(|&k0| sup_error(&traj, k0, cfg.eta))
        .collect::<Result<_, _>>()?;
    Ok(ReplicationResult {
        errors: cps.iter().map(|&n| errors[n as usize]).collect(),
        costs: cps.iter().map(|&n| traj.cum_cost[n as usize]).collect(),
        wall_ms: times,
        sup,
    })
}

fn power_mean(values: impl Iterator<Item = f64>, order: f64, count: u64) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v.powf(order));
    }
    (acc.value() / count as f64).powf(1.0 / order)
}

fn mean(values: impl Iterator<Item = f64>, count: u64) -> f64 {
    let mut acc = CompensatedSum::default();
    values.for_each(|v| acc.add(v));
    acc.value() / count as f64
}

fn fit_positive(points: impl Iterator<Item = (f64, f64)>) -> Option<RateFit> {
    let pts: Vec<_> = points.filter(|(n, y)| *n > 0.0 && *y > 0.0).collect();
    fit_rate(&pts).ok()
}

/// Runs all replications of `config` and aggregates them.
pub fn run_experiment(config: &ExperimentConfig, opts: RunOptions) -> Result<RunSummary, HarnessError> {
    let prep = Prepared::new(config)?;
    run_prepared(&prep, opts)
}

pub fn run_prepared(prep: &Prepared, opts: RunOptions) -> Result<RunSummary, HarnessError> {
    let cfg = &prep.config;
    let n_rep = cfg.replications;
    let work = || -> Vec<Result<ReplicationResult, HarnessError>> {
        (0..n_rep)
            .into_par_iter()
            .map(|r| replicate(prep, r, opts))
            .collect()
    };
    let results = match opts.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(setup)?
            .install(work),
        None => work(),
    };
    let results: Vec<ReplicationResult> = results.into_iter().collect::<Result<_, _>>()?;

    let order = cfg.norm_order();
    let rows: Vec<CheckpointRow> = cfg
        .checkpoints
        .iter()
        .enumerate()
        .map(|(i, &n)| CheckpointRow {
            n,
            rmse: power_mean(results.iter().map(|r| r.errors[i]), order, n_rep),
            mean_cost: mean(results.iter().map(|r| r.costs[i]), n_rep),
            wall_ms: opts
                .wall_time
                .then(|| mean(results.iter().map(|r| r.wall_ms[i]), n_rep)),
        })
        .collect();
    let sup: Vec<SupRow> = cfg
        .sup_k0
        .iter()
        .enumerate()
        .map(|(i, &k0)| SupRow {
            k0,
            value: power_mean(results.iter().map(|r| r.sup[i]), cfg.p, n_rep),
        })
        .collect();
    Ok(RunSummary {
        scheme: cfg.scheme,
        error_fit: fit_positive(rows.iter().map(|r| (r.n as f64, r.rmse))),
        cost_fit: fit_positive(rows.iter().map(|r| (r.n as f64, r.mean_cost))),
        sup_fit: fit_positive(sup.iter().map(|r| (r.k0 as f64, r.value))),
        rows,
        sup,
        validation: prep.validation()?,
        norm_order: order,
        replications: n_rep,
        seed: cfg.seed,
        config_hash: cfg.hash.clone(),
    })
}

impl RunSummary {
    /// `n,rmse,mean_cost,wall_ms` with shortest round-trip decimals.
    pub fn csv(&self) -> String {
        let mut s = String::from("n,rmse,mean_cost,wall_ms\n");
        for r in &self.rows {
            let wall = r.wall_ms.map(|w| w.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", r.n, r.rmse, r.mean_cost, wall);
        }
        s
    }

    /// `k0,sup_error`, or `None` when no tail starts were requested.
    pub fn sup_csv(&self) -> Option<String> {
        if self.sup.is_empty() {
            return None;
        }
        let mut s = String::from("k0,sup_error\n");
        for r in &self.sup {
            let _ = writeln!(s, "{},{}", r.k0, r.value);
        }
        Some(s)
    }

    /// Sidecar metadata: provenance, fits and validation.
    pub fn meta(&self, git_revision: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "git_revision = {git_revision}");
        let _ = writeln!(s, "scheme = {}", self.scheme.name());
        let _ = writeln!(s, "replications = {}", self.replications);
        let _ = writeln!(s, "norm_order = {}", self.norm_order);
        for (name, fit) in [
            ("error", &self.error_fit),
            ("cost", &self.cost_fit),
            ("sup_error", &self.sup_fit),
        ] {
            if let Some(f) = fit {
                let _ = writeln!(s, "{name}_slope = {}", f.slope);
                let _ = writeln!(s, "{name}_intercept = {}", f.intercept);
                let _ = writeln!(s, "{name}_max_residual = {}", f.max_residual);
            }
        }
        for report in &self.validation {
            for line in report.to_string().lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        s
    }
}

/// The trajectory CSV `n,error,cum_cost` for steps 1..=n.
pub fn trajectory_csv(traj: &Trajectory) -> Result<String, HarnessError> {
    let errors = traj.reported_errors().ok_or(StatsError::MissingRoot)?;
    let mut s = String::from("n,error,cum_cost\n");
    for n in 1..errors.len() {
        let _ = writeln!(s, "{n},{},{}", errors[n], traj.cum_cost[n]);
    }
    Ok(s)
}
