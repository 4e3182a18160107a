//! Iteration engines: multilevel Robbins-Monro (plain or projected),
//! Polyak-Ruppert averaging of the extended scheme, and the abstract
//! recursion
//!
//! ```text
//! θ_n = pr_D(θ_{n−1} + γ_n (f(θ_{n−1}) + ε_n R_n + σ_n D_n))
//! ```
//!
//! with user-supplied drift f, bias R_n (‖R_n‖ ≤ 1) and martingale
//! differences D_n.

use thiserror::Error;

use crate::estimator::{estimate, EstimatorError, LevelProblem, SampleError, StepStreams};
use crate::rng::GaussianSource;
use crate::schedules::{ContractionConstants, Schedule, ScheduleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("non-finite value at step {step}")]
    NonFinite { step: u64 },
    #[error("step size must be positive (got {0})")]
    StepSize(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("initial state {0:?} is not in the domain")]
    InitialState(Vec<f64>),
    #[error("extension constant c = {c} must exceed 1/(2L') = {min}")]
    Penalty { c: f64, min: f64 },
    #[error("delta must be positive (got {0})")]
    Delta(f64),
    #[error("bias term at step {step} has norm {norm} > 1")]
    BiasBound { step: u64, norm: f64 },
    #[error("invalid projector: {0}")]
    Projector(&'static str),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Orthogonal projection onto a closed convex domain D.
#[derive(Clone, Debug, PartialEq)]
pub enum Projector {
    Identity,
    /// Coordinatewise box `lo[i] ≤ x[i] ≤ hi[i]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl Projector {
    pub fn interval(lo: f64, hi: f64) -> Result<Self, DriverError> {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, DriverError> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(DriverError::Projector("box bounds need equal, nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(DriverError::Projector("box needs lo <= hi in every coordinate"));
        }
        Ok(Self::Box { lo, hi })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self, DriverError> {
        if center.is_empty() || !(radius > 0.0 && radius.is_finite()) {
            return Err(DriverError::Projector("ball needs a center and a positive radius"));
        }
        Ok(Self::Ball { center, radius })
    }

    /// Dimension fixed by the projector, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Identity => None,
            Self::Box { lo, .. } => Some(lo.len()),
            Self::Ball { center, .. } => Some(center.len()),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::Identity => true,
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b),
            Self::Ball { center, radius } => dist(x, center) <= *radius,
        }
    }

    pub fn project_in_place(&self, x: &mut [f64]) {
        match self {
            Self::Identity => {}
            Self::Box { lo, hi } => {
                for (v, (a, b)) in x.iter_mut().zip(lo.iter().zip(hi)) {
                    *v = v.clamp(*a, *b);
                }
            }
            Self::Ball { center, radius } => {
                let r = dist(x, center);
                if r > *radius {
                    let s = radius / r;
                    for (v, c) in x.iter_mut().zip(center) {
                        *v = c + (*v - c) * s;
                    }
                    // Rounding can leave the point a hair outside.
                    let mut shrink = 1.0;
                    while dist(x, center) > *radius {
                        shrink *= 1.0 - f64::EPSILON;
                        for (v, c) in x.iter_mut().zip(center) {
                            *v = c + (*v - c) * shrink;
                        }
                    }
                }
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.project_in_place(&mut y);
        y
    }

    fn check_dim(&self, d: usize) -> Result<(), DriverError> {
        match self.dim() {
            Some(k) if k != d => Err(DriverError::Dimension {
                expected: d,
                got: k,
            }),
            _ => Ok(()),
        }
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn all_finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// pr_D(θ_{n−1} + γ_n z).
pub fn rm_step(
    theta_prev: &[f64],
    gamma: f64,
    z: &[f64],
    proj: &Projector,
) -> Result<Vec<f64>, DriverError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(DriverError::StepSize(gamma));
    }
    if theta_prev.len() != z.len() {
        return Err(DriverError::Dimension {
            expected: theta_prev.len(),
            got: z.len(),
        });
    }
    if !all_finite(theta_prev) || !all_finite(z) {
        return Err(DriverError::NonFinite { step: 0 });
    }
    let mut next: Vec<f64> = theta_prev
        .iter()
        .zip(z)
        .map(|(t, g)| t + gamma * g)
        .collect();
    if !all_finite(&next) {
        return Err(DriverError::NonFinite { step: 0 });
    }
    proj.project_in_place(&mut next);
    Ok(next)
}

/// Starting point, horizon and stream address of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub theta0: Vec<f64>,
    pub n_max: u64,
    pub seed: u64,
    pub replication: u64,
}

/// States θ₀..θ_n of one run; index is the step number.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub iterates: Vec<Vec<f64>>,
    /// Weighted averages θ̄_n, for averaging schemes.
    pub averaged: Option<Vec<Vec<f64>>>,
    /// Running cost_n, with cost_0 = 0.
    pub cum_cost: Vec<f64>,
    /// ‖θ_n − θ*‖ when the root is known.
    pub errors: Option<Vec<f64>>,
    /// ‖θ̄_n − θ*‖ when the root is known and averages are kept.
    pub averaged_errors: Option<Vec<f64>>,
}

impl Trajectory {
    fn start(theta0: &[f64], averaging: bool, root: Option<&[f64]>, capacity: usize) -> Self {
        let mut t = Self {
            iterates: Vec::with_capacity(capacity),
            averaged: averaging.then(|| Vec::with_capacity(capacity)),
            cum_cost: Vec::with_capacity(capacity),
            errors: root.map(|_| Vec::with_capacity(capacity)),
            averaged_errors: (averaging && root.is_some()).then(|| Vec::with_capacity(capacity)),
        };
        t.push(theta0.to_vec(), theta0.to_vec(), 0.0, root);
        t
    }

    fn push(&mut self, theta: Vec<f64>, avg: Vec<f64>, cost: f64, root: Option<&[f64]>) {
        if let (Some(errs), Some(r)) = (self.errors.as_mut(), root) {
            errs.push(dist(&theta, r));
        }
        if let (Some(errs), Some(r)) = (self.averaged_errors.as_mut(), root) {
            errs.push(dist(&avg, r));
        }
        if let Some(a) = self.averaged.as_mut() {
            a.push(avg);
        }
        self.iterates.push(theta);
        self.cum_cost.push(cost);
    }

    /// Number of completed steps.
    pub fn steps(&self) -> u64 {
        self.iterates.len() as u64 - 1
    }

    /// Errors of the reported estimate: averages when present, else iterates.
    pub fn reported_errors(&self) -> Option<&[f64]> {
        self.averaged_errors
            .as_deref()
            .or(self.errors.as_deref())
    }

    /// Reported estimate at step n.
    pub fn reported(&self, n: usize) -> &[f64] {
        match &self.averaged {
            Some(a) => &a[n],
            None => &self.iterates[n],
        }
    }
}

fn check_start(theta0: &[f64], d: usize, proj: &Projector) -> Result<(), DriverError> {
    if theta0.len() != d {
        return Err(DriverError::Dimension {
            expected: d,
            got: theta0.len(),
        });
    }
    proj.check_dim(d)?;
    if !all_finite(theta0) || !proj.contains(theta0) {
        return Err(DriverError::InitialState(theta0.to_vec()));
    }
    Ok(())
}

fn with_step(step: u64) -> impl Fn(DriverError) -> DriverError {
    move |e| match e {
        DriverError::NonFinite { .. } => DriverError::NonFinite { step },
        other => other,
    }
}

/// Multilevel Robbins-Monro: θ_n = pr_D(θ_{n−1} + γ_n Z_n(θ_{n−1})).
pub fn run_rm<P, S>(
    problem: &P,
    schedule: &S,
    proj: &Projector,
    spec: &RunSpec,
) -> Result<Trajectory, DriverError>
where
    P: LevelProblem + ?Sized,
    S: Schedule + ?Sized,
{
    run_rm_observed(problem, schedule, proj, spec, &mut |_| {})
}

/// [`run_rm`], calling `on_step(n)` after step n completes.
pub fn run_rm_observed<P, S>(
    problem: &P,
    schedule: &S,
    proj: &Projector,
    spec: &RunSpec,
    on_step: &mut dyn FnMut(u64),
) -> Result<Trajectory, DriverError>
where
    P: LevelProblem + ?Sized,
    S: Schedule + ?Sized,
{
    check_start(&spec.theta0, problem.dim(), proj)?;
    let root = problem.root();
    let mut traj = Trajectory::start(&spec.theta0, false, root.as_deref(), spec.n_max as usize + 1);
    let mut theta = spec.theta0.clone();
    let mut cost = 0.0;
    for n in 1..=spec.n_max {
        let streams = StepStreams::new(spec.seed, spec.replication, n);
        let z = estimate(problem, &theta, schedule.eps(n)?, schedule.sigma(n)?, streams)?;
        theta = rm_step(&theta, schedule.gamma(n)?, &z.value, proj).map_err(with_step(n))?;
        cost += z.cost;
        traj.push(theta.clone(), Vec::new(), cost, root.as_deref());
        on_step(n);
    }
    Ok(traj)
}

/// The extended problem with mean field f_c(x) = −c(x − pr_D x) + f(pr_D x).
///
/// Every level samples the wrapped problem at pr_D(θ); the level-1 increment
/// carries the penalty −c(θ − pr_D θ). Inside D nothing changes.
#[derive(Clone, Debug)]
pub struct ExtendedProblem<P> {
    inner: P,
    proj: Projector,
    c: f64,
}

impl<P: LevelProblem> ExtendedProblem<P> {
    pub fn penalty(&self) -> f64 {
        self.c
    }

    pub fn projector(&self) -> &Projector {
        &self.proj
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    /// f_c from a closed-form mean field f of the wrapped problem.
    pub fn mean_field_with(&self, theta: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
        let p = self.proj.project(theta);
        f(&p)
            .iter()
            .zip(theta.iter().zip(&p))
            .map(|(fv, (t, pv))| fv - self.c * (t - pv))
            .collect()
    }
}

/// Wraps `problem` into its f_c extension. Requires c > 1/(2L').
pub fn extend_fc<P: LevelProblem>(
    problem: P,
    proj: Projector,
    c: f64,
    l_prime: f64,
) -> Result<ExtendedProblem<P>, DriverError> {
    let min = 1.0 / (2.0 * l_prime);
    if !(c > min && c.is_finite()) {
        return Err(DriverError::Penalty { c, min });
    }
    proj.check_dim(problem.dim())?;
    Ok(ExtendedProblem {
        inner: problem,
        proj,
        c,
    })
}

impl<P: LevelProblem> LevelProblem for ExtendedProblem<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn level_base(&self) -> u32 {
        self.inner.level_base()
    }

    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    fn moment_order(&self) -> f64 {
        self.inner.moment_order()
    }

    fn variance_scale(&self, theta: &[f64]) -> f64 {
        if self.proj.contains(theta) {
            self.inner.variance_scale(theta)
        } else {
            self.inner.variance_scale(&self.proj.project(theta))
        }
    }

    fn bias_scale(&self, theta: &[f64]) -> f64 {
        if self.proj.contains(theta) {
            self.inner.bias_scale(theta)
        } else {
            self.inner.bias_scale(&self.proj.project(theta))
        }
    }

    fn sample_increment(
        &self,
        theta: &[f64],
        level: u32,
        source: &mut GaussianSource,
        out: &mut [f64],
    ) -> Result<(), SampleError> {
        if self.proj.contains(theta) {
            return self.inner.sample_increment(theta, level, source, out);
        }
        let p = self.proj.project(theta);
        self.inner.sample_increment(&p, level, source, out)?;
        if level == 1 {
            for (o, (t, pv)) in out.iter_mut().zip(theta.iter().zip(&p)) {
                *o -= self.c * (t - pv);
            }
        }
        Ok(())
    }

    fn level_cost(&self, level: u32) -> f64 {
        self.inner.level_cost(level)
    }

    fn cost_constant(&self) -> f64 {
        self.inner.cost_constant()
    }

    fn root(&self) -> Option<Vec<f64>> {
        self.inner.root()
    }
}

/// Intermediate quantity r_c = 1 − (L/c)(2 − 1/(cL')), clamped at 0.
pub fn extension_ratio(c: f64, l: f64, l_prime: f64) -> f64 {
    (1.0 - (l / c) * (2.0 - 1.0 / (c * l_prime))).max(0.0)
}

/// Constants (L_c, L_c', L_c'') of f_c on all of ℝ^d:
///
/// ```text
/// L_c   = c(1 − √r_c)
/// L_c'  = L_c / (2/L'² + 2c²)
/// L_c'' = (c + 1/L')/δ^λ + L''
/// ```
///
/// where δ is the radius of a ball around θ* contained in D. H and λ carry
/// over unchanged.
pub fn extension_constants(
    c: f64,
    k: &ContractionConstants,
    delta: f64,
) -> Result<ContractionConstants, DriverError> {
    let min = 1.0 / (2.0 * k.l_prime);
    if !(c > min && c.is_finite()) {
        return Err(DriverError::Penalty { c, min });
    }
    if !(delta > 0.0) {
        return Err(DriverError::Delta(delta));
    }
    let r = extension_ratio(c, k.l, k.l_prime);
    let l_c = c * (1.0 - r.sqrt());
    let l_c_prime = l_c / (2.0 / (k.l_prime * k.l_prime) + 2.0 * c * c);
    let l_c_dd = (c + 1.0 / k.l_prime) / delta.powf(k.lambda) + k.l_double_prime;
    Ok(ContractionConstants::new(
        l_c,
        l_c_prime,
        l_c_dd,
        k.lambda,
        k.h.clone(),
    )?)
}

/// Incremental weighted mean Σ b_k x_k / Σ b_k.
#[derive(Clone, Debug)]
pub struct WeightedMean {
    weight: CompensatedSum,
    sums: Vec<CompensatedSum>,
}

impl WeightedMean {
    pub fn new(dim: usize) -> Self {
        Self {
            weight: CompensatedSum::default(),
            sums: vec![CompensatedSum::default(); dim],
        }
    }

    pub fn add(&mut self, b: f64, x: &[f64]) {
        self.weight.add(b);
        for (s, v) in self.sums.iter_mut().zip(x) {
            s.add(b * v);
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weight.value()
    }

    /// Current mean; `None` before the first positive weight.
    pub fn mean(&self) -> Option<Vec<f64>> {
        let w = self.weight.value();
        (w > 0.0).then(|| self.sums.iter().map(|s| s.value() / w).collect())
    }
}

/// Multilevel Polyak-Ruppert: runs the unprojected recursion
/// θ_n = θ_{n−1} + γ_n Z_{c,n}(θ_{n−1}) on the f_c extension and reports
/// θ̄_n = Σ b_k θ_k / Σ b_k (θ̄₀ = θ₀).
pub fn run_pr<P, S>(
    problem: P,
    schedule: &S,
    proj: &Projector,
    c: f64,
    l_prime: f64,
    spec: &RunSpec,
) -> Result<Trajectory, DriverError>
where
    P: LevelProblem,
    S: Schedule + ?Sized,
{
    let ext = extend_fc(problem, proj.clone(), c, l_prime)?;
    run_extended_pr(&ext, schedule, spec, &mut |_| {})
}

/// The averaging recursion on an already extended problem, calling
/// `on_step(n)` after step n completes.
pub fn run_extended_pr<P, S>(
    ext: &ExtendedProblem<P>,
    schedule: &S,
    spec: &RunSpec,
    on_step: &mut dyn FnMut(u64),
) -> Result<Trajectory, DriverError>
where
    P: LevelProblem,
    S: Schedule + ?Sized,
{
    let proj = &ext.proj;
    check_start(&spec.theta0, ext.dim(), proj)?;
    let root = ext.root();
    let mut traj = Trajectory::start(&spec.theta0, true, root.as_deref(), spec.n_max as usize + 1);
    let mut theta = spec.theta0.clone();
    let mut avg = WeightedMean::new(theta.len());
    let mut cost = 0.0;
    for n in 1..=spec.n_max {
        let streams = StepStreams::new(spec.seed, spec.replication, n);
        let z = estimate(ext, &theta, schedule.eps(n)?, schedule.sigma(n)?, streams)?;
        theta = rm_step(&theta, schedule.gamma(n)?, &z.value, &Projector::Identity)
            .map_err(with_step(n))?;
        cost += z.cost;
        avg.add(schedule.weight(n)?, &theta);
        let mean = avg.mean().unwrap_or_else(|| theta.clone());
        traj.push(theta.clone(), mean, cost, root.as_deref());
        on_step(n);
    }
    Ok(traj)
}

/// Bias and noise terms of the abstract recursion.
pub trait SyntheticNoise: Sync {
    fn dim(&self) -> usize;

    /// R_n; the driver rejects outputs with ‖R_n‖ > 1.
    fn bias(&self, n: u64, theta: &[f64], source: &mut GaussianSource) -> Vec<f64>;

    /// D_n; must have zero mean given the past.
    fn noise(&self, n: u64, theta: &[f64], source: &mut GaussianSource) -> Vec<f64>;
}

/// Standard Gaussian D_n and a constant unit bias direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianNoise {
    direction: Vec<f64>,
}

impl GaussianNoise {
    /// `direction` is normalised to unit length; the zero vector gives no bias.
    pub fn new(direction: Vec<f64>) -> Self {
        let r = norm(&direction);
        let direction = if r > 0.0 {
            direction.iter().map(|v| v / r).collect()
        } else {
            direction
        };
        Self { direction }
    }

    /// Bias along the first coordinate axis.
    pub fn axis(dim: usize) -> Self {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        Self { direction: e }
    }
}

impl SyntheticNoise for GaussianNoise {
    fn dim(&self) -> usize {
        self.direction.len()
    }

    fn bias(&self, _: u64, _: &[f64], _: &mut GaussianSource) -> Vec<f64> {
        self.direction.clone()
    }

    fn noise(&self, _: u64, theta: &[f64], source: &mut GaussianSource) -> Vec<f64> {
        theta.iter().map(|_| source.next_normal()).collect()
    }
}

/// Stream sample index used for D_n; R_n draws from `BIAS_SAMPLE`.
pub const NOISE_SAMPLE: u64 = 1;
pub const BIAS_SAMPLE: u64 = 2;

/// γ_n, ε_n and σ_n of one step of the abstract recursion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub gamma: f64,
    pub eps: f64,
    pub sigma: f64,
}

/// One step pr_D(θ_{n−1} + γ_n(f(θ_{n−1}) + ε_n R_n + σ_n D_n)).
pub fn synthetic_step<F, N>(
    theta_prev: &[f64],
    drift: &F,
    sizes: StepSizes,
    noise: &N,
    streams: StepStreams,
    proj: &Projector,
) -> Result<Vec<f64>, DriverError>
where
    F: Fn(&[f64]) -> Vec<f64> + ?Sized,
    N: SyntheticNoise + ?Sized,
{
    let StepSizes { gamma, eps, sigma } = sizes;
    let n = streams.step;
    if !(eps >= 0.0 && sigma >= 0.0) {
        return Err(DriverError::NonFinite { step: n });
    }
    let f = drift(theta_prev);
    if f.len() != theta_prev.len() {
        return Err(DriverError::Dimension {
            expected: theta_prev.len(),
            got: f.len(),
        });
    }
    if !all_finite(&f) {
        return Err(DriverError::NonFinite { step: n });
    }
    let r = noise.bias(n, theta_prev, &mut streams.source(1, BIAS_SAMPLE));
    let bias_norm = norm(&r);
    if !(bias_norm <= 1.0 + 1e-12) {
        return Err(DriverError::BiasBound {
            step: n,
            norm: bias_norm,
        });
    }
    let d = noise.noise(n, theta_prev, &mut streams.source(1, NOISE_SAMPLE));
    if r.len() != f.len() || d.len() != f.len() {
        return Err(DriverError::Dimension {
            expected: f.len(),
            got: d.len().min(r.len()),
        });
    }
    let z: Vec<f64> = (0..f.len())
        .map(|i| f[i] + eps * r[i] + sigma * d[i])
        .collect();
    rm_step(theta_prev, gamma, &z, proj).map_err(with_step(n))
}

/// Drift, noise and the known root of a synthetic run.
pub struct SyntheticProblem<'a> {
    pub drift: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
    pub noise: &'a dyn SyntheticNoise,
    pub root: Option<Vec<f64>>,
}

/// The abstract recursion, reporting averages when `averaging` is set and
/// calling `on_step(n)` after step n completes.
pub fn run_synthetic_observed<S: Schedule + ?Sized>(
    problem: &SyntheticProblem<'_>,
    schedule: &S,
    proj: &Projector,
    spec: &RunSpec,
    averaging: bool,
    on_step: &mut dyn FnMut(u64),
) -> Result<Trajectory, DriverError> {
    check_start(&spec.theta0, problem.noise.dim(), proj)?;
    let root = problem.root.as_deref();
    let mut traj = Trajectory::start(&spec.theta0, averaging, root, spec.n_max as usize + 1);
    let mut theta = spec.theta0.clone();
    let mut avg = WeightedMean::new(theta.len());
    for n in 1..=spec.n_max {
        let sizes = StepSizes {
            gamma: schedule.gamma(n)?,
            eps: schedule.eps(n)?,
            sigma: schedule.sigma(n)?,
        };
        let streams = StepStreams::new(spec.seed, spec.replication, n);
        theta = synthetic_step(&theta, problem.drift, sizes, problem.noise, streams, proj)?;
        let mean = if averaging {
            avg.add(schedule.weight(n)?, &theta);
            avg.mean().unwrap_or_else(|| theta.clone())
        } else {
            Vec::new()
        };
        // One unit of work per step.
        traj.push(theta.clone(), mean, n as f64, root);
        on_step(n);
    }
    Ok(traj)
}

/// The abstract recursion, reporting the iterates.
pub fn run_synthetic_rm<S: Schedule + ?Sized>(
    problem: &SyntheticProblem<'_>,
    schedule: &S,
    proj: &Projector,
    spec: &RunSpec,
) -> Result<Trajectory, DriverError> {
    run_synthetic_observed(problem, schedule, proj, spec, false, &mut |_| {})
}

/// The abstract recursion, reporting the b_n-weighted averages.
pub fn run_synthetic_pr<S: Schedule + ?Sized>(
    problem: &SyntheticProblem<'_>,
    schedule: &S,
    proj: &Projector,
    spec: &RunSpec,
) -> Result<Trajectory, DriverError> {
    run_synthetic_observed(problem, schedule, proj, spec, true, &mut |_| {})
}

/// f(θ) = −a(θ − θ*), the model problem of the abstract recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearDrift {
    pub a: f64,
    pub root: Vec<f64>,
}

impl LinearDrift {
    pub fn new(a: f64, root: Vec<f64>) -> Self {
        Self { a, root }
    }

    pub fn eval(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.root)
            .map(|(t, r)| -self.a * (t - r))
            .collect()
    }

    /// L = a, L' = 1/a, L'' = 0, H = −aI.
    pub fn constants(&self) -> ContractionConstants {
        let d = self.root.len();
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            h[i * d + i] = -self.a;
        }
        ContractionConstants::new(self.a, 1.0 / self.a, 0.0, 1.0, h)
            .expect("positive slope gives valid constants")
    }
}
