//! The adaptive multilevel estimator of f(θ) = E[F(θ, U)].
//!
//! At step n and state θ the estimator uses levels 1..=m_n(θ) with
//!
//! ```text
//! m_n(θ)    = 1 ∨ ⌈(1/α) log_M(Γ₂(θ)/ε_n)⌉
//! κ_n(θ)    = (Γ₁(θ)/σ_n)² M^(m_n(θ)(1/2−β)₊)     (β ≠ 1/2)
//!           = (Γ₁(θ)/σ_n)² m_n(θ)                  (β = 1/2)
//! N_{n,k}(θ) = ⌈κ_n(θ) M^(−k(β+1/2))⌉
//! ```
//!
//! and returns the sum of the level-wise sample means of the increments,
//! along with the exact cost Σ_k N_{n,k} C_k.

use thiserror::Error;

use crate::rng::{stream, GaussianSource, StreamKey};

/// Failure reported by a level sampler.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("state {0:?} outside the sampler's domain")]
    OutsideDomain(Vec<f64>),
    #[error("non-finite sample")]
    NonFinite,
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("bias level must be positive (got {0})")]
    BiasLevel(f64),
    #[error("noise level must be positive (got {0})")]
    NoiseLevel(f64),
    #[error("state has dimension {got}, problem expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("sampler failed at step {step}, level {level}, sample {sample}: {source}")]
    Sampler {
        step: u64,
        level: u32,
        sample: u64,
        #[source]
        source: SampleError,
    },
}

/// A target problem described through its hierarchy of approximations.
///
/// `sample_increment` must return one draw of a random vector whose mean is
/// E[F_k(θ,U) − F_{k−1}(θ,U)] (with F₀ = 0); any coupled sampler with that
/// mean is admissible. Implementations must be shareable across threads.
pub trait LevelProblem: Sync {
    fn dim(&self) -> usize;

    /// Level base M ≥ 2.
    fn level_base(&self) -> u32;

    /// Bias order α (≥ β).
    fn alpha(&self) -> f64;

    /// Variance order β.
    fn beta(&self) -> f64;

    /// Moment order p ≥ 2 of the variance bound.
    fn moment_order(&self) -> f64 {
        2.0
    }

    /// Γ₁(θ), scale of the increment fluctuations.
    fn variance_scale(&self, theta: &[f64]) -> f64;

    /// Γ₂(θ), scale of the level bias.
    fn bias_scale(&self, theta: &[f64]) -> f64;

    /// Writes one draw of the level-`level` increment at `theta` into `out`.
    fn sample_increment(
        &self,
        theta: &[f64],
        level: u32,
        source: &mut GaussianSource,
        out: &mut [f64],
    ) -> Result<(), SampleError>;

    /// C_k, cost of a single level-k increment.
    fn level_cost(&self, level: u32) -> f64 {
        (self.level_base() as f64).powi(level as i32)
    }

    /// K with C_k ≤ K·M^k.
    fn cost_constant(&self) -> f64 {
        1.0
    }

    /// The zero θ* of f, when known.
    fn root(&self) -> Option<Vec<f64>> {
        None
    }
}

impl<P: LevelProblem + ?Sized> LevelProblem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn level_base(&self) -> u32 {
        (**self).level_base()
    }
    fn alpha(&self) -> f64 {
        (**self).alpha()
    }
    fn beta(&self) -> f64 {
        (**self).beta()
    }
    fn moment_order(&self) -> f64 {
        (**self).moment_order()
    }
    fn variance_scale(&self, theta: &[f64]) -> f64 {
        (**self).variance_scale(theta)
    }
    fn bias_scale(&self, theta: &[f64]) -> f64 {
        (**self).bias_scale(theta)
    }
    fn sample_increment(
        &self,
        theta: &[f64],
        level: u32,
        source: &mut GaussianSource,
        out: &mut [f64],
    ) -> Result<(), SampleError> {
        (**self).sample_increment(theta, level, source, out)
    }
    fn level_cost(&self, level: u32) -> f64 {
        (**self).level_cost(level)
    }
    fn cost_constant(&self) -> f64 {
        (**self).cost_constant()
    }
    fn root(&self) -> Option<Vec<f64>> {
        (**self).root()
    }
}

/// Relative tolerance for snapping near-integers before a ceiling, so that
/// exact powers of M give the same level and replication counts on every
/// platform.
pub const CEIL_RTOL: f64 = 1.0 / (1u64 << 40) as f64;

/// ⌈x⌉ after snapping x to the nearest integer when within [`CEIL_RTOL`].
pub fn stable_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= CEIL_RTOL * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Maximal level m_n(θ) for bias level `eps`.
pub fn max_level<P: LevelProblem + ?Sized>(
    problem: &P,
    theta: &[f64],
    eps: f64,
) -> Result<u32, EstimatorError> {
    if !(eps > 0.0) {
        return Err(EstimatorError::BiasLevel(eps));
    }
    Ok(level_for(
        problem.bias_scale(theta),
        eps,
        problem.alpha(),
        problem.level_base(),
    ))
}

fn level_for(gamma2: f64, eps: f64, alpha: f64, base: u32) -> u32 {
    let t = (gamma2 / eps).ln() / (base as f64).ln() / alpha;
    let m = stable_ceil(t);
    if m <= 1.0 {
        1
    } else {
        m.min(u32::MAX as f64) as u32
    }
}

/// κ_n(θ) for noise level `sigma` and maximal level `m`.
pub fn kappa<P: LevelProblem + ?Sized>(problem: &P, theta: &[f64], sigma: f64, m: u32) -> f64 {
    kappa_value(
        problem.variance_scale(theta),
        sigma,
        problem.beta(),
        problem.level_base(),
        m,
    )
}

fn kappa_value(gamma1: f64, sigma: f64, beta: f64, base: u32, m: u32) -> f64 {
    let scale = (gamma1 / sigma).powi(2);
    if beta == 0.5 {
        scale * m as f64
    } else {
        let excess = (0.5 - beta).max(0.0);
        scale * (base as f64).powf(m as f64 * excess)
    }
}

/// N_{n,k} = ⌈κ M^(−k(β+1/2))⌉, never below 1.
pub fn replications(kappa: f64, base: u32, beta: f64, level: u32) -> u64 {
    let x = kappa * (base as f64).powf(-(level as f64) * (beta + 0.5));
    let n = stable_ceil(x);
    if n < 1.0 {
        1
    } else {
        n as u64
    }
}

/// Level cap, replication counts and cost of one estimator call, without
/// drawing any samples.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelPlan {
    pub levels: u32,
    pub kappa: f64,
    /// `reps[k-1]` = N_{n,k}.
    pub reps: Vec<u64>,
    pub cost: f64,
}

/// Computes the [`LevelPlan`] for state `theta`, bias level `eps` and noise
/// level `sigma`.
pub fn plan<P: LevelProblem + ?Sized>(
    problem: &P,
    theta: &[f64],
    eps: f64,
    sigma: f64,
) -> Result<LevelPlan, EstimatorError> {
    if !(sigma > 0.0) {
        return Err(EstimatorError::NoiseLevel(sigma));
    }
    let levels = max_level(problem, theta, eps)?;
    let kappa = kappa(problem, theta, sigma, levels);
    let (base, beta) = (problem.level_base(), problem.beta());
    let reps: Vec<u64> = (1..=levels)
        .map(|k| replications(kappa, base, beta, k))
        .collect();
    let cost = plan_cost(problem, &reps);
    Ok(LevelPlan {
        levels,
        kappa,
        reps,
        cost,
    })
}

/// Σ_k reps[k]·C_k, summed in level order.
pub fn plan_cost<P: LevelProblem + ?Sized>(problem: &P, reps: &[u64]) -> f64 {
    reps.iter()
        .enumerate()
        .map(|(i, &n)| n as f64 * problem.level_cost(i as u32 + 1))
        .sum()
}

/// One evaluation Z_n(θ).
#[derive(Clone, Debug, PartialEq)]
pub struct MLEstimate {
    pub value: Vec<f64>,
    pub cost: f64,
    pub levels: u32,
    pub reps: Vec<u64>,
}

/// Addresses the streams of one Robbins-Monro step: the sample ℓ on level k
/// uses `StreamKey { replication, step, level: k, sample: ℓ }`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepStreams {
    pub seed: u64,
    pub replication: u64,
    pub step: u64,
}

impl StepStreams {
    pub fn new(seed: u64, replication: u64, step: u64) -> Self {
        Self {
            seed,
            replication,
            step,
        }
    }

    pub fn source(&self, level: u32, sample: u64) -> GaussianSource {
        stream(
            self.seed,
            StreamKey::new(self.replication, self.step, level, sample),
        )
    }
}

/// Evaluates the multilevel estimate Z_n(θ).
pub fn estimate<P: LevelProblem + ?Sized>(
    problem: &P,
    theta: &[f64],
    eps: f64,
    sigma: f64,
    streams: StepStreams,
) -> Result<MLEstimate, EstimatorError> {
    let d = problem.dim();
    if theta.len() != d {
        return Err(EstimatorError::Dimension {
            expected: d,
            got: theta.len(),
        });
    }
    let plan = plan(problem, theta, eps, sigma)?;
    let mut value = vec![0.0; d];
    let mut level_sum = vec![0.0; d];
    let mut draw = vec![0.0; d];
    for (i, &n_k) in plan.reps.iter().enumerate() {
        let level = i as u32 + 1;
        level_sum.iter_mut().for_each(|s| *s = 0.0);
        for sample in 1..=n_k {
            let mut source = streams.source(level, sample);
            problem
                .sample_increment(theta, level, &mut source, &mut draw)
                .map_err(|source| EstimatorError::Sampler {
                    step: streams.step,
                    level,
                    sample,
                    source,
                })?;
            level_sum.iter_mut().zip(&draw).for_each(|(s, x)| *s += x);
        }
        let inv = 1.0 / n_k as f64;
        value
            .iter_mut()
            .zip(&level_sum)
            .for_each(|(v, s)| *v += s * inv);
    }
    Ok(MLEstimate {
        value,
        cost: plan.cost,
        levels: plan.levels,
        reps: plan.reps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Constant-scale problem whose increments are deterministic zeros.
    struct Zeros {
        gamma1: f64,
        gamma2: f64,
        alpha: f64,
        beta: f64,
        base: u32,
    }

    impl LevelProblem for Zeros {
        fn dim(&self) -> usize {
            2
        }
        fn level_base(&self) -> u32 {
            self.base
        }
        fn alpha(&self) -> f64 {
            self.alpha
        }
        fn beta(&self) -> f64 {
            self.beta
        }
        fn variance_scale(&self, _: &[f64]) -> f64 {
            self.gamma1
        }
        fn bias_scale(&self, _: &[f64]) -> f64 {
            self.gamma2
        }
        fn sample_increment(
            &self,
            _: &[f64],
            _: u32,
            _: &mut GaussianSource,
            out: &mut [f64],
        ) -> Result<(), SampleError> {
            out.iter_mut().for_each(|x| *x = 0.0);
            Ok(())
        }
    }

    fn zeros(alpha: f64, beta: f64, base: u32) -> Zeros {
        Zeros {
            gamma1: 1.0,
            gamma2: 1.0,
            alpha,
            beta,
            base,
        }
    }

    /// Increment of level 1 is a standard normal; higher levels are zero.
    struct SingleLevel;

    impl LevelProblem for SingleLevel {
        fn dim(&self) -> usize {
            1
        }
        fn level_base(&self) -> u32 {
            2
        }
        fn alpha(&self) -> f64 {
            1.0
        }
        fn beta(&self) -> f64 {
            1.0
        }
        fn variance_scale(&self, _: &[f64]) -> f64 {
            1.0
        }
        fn bias_scale(&self, _: &[f64]) -> f64 {
            1e-9
        }
        fn sample_increment(
            &self,
            _: &[f64],
            level: u32,
            source: &mut GaussianSource,
            out: &mut [f64],
        ) -> Result<(), SampleError> {
            out[0] = if level == 1 { source.next_normal() } else { 0.0 };
            Ok(())
        }
    }

    struct Failing;

    impl LevelProblem for Failing {
        fn dim(&self) -> usize {
            1
        }
        fn level_base(&self) -> u32 {
            2
        }
        fn alpha(&self) -> f64 {
            1.0
        }
        fn beta(&self) -> f64 {
            1.0
        }
        fn variance_scale(&self, _: &[f64]) -> f64 {
            1.0
        }
        fn bias_scale(&self, _: &[f64]) -> f64 {
            1.0
        }
        fn sample_increment(
            &self,
            _: &[f64],
            level: u32,
            _: &mut GaussianSource,
            _: &mut [f64],
        ) -> Result<(), SampleError> {
            if level == 3 {
                Err(SampleError::NonFinite)
            } else {
                Ok(())
            }
        }
    }

    #[test]
    fn level_clamped_to_one() {
        let p = zeros(1.0, 1.0, 4);
        assert_eq!(max_level(&p, &[0.0, 0.0], 2.0).unwrap(), 1);
        // ε = M^(−α): ⌈1⌉ = 1.
        let p = zeros(1.5, 1.0, 3);
        assert_eq!(max_level(&p, &[0.0, 0.0], 3f64.powf(-1.5)).unwrap(), 1);
    }

    #[test]
    fn level_of_experiment_at_sixteen() {
        let p = zeros(1.0, 1.0, 4);
        let eps = 16f64.powi(-2);
        assert_eq!(max_level(&p, &[0.0, 0.0], eps).unwrap(), 4);
    }

    #[test]
    fn nonpositive_bias_level_rejected() {
        let p = zeros(1.0, 1.0, 4);
        assert_eq!(
            max_level(&p, &[0.0, 0.0], 0.0),
            Err(EstimatorError::BiasLevel(0.0))
        );
        assert!(max_level(&p, &[0.0, 0.0], -1.0).is_err());
        assert!(plan(&p, &[0.0, 0.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn kappa_cases() {
        let mut p = zeros(1.0, 1.0, 4);
        p.gamma1 = 3.0;
        for m in 1..6 {
            assert_eq!(kappa(&p, &[0.0, 0.0], 1.0, m), 9.0);
        }
        let mut p = zeros(1.0, 0.5, 4);
        p.gamma1 = 2.0;
        assert_eq!(kappa(&p, &[0.0, 0.0], 1.0, 3), 12.0);
        let p = zeros(1.0, 0.25, 4);
        assert!((kappa(&p, &[0.0, 0.0], 1.0, 2) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn replication_counts() {
        assert_eq!(replications(1e-300, 4, 1.0, 1), 1);
        assert_eq!(replications(512.0, 4, 1.0, 1), 64);
        assert_eq!(replications(512.0, 4, 1.0, 2), 8);
        assert_eq!(replications(512.0, 4, 1.0, 3), 1);
    }

    #[test]
    fn experiment_plan_at_eight() {
        let p = zeros(1.0, 1.0, 4);
        let n = 8u64;
        let eps = (n as f64).powi(-2);
        let sigma = (n as f64).powi(-3).sqrt();
        let plan = plan(&p, &[0.0, 0.0], eps, sigma).unwrap();
        assert_eq!(plan.levels, 3);
        assert_eq!(plan.reps, vec![64, 8, 1]);
        assert_eq!(plan.cost, 448.0);
    }

    #[test]
    fn zero_increments_give_zero_estimate() {
        let p = zeros(1.0, 1.0, 4);
        let est = estimate(&p, &[0.3, 0.1], 0.01, 0.1, StepStreams::new(1, 0, 5)).unwrap();
        assert_eq!(est.value, vec![0.0, 0.0]);
        assert!(est.cost > 0.0);
        assert_eq!(est.cost, plan_cost(&p, &est.reps));
    }

    #[test]
    fn single_level_is_plain_monte_carlo() {
        let streams = StepStreams::new(9, 2, 3);
        let est = estimate(&SingleLevel, &[0.0], 1.0, 0.05, streams).unwrap();
        assert_eq!(est.levels, 1);
        let n1 = est.reps[0];
        assert_eq!(n1, replications(400.0, 2, 1.0, 1));
        let mean: f64 = (1..=n1)
            .map(|l| streams.source(1, l).next_normal())
            .sum::<f64>()
            * (1.0 / n1 as f64);
        assert_eq!(est.value[0], mean);
    }

    #[test]
    fn sampler_error_carries_coordinates() {
        let err = estimate(&Failing, &[0.0], 1e-3, 1.0, StepStreams::new(0, 0, 11)).unwrap_err();
        match err {
            EstimatorError::Sampler {
                step,
                level,
                sample,
                source,
            } => {
                assert_eq!((step, level, sample), (11, 3, 1));
                assert_eq!(source, SampleError::NonFinite);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = zeros(1.0, 1.0, 4);
        assert!(matches!(
            estimate(&p, &[0.0], 0.1, 0.1, StepStreams::new(0, 0, 1)),
            Err(EstimatorError::Dimension { .. })
        ));
    }

    proptest! {
        #[test]
        fn max_level_monotone(g2 in 1e-3f64..1e3, e1 in 1e-8f64..1.0, ratio in 1.0f64..100.0,
                              alpha in 0.3f64..3.0, base in 2u32..9) {
            let mut p = zeros(alpha, alpha.min(1.0), base);
            p.gamma2 = g2;
            let fine = max_level(&p, &[0.0, 0.0], e1).unwrap();
            let coarse = max_level(&p, &[0.0, 0.0], e1 * ratio).unwrap();
            prop_assert!(coarse <= fine);
            let mut q = zeros(alpha, alpha.min(1.0), base);
            q.gamma2 = g2 * ratio;
            prop_assert!(max_level(&q, &[0.0, 0.0], e1).unwrap() >= fine);
            if fine > 1 {
                prop_assert!(g2 * (base as f64).powf(-alpha * fine as f64) <= e1 * (1.0 + 1e-9));
            }
        }

        #[test]
        fn replications_nonincreasing_in_level(kappa in 1e-3f64..1e9, beta in 0.1f64..2.0,
                                               base in 2u32..9) {
            let mut prev = u64::MAX;
            for k in 1..12 {
                let n = replications(kappa, base, beta, k);
                prop_assert!(n >= 1);
                prop_assert!(n <= prev);
                prev = n;
            }
        }
    }
}
