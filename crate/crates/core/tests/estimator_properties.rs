//! Statistical and structural contracts of the multilevel estimator.

use mlsa::blackscholes::{BSParams, BlackScholesProblem};
use mlsa::estimator::{
    estimate, kappa, max_level, plan, plan_cost, replications, LevelProblem, SampleError,
    StepStreams,
};
use mlsa::rng::{stream, GaussianSource, StreamKey};
use proptest::prelude::*;

/// Level increments N(0, M^(−2βk)) with unit scales: the variance bound of
/// the level hierarchy holds with equality.
struct GaussianLevels {
    base: u32,
    beta: f64,
}

impl LevelProblem for GaussianLevels {
    fn dim(&self) -> usize {
        1
    }
    fn level_base(&self) -> u32 {
        self.base
    }
    fn alpha(&self) -> f64 {
        self.beta
    }
    fn beta(&self) -> f64 {
        self.beta
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
        source: &mut GaussianSource,
        out: &mut [f64],
    ) -> Result<(), SampleError> {
        let sd = (self.base as f64).powf(-self.beta * level as f64);
        out[0] = sd * source.next_normal();
        Ok(())
    }
}

#[test]
fn unbiased_within_level_cap() {
    let prob = BlackScholesProblem::new(BSParams::reference()).unwrap();
    let theta = [0.3];
    let n = 4u64;
    let (eps, sigma) = ((n as f64).powi(-2), (n as f64).powf(-1.5));
    let m = max_level(&prob, &theta, eps).unwrap();
    assert_eq!(m, 2);
    let calls = 100_000u64;
    let (mut a1, mut a2) = (0.0, 0.0);
    for r in 0..calls {
        let z = estimate(&prob, &theta, eps, sigma, StepStreams::new(1, r, n)).unwrap();
        a1 += z.value[0];
        a2 += z.value[0] * z.value[0];
    }
    let (mut b1, mut b2) = (0.0, 0.0);
    for i in 0..calls {
        let mut src = stream(2, StreamKey::new(i, 0, m, 0));
        let x = prob.level_value(theta[0], m, &mut src);
        b1 += x;
        b2 += x * x;
    }
    let k = calls as f64;
    let (ma, mb) = (a1 / k, b1 / k);
    let se = ((a2 / k - ma * ma) / k + (b2 / k - mb * mb) / k).sqrt();
    assert!((ma - mb).abs() < 4.0 * se, "{ma} vs {mb} (se {se})");
}

#[test]
fn variance_matches_plan_and_noise_level() {
    // Var Z = Σ_k M^(−2βk)/N_k exactly; the plan keeps it below σ² Σ_k M^(k(1/2−β)).
    let prob = GaussianLevels { base: 4, beta: 1.0 };
    let calls = 4000u64;
    for n in [4u64, 16, 64, 256] {
        let nf = n as f64;
        let (eps, sigma) = (1.0 / nf, 1.0 / nf);
        let p = plan(&prob, &[0.0], eps, sigma).unwrap();
        let exact: f64 = p
            .reps
            .iter()
            .enumerate()
            .map(|(i, &r)| 4f64.powi(-2 * (i as i32 + 1)) / r as f64)
            .sum();
        let bound: f64 = (1..=p.levels).map(|k| 4f64.powf(-0.5 * k as f64)).sum::<f64>() * sigma * sigma;
        assert!(exact <= bound, "n = {n}: {exact} > {bound}");
        let vals: Vec<f64> = (0..calls)
            .map(|r| estimate(&prob, &[0.0], eps, sigma, StepStreams::new(3, r, n)).unwrap().value[0])
            .collect();
        let mean = vals.iter().sum::<f64>() / calls as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (calls - 1) as f64;
        let tol = 4.0 * (2.0 / (calls - 1) as f64).sqrt();
        assert!((var / exact - 1.0).abs() <= tol, "n = {n}: {var} vs {exact}");
    }
}

#[test]
fn per_step_cost_within_polynomial_bound() {
    // β = 1 > 1/2: cost_n ≤ κ'(ε_n^(−1/α) + σ_n^(−2)) with ε_n = n⁻², σ_n² = n⁻³.
    let prob = BlackScholesProblem::new(BSParams::reference()).unwrap();
    let mut worst: f64 = 0.0;
    for n in 1..=512u64 {
        let nf = n as f64;
        let p = plan(&prob, &[0.2], nf.powi(-2), nf.powf(-1.5)).unwrap();
        worst = worst.max(p.cost / (nf * nf + nf.powi(3)));
    }
    assert!(worst <= 4.0, "{worst}");
}

#[test]
fn reference_plan_at_eight() {
    let prob = BlackScholesProblem::new(BSParams::reference()).unwrap();
    let p = plan(&prob, &[0.2], 1.0 / 64.0, 8f64.powf(-1.5)).unwrap();
    assert_eq!(p.reps, vec![64, 8, 1]);
    assert_eq!(p.cost, 448.0);
}

#[test]
fn max_level_monotone_on_grid() {
    let prob = GaussianLevels { base: 4, beta: 1.0 };
    let eps_grid: Vec<f64> = (0..60).map(|i| 10f64.powf(-0.1 * i as f64)).collect();
    let mut prev = 0;
    for eps in &eps_grid {
        let m = max_level(&prob, &[0.0], *eps).unwrap();
        assert!(m >= prev);
        prev = m;
    }
    assert!(max_level(&prob, &[0.0], 0.0).is_err());
}

#[test]
fn replications_nonincreasing_on_grid() {
    for base in [2u32, 3, 4, 8] {
        for beta in [0.25, 0.5, 1.0, 1.5] {
            for kappa in [1e-3, 1.0, 17.0, 512.0, 1e6] {
                let reps: Vec<u64> = (1..=12).map(|k| replications(kappa, base, beta, k)).collect();
                assert!(reps.windows(2).all(|w| w[0] >= w[1]), "{reps:?}");
                assert!(reps.iter().all(|&r| r >= 1));
            }
        }
    }
}

/// A level hierarchy with arbitrary constants for cost bookkeeping.
struct Costed {
    base: u32,
    beta: f64,
}

impl LevelProblem for Costed {
    fn dim(&self) -> usize {
        1
    }
    fn level_base(&self) -> u32 {
        self.base
    }
    fn alpha(&self) -> f64 {
        self.beta.max(0.5)
    }
    fn beta(&self) -> f64 {
        self.beta
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
        _: u32,
        _: &mut GaussianSource,
        out: &mut [f64],
    ) -> Result<(), SampleError> {
        out[0] = 0.0;
        Ok(())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cost_identity(n in 1u64..2000, base in 2u32..9, beta in 0.1f64..2.0, scale in -3.0f64..3.0) {
        let prob = Costed { base, beta };
        let nf = n as f64;
        let eps = nf.powf(-1.0 - scale.abs() / 3.0);
        let sigma = 10f64.powf(scale) / nf;
        let p = plan(&prob, &[0.0], eps, sigma).unwrap();
        let direct: f64 = p
            .reps
            .iter()
            .enumerate()
            .map(|(i, &r)| r as f64 * (base as f64).powi(i as i32 + 1))
            .sum();
        prop_assert_eq!(p.cost.to_bits(), direct.to_bits());
        prop_assert_eq!(p.cost.to_bits(), plan_cost(&prob, &p.reps).to_bits());
        let k = kappa(&prob, &[0.0], sigma, p.levels);
        prop_assert_eq!(k.to_bits(), p.kappa.to_bits());
        if p.reps.iter().sum::<u64>() <= 100_000 {
            let z = estimate(&prob, &[0.0], eps, sigma, StepStreams::new(0, 0, n)).unwrap();
            prop_assert_eq!(z.cost.to_bits(), p.cost.to_bits());
            prop_assert_eq!(z.reps, p.reps);
        }
    }
}
