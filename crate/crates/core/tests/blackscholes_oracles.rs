//! Monte Carlo oracles for the Black-Scholes level hierarchy.

use mlsa::blackscholes::{
    bs_price, contraction_constants, exact_terminal, milstein_terminal, BSParams,
    BlackScholesProblem,
};
use mlsa::drivers::{extend_fc, extension_constants, Projector};
use mlsa::estimator::LevelProblem;
use mlsa::rng::{stream, StreamKey};

fn params() -> BSParams {
    BSParams::reference()
}

#[test]
fn closed_form_price_agrees_with_plain_monte_carlo() {
    let q = params();
    let n = 10_000_000u64;
    let disc = (-q.mu * q.maturity).exp();
    let mut src = stream(314, StreamKey::new(0, 0, 0, 0));
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let w = q.maturity.sqrt() * src.next_normal();
        let x = disc * (exact_terminal(&q, 0.2, w) - q.strike).max(0.0);
        s1 += x;
        s2 += x * x;
    }
    let mean = s1 / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    let exact = bs_price(&q, 0.2).unwrap();
    assert!((mean - exact).abs() < 3.0 * se, "{mean} vs {exact} (se {se})");
    assert!((exact - 0.81840348770877).abs() < 1e-12);
}

/// RMS of Ŝ_{M^k} − S_T on shared Brownian paths.
fn strong_error(q: &BSParams, theta: f64, level: u32, paths: u64) -> f64 {
    let mut acc = 0.0;
    for i in 0..paths {
        let mut src = stream(7, StreamKey::new(0, 0, level, i));
        let path = milstein_terminal(q, theta, level, &mut src);
        let exact = exact_terminal(q, theta, path.brownian);
        acc += (path.fine - exact).powi(2);
    }
    (acc / paths as f64).sqrt()
}

#[test]
fn milstein_strong_error_decays_like_step_size() {
    let q = params();
    let m = q.level_base as f64;
    for theta in [0.2, 0.3, 0.5] {
        let errs: Vec<f64> = (1..=4).map(|k| strong_error(&q, theta, k, 100_000)).collect();
        for w in errs.windows(2) {
            let ratio = w[1] / w[0];
            assert!(
                ratio >= 0.7 / m && ratio <= 1.3 / m,
                "theta {theta}: ratio {ratio} (errors {errs:?})"
            );
        }
    }
}

#[test]
fn coarse_increments_are_block_sums() {
    let q = params();
    let key = StreamKey::new(2, 5, 2, 11);
    let a = milstein_terminal(&q, 0.3, 2, &mut stream(1, key));
    let b = milstein_terminal(&q, 0.3, 2, &mut stream(1, key));
    assert_eq!(a, b);
    assert!(a.coarse.is_some());
}

#[test]
fn mean_absolute_increment_shrinks_per_level() {
    let prob = BlackScholesProblem::new(params()).unwrap();
    let draws = 100_000u64;
    let mean_abs = |level: u32| -> f64 {
        (0..draws)
            .map(|i| {
                let mut src = stream(99, StreamKey::new(0, 0, level, i));
                prob.increment(0.3, level, &mut src).abs()
            })
            .sum::<f64>()
            / draws as f64
    };
    let means: Vec<f64> = (2..=5).map(mean_abs).collect();
    for w in means.windows(2) {
        let factor = w[1] / w[0];
        assert!((0.15..=0.6).contains(&factor), "factor {factor} ({means:?})");
    }
}

#[test]
fn telescoped_levels_match_mean_field() {
    let prob = BlackScholesProblem::new(params()).unwrap();
    let draws = 1_000_000u64;
    let theta = 0.3;
    let (mut s1, mut var_sum) = (0.0, 0.0);
    for level in 1..=4u32 {
        let (mut a, mut b) = (0.0, 0.0);
        for i in 0..draws {
            let mut src = stream(5, StreamKey::new(0, 0, level, i));
            let x = prob.increment(theta, level, &mut src);
            a += x;
            b += x * x;
        }
        let mean = a / draws as f64;
        s1 += mean;
        var_sum += (b / draws as f64 - mean * mean) / draws as f64;
    }
    let f = prob.mean_field(theta).unwrap();
    let bias_bound = 4f64.powi(-4);
    let tol = 4.0 * var_sum.sqrt() + bias_bound;
    assert!((s1 - f).abs() <= tol, "{s1} vs {f}, tol {tol}");
}

#[test]
fn increments_replay_bit_identically() {
    let prob = BlackScholesProblem::new(params()).unwrap();
    for level in 1..=3 {
        let key = StreamKey::new(4, 8, level, 15);
        let a = prob.increment(0.25, level, &mut stream(3, key));
        let b = prob.increment(0.25, level, &mut stream(3, key));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn root_is_unique_zero_with_sign_condition() {
    let q = params();
    let prob = BlackScholesProblem::new(q.clone()).unwrap();
    assert_eq!(prob.root(), Some(vec![0.2]));
    assert_eq!(prob.mean_field(0.2).unwrap(), 0.0);
    for i in 0..=1000 {
        let t = q.theta_lo + (q.theta_hi - q.theta_lo) * i as f64 / 1000.0;
        let f = prob.mean_field(t).unwrap();
        if (t - 0.2).abs() > 1e-12 {
            assert!((t - 0.2) * f < 0.0, "at {t}");
        }
    }
}

#[test]
fn extension_contracts_on_wide_interval() {
    let q = params();
    let k = contraction_constants(&q).unwrap();
    let c = 1.0 / k.l_prime;
    let delta = (q.theta_star - q.theta_lo).min(q.theta_hi - q.theta_star);
    let ext_k = extension_constants(c, &k, delta).unwrap();
    let prob = BlackScholesProblem::new(q.clone()).unwrap();
    let proj = Projector::interval(q.theta_lo, q.theta_hi).unwrap();
    let ext = extend_fc(prob.clone(), proj, c, k.l_prime).unwrap();
    let (lo, hi) = (q.theta_lo - 1.0, q.theta_hi + 1.0);
    let mut src = stream(8, StreamKey::new(0, 0, 0, 0));
    let mut violations = 0;
    for _ in 0..10_000 {
        let t = lo + (hi - lo) * src.next_uniform();
        let fc = ext.mean_field_with(&[t], |x| vec![prob.mean_field(x[0]).unwrap()])[0];
        let d = t - q.theta_star;
        if d * fc > -ext_k.l * d * d {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
}
