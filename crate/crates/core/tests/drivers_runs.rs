//! End-to-end behaviour of the Robbins-Monro and Polyak-Ruppert drivers.

use mlsa::blackscholes::{contraction_constants, BSParams, BlackScholesProblem};
use mlsa::drivers::{
    run_pr, run_rm, run_synthetic_pr, run_synthetic_rm, DriverError, GaussianNoise, LinearDrift,
    Projector, RunSpec, SyntheticNoise, SyntheticProblem,
};
use mlsa::rng::GaussianSource;
use mlsa::schedules::{PolynomialSchedule, Schedule};

fn spec(theta0: Vec<f64>, n_max: u64, replication: u64) -> RunSpec {
    RunSpec {
        theta0,
        n_max,
        seed: 42,
        replication,
    }
}

fn rm_schedule(gamma0: f64) -> PolynomialSchedule {
    PolynomialSchedule::robbins_monro(gamma0, 1.0, 1.0, 3.0).unwrap()
}

#[test]
fn blackscholes_rm_is_reproducible_and_projected() {
    let q = BSParams::reference();
    let prob = BlackScholesProblem::new(q.clone()).unwrap();
    let k = contraction_constants(&q).unwrap();
    let sched = rm_schedule(2.0 / k.l);
    let proj = Projector::interval(q.theta_lo, q.theta_hi).unwrap();
    let a = run_rm(&prob, &sched, &proj, &spec(vec![0.1], 48, 3)).unwrap();
    let b = run_rm(&prob, &sched, &proj, &spec(vec![0.1], 48, 3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.steps(), 48);
    assert!(a.iterates.iter().all(|t| proj.contains(t)));
    assert!(a.cum_cost.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(a.cum_cost[16], 18624.0);
    let c = run_rm(&prob, &sched, &proj, &spec(vec![0.1], 48, 4)).unwrap();
    assert_ne!(a.iterates, c.iterates);
    assert_eq!(a.cum_cost, c.cum_cost);
}

#[test]
fn blackscholes_rm_moves_towards_root() {
    let q = BSParams::reference();
    let prob = BlackScholesProblem::new(q.clone()).unwrap();
    let k = contraction_constants(&q).unwrap();
    let proj = Projector::interval(q.theta_lo, q.theta_hi).unwrap();
    let t = run_rm(&prob, &rm_schedule(2.0 / k.l), &proj, &spec(vec![0.1], 64, 0)).unwrap();
    let errs = t.errors.as_ref().unwrap();
    assert!((errs[0] - 0.1).abs() < 1e-15);
    assert!(errs[64] < 0.02, "{}", errs[64]);
}

#[test]
fn blackscholes_pr_reports_weighted_average() {
    let q = BSParams::reference();
    let prob = BlackScholesProblem::new(q.clone()).unwrap();
    let k = contraction_constants(&q).unwrap();
    let sched = PolynomialSchedule::new(1.0, 0.9, 1.0, 3.0, 1.0, 2.0, 1.0, 2.0).unwrap();
    let proj = Projector::interval(q.theta_lo, q.theta_hi).unwrap();
    let t = run_pr(prob, &sched, &proj, 1.0 / k.l_prime, k.l_prime, &spec(vec![0.1], 40, 1)).unwrap();
    let avg = t.averaged.as_ref().unwrap();
    assert_eq!(avg[0], vec![0.1]);
    for n in [1usize, 7, 40] {
        let (mut num, mut den) = (0.0, 0.0);
        for j in 1..=n {
            let b = sched.weight(j as u64).unwrap();
            num += b * t.iterates[j][0];
            den += b;
        }
        assert!((avg[n][0] - num / den).abs() < 1e-14, "n = {n}");
        assert_eq!(t.reported(n), avg[n].as_slice());
    }
    assert_eq!(t.reported_errors().unwrap(), t.averaged_errors.as_deref().unwrap());
}

#[test]
fn zero_steps_keep_the_start() {
    let q = BSParams::reference();
    let prob = BlackScholesProblem::new(q.clone()).unwrap();
    let proj = Projector::interval(q.theta_lo, q.theta_hi).unwrap();
    let t = run_rm(&prob, &rm_schedule(0.5), &proj, &spec(vec![0.3], 0, 0)).unwrap();
    assert_eq!(t.steps(), 0);
    assert_eq!(t.iterates, vec![vec![0.3]]);
    assert_eq!(t.cum_cost, vec![0.0]);
}

#[test]
fn start_outside_domain_is_rejected() {
    let q = BSParams::reference();
    let prob = BlackScholesProblem::new(q.clone()).unwrap();
    let proj = Projector::interval(q.theta_lo, q.theta_hi).unwrap();
    let err = run_rm(&prob, &rm_schedule(0.5), &proj, &spec(vec![0.9], 4, 0)).unwrap_err();
    assert!(matches!(err, DriverError::InitialState(_)));
    let err = run_rm(&prob, &rm_schedule(0.5), &proj, &spec(vec![0.1, 0.2], 4, 0)).unwrap_err();
    assert!(matches!(err, DriverError::Dimension { .. }));
}

struct Silent(usize);

impl SyntheticNoise for Silent {
    fn dim(&self) -> usize {
        self.0
    }
    fn bias(&self, _: u64, theta: &[f64], _: &mut GaussianSource) -> Vec<f64> {
        vec![0.0; theta.len()]
    }
    fn noise(&self, _: u64, theta: &[f64], _: &mut GaussianSource) -> Vec<f64> {
        vec![0.0; theta.len()]
    }
}

#[test]
fn root_is_a_fixed_point_without_noise() {
    let drift = LinearDrift::new(1.0, vec![0.5, -0.25]);
    let f = |x: &[f64]| drift.eval(x);
    let noise = Silent(2);
    let prob = SyntheticProblem {
        drift: &f,
        noise: &noise,
        root: Some(drift.root.clone()),
    };
    let sched = rm_schedule(1.0);
    let t = run_synthetic_rm(&prob, &sched, &Projector::Identity, &spec(vec![0.5, -0.25], 100, 0)).unwrap();
    assert!(t.iterates.iter().all(|x| x == &vec![0.5, -0.25]));
    assert!(t.errors.unwrap().iter().all(|&e| e == 0.0));
    // γ₁a = 1: one noiseless step lands on the root.
    let t = run_synthetic_rm(&prob, &sched, &Projector::Identity, &spec(vec![1.5, -0.25], 1, 0)).unwrap();
    assert_eq!(t.iterates[1], vec![0.5, -0.25]);
}

#[test]
fn synthetic_pr_average_and_unit_costs() {
    let drift = LinearDrift::new(1.0, vec![0.0]);
    let f = |x: &[f64]| drift.eval(x);
    let noise = GaussianNoise::axis(1);
    let prob = SyntheticProblem {
        drift: &f,
        noise: &noise,
        root: Some(vec![0.0]),
    };
    let sched = PolynomialSchedule::new(1.0, 0.7, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let t = run_synthetic_pr(&prob, &sched, &Projector::Identity, &spec(vec![1.0], 200, 2)).unwrap();
    let avg = t.averaged.as_ref().unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for j in 1..=200usize {
        num += j as f64 * t.iterates[j][0];
        den += j as f64;
    }
    assert!((avg[200][0] - num / den).abs() < 1e-14);
    assert_eq!(t.cum_cost[200], 200.0);
    let again = run_synthetic_pr(&prob, &sched, &Projector::Identity, &spec(vec![1.0], 200, 2)).unwrap();
    assert_eq!(t, again);
}

#[test]
fn ball_projection_keeps_iterates_inside() {
    let drift = LinearDrift::new(0.2, vec![3.0, 0.0]);
    let f = |x: &[f64]| drift.eval(x);
    let noise = GaussianNoise::new(vec![1.0, 1.0]);
    let prob = SyntheticProblem {
        drift: &f,
        noise: &noise,
        root: None,
    };
    let ball = Projector::ball(vec![0.0, 0.0], 1.0).unwrap();
    let t = run_synthetic_rm(&prob, &rm_schedule(5.0), &ball, &spec(vec![0.0, 0.0], 300, 0)).unwrap();
    assert!(t.iterates.iter().all(|x| ball.contains(x)));
    assert!(t.errors.is_none());
}
