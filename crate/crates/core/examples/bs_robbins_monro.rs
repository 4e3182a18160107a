//! Projected multilevel Robbins-Monro for the implied volatility.
//!
//! `cargo run --release --example bs_robbins_monro -- [steps]`

use mlsa::blackscholes::{contraction_constants, BSParams, BlackScholesProblem};
use mlsa::drivers::{run_rm, Projector, RunSpec};
use mlsa::schedules::PolynomialSchedule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: u64 = std::env::args().nth(1).map_or(Ok(64), |s| s.parse())?;
    let q = BSParams::reference();
    let k = contraction_constants(&q)?;
    let prob = BlackScholesProblem::new(q.clone())?;
    let sched = PolynomialSchedule::robbins_monro(2.0 / k.l, 1.0, 1.0, 3.0)?;
    let proj = Projector::interval(q.theta_lo, q.theta_hi)?;

    let spec = RunSpec {
        theta0: vec![0.1],
        n_max: steps,
        seed: 42,
        replication: 0,
    };
    let t = run_rm(&prob, &sched, &proj, &spec)?;
    let errors = t.errors.as_ref().expect("root is known");
    let mut n = 1;
    while n <= steps as usize {
        println!("n = {n:>4}  theta = {:.8}  |error| = {:.3e}  cost = {}", t.iterates[n][0], errors[n], t.cum_cost[n]);
        n *= 2;
    }
    Ok(())
}
