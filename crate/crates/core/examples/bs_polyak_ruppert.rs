//! Multilevel Polyak-Ruppert averaging on the f_c extension, with the
//! iterate and its weighted average side by side.
//!
//! `cargo run --release --example bs_polyak_ruppert -- [steps]`

use mlsa::blackscholes::{contraction_constants, BSParams, BlackScholesProblem};
use mlsa::drivers::{extension_constants, run_pr, Projector, RunSpec};
use mlsa::schedules::PolynomialSchedule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: u64 = std::env::args().nth(1).map_or(Ok(64), |s| s.parse())?;
    let q = BSParams::reference();
    let k = contraction_constants(&q)?;
    let c = 1.0 / k.l_prime;
    let delta = (q.theta_star - q.theta_lo).min(q.theta_hi - q.theta_star);
    let ext = extension_constants(c, &k, delta)?;
    println!("c = {c:.4}: L_c = {:.4}, L_c' = {:.4}, L_c'' = {:.1}", ext.l, ext.l_prime, ext.l_double_prime);

    // γ_n = n^-0.9, σ_n² = n⁻³, ε_n = n⁻², b_n = n².
    let sched = PolynomialSchedule::new(1.0, 0.9, 1.0, 3.0, 1.0, 2.0, 1.0, 2.0)?;
    let proj = Projector::interval(q.theta_lo, q.theta_hi)?;
    let spec = RunSpec {
        theta0: vec![0.1],
        n_max: steps,
        seed: 42,
        replication: 0,
    };
    let t = run_pr(BlackScholesProblem::new(q)?, &sched, &proj, c, k.l_prime, &spec)?;
    let iter_err = t.errors.as_ref().expect("root is known");
    let avg_err = t.averaged_errors.as_ref().expect("averaging run");
    let mut n = 1;
    while n <= steps as usize {
        println!("n = {n:>4}  |theta - theta*| = {:.3e}  |average - theta*| = {:.3e}", iter_err[n], avg_err[n]);
        n *= 2;
    }
    Ok(())
}
