//! One multilevel estimate Z_n(θ) of the Black-Scholes mean field, next to
//! its level plan and the exact value.
//!
//! `cargo run --release --example multilevel_estimate -- [n] [theta]`

use mlsa::blackscholes::{BSParams, BlackScholesProblem};
use mlsa::estimator::{estimate, plan, StepStreams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: u64 = args.next().map_or(Ok(32), |s| s.parse())?;
    let theta: f64 = args.next().map_or(Ok(0.3), |s| s.parse())?;
    let prob = BlackScholesProblem::new(BSParams::reference())?;

    let nf = n as f64;
    let (eps, sigma) = (nf.powi(-2), nf.powf(-1.5));
    let p = plan(&prob, &[theta], eps, sigma)?;
    println!("n = {n}, theta = {theta}: {} levels, kappa = {}", p.levels, p.kappa);
    for (k, r) in p.reps.iter().enumerate() {
        println!("  level {}: N = {r:>8}, {} steps each", k + 1, 4u64.pow(k as u32 + 1));
    }
    println!("  cost = {}", p.cost);

    let exact = prob.mean_field(theta)?;
    for rep in 0..5 {
        let z = estimate(&prob, &[theta], eps, sigma, StepStreams::new(7, rep, n))?;
        println!("Z = {:+.6}  (error {:+.2e})", z.value[0], z.value[0] - exact);
    }
    println!("f(theta) = {exact:+.6}");
    Ok(())
}
