//! Observed against predicted rates of the abstract recursion on the linear
//! model problem f(θ) = −(θ − θ*).
//!
//! `cargo run --release --example synthetic_rates`

use mlsa::harness::{run_experiment, ExperimentConfig, RunOptions};

const BASE: &str = "
problem = linear
dim = 2
theta0 = 1, 1
projector = identity
checkpoints = 32, 64, 128, 256, 512, 1024
replications = 200
seed = 1
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // (scheme, γ₀, r1, r2, ρ, r3, predicted slope)
    let cases = [
        ("synthetic-rm", 2.0, 1.0, 1.0, 1.0, 0.0, -1.0),
        ("synthetic-rm", 1.0, 0.8, 1.5, 1.15, 0.0, -1.15),
        ("synthetic-rm", 1.0, 0.6, 2.0, 1.3, 0.0, -1.3),
        ("synthetic-pr", 1.0, 0.7, 1.0, 1.0, 1.0, -1.0),
        ("synthetic-pr", 1.0, 0.5, 2.0, 1.5, 2.0, -1.5),
    ];
    for (scheme, g0, r1, r2, rho, r3, predicted) in cases {
        let text = format!("{BASE}scheme = {scheme}\ngamma0 = {g0}\nr1 = {r1}\nr2 = {r2}\nrho = {rho}\nr3 = {r3}\n");
        let cfg = ExperimentConfig::parse(&text)?;
        let s = run_experiment(&cfg, RunOptions::default())?;
        let fit = s.error_fit.expect("root is known");
        println!("{scheme:<13} r1 = {r1:<4} r2 = {r2:<4} slope {:+.3} (predicted {predicted:+.2})", fit.slope);
    }
    Ok(())
}
