//! Admissibility reports for the Black-Scholes schedules.
//!
//! `cargo run --example schedule_report`

use mlsa::blackscholes::{contraction_constants, BSParams};
use mlsa::schedules::{validate_ml, validate_pr, validate_rm, PolynomialSchedule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = contraction_constants(&BSParams::reference())?;
    println!("L = {:.6}, L' = {:.6}, L'' = {:.3}\n", k.l, k.l_prime, k.l_double_prime);

    // γ_n = 2/(Ln) sits on the step-size threshold; 2.1/(Ln) clears it.
    for gamma0 in [2.0 / k.l, 2.1 / k.l] {
        let s = PolynomialSchedule::robbins_monro(gamma0, 1.0, 1.0, 3.0)?;
        println!("{}", validate_rm(&s, &k, 2.0));
        println!("{}", validate_ml(&s, 1.0, 1.0)?);
    }

    let pr = PolynomialSchedule::new(1.0, 0.9, 1.0, 3.0, 1.0, 2.0, 1.0, 2.0)?;
    for q in [1.02, 1.99] {
        println!("{}", validate_pr(&pr, &k, 2.0, q)?);
    }
    Ok(())
}
