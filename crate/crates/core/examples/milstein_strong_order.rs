//! Strong error of the Milstein scheme against the exact geometric Brownian
//! motion on the same path.
//!
//! `cargo run --release --example milstein_strong_order`

use mlsa::blackscholes::{exact_terminal, milstein_terminal, BSParams};
use mlsa::rng::{stream, StreamKey};

fn main() {
    let q = BSParams::reference();
    let paths = 100_000u64;
    for theta in [0.05, 0.2, 0.5] {
        println!("theta = {theta}");
        let mut prev: Option<f64> = None;
        for level in 1..=5u32 {
            let mut acc = 0.0;
            for i in 0..paths {
                let p = milstein_terminal(&q, theta, level, &mut stream(11, StreamKey::new(0, 0, level, i)));
                acc += (p.fine - exact_terminal(&q, theta, p.brownian)).powi(2);
            }
            let rms = (acc / paths as f64).sqrt();
            match prev {
                Some(e) => println!("  {:>5} steps  rms {rms:.3e}  ratio x M {:.3}", 4u32.pow(level), rms / e * 4.0),
                None => println!("  {:>5} steps  rms {rms:.3e}", 4u32.pow(level)),
            }
            prev = Some(rms);
        }
    }
}
