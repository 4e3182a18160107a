//! Replicated experiment from a configuration file, with the rate fit and
//! the validation report.
//!
//! `cargo run --release --example convergence_study -- [config]`
//! (defaults to configs/synthetic_rm_08_15.cfg)

use std::path::PathBuf;

use mlsa::harness::{run_prepared, ExperimentConfig, Prepared, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/synthetic_rm_08_15.cfg"));
    let cfg = ExperimentConfig::load(&path)?;
    let prep = Prepared::new(&cfg)?;
    let summary = run_prepared(&prep, RunOptions { jobs: None, wall_time: true })?;

    print!("{}", summary.csv());
    if let Some(f) = summary.error_fit {
        println!("error slope {:.4}, max residual {:.3}", f.slope, f.max_residual);
    }
    if let Some(f) = summary.cost_fit {
        println!("cost slope {:.4}", f.slope);
    }
    for r in &summary.validation {
        println!("\n{r}");
    }
    Ok(())
}
