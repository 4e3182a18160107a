//! A user-defined level hierarchy driven by the library.
//!
//! Find θ with E[X_1] = θ for the Ornstein-Uhlenbeck process
//! dX = −X dt + dW, X_0 = 1, so θ* = e⁻¹. Level k is the Euler scheme on
//! M^k steps; for additive noise it has strong order 1, so α = β = 1.
//!
//! `cargo run --release --example custom_problem`

use mlsa::drivers::{run_rm, Projector, RunSpec};
use mlsa::estimator::{LevelProblem, SampleError};
use mlsa::rng::GaussianSource;
use mlsa::schedules::PolynomialSchedule;

struct OrnsteinUhlenbeck {
    base: u32,
}

impl OrnsteinUhlenbeck {
    /// Fine and coarse Euler values of X_1 on one path.
    fn terminal(&self, level: u32, source: &mut GaussianSource) -> (f64, f64) {
        let m = self.base as usize;
        let steps = m.pow(level);
        let h = 1.0 / steps as f64;
        let (mut fine, mut coarse, mut dw_coarse) = (1.0, 1.0, 0.0);
        for i in 0..steps {
            let dw = h.sqrt() * source.next_normal();
            fine += -fine * h + dw;
            dw_coarse += dw;
            if (i + 1) % m == 0 {
                coarse += -coarse * h * m as f64 + dw_coarse;
                dw_coarse = 0.0;
            }
        }
        (fine, coarse)
    }
}

impl LevelProblem for OrnsteinUhlenbeck {
    fn dim(&self) -> usize {
        1
    }
    fn level_base(&self) -> u32 {
        self.base
    }
    fn alpha(&self) -> f64 {
        1.0
    }
    fn beta(&self) -> f64 {
        1.0
    }
    fn variance_scale(&self, _: &[f64]) -> f64 {
        1.0
    }
    fn bias_scale(&self, _: &[f64]) -> f64 {
        1.0
    }
    fn sample_increment(
        &self,
        theta: &[f64],
        level: u32,
        source: &mut GaussianSource,
        out: &mut [f64],
    ) -> Result<(), SampleError> {
        let (fine, coarse) = self.terminal(level, source);
        // F_k(θ) = X̂_1 − θ; the θ term cancels in every increment but the first.
        out[0] = if level == 1 { fine - theta[0] } else { fine - coarse };
        Ok(())
    }
    fn root(&self) -> Option<Vec<f64>> {
        Some(vec![(-1.0f64).exp()])
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prob = OrnsteinUhlenbeck { base: 4 };
    // L = 1 here, so γ₀ = 2.5 clears the threshold (1 + r2)/(2L) = 2.
    let sched = PolynomialSchedule::robbins_monro(2.5, 1.0, 1.0, 3.0)?;
    let spec = RunSpec {
        theta0: vec![0.0],
        n_max: 128,
        seed: 5,
        replication: 0,
    };
    let t = run_rm(&prob, &sched, &Projector::interval(-2.0, 2.0)?, &spec)?;
    let errors = t.errors.as_ref().expect("root is known");
    for n in [8usize, 16, 32, 64, 128] {
        println!("n = {n:>3}  theta = {:.6}  |error| = {:.2e}  cost = {}", t.iterates[n][0], errors[n], t.cum_cost[n]);
    }
    println!("theta* = {:.6}", (-1.0f64).exp());
    Ok(())
}
