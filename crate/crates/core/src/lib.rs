//! Multilevel stochastic approximation.
//!
//! Robbins-Monro and Polyak-Ruppert schemes for finding the zero θ* of a
//! mean field f(θ) = E[F(θ, U)] when F can only be sampled through a
//! hierarchy of biased approximations F_1, F_2, … of increasing accuracy and
//! cost. Each step draws a multilevel estimate Z_n whose bias ε_n and noise
//! σ_n shrink along a schedule.
//!
//! * [`schedules`]: step-size, bias, noise and weight sequences, plus
//!   checks of the admissibility conditions and predicted rates.
//! * [`rng`]: keyed Gaussian streams, so results do not depend on
//!   evaluation order or thread count.
//! * [`estimator`]: the multilevel estimate Z_n(θ) and its cost.
//! * [`drivers`]: the iteration engines and the f_c extension.
//! * [`blackscholes`]: implied-volatility calibration with Milstein levels.
//! * [`harness`]: replicated experiments, rate fits, CSV reports and the CLI.

pub mod blackscholes;
pub mod drivers;
pub mod estimator;
pub mod harness;
pub mod rng;
pub mod schedules;
