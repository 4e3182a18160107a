//! Implied-volatility calibration in the Black-Scholes model.
//!
//! The unknown is the volatility θ for which the call price p(θ) matches a
//! given price p(θ*). We use
//!
//! ```text
//! F(θ, W)      = p(θ*) − e^(−μT)(S_T^θ − K)₊
//! F_k(θ, W)    = p(θ*) − e^(−μT)(Ŝ_{M^k} − K)₊
//! ```
//!
//! where Ŝ_{M^k} is the Milstein approximation of the geometric Brownian
//! motion on M^k equidistant steps, so that f(θ) = p(θ*) − p(θ) with the
//! unique zero θ*. Fine and coarse paths of a level increment are driven by
//! the same Brownian increments.

use std::f64::consts::{PI, SQRT_2};

use thiserror::Error;

use crate::estimator::{LevelProblem, SampleError};
use crate::rng::GaussianSource;
use crate::schedules::{ContractionConstants, ScheduleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BsError {
    #[error("volatility must be positive (got {0})")]
    Volatility(f64),
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Constants(#[from] ScheduleError),
}

/// Model and calibration-domain parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct BSParams {
    pub s0: f64,
    pub maturity: f64,
    pub mu: f64,
    pub strike: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub theta_star: f64,
    pub level_base: u32,
}

impl BSParams {
    /// s₀ = 10, T = 2, μ = 0.01, K = 11, D = [0.05, 0.5], θ* = 0.2, M = 4.
    pub fn reference() -> Self {
        Self {
            s0: 10.0,
            maturity: 2.0,
            mu: 0.01,
            strike: 11.0,
            theta_lo: 0.05,
            theta_hi: 0.5,
            theta_star: 0.2,
            level_base: 4,
        }
    }

    pub fn validate(&self) -> Result<(), BsError> {
        let pos = |name, value: f64| {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(BsError::Parameter {
                    name,
                    value,
                    reason: "must be finite and positive",
                })
            }
        };
        pos("s0", self.s0)?;
        pos("T", self.maturity)?;
        pos("strike", self.strike)?;
        pos("theta_lo", self.theta_lo)?;
        if !self.mu.is_finite() {
            return Err(BsError::Parameter {
                name: "mu",
                value: self.mu,
                reason: "must be finite",
            });
        }
        if !(self.theta_hi > self.theta_lo && self.theta_hi.is_finite()) {
            return Err(BsError::Parameter {
                name: "theta_hi",
                value: self.theta_hi,
                reason: "must exceed theta_lo",
            });
        }
        if !(self.theta_star >= self.theta_lo && self.theta_star <= self.theta_hi) {
            return Err(BsError::Parameter {
                name: "theta_star",
                value: self.theta_star,
                reason: "must lie in [theta_lo, theta_hi]",
            });
        }
        if self.level_base < 2 {
            return Err(BsError::Parameter {
                name: "M",
                value: self.level_base as f64,
                reason: "must be at least 2",
            });
        }
        Ok(())
    }

    fn log_moneyness(&self) -> f64 {
        (self.s0 / self.strike).ln() + self.mu * self.maturity
    }

    /// g(θ) = (ln(s₀/K) + (μ + θ²/2)T)/(θ√T).
    pub fn g(&self, theta: f64) -> f64 {
        (self.log_moneyness() + 0.5 * theta * theta * self.maturity) / (theta * self.maturity.sqrt())
    }

    fn discount(&self) -> f64 {
        (-self.mu * self.maturity).exp()
    }
}

/// Standard normal distribution function, Φ(x) = erfc(−x/√2)/2.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn check_vol(theta: f64) -> Result<(), BsError> {
    if theta > 0.0 && theta.is_finite() {
        Ok(())
    } else {
        Err(BsError::Volatility(theta))
    }
}

/// Black-Scholes call price p(θ).
pub fn bs_price(params: &BSParams, theta: f64) -> Result<f64, BsError> {
    check_vol(theta)?;
    let gp = params.g(theta);
    let gm = gp - theta * params.maturity.sqrt();
    Ok(params.s0 * normal_cdf(gp) - params.discount() * params.strike * normal_cdf(gm))
}

/// ∂p/∂θ = s₀√T φ(g(θ)).
pub fn bs_vega(params: &BSParams, theta: f64) -> Result<f64, BsError> {
    check_vol(theta)?;
    Ok(params.s0 * params.maturity.sqrt() * normal_pdf(params.g(theta)))
}

/// ∂²p/∂θ² = g₊(θ)g₋(θ)/θ · ∂p/∂θ.
pub fn bs_d2p(params: &BSParams, theta: f64) -> Result<f64, BsError> {
    let vega = bs_vega(params, theta)?;
    let gp = params.g(theta);
    let gm = gp - theta * params.maturity.sqrt();
    Ok(gp * gm / theta * vega)
}

/// Lower bound z* of the vega over [ϑ₁, ϑ₂].
pub fn vega_lower_bound(params: &BSParams) -> f64 {
    let (lo, hi) = (params.theta_lo, params.theta_hi);
    let u = 2.0 * params.log_moneyness() / params.maturity;
    let scale = params.s0 * params.maturity.sqrt();
    let (g_lo, g_hi) = (params.g(lo), params.g(hi));
    if u > lo * lo && u < hi * hi {
        scale * normal_pdf(g_lo.max(g_hi)).min(normal_pdf(u.sqrt()))
    } else {
        scale * normal_pdf(g_lo).min(normal_pdf(g_hi))
    }
}

/// Grid size used for the maximum of |∂²p/∂θ²|.
pub const CURVATURE_GRID: usize = 10_000;

/// max |∂²p/∂θ²| over [ϑ₁, ϑ₂]: a uniform grid followed by a golden-section
/// refinement around the grid maximiser.
pub fn curvature_bound(params: &BSParams, grid: usize) -> f64 {
    let (lo, hi) = (params.theta_lo, params.theta_hi);
    let h = (hi - lo) / grid as f64;
    let abs_d2 = |t: f64| bs_d2p(params, t).map(f64::abs).unwrap_or(0.0);
    let (mut best_i, mut best) = (0usize, abs_d2(lo));
    for i in 1..=grid {
        let v = abs_d2(lo + i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut a = (lo + (best_i as f64 - 1.0) * h).max(lo);
    let mut b = (lo + (best_i as f64 + 1.0) * h).min(hi);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if abs_d2(c) >= abs_d2(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(abs_d2(0.5 * (a + b)))
}

/// L, L', L'', λ = 1 and H = −∂p/∂θ(θ*) for f(θ) = p(θ*) − p(θ) on D.
pub fn contraction_constants(params: &BSParams) -> Result<ContractionConstants, BsError> {
    params.validate()?;
    let l = vega_lower_bound(params);
    let l_prime = (2.0 * PI).sqrt() / (params.s0 * params.maturity.sqrt());
    let l2 = curvature_bound(params, CURVATURE_GRID);
    let h = -bs_vega(params, params.theta_star)?;
    Ok(ContractionConstants::new(l, l_prime, l2, 1.0, vec![h])?)
}

/// Terminal values of one coupled Milstein draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MilsteinTerminal {
    /// Ŝ on M^k steps.
    pub fine: f64,
    /// Ŝ on M^(k−1) steps from the aggregated increments; `None` at k = 1.
    pub coarse: Option<f64>,
    /// W_T, the sum of all increments.
    pub brownian: f64,
}

/// Simulates the fine (M^k steps) and coarse (M^(k−1) steps) Milstein
/// approximations of S_T^θ on one Brownian path drawn from `source`.
pub fn milstein_terminal(
    params: &BSParams,
    theta: f64,
    level: u32,
    source: &mut GaussianSource,
) -> MilsteinTerminal {
    let m = params.level_base as usize;
    let t = params.maturity;
    let coarse_steps = m.pow(level - 1);
    let fine_steps = coarse_steps * m;
    let h = t / fine_steps as f64;
    let sqrt_h = h.sqrt();
    let half_t2 = 0.5 * theta * theta;
    let drift_f = 1.0 + params.mu * h - half_t2 * h;
    let mut fine = params.s0;
    if level == 1 {
        let mut w = 0.0;
        for _ in 0..fine_steps {
            let dw = sqrt_h * source.next_normal();
            w += dw;
            fine *= drift_f + theta * dw + half_t2 * dw * dw;
        }
        return MilsteinTerminal {
            fine,
            coarse: None,
            brownian: w,
        };
    }
    let hc = t / coarse_steps as f64;
    let drift_c = 1.0 + params.mu * hc - half_t2 * hc;
    let mut coarse = params.s0;
    let mut w = 0.0;
    for _ in 0..coarse_steps {
        let mut dwc = 0.0;
        for _ in 0..m {
            let dw = sqrt_h * source.next_normal();
            dwc += dw;
            fine *= drift_f + theta * dw + half_t2 * dw * dw;
        }
        w += dwc;
        coarse *= drift_c + theta * dwc + half_t2 * dwc * dwc;
    }
    MilsteinTerminal {
        fine,
        coarse: Some(coarse),
        brownian: w,
    }
}

/// Exact S_T^θ = s₀ exp((μ − θ²/2)T + θW_T).
pub fn exact_terminal(params: &BSParams, theta: f64, brownian: f64) -> f64 {
    params.s0 * ((params.mu - 0.5 * theta * theta) * params.maturity + theta * brownian).exp()
}

/// The calibration problem as a [`LevelProblem`] with α = β = 1 and
/// Γ₁ = Γ₂ ≡ 1.
#[derive(Clone, Debug)]
pub struct BlackScholesProblem {
    params: BSParams,
    target: f64,
    discount: f64,
}

impl BlackScholesProblem {
    pub fn new(params: BSParams) -> Result<Self, BsError> {
        params.validate()?;
        let target = bs_price(&params, params.theta_star)?;
        let discount = params.discount();
        Ok(Self {
            params,
            target,
            discount,
        })
    }

    pub fn params(&self) -> &BSParams {
        &self.params
    }

    /// p(θ*).
    pub fn target_price(&self) -> f64 {
        self.target
    }

    /// f(θ) = p(θ*) − p(θ).
    pub fn mean_field(&self, theta: f64) -> Result<f64, BsError> {
        Ok(self.target - bs_price(&self.params, theta)?)
    }

    /// One draw of F_k(θ,W) − F_{k−1}(θ,W) (with F₀ = 0).
    pub fn increment(&self, theta: f64, level: u32, source: &mut GaussianSource) -> f64 {
        let path = milstein_terminal(&self.params, theta, level, source);
        let k = self.params.strike;
        let fine = (path.fine - k).max(0.0);
        match path.coarse {
            None => self.target - self.discount * fine,
            Some(c) => self.discount * ((c - k).max(0.0) - fine),
        }
    }

    /// One draw of F_k(θ, W) alone (plain Monte Carlo on level k).
    pub fn level_value(&self, theta: f64, level: u32, source: &mut GaussianSource) -> f64 {
        let path = milstein_terminal(&self.params, theta, level, source);
        self.target - self.discount * (path.fine - self.params.strike).max(0.0)
    }
}

impl LevelProblem for BlackScholesProblem {
    fn dim(&self) -> usize {
        1
    }

    fn level_base(&self) -> u32 {
        self.params.level_base
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
        let t = theta[0];
        if !(t >= self.params.theta_lo && t <= self.params.theta_hi) {
            return Err(SampleError::OutsideDomain(theta.to_vec()));
        }
        let x = self.increment(t, level, source);
        if !x.is_finite() {
            return Err(SampleError::NonFinite);
        }
        out[0] = x;
        Ok(())
    }

    fn root(&self) -> Option<Vec<f64>> {
        Some(vec![self.params.theta_star])
    }
}
