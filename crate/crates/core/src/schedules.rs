//! Step-size, bias-level, noise-level and weight sequences, together with
//! machine-checkable versions of the admissibility conditions attached to
//! each scheme.
//!
//! All accessors are pure functions of the step index `n ≥ 1`; nothing is
//! cached, so a schedule can be shared freely between replication workers.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule index must be at least 1 (got 0)")]
    ZeroIndex,
    #[error("invalid schedule parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("moment order q = {q} outside [p/(1+lambda), p) = [{lo}, {hi})")]
    MomentOrder { q: f64, lo: f64, hi: f64 },
    #[error("alpha = {alpha} must be at least beta = {beta}")]
    AlphaBelowBeta { alpha: f64, beta: f64 },
}

/// The deterministic sequences driving one scheme.
pub trait Schedule: Send + Sync {
    /// Step size γ_n.
    fn gamma(&self, n: u64) -> Result<f64, ScheduleError>;
    /// Squared noise level σ_n².
    fn sigma2(&self, n: u64) -> Result<f64, ScheduleError>;
    /// Bias level ε_n.
    fn eps(&self, n: u64) -> Result<f64, ScheduleError>;
    /// Averaging weight b_n.
    fn weight(&self, n: u64) -> Result<f64, ScheduleError>;

    fn sigma(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok(self.sigma2(n)?.sqrt())
    }

    /// v_n = sqrt(γ_n)·σ_n.
    fn v(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok((self.gamma(n)? * self.sigma2(n)?).sqrt())
    }

    /// v̄_n = σ_n/√n.
    fn vbar(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok((self.sigma2(n)? / n as f64).sqrt())
    }
}

fn check_index(n: u64) -> Result<f64, ScheduleError> {
    if n == 0 {
        Err(ScheduleError::ZeroIndex)
    } else {
        Ok(n as f64)
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ScheduleError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ScheduleError::InvalidParameter {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}

fn finite(name: &'static str, value: f64) -> Result<(), ScheduleError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ScheduleError::InvalidParameter {
            name,
            value,
            reason: "must be finite",
        })
    }
}

/// Power-law schedule
/// γ_n = γ₀n^(−r₁), σ_n² = σ₀²n^(−r₂), ε_n = ε₀n^(−ρ), b_n = b₀n^(r₃).
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSchedule {
    pub gamma0: f64,
    pub r1: f64,
    pub sigma0: f64,
    pub r2: f64,
    pub eps0: f64,
    pub rho: f64,
    pub b0: f64,
    pub r3: f64,
}

impl PolynomialSchedule {
    /// Checks the parameter invariants: positive coefficients, `r1 ∈ (0, 1]`,
    /// finite exponents.
    pub fn new(
        gamma0: f64,
        r1: f64,
        sigma0: f64,
        r2: f64,
        eps0: f64,
        rho: f64,
        b0: f64,
        r3: f64,
    ) -> Result<Self, ScheduleError> {
        positive("gamma0", gamma0)?;
        positive("sigma0", sigma0)?;
        positive("eps0", eps0)?;
        positive("b0", b0)?;
        positive("rho", rho)?;
        finite("r2", r2)?;
        finite("r3", r3)?;
        if !(r1 > 0.0 && r1 <= 1.0) {
            return Err(ScheduleError::InvalidParameter {
                name: "r1",
                value: r1,
                reason: "must lie in (0, 1]",
            });
        }
        Ok(Self {
            gamma0,
            r1,
            sigma0,
            r2,
            eps0,
            rho,
            b0,
            r3,
        })
    }

    /// Robbins-Monro schedule γ_n = γ₀/n, σ_n² = σ₀²/n^r, ε_n = ε₀/n^((1+r)/2).
    pub fn robbins_monro(gamma0: f64, sigma0: f64, eps0: f64, r: f64) -> Result<Self, ScheduleError> {
        Self::new(gamma0, 1.0, sigma0, r, eps0, 0.5 * (1.0 + r), 1.0, 0.0)
    }
}

impl Schedule for PolynomialSchedule {
    fn gamma(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok(self.gamma0 * check_index(n)?.powf(-self.r1))
    }

    fn sigma2(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok(self.sigma0 * self.sigma0 * check_index(n)?.powf(-self.r2))
    }

    fn eps(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok(self.eps0 * check_index(n)?.powf(-self.rho))
    }

    fn weight(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok(self.b0 * check_index(n)?.powf(self.r3))
    }
}

/// Exponentially decaying noise:
/// γ_n = γ₀n^(−r₁), σ_n² = c·exp(−2rn), ε_n = c·exp(−r·Σ_{k≤n} γ_k).
///
/// Both decay conditions therefore hold with equality. Weights are uniform
/// (b_n = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct ExponentialSchedule {
    pub gamma0: f64,
    pub r1: f64,
    pub decay: f64,
    pub c: f64,
}

impl ExponentialSchedule {
    pub fn new(gamma0: f64, r1: f64, decay: f64, c: f64) -> Result<Self, ScheduleError> {
        positive("gamma0", gamma0)?;
        positive("decay", decay)?;
        positive("c", c)?;
        if !(r1 > 0.0 && r1 < 1.0) {
            return Err(ScheduleError::InvalidParameter {
                name: "r1",
                value: r1,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(Self {
            gamma0,
            r1,
            decay,
            c,
        })
    }

    /// Σ_{k≤n} γ_k, by compensated summation.
    pub fn gamma_sum(&self, n: u64) -> Result<f64, ScheduleError> {
        check_index(n)?;
        let mut acc = crate::drivers::CompensatedSum::default();
        for k in 1..=n {
            acc.add(self.gamma0 * (k as f64).powf(-self.r1));
        }
        Ok(acc.value())
    }
}

impl Schedule for ExponentialSchedule {
    fn gamma(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok(self.gamma0 * check_index(n)?.powf(-self.r1))
    }

    fn sigma2(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok(self.c * (-2.0 * self.decay * check_index(n)?).exp())
    }

    fn eps(&self, n: u64) -> Result<f64, ScheduleError> {
        Ok(self.c * (-self.decay * self.gamma_sum(n)?).exp())
    }

    fn weight(&self, n: u64) -> Result<f64, ScheduleError> {
        check_index(n)?;
        Ok(1.0)
    }
}

/// Either schedule family; this is what run configurations produce.
#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleKind {
    Poly(PolynomialSchedule),
    Exp(ExponentialSchedule),
}

impl Schedule for ScheduleKind {
    fn gamma(&self, n: u64) -> Result<f64, ScheduleError> {
        match self {
            Self::Poly(s) => s.gamma(n),
            Self::Exp(s) => s.gamma(n),
        }
    }
    fn sigma2(&self, n: u64) -> Result<f64, ScheduleError> {
        match self {
            Self::Poly(s) => s.sigma2(n),
            Self::Exp(s) => s.sigma2(n),
        }
    }
    fn eps(&self, n: u64) -> Result<f64, ScheduleError> {
        match self {
            Self::Poly(s) => s.eps(n),
            Self::Exp(s) => s.eps(n),
        }
    }
    fn weight(&self, n: u64) -> Result<f64, ScheduleError> {
        match self {
            Self::Poly(s) => s.weight(n),
            Self::Exp(s) => s.weight(n),
        }
    }
}

/// Constants of the contraction / growth / linearisation conditions on f:
///
/// * ⟨θ−θ*, f(θ)⟩ ≤ −L‖θ−θ*‖²
/// * ⟨θ−θ*, f(θ)⟩ ≤ −L'‖f(θ)‖²
/// * ‖f(θ) − H(θ−θ*)‖ ≤ L''‖θ−θ*‖^(1+λ)
#[derive(Clone, Debug, PartialEq)]
pub struct ContractionConstants {
    pub l: f64,
    pub l_prime: f64,
    pub l_double_prime: f64,
    pub lambda: f64,
    /// Row-major `d × d` matrix.
    pub h: Vec<f64>,
}

impl ContractionConstants {
    pub fn new(
        l: f64,
        l_prime: f64,
        l_double_prime: f64,
        lambda: f64,
        h: Vec<f64>,
    ) -> Result<Self, ScheduleError> {
        positive("L", l)?;
        positive("Lprime", l_prime)?;
        positive("lambda", lambda)?;
        if !(l_double_prime.is_finite() && l_double_prime >= 0.0) {
            return Err(ScheduleError::InvalidParameter {
                name: "Ldoubleprime",
                value: l_double_prime,
                reason: "must be finite and nonnegative",
            });
        }
        let d = (h.len() as f64).sqrt() as usize;
        if d * d != h.len() || d == 0 {
            return Err(ScheduleError::InvalidParameter {
                name: "H",
                value: h.len() as f64,
                reason: "must be a square matrix",
            });
        }
        Ok(Self {
            l,
            l_prime,
            l_double_prime,
            lambda,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        (self.h.len() as f64).sqrt() as usize
    }

    /// Spectral norm of H (power iteration on HᵀH).
    pub fn h_norm(&self) -> f64 {
        operator_norm(&self.h, self.dim())
    }

    /// Whether ‖H‖ ≤ 1/L' holds (up to rounding).
    pub fn h_norm_consistent(&self) -> bool {
        self.h_norm() <= (1.0 / self.l_prime) * (1.0 + 1e-12)
    }
}

fn operator_norm(h: &[f64], d: usize) -> f64 {
    let mut x = vec![1.0 / (d as f64).sqrt(); d];
    let mut y = vec![0.0; d];
    let mut norm = 0.0;
    for _ in 0..500 {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..d).map(|j| h[i * d + j] * x[j]).sum();
        }
        let mut z = vec![0.0; d];
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = (0..d).map(|i| h[i * d + j] * y[i]).sum();
        }
        let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if zn == 0.0 {
            return 0.0;
        }
        let next = zn.sqrt();
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi = zi / zn);
        if (next - norm).abs() <= 1e-15 * next {
            return next;
        }
        norm = next;
    }
    norm
}

/// Outcome of one named condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// A strict inequality that holds with equality.
    Boundary,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pass => "PASS",
            Self::Boundary => "BOUNDARY",
            Self::Fail => "FAIL",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

/// Cost regime of the multilevel estimator, by variance order β.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostRegime {
    /// β > 1/2: cost ∝ n^(2ρ).
    Fast,
    /// β = 1/2: cost ∝ n^(2ρ)·ln²(n+1).
    Critical,
    /// β < 1/2: cost ∝ n^(2ρ(1 + (1−2β)/(2α))).
    Slow,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub scheme: &'static str,
    pub conditions: Vec<Condition>,
    /// Predicted decay exponent of the error.
    pub error_exponent: Option<f64>,
    /// Predicted decay exponent of the tail-supremum error, η*.
    pub sup_error_exponent: Option<f64>,
    pub cost_regime: Option<CostRegime>,
    /// Predicted growth exponent of cost_n (log factor reported separately).
    pub cost_exponent: Option<f64>,
    pub cost_log_squared: bool,
}

impl ValidationReport {
    fn new(scheme: &'static str) -> Self {
        Self {
            scheme,
            conditions: Vec::new(),
            error_exponent: None,
            sup_error_exponent: None,
            cost_regime: None,
            cost_exponent: None,
            cost_log_squared: false,
        }
    }

    /// Worst status over all conditions (Fail > Boundary > Pass).
    pub fn overall(&self) -> Status {
        if self.conditions.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if self.conditions.iter().any(|c| c.status == Status::Boundary) {
            Status::Boundary
        } else {
            Status::Pass
        }
    }

    pub fn status_of(&self, name: &str) -> Option<Status> {
        self.conditions.iter().find(|c| c.name == name).map(|c| c.status)
    }

    fn push(&mut self, name: &'static str, status: Status, detail: String) {
        self.conditions.push(Condition {
            name,
            status,
            detail,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scheme: {}", self.scheme)?;
        for c in &self.conditions {
            writeln!(f, "  [{}] {}: {}", c.status, c.name, c.detail)?;
        }
        if let Some(e) = self.error_exponent {
            writeln!(f, "  predicted error exponent: {e}")?;
        }
        if let Some(e) = self.sup_error_exponent {
            writeln!(f, "  predicted sup-error exponent: {e}")?;
        }
        if let Some(e) = self.cost_exponent {
            let log = if self.cost_log_squared { " x ln^2(n+1)" } else { "" };
            writeln!(f, "  predicted cost exponent: {e}{log}")?;
        }
        write!(f, "  overall: {}", self.overall())
    }
}

/// Relative tolerance used to decide that a strict inequality is met with
/// equality.
const BOUNDARY_RTOL: f64 = 1e-12;

/// Compares `lhs > rhs` (strict), reporting equality as `Boundary`.
fn strictly_greater(lhs: f64, rhs: f64) -> Status {
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    if (lhs - rhs).abs() <= BOUNDARY_RTOL * scale {
        Status::Boundary
    } else if lhs > rhs {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn at_least(lhs: f64, rhs: f64) -> Status {
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    if lhs >= rhs || (lhs - rhs).abs() <= BOUNDARY_RTOL * scale {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn from_bool(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Conditions for the polynomial Robbins-Monro rates, for moment order `p`.
pub fn validate_rm(s: &PolynomialSchedule, c: &ContractionConstants, p: f64) -> ValidationReport {
    let mut report = ValidationReport::new("robbins-monro");
    let threshold = (1.0 + s.r2) / (2.0 * c.l);
    let step_status = if s.r1 < 1.0 {
        Status::Pass
    } else {
        strictly_greater(s.gamma0, threshold)
    };
    report.push(
        "step-size (a)",
        step_status,
        format!(
            "r1 = {} {}; gamma0 = {} vs (1+r2)/(2L) = {}",
            s.r1,
            if s.r1 < 1.0 { "< 1" } else { "= 1" },
            s.gamma0,
            threshold
        ),
    );
    let rate = 0.5 * (s.r1 + s.r2);
    let sup_penalty = (1.0 - s.r1) / p;
    report.push(
        "sup-rate (b)",
        strictly_greater(rate, sup_penalty),
        format!("(r1+r2)/2 = {rate} vs (1-r1)/p = {sup_penalty}"),
    );
    report.push(
        "noise exponent",
        strictly_greater(s.r2, -s.r1),
        format!("r2 = {} vs -r1 = {}", s.r2, -s.r1),
    );
    report.push(
        "bias decay",
        at_least(s.rho, rate),
        format!("rho = {} vs (r1+r2)/2 = {rate}", s.rho),
    );
    report.push(
        "moment order",
        from_bool(p >= 2.0),
        format!("p = {p} (need p >= 2)"),
    );
    report.error_exponent = Some(rate);
    report.sup_error_exponent = Some(rate - sup_penalty);
    report
}

/// Conditions for the polynomial Polyak-Ruppert rates in the `q`-th mean.
pub fn validate_pr(
    s: &PolynomialSchedule,
    c: &ContractionConstants,
    p: f64,
    q: f64,
) -> Result<ValidationReport, ScheduleError> {
    let lo = p / (1.0 + c.lambda);
    if !(q >= lo && q < p) {
        return Err(ScheduleError::MomentOrder { q, lo, hi: p });
    }
    let mut report = ValidationReport::new("polyak-ruppert");
    report.push(
        "step exponent",
        from_bool(s.r1 > 0.0 && s.r1 < 1.0),
        format!("r1 = {} (need 0 < r1 < 1)", s.r1),
    );
    report.push(
        "noise exponent",
        strictly_greater(s.r2, -s.r1),
        format!("r2 = {} vs -r1 = {}", s.r2, -s.r1),
    );
    report.push(
        "weight exponent",
        at_least(s.r3, 0.5 * s.r2),
        format!("r3 = {} vs r2/2 = {}", s.r3, 0.5 * s.r2),
    );
    let ratio = (1.0 + s.r2) / (s.r1 + s.r2);
    report.push(
        "moment ratio",
        at_least(p / q, ratio),
        format!("(1+r2)/(r1+r2) = {ratio} vs p/q = {}", p / q),
    );
    let rate = 0.5 * (1.0 + s.r2);
    report.push(
        "bias decay",
        at_least(s.rho, rate),
        format!("rho = {} vs (1+r2)/2 = {rate}", s.rho),
    );
    report.error_exponent = Some(rate);
    Ok(report)
}

/// Cost conditions of the multilevel schemes for a level hierarchy with bias
/// order `alpha` and variance order `beta`.
///
/// A schedule with `r1 = 1` is checked against the Robbins-Monro theorem
/// (strict lower bound on r2); `r1 < 1` against the Polyak-Ruppert theorem
/// (non-strict bound).
pub fn validate_ml(
    s: &PolynomialSchedule,
    alpha: f64,
    beta: f64,
) -> Result<ValidationReport, ScheduleError> {
    positive("alpha", alpha)?;
    positive("beta", beta)?;
    if alpha < beta {
        return Err(ScheduleError::AlphaBelowBeta { alpha, beta });
    }
    let rm = s.r1 >= 1.0;
    let mut report = ValidationReport::new(if rm {
        "multilevel robbins-monro"
    } else {
        "multilevel polyak-ruppert"
    });
    let b = beta.min(0.5);
    report.push(
        "bias order",
        strictly_greater(alpha, b),
        format!("alpha = {alpha} vs beta ^ 1/2 = {b}"),
    );
    if alpha > b {
        let bound = b / (alpha - b);
        let status = if rm {
            strictly_greater(s.r2, bound)
        } else {
            at_least(s.r2, bound)
        };
        report.push(
            "noise exponent",
            status,
            format!(
                "r2 = {} vs (beta ^ 1/2)/(alpha - beta ^ 1/2) = {bound}",
                s.r2
            ),
        );
    }
    let rho = 0.5 * (1.0 + s.r2);
    let (regime, exponent) = if beta > 0.5 {
        (CostRegime::Fast, 2.0 * rho)
    } else if beta == 0.5 {
        (CostRegime::Critical, 2.0 * rho)
    } else {
        (
            CostRegime::Slow,
            2.0 * rho * (1.0 + (1.0 - 2.0 * beta) / (2.0 * alpha)),
        )
    };
    report.cost_regime = Some(regime);
    report.cost_exponent = Some(exponent);
    report.cost_log_squared = regime == CostRegime::Critical;
    report.error_exponent = Some(rho);
    Ok(report)
}
