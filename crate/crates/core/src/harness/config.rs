//! Flat `key = value` run configurations.
//!
//! ```text
//! # multilevel Robbins-Monro on the Black-Scholes problem
//! problem = blackscholes
//! scheme = rm
//! gamma0 = 2/L
//! r1 = 1
//! sigma0_sq = 1
//! r2 = 3
//! eps0 = 1
//! rho = 2
//! theta0 = 0.1
//! checkpoints = 16, 32, 64, 128, 256, 512
//! replications = 200
//! seed = 42
//! ```
//!
//! Scalar values are decimal numbers. `gamma0` and `c` may also be written
//! `a/L`, `a/Lprime`, `L` or `Lprime`, resolved against the contraction
//! constants of the problem. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::blackscholes::BSParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: cannot parse `{value}` ({expected})")]
    Value {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("key `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

/// Recognised keys; anything else is rejected.
pub const KEYS: &[&str] = &[
    "problem",
    "scheme",
    "s0",
    "T",
    "mu",
    "strike",
    "theta_lo",
    "theta_hi",
    "theta_star",
    "M",
    "dim",
    "slope",
    "root",
    "bias_direction",
    "kind",
    "gamma0",
    "r1",
    "sigma0_sq",
    "r2",
    "eps0",
    "rho",
    "b0",
    "r3",
    "decay",
    "exp_c",
    "projector",
    "box_lo",
    "box_hi",
    "ball_center",
    "ball_radius",
    "c",
    "theta0",
    "checkpoints",
    "replications",
    "seed",
    "p",
    "q",
    "eta",
    "sup_k0",
];

/// Ordered key-value pairs as read from a file, before interpretation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::Duplicate {
                    line: i + 1,
                    key: key.to_string(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Sets or replaces one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// SHA-256 over the canonical `key = value` rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_string().as_bytes()))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.get(key).map_or(Ok(default), |v| parse_f64(key, v))
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|v| parse_f64(key, v)).transpose()
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        self.get(key).map_or(Ok(default), |v| parse_u64(key, v))
    }

    fn list_opt(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.get(key)
            .map(|v| v.split(',').map(|s| parse_f64(key, s.trim())).collect())
            .transpose()
    }

    fn expr_opt(&self, key: &str) -> Result<Option<Expr>, ConfigError> {
        self.get(key).map(|v| Expr::parse(key, v)).transpose()
    }
}

impl fmt::Display for RawConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::Value {
            key: key.to_string(),
            value: v.to_string(),
            expected: "finite number",
        })
}

fn parse_u64(key: &str, v: &str) -> Result<u64, ConfigError> {
    v.parse::<u64>().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        value: v.to_string(),
        expected: "unsigned integer",
    })
}

/// A scalar possibly expressed through the contraction constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// a / L
    OverL(f64),
    /// a / L'
    OverLPrime(f64),
    /// a · L
    TimesL(f64),
    /// a · L'
    TimesLPrime(f64),
}

impl Expr {
    pub fn parse(key: &str, v: &str) -> Result<Self, ConfigError> {
        let err = || ConfigError::Value {
            key: key.to_string(),
            value: v.to_string(),
            expected: "number, a/L, a/Lprime, L or Lprime",
        };
        let s: String = v.chars().filter(|c| !c.is_whitespace()).collect();
        match s.as_str() {
            "L" => return Ok(Self::TimesL(1.0)),
            "Lprime" => return Ok(Self::TimesLPrime(1.0)),
            _ => {}
        }
        if let Some((a, b)) = s.split_once('/') {
            let a: f64 = a.parse().map_err(|_| err())?;
            return match b {
                "L" => Ok(Self::OverL(a)),
                "Lprime" => Ok(Self::OverLPrime(a)),
                _ => b
                    .parse::<f64>()
                    .ok()
                    .filter(|d| *d != 0.0)
                    .map(|d| Self::Num(a / d))
                    .ok_or_else(err),
            };
        }
        if let Some((a, b)) = s.split_once('*') {
            let a: f64 = a.parse().map_err(|_| err())?;
            return match b {
                "L" => Ok(Self::TimesL(a)),
                "Lprime" => Ok(Self::TimesLPrime(a)),
                _ => Err(err()),
            };
        }
        parse_f64(key, &s).map(Self::Num)
    }

    pub fn resolve(&self, l: f64, l_prime: f64) -> f64 {
        match *self {
            Self::Num(x) => x,
            Self::OverL(a) => a / l,
            Self::OverLPrime(a) => a / l_prime,
            Self::TimesL(a) => a * l,
            Self::TimesLPrime(a) => a * l_prime,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Rm,
    Pr,
    SyntheticRm,
    SyntheticPr,
}

impl SchemeKind {
    pub fn is_synthetic(self) -> bool {
        matches!(self, Self::SyntheticRm | Self::SyntheticPr)
    }

    pub fn is_averaging(self) -> bool {
        matches!(self, Self::Pr | Self::SyntheticPr)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Rm => "rm",
            Self::Pr => "pr",
            Self::SyntheticRm => "synthetic-rm",
            Self::SyntheticPr => "synthetic-pr",
        }
    }
}

/// The linear model problem f(θ) = −a(θ − θ*) with Gaussian noise and a
/// constant unit bias direction.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConfig {
    pub dim: usize,
    pub slope: f64,
    pub root: Vec<f64>,
    pub bias_direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemConfig {
    BlackScholes(BSParams),
    Linear(LinearConfig),
}

impl ProblemConfig {
    pub fn dim(&self) -> usize {
        match self {
            Self::BlackScholes(_) => 1,
            Self::Linear(l) => l.dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScheduleConfig {
    Poly {
        gamma0: Expr,
        r1: f64,
        sigma0_sq: f64,
        r2: f64,
        eps0: f64,
        rho: f64,
        b0: f64,
        r3: f64,
    },
    Exp {
        gamma0: Expr,
        r1: f64,
        decay: f64,
        c: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProjectorConfig {
    /// [ϑ₁, ϑ₂] for the Black-Scholes problem, identity otherwise.
    Domain,
    Identity,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// A fully interpreted run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub scheme: SchemeKind,
    pub schedule: ScheduleConfig,
    pub projector: ProjectorConfig,
    /// Extension constant; defaults to 1/L'.
    pub c: Expr,
    pub theta0: Vec<f64>,
    pub checkpoints: Vec<u64>,
    pub replications: u64,
    pub seed: u64,
    pub p: f64,
    /// Norm order of the reported error for averaging schemes.
    pub q: Option<f64>,
    pub eta: f64,
    /// Tail starts k₀ for the supremum error, if requested.
    pub sup_k0: Vec<u64>,
    /// Canonical hash of the raw configuration.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let problem = match raw.get("problem").ok_or(ConfigError::Missing("problem"))? {
            "blackscholes" => {
                let d = BSParams::reference();
                let m = raw.u64_or("M", d.level_base as u64)?;
                let params = BSParams {
                    s0: raw.f64_or("s0", d.s0)?,
                    maturity: raw.f64_or("T", d.maturity)?,
                    mu: raw.f64_or("mu", d.mu)?,
                    strike: raw.f64_or("strike", d.strike)?,
                    theta_lo: raw.f64_or("theta_lo", d.theta_lo)?,
                    theta_hi: raw.f64_or("theta_hi", d.theta_hi)?,
                    theta_star: raw.f64_or("theta_star", d.theta_star)?,
                    level_base: u32::try_from(m).map_err(|_| ConfigError::Invalid {
                        key: "M",
                        reason: "too large".into(),
                    })?,
                };
                params.validate().map_err(|e| ConfigError::Invalid {
                    key: "problem",
                    reason: e.to_string(),
                })?;
                ProblemConfig::BlackScholes(params)
            }
            "linear" => {
                let dim = raw.u64_or("dim", 1)? as usize;
                if dim == 0 {
                    return Err(ConfigError::Invalid {
                        key: "dim",
                        reason: "must be at least 1".into(),
                    });
                }
                let slope = raw.f64_or("slope", 1.0)?;
                if slope <= 0.0 {
                    return Err(ConfigError::Invalid {
                        key: "slope",
                        reason: "must be positive".into(),
                    });
                }
                let root = raw.list_opt("root")?.unwrap_or_else(|| vec![0.0; dim]);
                let mut axis = vec![0.0; dim];
                axis[0] = 1.0;
                let bias_direction = raw.list_opt("bias_direction")?.unwrap_or(axis);
                for (key, v) in [("root", &root), ("bias_direction", &bias_direction)] {
                    if v.len() != dim {
                        return Err(ConfigError::Invalid {
                            key,
                            reason: format!("needs {dim} entries"),
                        });
                    }
                }
                ProblemConfig::Linear(LinearConfig {
                    dim,
                    slope,
                    root,
                    bias_direction,
                })
            }
            other => {
                return Err(ConfigError::Value {
                    key: "problem".into(),
                    value: other.into(),
                    expected: "blackscholes or linear",
                })
            }
        };

        let scheme = match raw.get("scheme").ok_or(ConfigError::Missing("scheme"))? {
            "rm" => SchemeKind::Rm,
            "pr" => SchemeKind::Pr,
            "synthetic-rm" => SchemeKind::SyntheticRm,
            "synthetic-pr" => SchemeKind::SyntheticPr,
            other => {
                return Err(ConfigError::Value {
                    key: "scheme".into(),
                    value: other.into(),
                    expected: "rm, pr, synthetic-rm or synthetic-pr",
                })
            }
        };
        match (&problem, scheme.is_synthetic()) {
            (ProblemConfig::Linear(_), false) => {
                return Err(ConfigError::Invalid {
                    key: "scheme",
                    reason: "the linear problem runs with synthetic-rm or synthetic-pr".into(),
                })
            }
            (ProblemConfig::BlackScholes(_), true) => {
                return Err(ConfigError::Invalid {
                    key: "scheme",
                    reason: "synthetic schemes need problem = linear".into(),
                })
            }
            _ => {}
        }

        let gamma0 = raw.expr_opt("gamma0")?.ok_or(ConfigError::Missing("gamma0"))?;
        let schedule = match raw.get("kind").unwrap_or("poly") {
            "poly" => ScheduleConfig::Poly {
                gamma0,
                r1: raw.f64_or("r1", 1.0)?,
                sigma0_sq: raw.f64_or("sigma0_sq", 1.0)?,
                r2: raw.f64_opt("r2")?.ok_or(ConfigError::Missing("r2"))?,
                eps0: raw.f64_or("eps0", 1.0)?,
                rho: raw.f64_opt("rho")?.ok_or(ConfigError::Missing("rho"))?,
                b0: raw.f64_or("b0", 1.0)?,
                r3: raw.f64_or("r3", 0.0)?,
            },
            "exp" => ScheduleConfig::Exp {
                gamma0,
                r1: raw.f64_opt("r1")?.ok_or(ConfigError::Missing("r1"))?,
                decay: raw.f64_opt("decay")?.ok_or(ConfigError::Missing("decay"))?,
                c: raw.f64_or("exp_c", 1.0)?,
            },
            other => {
                return Err(ConfigError::Value {
                    key: "kind".into(),
                    value: other.into(),
                    expected: "poly or exp",
                })
            }
        };

        let projector = match raw.get("projector").unwrap_or("domain") {
            "domain" => ProjectorConfig::Domain,
            "identity" => ProjectorConfig::Identity,
            "box" => ProjectorConfig::Box {
                lo: raw.list_opt("box_lo")?.ok_or(ConfigError::Missing("box_lo"))?,
                hi: raw.list_opt("box_hi")?.ok_or(ConfigError::Missing("box_hi"))?,
            },
            "ball" => ProjectorConfig::Ball {
                center: raw
                    .list_opt("ball_center")?
                    .ok_or(ConfigError::Missing("ball_center"))?,
                radius: raw
                    .f64_opt("ball_radius")?
                    .ok_or(ConfigError::Missing("ball_radius"))?,
            },
            other => {
                return Err(ConfigError::Value {
                    key: "projector".into(),
                    value: other.into(),
                    expected: "domain, identity, box or ball",
                })
            }
        };

        let theta0 = raw.list_opt("theta0")?.ok_or(ConfigError::Missing("theta0"))?;
        if theta0.len() != problem.dim() {
            return Err(ConfigError::Invalid {
                key: "theta0",
                reason: format!("needs {} entries", problem.dim()),
            });
        }

        let checkpoints: Vec<u64> = raw
            .get("checkpoints")
            .unwrap_or("16, 32, 64, 128, 256, 512")
            .split(',')
            .map(|s| parse_u64("checkpoints", s.trim()))
            .collect::<Result<_, _>>()?;
        if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Invalid {
                key: "checkpoints",
                reason: "must be strictly increasing".into(),
            });
        }
        let replications = raw.u64_or("replications", 200)?;
        if replications == 0 {
            return Err(ConfigError::Invalid {
                key: "replications",
                reason: "must be at least 1".into(),
            });
        }

        let p = raw.f64_or("p", 2.0)?;
        if p < 1.0 {
            return Err(ConfigError::Invalid {
                key: "p",
                reason: "must be at least 1".into(),
            });
        }
        let q = raw.f64_opt("q")?;
        if let Some(q) = q {
            if !(q >= 1.0 && q <= p) {
                return Err(ConfigError::Invalid {
                    key: "q",
                    reason: "must lie in [1, p]".into(),
                });
            }
        }
        let eta = raw.f64_or("eta", 0.0)?;
        if eta < 0.0 {
            return Err(ConfigError::Invalid {
                key: "eta",
                reason: "must be nonnegative".into(),
            });
        }
        let sup_k0: Vec<u64> = match raw.get("sup_k0") {
            None => Vec::new(),
            Some(v) => v
                .split(',')
                .map(|s| parse_u64("sup_k0", s.trim()))
                .collect::<Result<_, _>>()?,
        };
        let horizon = *checkpoints.last().expect("nonempty");
        if sup_k0.iter().any(|&k| k == 0 || k > horizon) {
            return Err(ConfigError::Invalid {
                key: "sup_k0",
                reason: format!("entries must lie in [1, {horizon}]"),
            });
        }

        Ok(Self {
            problem,
            scheme,
            schedule,
            projector,
            c: raw.expr_opt("c")?.unwrap_or(Expr::OverLPrime(1.0)),
            theta0,
            checkpoints,
            replications,
            seed: raw.u64_or("seed", 0)?,
            p,
            q,
            eta,
            sup_k0,
            hash: raw.hash(),
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::load(path)?)
    }

    /// Order of the error norm aggregated over replications.
    pub fn norm_order(&self) -> f64 {
        match (self.scheme.is_averaging(), self.q) {
            (true, Some(q)) => q,
            _ => self.p,
        }
    }

    pub fn horizon(&self) -> u64 {
        *self.checkpoints.last().expect("checkpoints are nonempty")
    }
}
