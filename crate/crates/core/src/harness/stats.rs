//! Log-log rate fits and tail-supremum errors.

use thiserror::Error;

use crate::drivers::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("a rate fit needs at least 3 points (got {0})")]
    TooFewPoints(usize),
    #[error("rate fits need positive values (got ({0}, {1}))")]
    NonPositive(f64, f64),
    #[error("the trajectory has no error record (unknown root)")]
    MissingRoot,
    #[error("k0 = {k0} outside the recorded horizon 1..={horizon}")]
    TailStart { k0: u64, horizon: u64 },
    #[error("eta must be nonnegative (got {0})")]
    Eta(f64),
}

/// Ordinary least squares line through (log₂ n, log₂ y).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual, in log₂ units.
    pub max_residual: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, StatsError> {
    if points.len() < 3 {
        return Err(StatsError::TooFewPoints(points.len()));
    }
    if let Some(&(n, y)) = points.iter().find(|(n, y)| !(*n > 0.0 && *y > 0.0)) {
        return Err(StatsError::NonPositive(n, y));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| y.log2()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        slope,
        intercept,
        max_residual,
    })
}

/// max_{k0 ≤ k ≤ horizon} k^η · error_k over the reported errors.
pub fn sup_error(traj: &Trajectory, k0: u64, eta: f64) -> Result<f64, StatsError> {
    let errors = traj.reported_errors().ok_or(StatsError::MissingRoot)?;
    let horizon = errors.len() as u64 - 1;
    if k0 == 0 || k0 > horizon {
        return Err(StatsError::TailStart { k0, horizon });
    }
    if !(eta >= 0.0) {
        return Err(StatsError::Eta(eta));
    }
    Ok(errors[k0 as usize..]
        .iter()
        .enumerate()
        .map(|(i, e)| ((k0 + i as u64) as f64).powf(eta) * e)
        .fold(0.0, f64::max))
}
