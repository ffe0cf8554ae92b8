//! Log-log least-squares fits of sample cost against accuracy.

use std::collections::BTreeMap;

use samplize_core::estimators::Method;
use serde::Serialize;
use thiserror::Error;

use crate::experiment::TrialRow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 3 distinct epsilon values, found {0}")]
    InsufficientPoints(usize),
    #[error("non-positive value in a log-log fit: ({0}, {1})")]
    NonPositive(f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(ln ε, ln samples)`.
    pub points: Vec<(f64, f64)>,
}

/// OLS of `ln samples = slope · ln ε + intercept`.
pub fn fit_power_law(eps_samples: &[(f64, f64)]) -> Result<ScalingFit, FitError> {
    let distinct: BTreeMap<u64, ()> = eps_samples.iter().map(|(e, _)| (e.to_bits(), ())).collect();
    if distinct.len() < 3 {
        return Err(FitError::InsufficientPoints(distinct.len()));
    }
    let mut points = Vec::with_capacity(eps_samples.len());
    for &(e, s) in eps_samples {
        if !(e > 0.0 && s > 0.0) {
            return Err(FitError::NonPositive(e, s));
        }
        points.push((e.ln(), s.ln()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(ScalingFit { slope, intercept, r_squared, points })
}

fn median(mut v: Vec<u64>) -> f64 {
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] as f64 + v[m] as f64) / 2.0
    }
}

/// Fit of the median `samples_total` per ε over successful rows of `method`.
pub fn fit_scaling(rows: &[TrialRow], method: Method) -> Result<ScalingFit, FitError> {
    let mut by_eps: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == method) {
        if let Some(s) = r.samples_total {
            by_eps.entry(r.epsilon.to_bits()).or_default().push(s);
        }
    }
    let points: Vec<(f64, f64)> = by_eps
        .into_iter()
        .map(|(e, samples)| (f64::from_bits(e), median(samples)))
        .collect();
    fit_power_law(&points)
}
