//! Seeded Monte-Carlo sweeps over accuracy targets.
//!
//! Trial `i` at sweep point `k` uses seed `trial_seed(base, k, i)`, so the
//! rows do not depend on the worker count or on scheduling. For the phase
//! estimation methods the outcome distribution of each sweep point is
//! computed once and every trial samples from it; each trial is still
//! charged its full sample ledger.

use std::time::Instant;

use rayon::prelude::*;
use samplize_core::estimators::{exact_tf, folklore_estimate, Estimate, Method, QpePlan};
use samplize_core::rng::trial_seed;
use samplize_core::samplizer::{CalibrationRecord, Calibrator};
use samplize_core::states::PureState;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};

pub const WORKERS_ENV: &str = "SAMPLIZE_SIM_THREADS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// One CSV row. Estimate fields are empty when the sweep point failed;
/// `status` then carries the reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub method: Method,
    pub x: String,
    pub epsilon: f64,
    pub seed: u64,
    pub t: Option<usize>,
    pub rounds_per_query: Option<u64>,
    #[serde(rename = "T_true")]
    pub t_true: f64,
    #[serde(rename = "F_true")]
    pub f_true: f64,
    #[serde(rename = "T_hat")]
    pub t_hat: Option<f64>,
    #[serde(rename = "F_hat")]
    pub f_hat: Option<f64>,
    #[serde(rename = "err_T")]
    pub err_t: Option<f64>,
    #[serde(rename = "err_F")]
    pub err_f: Option<f64>,
    pub success: Option<bool>,
    pub samples_phi: Option<u64>,
    pub samples_psi: Option<u64>,
    pub samples_total: Option<u64>,
    pub wall_ms: Option<f64>,
    pub status: String,
}

/// Flag, then config, then `SAMPLIZE_SIM_THREADS`, then the CPU count.
pub fn resolve_workers(flag: Option<usize>, cfg: &ExperimentConfig) -> usize {
    flag.or(cfg.workers)
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

enum Point {
    Folklore,
    Plan(QpePlan, f64),
    Failed(String),
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    phi: PureState,
    psi: PureState,
    t_true: f64,
    f_true: f64,
    label: String,
}

impl Context<'_> {
    fn row(&self, eps: f64, seed: u64, est: Result<Estimate, String>, wall_ms: f64) -> TrialRow {
        let mut row = TrialRow {
            method: self.cfg.method,
            x: self.label.clone(),
            epsilon: eps,
            seed,
            t: None,
            rounds_per_query: None,
            t_true: self.t_true,
            f_true: self.f_true,
            t_hat: None,
            f_hat: None,
            err_t: None,
            err_f: None,
            success: None,
            samples_phi: None,
            samples_psi: None,
            samples_total: None,
            wall_ms: self.cfg.record_timing.then_some(wall_ms),
            status: "ok".into(),
        };
        match est {
            Ok(e) => {
                let (err_t, err_f) = ((e.t_hat - self.t_true).abs(), (e.f_hat - self.f_true).abs());
                row.t = e.t;
                row.rounds_per_query = e.rounds_per_query;
                row.t_hat = Some(e.t_hat);
                row.f_hat = Some(e.f_hat);
                row.err_t = Some(err_t);
                row.err_f = Some(err_f);
                row.success = Some(err_t <= eps && err_f <= eps);
                row.samples_phi = Some(e.ledger.oracle(1) + e.ledger.input_copies);
                row.samples_psi = Some(e.ledger.oracle(2));
                row.samples_total = Some(e.ledger.total());
            }
            Err(msg) => row.status = format!("error: {msg}"),
        }
        row
    }
}

/// Rows ordered by (sweep point, trial), plus the round calibrations used.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub rows: Vec<TrialRow>,
    pub calibrations: Vec<CalibrationRecord>,
}

/// Runs every trial of `cfg` on a pool of `workers` threads.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput, RunError> {
    cfg.validate()?;
    let calibrator = Calibrator::new(cfg.r_cap);
    let calibrator = &calibrator;
    let (phi, psi) = cfg.pair.states()?;
    let (t_true, f_true) = exact_tf(&phi, &psi).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let ctx = Context { cfg, phi, psi, t_true, f_true, label: cfg.pair.label() };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;

    let rows = pool.install(|| {
        let points: Vec<Point> = cfg
            .epsilons
            .par_iter()
            .map(|&eps| {
                let start = Instant::now();
                let plan = match cfg.method {
                    Method::Folklore => return Point::Folklore,
                    Method::Query => QpePlan::query(&ctx.phi, &ctx.psi, cfg.eps_fail, eps),
                    Method::Samplized => QpePlan::samplized(&ctx.phi, &ctx.psi, eps, calibrator),
                };
                match plan {
                    Ok(p) => Point::Plan(p, start.elapsed().as_secs_f64() * 1e3),
                    Err(e) => Point::Failed(e.to_string()),
                }
            })
            .collect();

        let jobs: Vec<(usize, u64)> = (0..cfg.epsilons.len())
            .flat_map(|k| (0..cfg.trials).map(move |i| (k, i)))
            .collect();
        jobs.par_iter()
            .map(|&(k, i)| {
                let eps = cfg.epsilons[k];
                let seed = trial_seed(cfg.seed, k as u64, i);
                let start = Instant::now();
                let (est, shared_ms) = match &points[k] {
                    Point::Folklore => (folklore_estimate(&ctx.phi, &ctx.psi, eps, seed).map_err(|e| e.to_string()), 0.0),
                    Point::Plan(plan, ms) => (Ok(plan.sample(seed)), *ms),
                    Point::Failed(msg) => (Err(msg.clone()), 0.0),
                };
                ctx.row(eps, seed, est, shared_ms + start.elapsed().as_secs_f64() * 1e3)
            })
            .collect()
    });
    Ok(ExperimentOutput { rows, calibrations: calibrator.records() })
}
