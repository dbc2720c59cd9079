//! Worker pool and the parallel drivers for experiments and denoising runs.
//!
//! Results are collected in job order and reduced sequentially, so output is
//! identical for every worker count.

use rayon::prelude::*;
use rayon::ThreadPool;

use nucpt_core::harness::{aggregate, run_trial, ExperimentPlan, SuccessCurvePoint, TrialRecord};
use nucpt_core::solver::SolverOptions;
use nucpt_core::svt::{golden_section, DenoiseConfig, DenoiseTrial};
use nucpt_core::Result;

/// Builds a pool with `workers` threads; `None` means one per logical core.
pub fn pool(workers: Option<usize>) -> std::result::Result<ThreadPool, rayon::ThreadPoolBuildError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build()
}

/// Runs all trials of `plan` on `pool`. Records come back in log order.
pub fn run_experiment(
    pool: &ThreadPool,
    plan: &ExperimentPlan,
    seed: u64,
    options: &SolverOptions,
) -> Result<(Vec<TrialRecord>, Vec<SuccessCurvePoint>)> {
    let jobs: Vec<(usize, usize)> = plan.jobs().collect();
    let records = pool.install(|| {
        jobs.par_iter()
            .map(|&(g, t)| run_trial(plan, g, t, seed, options))
            .collect::<Result<Vec<_>>>()
    })?;
    let points = aggregate(&records, plan.dim);
    Ok((records, points))
}

/// Factorized trials of a denoising experiment, generated in parallel.
pub struct DenoiseRun {
    trials: Vec<DenoiseTrial>,
}

/// Result of a denoising Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseSummary {
    pub lambda: f64,
    pub mse: f64,
}

impl DenoiseRun {
    pub fn generate(pool: &ThreadPool, cfg: &DenoiseConfig) -> Result<Self> {
        cfg.validate()?;
        let trials = pool.install(|| {
            (0..cfg.trials as u64)
                .into_par_iter()
                .map(|i| DenoiseTrial::generate(cfg, i))
                .collect::<Result<Vec<_>>>()
        })?;
        Ok(Self { trials })
    }

    /// Mean normalized error at `lambda`.
    pub fn mse(&self, pool: &ThreadPool, lambda: f64) -> f64 {
        let errs: Vec<f64> = pool.install(|| self.trials.par_iter().map(|t| t.normalized_error(lambda)).collect());
        errs.iter().sum::<f64>() / errs.len() as f64
    }

    /// Golden-section tuning over `[0, 3√N]` to resolution `1e-2·√N`.
    pub fn tune(&self, pool: &ThreadPool, cols: usize) -> DenoiseSummary {
        let root = (cols as f64).sqrt();
        let (lambda, mse) = golden_section(|l| self.mse(pool, l), 0.0, 3.0 * root, 1e-2 * root);
        DenoiseSummary { lambda, mse }
    }
}
