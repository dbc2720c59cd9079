//! Phase-transition experiments: δ-grids around the predicted transition,
//! Monte Carlo trials and success-curve aggregation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float;

use crate::ensembles::{class_dim, make_instance, EnsembleSpec, Measurement};
use crate::error::{domain, Error, Result};
use crate::minimax::{minimax_mse, CurveQuery, Ensemble};
use crate::rng::trial_index;
use crate::solver::{run, RecoveryProblem, SolverOptions};

/// Inputs to [`plan_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlanSpec {
    pub class: Ensemble,
    pub measurement: Measurement,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub trials: usize,
    /// Half-width of the δ-window.
    pub window: f64,
    pub points: usize,
    /// Grid center; defaults to the minimax curve value.
    pub center: Option<f64>,
    pub success_tol: f64,
    pub project: String,
    pub experiment: String,
}

impl PlanSpec {
    pub fn new(class: Ensemble, measurement: Measurement, rows: usize, cols: usize, rank: usize) -> Self {
        Self {
            class,
            measurement,
            rows,
            cols,
            rank,
            trials: 20,
            window: 0.05,
            points: 13,
            center: None,
            success_tol: 1e-3,
            project: "NUCPT".to_string(),
            experiment: "PT".to_string(),
        }
    }
}

/// One δ-grid point with its resolved measurement count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    /// Equispaced target value.
    pub target: f64,
    pub n: usize,
    /// Realized `n / dim`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub spec: PlanSpec,
    /// Rank fraction `r / min(M, N)`.
    pub rho: f64,
    /// Aspect ratio `min(M, N) / max(M, N)`.
    pub beta: f64,
    /// Predicted transition `M(ρ, β)`.
    pub m_rho: f64,
    pub dim: usize,
    pub grid: Vec<GridPoint>,
}

impl ExperimentPlan {
    /// All `(grid index, trial)` pairs in log order.
    pub fn jobs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let t = self.spec.trials;
        (0..self.grid.len()).flat_map(move |g| (0..t).map(move |k| (g, k)))
    }

    pub fn total_trials(&self) -> usize {
        self.grid.len() * self.spec.trials
    }

    /// Ensemble spec for one trial under `seed`.
    pub fn instance_spec(&self, grid: usize, trial: usize, seed: u64) -> EnsembleSpec {
        let s = &self.spec;
        EnsembleSpec {
            class: s.class,
            measurement: s.measurement,
            rows: s.rows,
            cols: s.cols,
            rank: s.rank,
            measurements: self.grid[grid].n,
            seed,
            trial: trial_index(grid, trial),
        }
    }
}

/// Round-half-up of `x ≥ 0`.
fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Resolves the δ-grid and the per-point measurement counts.
pub fn plan_experiment(spec: &PlanSpec) -> Result<ExperimentPlan> {
    let (lo, hi) = (spec.rows.min(spec.cols), spec.rows.max(spec.cols));
    if lo == 0 {
        return Err(Error::InvalidGeometry("matrix dimensions must be positive".into()));
    }
    if spec.rank > lo {
        return Err(Error::InvalidGeometry(alloc::format!("rank {} exceeds min({}, {})", spec.rank, spec.rows, spec.cols)));
    }
    if spec.class == Ensemble::Sym && spec.rows != spec.cols {
        return Err(Error::InvalidGeometry("symmetric class requires M = N".into()));
    }
    if spec.trials == 0 || spec.points == 0 {
        return Err(domain("need at least one trial and one grid point"));
    }
    if !(spec.window >= 0.0) || !(spec.success_tol > 0.0) {
        return Err(domain("window must be nonnegative and success tolerance positive"));
    }
    let rho = spec.rank as f64 / lo as f64;
    let beta = lo as f64 / hi as f64;
    let query = match spec.class {
        Ensemble::Mat => CurveQuery::mat(rho, beta)?,
        Ensemble::Sym => CurveQuery::sym(rho)?,
    };
    let m_rho = minimax_mse(&query)?;
    let center = spec.center.unwrap_or(m_rho);
    let dim = class_dim(spec.class, spec.rows, spec.cols);
    let max_n = spec.rows * spec.cols;
    let grid = (0..spec.points)
        .map(|i| {
            if spec.points == 1 {
                center
            } else {
                center - spec.window + 2.0 * spec.window * i as f64 / (spec.points - 1) as f64
            }
        })
        .filter(|&d| d > 0.0 && d <= 1.0)
        .map(|target| {
            let n = round_half_up(target * dim as f64).clamp(1, max_n);
            GridPoint { target, n, delta: n as f64 / dim as f64 }
        })
        .collect::<Vec<_>>();
    if grid.is_empty() {
        return Err(domain("δ-grid lies entirely outside (0, 1]"));
    }
    Ok(ExperimentPlan { spec: spec.clone(), rho, beta, m_rho, dim, grid })
}

/// One Monte Carlo outcome, field-for-field as in the trial log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub line: usize,
    pub project: String,
    pub experiment: String,
    pub rows: usize,
    pub cols: usize,
    pub stack: usize,
    pub instance: String,
    pub rank: usize,
    pub rho: f64,
    pub delta: f64,
    /// `‖X̂ - X0‖_F / √(MN)`.
    pub err0: f64,
    /// 1 iff `‖X̂ - X0‖_F / ‖X0‖_F < tol`.
    pub err1: u8,
    /// Fraction of entries with `|X̂_ij - X0_ij| < tol`.
    pub err2: f64,
}

/// Instance code of trial `k`: `a`..`t`, then `aa`, `ab`, …
pub fn instance_code(k: usize) -> String {
    let letter = |i: usize| (b'a' + i as u8) as char;
    if k < 20 {
        letter(k).to_string()
    } else {
        let j = k - 20;
        let mut s = String::new();
        s.push(letter((j / 26) % 26));
        s.push(letter(j % 26));
        s
    }
}

/// Error fields of a reconstruction against the ground truth.
pub fn score(x_hat: &nalgebra::DMatrix<f64>, x0: &nalgebra::DMatrix<f64>, tol: f64) -> (f64, u8, f64) {
    let diff = x_hat - x0;
    let fro = diff.norm();
    let count = diff.len() as f64;
    let err0 = fro / count.sqrt();
    let x0_norm = x0.norm();
    let rel = if x0_norm > 0.0 { fro / x0_norm } else { fro };
    let err1 = u8::from(rel < tol);
    let err2 = diff.iter().filter(|v| v.abs() < tol).count() as f64 / count;
    (err0, err1, err2)
}

/// Generates, solves and scores one trial. Solver non-convergence counts as failure.
pub fn run_trial(plan: &ExperimentPlan, grid: usize, trial: usize, seed: u64, options: &SolverOptions) -> Result<TrialRecord> {
    let spec = plan.instance_spec(grid, trial, seed);
    let inst = make_instance(&spec)?;
    let report = run(&RecoveryProblem::from_instance(&inst).with_options(*options))?;
    let (err0, mut err1, err2) = score(&report.x, &inst.x0, plan.spec.success_tol);
    if !report.converged {
        err1 = 0;
    }
    let s = &plan.spec;
    Ok(TrialRecord {
        line: grid * s.trials + trial + 1,
        project: s.project.clone(),
        experiment: s.experiment.clone(),
        rows: s.rows,
        cols: s.cols,
        stack: 1,
        instance: instance_code(trial),
        rank: s.rank,
        rho: plan.rho,
        delta: plan.grid[grid].delta,
        err0,
        err1,
        err2,
    })
}

/// Aggregated outcomes at one δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessCurvePoint {
    pub rho: f64,
    pub delta: f64,
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub pi_hat: f64,
}

/// Groups records by δ (in order of first appearance) and counts successes.
/// `dim` converts δ back to `n`.
pub fn aggregate(records: &[TrialRecord], dim: usize) -> Vec<SuccessCurvePoint> {
    let mut out: Vec<SuccessCurvePoint> = Vec::new();
    for r in records {
        let idx = match out.iter().position(|p| p.delta == r.delta && p.rho == r.rho) {
            Some(i) => i,
            None => {
                out.push(SuccessCurvePoint {
                    rho: r.rho,
                    delta: r.delta,
                    n: round_half_up(r.delta * dim as f64),
                    trials: 0,
                    successes: 0,
                    pi_hat: 0.0,
                });
                out.len() - 1
            }
        };
        out[idx].trials += 1;
        out[idx].successes += r.err1 as usize;
    }
    for p in &mut out {
        p.pi_hat = p.successes as f64 / p.trials as f64;
    }
    out
}

/// Runs every trial of `plan` sequentially.
pub fn run_experiment(
    plan: &ExperimentPlan,
    seed: u64,
    options: &SolverOptions,
) -> Result<(Vec<TrialRecord>, Vec<SuccessCurvePoint>)> {
    let records = plan
        .jobs()
        .map(|(g, t)| run_trial(plan, g, t, seed, options))
        .collect::<Result<Vec<_>>>()?;
    let points = aggregate(&records, plan.dim);
    Ok((records, points))
}

/// Pooled success fractions over the lower and upper halves of a δ-sorted curve
/// (the middle point of an odd grid is left out).
pub fn half_grid_rates(points: &[SuccessCurvePoint]) -> (f64, f64) {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let half = sorted.len() / 2;
    let rate = |ps: &[SuccessCurvePoint]| {
        let t: usize = ps.iter().map(|p| p.trials).sum();
        let s: usize = ps.iter().map(|p| p.successes).sum();
        if t == 0 {
            0.0
        } else {
            s as f64 / t as f64
        }
    };
    (rate(&sorted[..half]), rate(&sorted[sorted.len() - half..]))
}
