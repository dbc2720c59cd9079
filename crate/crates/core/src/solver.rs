//! Noiseless nuclear-norm minimization `min ‖X‖_*  s.t.  A vec(X) = y`.
//!
//! Douglas-Rachford splitting (scaled ADMM) between the nuclear-norm prox and
//! the exact projection onto the affine constraint set. The projection uses a
//! thin QR factorization of `Aᵀ`, computed once per problem.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float;

use crate::ensembles::{vec_row_major, ProblemInstance};
use crate::error::{domain, Error, Result};
use crate::minimax::Ensemble;
use crate::svt::{psd_threshold, soft_threshold};

/// Extra constraint on the unknown matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    None,
    /// Symmetric positive semidefinite (square matrices only).
    Psd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on `‖A vec(X̂) - y‖ / ‖y‖` and, for PSD problems, on the
    /// relative distance between the prox and projection iterates.
    pub feasibility_tol: f64,
    /// Bound on the relative duality gap.
    pub objective_tol: f64,
    pub max_iters: usize,
    /// Initial prox step.
    pub step: f64,
    /// Rebalance the step from the primal/dual residual ratio.
    pub adaptive_step: bool,
    /// Record `‖X‖_*` at every convergence check.
    pub record_objective: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            objective_tol: 1e-6,
            max_iters: 20_000,
            step: 1.0,
            adaptive_step: true,
            record_objective: false,
        }
    }
}

const CHECK_EVERY: usize = 10;
const RANK_TOL: f64 = 1e-10;

/// A dense recovery problem. `a` acts on the row-major vectorization of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryProblem {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub rows: usize,
    pub cols: usize,
    pub constraint: Constraint,
    pub options: SolverOptions,
}

impl RecoveryProblem {
    pub fn new(a: DMatrix<f64>, y: DVector<f64>, rows: usize, cols: usize, constraint: Constraint) -> Result<Self> {
        let p = Self { a, y, rows, cols, constraint, options: SolverOptions::default() };
        p.validate()?;
        Ok(p)
    }

    /// Problem posed by an instance; symmetric instances get the PSD constraint.
    pub fn from_instance(inst: &ProblemInstance) -> Self {
        let constraint = match inst.spec.class {
            Ensemble::Mat => Constraint::None,
            Ensemble::Sym => Constraint::Psd,
        };
        Self {
            a: inst.a.clone(),
            y: inst.y.clone(),
            rows: inst.spec.rows,
            cols: inst.spec.cols,
            constraint,
            options: SolverOptions::default(),
        }
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    fn validate(&self) -> Result<()> {
        let p = self.rows * self.cols;
        if p == 0 || self.a.ncols() != p {
            return Err(Error::InvalidGeometry(alloc::format!(
                "operator has {} columns, expected {}",
                self.a.ncols(),
                p
            )));
        }
        if self.a.nrows() != self.y.len() {
            return Err(Error::InvalidGeometry("operator rows differ from measurement count".into()));
        }
        if self.a.nrows() == 0 || self.a.nrows() > p {
            return Err(Error::InvalidGeometry(alloc::format!("need 1 <= n <= {p}, got {}", self.a.nrows())));
        }
        if self.constraint == Constraint::Psd && self.rows != self.cols {
            return Err(Error::InvalidGeometry("PSD constraint requires a square matrix".into()));
        }
        if !(self.options.step > 0.0) {
            return Err(domain("step must be positive"));
        }
        Ok(())
    }
}

/// Outcome of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: DMatrix<f64>,
    /// `‖A vec(X̂) - y‖ / ‖y‖`.
    pub feasibility: f64,
    /// `‖X̂‖_*`.
    pub objective: f64,
    /// Last relative duality gap observed.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// Projection onto `{x : A_c x = y}` where `A_c` is `A` with columns reordered
/// for column-major storage. With `Aᵀ_c = Q R`, `proj(v) = v - Q Qᵀ v + Q R⁻ᵀ y`.
pub struct AffineProjector {
    q: DMatrix<f64>,
    /// `R⁻ᵀ y`.
    z: DVector<f64>,
    x_ls: DVector<f64>,
    scratch: DVector<f64>,
}

impl AffineProjector {
    pub fn new(a_row_major: &DMatrix<f64>, y: &DVector<f64>, rows: usize, cols: usize) -> Result<Self> {
        let n = a_row_major.nrows();
        // column j*rows + i of Aᵀ_c is column i*cols + j of A
        let at = DMatrix::from_fn(rows * cols, n, |k, m| {
            let (i, j) = (k % rows, k / rows);
            a_row_major[(m, i * cols + j)]
        });
        let qr = at.qr();
        let r = qr.r();
        let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(diag_max > 0.0) || r.diagonal().iter().any(|v| v.abs() < RANK_TOL * diag_max) {
            return Err(Error::RankDeficientOperator);
        }
        let q = qr.q();
        let z = r.transpose().solve_lower_triangular(y).ok_or(Error::RankDeficientOperator)?;
        let x_ls = &q * &z;
        Ok(Self { scratch: DVector::zeros(n), q, z, x_ls })
    }

    /// Minimum-norm feasible point (column-major).
    pub fn least_squares(&self) -> &DVector<f64> {
        &self.x_ls
    }

    /// Projects `v` (column-major) in place.
    pub fn project(&mut self, v: &mut DVector<f64>) {
        self.scratch.gemv_tr(1.0, &self.q, v, 0.0);
        v.gemv(-1.0, &self.q, &self.scratch, 1.0);
        *v += &self.x_ls;
    }

    /// Projects `g` onto the row space of `A` in place; returns `(R⁻ᵀy)ᵀ Qᵀ g`,
    /// which equals `yᵀ w` for the `w` with `Aᵀ w` equal to the projection.
    fn row_space(&mut self, g: &mut DVector<f64>) -> f64 {
        self.scratch.gemv_tr(1.0, &self.q, g, 0.0);
        g.gemv(1.0, &self.q, &self.scratch, 0.0);
        self.z.dot(&self.scratch)
    }
}

/// Relative residual `‖A vec(X) - y‖ / ‖y‖` and nuclear norm of `X`.
pub fn certify(problem: &RecoveryProblem, x: &DMatrix<f64>) -> (f64, f64) {
    let r = &problem.a * vec_row_major(x) - &problem.y;
    let ny = problem.y.norm();
    let feas = if ny > 0.0 { r.norm() / ny } else { r.norm() };
    (feas, crate::svt::nuclear_norm(x))
}

/// Solves `problem`; reports non-convergence instead of failing.
pub fn run(problem: &RecoveryProblem) -> Result<SolveReport> {
    problem.validate()?;
    let (m, n_cols) = (problem.rows, problem.cols);
    let opts = problem.options;
    let mut proj = AffineProjector::new(&problem.a, &problem.y, m, n_cols)?;
    let to_mat = |v: &DVector<f64>| DMatrix::from_column_slice(m, n_cols, v.as_slice());
    let finish = |x: DMatrix<f64>, gap: f64, iterations: usize, converged: bool, trace: Vec<f64>| {
        let (feasibility, objective) = certify(problem, &x);
        SolveReport { x, feasibility, objective, gap, iterations, converged, objective_trace: trace }
    };

    if problem.y.norm() == 0.0 {
        return Ok(finish(DMatrix::zeros(m, n_cols), 0.0, 0, true, Vec::new()));
    }
    if problem.a.nrows() == m * n_cols {
        let x = to_mat(proj.least_squares());
        return Ok(finish(x, 0.0, 0, true, Vec::new()));
    }

    let psd = problem.constraint == Constraint::Psd;
    let mut tau = opts.step;
    let mut z = proj.least_squares().clone();
    let mut u = DVector::zeros(z.len());
    let mut z_prev = z.clone();
    let mut work = DVector::zeros(z.len());
    let mut trace = Vec::new();
    let mut gap = f64::INFINITY;

    for it in 1..=opts.max_iters {
        // X = prox_τ(Z - U)
        work.copy_from(&z);
        work -= &u;
        let v = to_mat(&work);
        let x_mat = if psd { psd_threshold(&v, tau).0 } else { soft_threshold(&v, tau)?.0 };
        // Z = Π(X + U), U += X - Z
        z_prev.copy_from(&z);
        z.copy_from_slice(x_mat.as_slice());
        z += &u;
        proj.project(&mut z);
        for ((ui, &xi), &zi) in u.iter_mut().zip(x_mat.as_slice()).zip(z.iter()) {
            *ui += xi - zi;
        }

        if it % CHECK_EVERY != 0 {
            continue;
        }
        let z_norm = z.norm();
        let primal_res = x_mat.as_slice().iter().zip(z.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let dual_res = z.metric_distance(&z_prev) / tau;

        let z_mat = to_mat(&z);
        let objective = crate::svt::nuclear_norm(&z_mat);
        if opts.record_objective {
            trace.push(objective);
        }
        work.copy_from(&u);
        work /= -tau;
        let raw_dual = proj.row_space(&mut work);
        let g = to_mat(&work);
        let scale = if psd {
            ((&g + g.transpose()) * 0.5).symmetric_eigenvalues().max()
        } else {
            g.singular_values().max()
        };
        if scale > 0.0 {
            let dual = raw_dual / scale;
            gap = (objective - dual) / objective.max(f64::MIN_POSITIVE);
        }
        let res_tol = if psd { opts.feasibility_tol } else { opts.objective_tol };
        if gap <= opts.objective_tol && primal_res <= res_tol * z_norm {
            let report = finish(z_mat, gap, it, false, trace);
            let converged = report.feasibility <= opts.feasibility_tol;
            return Ok(SolveReport { converged, ..report });
        }
        if opts.adaptive_step {
            if primal_res > 10.0 * dual_res {
                tau /= 2.0;
                u /= 2.0;
            } else if dual_res > 10.0 * primal_res {
                tau *= 2.0;
                u *= 2.0;
            }
        }
    }
    Ok(finish(to_mat(&z), gap, opts.max_iters, false, trace))
}

/// Solves `problem`, failing with [`Error::NonConvergence`] when the
/// tolerances are not met within the iteration budget.
pub fn solve(problem: &RecoveryProblem) -> Result<SolveReport> {
    let report = run(problem)?;
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NonConvergence {
            iterations: report.iterations,
            feasibility: report.feasibility,
            gap: report.gap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{gaussian_matrix, make_instance, EnsembleSpec, Measurement};
    use crate::rng::{stream, StreamTag};

    fn spec(class: Ensemble, n: usize, r: usize, meas: usize, trial: u64) -> EnsembleSpec {
        EnsembleSpec {
            class,
            measurement: Measurement::Gaussian,
            rows: n,
            cols: n,
            rank: r,
            measurements: meas,
            seed: 2024,
            trial,
        }
    }

    fn rel_err(x: &DMatrix<f64>, x0: &DMatrix<f64>) -> f64 {
        (x - x0).norm() / x0.norm()
    }

    #[test]
    fn fully_determined_returns_unique_point() {
        let inst = make_instance(&spec(Ensemble::Mat, 4, 2, 16, 0)).unwrap();
        let rep = solve(&RecoveryProblem::from_instance(&inst)).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rel_err(&rep.x, &inst.x0) < 1e-10);
    }

    #[test]
    fn projection_is_idempotent() {
        let inst = make_instance(&spec(Ensemble::Mat, 6, 2, 20, 1)).unwrap();
        let mut proj = AffineProjector::new(&inst.a, &inst.y, 6, 6).unwrap();
        let mut v = DVector::from_iterator(36, gaussian_matrix(36, 1, &mut stream(3, 0, StreamTag::Noise)).iter().cloned());
        proj.project(&mut v);
        let once = v.clone();
        proj.project(&mut v);
        assert!((v - &once).norm() <= 1e-10);
        let x = DMatrix::from_column_slice(6, 6, once.as_slice());
        let prob = RecoveryProblem::from_instance(&inst);
        assert!(certify(&prob, &x).0 < 1e-12);
    }

    #[test]
    fn certify_examples() {
        let inst = make_instance(&spec(Ensemble::Mat, 5, 1, 12, 2)).unwrap();
        let prob = RecoveryProblem::from_instance(&inst);
        let (feas, obj) = certify(&prob, &inst.x0);
        assert!(feas < 1e-12);
        assert!((obj - 1.0).abs() < 1e-12);
        assert_eq!(certify(&prob, &DMatrix::zeros(5, 5)).0, 1.0);
    }

    #[test]
    fn rank_deficient_operator_detected() {
        let mut a = DMatrix::from_fn(3, 4, |i, j| (i + j) as f64);
        let first = a.row(0).clone_owned();
        a.row_mut(2).copy_from(&first);
        let p = RecoveryProblem::new(a, DVector::from_element(3, 1.0), 2, 2, Constraint::None).unwrap();
        assert_eq!(run(&p).unwrap_err(), Error::RankDeficientOperator);
    }

    #[test]
    fn zero_measurements_give_zero() {
        let a = DMatrix::from_fn(2, 4, |i, j| (i * 4 + j + 1) as f64);
        let p = RecoveryProblem::new(a, DVector::zeros(2), 2, 2, Constraint::None).unwrap();
        assert_eq!(solve(&p).unwrap().x, DMatrix::zeros(2, 2));
    }

    #[test]
    fn invalid_problems() {
        let a = DMatrix::zeros(3, 6);
        assert!(RecoveryProblem::new(a.clone(), DVector::zeros(3), 2, 2, Constraint::None).is_err());
        assert!(RecoveryProblem::new(a, DVector::zeros(3), 2, 3, Constraint::Psd).is_err());
    }

    #[test]
    fn success_side_recovers() {
        let mut ok = 0;
        for t in 0..20 {
            let inst = make_instance(&spec(Ensemble::Mat, 20, 2, 164, t)).unwrap();
            let rep = run(&RecoveryProblem::from_instance(&inst)).unwrap();
            if rep.converged && rel_err(&rep.x, &inst.x0) < 1e-3 {
                assert!(rep.objective <= crate::svt::nuclear_norm(&inst.x0) * (1.0 + 1e-6));
                ok += 1;
            }
        }
        assert!(ok >= 18, "{ok}/20");
    }

    #[test]
    fn failure_side_does_not_recover() {
        let mut fail = 0;
        for t in 0..20 {
            let inst = make_instance(&spec(Ensemble::Mat, 20, 2, 116, 100 + t)).unwrap();
            let rep = run(&RecoveryProblem::from_instance(&inst)).unwrap();
            if !(rep.converged && rel_err(&rep.x, &inst.x0) < 1e-3) {
                fail += 1;
            }
        }
        assert!(fail >= 18, "{fail}/20");
    }

    #[test]
    fn objective_trend_is_non_increasing() {
        let inst = make_instance(&spec(Ensemble::Mat, 12, 2, 70, 5)).unwrap();
        let opts = SolverOptions { record_objective: true, ..SolverOptions::default() };
        let rep = run(&RecoveryProblem::from_instance(&inst).with_options(opts)).unwrap();
        assert!(rep.converged);
        let tr = &rep.objective_trace;
        let burn = tr.len() / 4;
        // compare block minima so that the splitting's oscillations average out
        let blocks: Vec<f64> = tr[burn..].chunks(5).map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min)).collect();
        for w in blocks.windows(2) {
            assert!(w[1] <= w[0] + 1e-6 * w[0], "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn psd_solution_is_psd_and_recovers() {
        let inst = make_instance(&spec(Ensemble::Sym, 12, 1, 40, 7)).unwrap();
        let rep = solve(&RecoveryProblem::from_instance(&inst)).unwrap();
        let eig = ((&rep.x + rep.x.transpose()) * 0.5).symmetric_eigenvalues();
        assert!(eig.min() >= -1e-8, "{}", eig.min());
        assert!(rel_err(&rep.x, &inst.x0) < 1e-3);
    }
}
