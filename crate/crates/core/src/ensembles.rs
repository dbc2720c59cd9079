//! Random low-rank signals, measurement operators and problem instances.

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::minimax::Ensemble;
use crate::rng::{stream, StreamTag};

/// Distribution of the measurement matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measurement {
    /// `A_ij ~ N(0, 1/n)`.
    Gaussian,
    /// `A_ij = ±1/√n` with equal probability.
    Rademacher,
}

/// Everything needed to regenerate one problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleSpec {
    pub class: Ensemble,
    pub measurement: Measurement,
    /// Rows `M` of the signal.
    pub rows: usize,
    /// Columns `N` of the signal.
    pub cols: usize,
    pub rank: usize,
    /// Number of linear measurements `n`.
    pub measurements: usize,
    pub seed: u64,
    /// Stream index of this instance under `seed`.
    pub trial: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidGeometry("matrix dimensions must be positive".into()));
        }
        if self.rank > self.rows.min(self.cols) {
            return Err(Error::InvalidGeometry(alloc::format!(
                "rank {} exceeds min({}, {})",
                self.rank,
                self.rows,
                self.cols
            )));
        }
        if self.class == Ensemble::Sym && self.rows != self.cols {
            return Err(Error::InvalidGeometry("symmetric class requires M = N".into()));
        }
        if self.measurements == 0 || self.measurements > self.rows * self.cols {
            return Err(Error::InvalidGeometry(alloc::format!(
                "measurement count {} outside [1, {}]",
                self.measurements,
                self.rows * self.cols
            )));
        }
        Ok(())
    }

    /// Dimension of the matrix class: `MN`, or `N(N+1)/2` for symmetric matrices.
    pub fn class_dim(&self) -> usize {
        class_dim(self.class, self.rows, self.cols)
    }

    /// Undersampling fraction `n / dim`.
    pub fn delta(&self) -> f64 {
        self.measurements as f64 / self.class_dim() as f64
    }

    /// Rank fraction `r / M` (`M ≤ N`).
    pub fn rho(&self) -> f64 {
        self.rank as f64 / self.rows.min(self.cols) as f64
    }
}

pub fn class_dim(class: Ensemble, rows: usize, cols: usize) -> usize {
    match class {
        Ensemble::Mat => rows * cols,
        Ensemble::Sym => cols * (cols + 1) / 2,
    }
}

/// Ground truth, operator and measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub x0: DMatrix<f64>,
    /// `n × MN` operator acting on the row-major vectorization of `X`.
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub spec: EnsembleSpec,
}

/// Draws a Haar-distributed `n × r` matrix with orthonormal columns
/// (QR of a Gaussian matrix, columns sign-fixed so that `diag(R) > 0`).
pub fn sample_stiefel<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(r <= n, "Stiefel factor needs r <= n");
    if r == 0 {
        return DMatrix::zeros(n, 0);
    }
    let g = gaussian_matrix(n, r, rng);
    let qr = g.qr();
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, d) in r_diag.iter().enumerate() {
        if *d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub(crate) fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Low-rank ground truth for `spec`: `U Vᵀ` or `U Uᵀ`, unit singular values.
pub fn make_signal(spec: &EnsembleSpec) -> DMatrix<f64> {
    let mut left = stream(spec.seed, spec.trial, StreamTag::LeftFactor);
    let u = sample_stiefel(spec.rows, spec.rank, &mut left);
    match spec.class {
        Ensemble::Mat => {
            let mut right = stream(spec.seed, spec.trial, StreamTag::RightFactor);
            let v = sample_stiefel(spec.cols, spec.rank, &mut right);
            &u * v.transpose()
        }
        Ensemble::Sym => {
            let mut x = &u * u.transpose();
            // exact symmetry against rounding in the product
            x = (&x + x.transpose()) * 0.5;
            x
        }
    }
}

/// Measurement matrix `n × MN` for `spec`.
pub fn make_operator(spec: &EnsembleSpec) -> DMatrix<f64> {
    let n = spec.measurements;
    let mn = spec.rows * spec.cols;
    let mut rng = stream(spec.seed, spec.trial, StreamTag::Measurement);
    let scale = 1.0 / (n as f64).sqrt();
    match spec.measurement {
        Measurement::Gaussian => gaussian_matrix(n, mn, &mut rng) * scale,
        Measurement::Rademacher => {
            DMatrix::from_fn(n, mn, |_, _| if rng.random::<bool>() { scale } else { -scale })
        }
    }
}

/// Builds the full instance `(X0, A, y = A vec(X0))`.
pub fn make_instance(spec: &EnsembleSpec) -> Result<ProblemInstance> {
    spec.validate()?;
    let x0 = make_signal(spec);
    let a = make_operator(spec);
    let y = &a * vec_row_major(&x0);
    Ok(ProblemInstance { x0, a, y, spec: *spec })
}

/// Row-major vectorization `vec(X)_{iN + j} = X_ij`.
pub fn vec_row_major(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_vec(x.transpose().as_slice().to_vec())
}

/// Inverse of [`vec_row_major`].
pub fn unvec_row_major(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), rows * cols);
    DMatrix::from_row_slice(rows, cols, v)
}

/// Numerical rank: singular values above `rel_tol · σ_max`.
pub fn numerical_rank(x: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = x.clone().singular_values();
    let top = s.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}
