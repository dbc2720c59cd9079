//! Singular value soft thresholding and Monte Carlo estimates of its MSE.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float;

use crate::ensembles::{class_dim, gaussian_matrix, sample_stiefel};
use crate::error::{domain, Error, Result};
use crate::minimax::Ensemble;
use crate::rng::{stream, StreamTag};

const SVD_EPS: f64 = 1e-14;
const SVD_MAX_SWEEPS: usize = 0;

/// Thin SVD `Y = U diag(s) Vᵀ`.
pub(crate) struct Spectral {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub(crate) fn thin_svd(y: &DMatrix<f64>) -> Result<Spectral> {
    let svd = y
        .clone()
        .try_svd(true, true, SVD_EPS, SVD_MAX_SWEEPS)
        .ok_or(Error::Factorization)?;
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(Spectral { u, s: svd.singular_values, v_t }),
        _ => Err(Error::Factorization),
    }
}

/// `U diag(w) Vᵀ`, skipping zero weights.
pub(crate) fn recompose(u: &DMatrix<f64>, w: &DVector<f64>, v_t: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(u.nrows(), v_t.ncols());
    for (k, &wk) in w.iter().enumerate() {
        if wk != 0.0 {
            out.ger(wk, &u.column(k), &v_t.row(k).transpose(), 1.0);
        }
    }
    out
}

/// Minimizer of `½‖Y - X‖²_F + λ‖X‖_*`; with `psd` the minimizer over the
/// positive semidefinite cone (eigenvalues of the symmetric part are
/// soft-thresholded and clamped at zero).
pub fn svt(y: &DMatrix<f64>, lambda: f64, psd: bool) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) {
        return Err(domain(alloc::format!("threshold must be nonnegative, got {lambda}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(domain("matrix has non-finite entries"));
    }
    if psd {
        if !y.is_square() {
            return Err(domain("PSD thresholding needs a square matrix"));
        }
        Ok(psd_threshold(y, lambda).0)
    } else {
        Ok(soft_threshold(y, lambda)?.0)
    }
}

/// Soft thresholding of singular values; also returns the thresholded spectrum.
pub(crate) fn soft_threshold(y: &DMatrix<f64>, lambda: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let sp = thin_svd(y)?;
    let w = sp.s.map(|s| (s - lambda).max(0.0));
    Ok((recompose(&sp.u, &w, &sp.v_t), w))
}

/// PSD-cone prox: eigen-decompose `(Y + Yᵀ)/2`, keep `max(μ - λ, 0)`.
pub(crate) fn psd_threshold(y: &DMatrix<f64>, lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let sym = (y + y.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let w = eig.eigenvalues.map(|e| (e - lambda).max(0.0));
    let q = &eig.eigenvectors;
    let mut out = DMatrix::zeros(y.nrows(), y.ncols());
    for (k, &wk) in w.iter().enumerate() {
        if wk != 0.0 {
            out.ger(wk, &q.column(k), &q.column(k), 1.0);
        }
    }
    (out, w)
}

/// Sum of singular values.
pub fn nuclear_norm(x: &DMatrix<f64>) -> f64 {
    x.clone().singular_values().iter().sum()
}

/// Objective of the penalized denoising problem.
pub fn denoise_objective(y: &DMatrix<f64>, x: &DMatrix<f64>, lambda: f64) -> f64 {
    0.5 * (y - x).norm_squared() + lambda * nuclear_norm(x)
}

/// Monte Carlo setup for the denoising experiment `Y = X0 + Z`, `Z_ij ~ N(0,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    pub class: Ensemble,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// Common value of the nonzero singular values of `X0`.
    pub signal_scale: f64,
    pub trials: usize,
    pub seed: u64,
}

impl DenoiseConfig {
    /// Square `N × N` setup with `r = round(ρN)` and the default strong signal `100√N`.
    pub fn square(class: Ensemble, rho: f64, n: usize, trials: usize, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(domain(alloc::format!("rho must lie in [0, 1], got {rho}")));
        }
        let cfg = Self {
            class,
            rows: n,
            cols: n,
            rank: (rho * n as f64).round() as usize,
            signal_scale: 100.0 * (n as f64).sqrt(),
            trials,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(domain("need at least one trial"));
        }
        if self.rank > self.rows.min(self.cols) || self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidGeometry("rank exceeds matrix size".into()));
        }
        if self.class == Ensemble::Sym && self.rows != self.cols {
            return Err(Error::InvalidGeometry("symmetric class requires M = N".into()));
        }
        if !(self.signal_scale > 0.0) {
            return Err(domain("signal scale must be positive"));
        }
        Ok(())
    }

    /// Squared-error normalization: `MN`, or `N(N+1)/2` for symmetric matrices.
    pub fn normalization(&self) -> f64 {
        class_dim(self.class, self.rows, self.cols) as f64
    }
}

/// One realization `(X0, Y)` with `Y` already factorized, so the error can be
/// evaluated at any threshold cheaply.
pub struct DenoiseTrial {
    x0: DMatrix<f64>,
    basis_left: DMatrix<f64>,
    spectrum: DVector<f64>,
    basis_right_t: DMatrix<f64>,
    psd: bool,
    norm: f64,
}

impl DenoiseTrial {
    /// Generates trial `index` of `cfg` from its own random streams.
    pub fn generate(cfg: &DenoiseConfig, index: u64) -> Result<Self> {
        let scale = cfg.signal_scale;
        let u = sample_stiefel(cfg.rows, cfg.rank, &mut stream(cfg.seed, index, StreamTag::LeftFactor));
        let x0 = match cfg.class {
            Ensemble::Mat => {
                let v = sample_stiefel(cfg.cols, cfg.rank, &mut stream(cfg.seed, index, StreamTag::RightFactor));
                &u * v.transpose() * scale
            }
            Ensemble::Sym => &u * u.transpose() * scale,
        };
        let z = gaussian_matrix(cfg.rows, cfg.cols, &mut stream(cfg.seed, index, StreamTag::Noise));
        let y = &x0 + z;
        let norm = cfg.normalization();
        match cfg.class {
            Ensemble::Mat => {
                let sp = thin_svd(&y)?;
                Ok(Self { x0, basis_left: sp.u, spectrum: sp.s, basis_right_t: sp.v_t, psd: false, norm })
            }
            Ensemble::Sym => {
                let eig = ((&y + y.transpose()) * 0.5).symmetric_eigen();
                let q = eig.eigenvectors;
                Ok(Self {
                    x0,
                    basis_right_t: q.transpose(),
                    basis_left: q,
                    spectrum: eig.eigenvalues,
                    psd: true,
                    norm,
                })
            }
        }
    }

    /// `‖X̂_λ(Y) - X0‖²_F` divided by the class dimension.
    pub fn normalized_error(&self, lambda: f64) -> f64 {
        let w = self.spectrum.map(|s| (s - lambda).max(0.0));
        let _ = self.psd;
        let est = recompose(&self.basis_left, &w, &self.basis_right_t);
        (est - &self.x0).norm_squared() / self.norm
    }
}

/// Generates all trials of `cfg` sequentially.
pub fn generate_trials(cfg: &DenoiseConfig) -> Result<Vec<DenoiseTrial>> {
    cfg.validate()?;
    (0..cfg.trials as u64).map(|i| DenoiseTrial::generate(cfg, i)).collect()
}

/// Average normalized error over a fixed set of trials.
pub fn mse_over(trials: &[DenoiseTrial], lambda: f64) -> f64 {
    trials.iter().map(|t| t.normalized_error(lambda)).sum::<f64>() / trials.len() as f64
}

/// Monte Carlo estimate of `E‖X̂_λ(X0 + Z) - X0‖²_F / dim`.
pub fn empirical_mse(cfg: &DenoiseConfig, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(domain("threshold must be nonnegative"));
    }
    Ok(mse_over(&generate_trials(cfg)?, lambda))
}

/// Golden-section minimization of `f` on `[lo, hi]` down to bracket width `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Optimally tuned threshold over `[0, 3√N]` at resolution `1e-2·√N`,
/// using common random numbers across thresholds.
pub fn tune_threshold(cfg: &DenoiseConfig, trials: &[DenoiseTrial]) -> (f64, f64) {
    let root = (cfg.cols as f64).sqrt();
    golden_section(|l| mse_over(trials, l), 0.0, 3.0 * root, 1e-2 * root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        gaussian_matrix(rows, cols, &mut stream(seed, 0, StreamTag::Noise))
    }

    #[test]
    fn zero_threshold_is_identity() {
        let y = random_matrix(5, 7, 1);
        let x = svt(&y, 0.0, false).unwrap();
        assert!((x - &y).norm() < 1e-12 * y.norm());
    }

    #[test]
    fn diagonal_case() {
        let y = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let x = svt(&y, 2.0, false).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((x - want).norm() < 1e-14);
        let x = svt(&y, 2.0, true).unwrap();
        assert!((x - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn psd_clamps_negative_eigenvalues() {
        let y = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 2.5]);
        let x = svt(&y, 0.5, true).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]);
        assert!((x - want).norm() < 1e-14);
    }

    #[test]
    fn reconstruction_accuracy() {
        let y = random_matrix(9, 6, 4);
        let sp = thin_svd(&y).unwrap();
        let back = recompose(&sp.u, &sp.s, &sp.v_t);
        assert!((back - &y).norm() <= 1e-8 * y.norm());
    }

    #[test]
    fn local_optimality_against_perturbations() {
        let y = random_matrix(6, 6, 9);
        let lambda = 0.7;
        let x = svt(&y, lambda, false).unwrap();
        let base = denoise_objective(&y, &x, lambda);
        let mut rng = stream(9, 1, StreamTag::Noise);
        for i in 0..20 {
            let dir = gaussian_matrix(6, 6, &mut rng);
            let t = 10f64.powi(-(i % 4) - 1) * rng.random::<f64>();
            let cand = &x + dir * t;
            assert!(base <= denoise_objective(&y, &cand, lambda) + 1e-12);
        }
    }

    #[test]
    fn rank_non_increasing_in_lambda() {
        let y = random_matrix(8, 8, 3);
        let mut prev = usize::MAX;
        for i in 0..30 {
            let x = svt(&y, 0.25 * i as f64, false).unwrap();
            let rank = x.clone().singular_values().iter().filter(|&&s| s > 1e-10).count();
            assert!(rank <= prev);
            prev = rank;
        }
        assert_eq!(prev, 0);
    }

    #[test]
    fn zero_signal_large_threshold_has_no_error() {
        let cfg = DenoiseConfig::square(Ensemble::Mat, 0.0, 10, 4, 2).unwrap();
        assert_eq!(empirical_mse(&cfg, 1e6).unwrap(), 0.0);
        let small = empirical_mse(&cfg, 1.0).unwrap();
        let large = empirical_mse(&cfg, 5.0).unwrap();
        assert!(large < small);
    }

    #[test]
    fn zero_threshold_error_is_noise_energy() {
        // λ = 0 returns Y, so the error is ‖Z‖²/MN ≈ 1
        let cfg = DenoiseConfig { signal_scale: 10.0, ..DenoiseConfig::square(Ensemble::Mat, 0.2, 20, 20, 5).unwrap() };
        let mse = empirical_mse(&cfg, 0.0).unwrap();
        assert!((mse - 1.0).abs() < 0.05, "{mse}");
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let (x, fx) = golden_section(|x| (x - 1.3) * (x - 1.3) + 2.0, 0.0, 5.0, 1e-8);
        assert!((x - 1.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(svt(&DMatrix::zeros(2, 3), 1.0, true).is_err());
        assert!(svt(&DMatrix::zeros(2, 2), -1.0, false).is_err());
        assert!(svt(&DMatrix::from_element(2, 2, f64::NAN), 1.0, false).is_err());
        assert!(DenoiseConfig::square(Ensemble::Mat, 0.1, 10, 0, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prox_identity(seed in any::<u64>(), lambda in 0.0f64..3.0, rows in 2usize..7, cols in 2usize..7) {
            let y = random_matrix(rows, cols, seed);
            let x = svt(&y, lambda, false).unwrap();
            let best = denoise_objective(&y, &x, lambda);
            let mut rng = stream(seed, 1, StreamTag::Noise);
            for k in 0..50 {
                let spread = [1.0, 0.1, 0.01][k % 3];
                let cand = &x + gaussian_matrix(rows, cols, &mut rng) * spread;
                prop_assert!(best <= denoise_objective(&y, &cand, lambda) + 1e-10);
            }
        }

        #[test]
        fn psd_prox_identity(seed in any::<u64>(), lambda in 0.0f64..3.0, n in 2usize..7) {
            let y = random_matrix(n, n, seed);
            let x = svt(&y, lambda, true).unwrap();
            let best = denoise_objective(&y, &x, lambda);
            let mut rng = stream(seed, 1, StreamTag::Noise);
            for _ in 0..50 {
                // random PSD candidates near the output
                let g = gaussian_matrix(n, 2, &mut rng) * 0.3;
                let cand = &x + &g * g.transpose();
                prop_assert!(best <= denoise_objective(&y, &cand, lambda) + 1e-10);
            }
        }

        #[test]
        fn nonexpansive(seed in any::<u64>(), lambda in 0.0f64..3.0, n in 2usize..8) {
            let a = random_matrix(n, n + 1, seed);
            let b = random_matrix(n, n + 1, seed.wrapping_add(1));
            for psd in [false] {
                let da = svt(&a, lambda, psd).unwrap() - svt(&b, lambda, psd).unwrap();
                prop_assert!(da.norm() <= (&a - &b).norm() + 1e-12);
            }
            let (sa, sb) = (random_matrix(n, n, seed), random_matrix(n, n, seed ^ 0xabc));
            let d = svt(&sa, lambda, true).unwrap() - svt(&sb, lambda, true).unwrap();
            prop_assert!(d.norm() <= (&sa - &sb).norm() + 1e-12);
        }
    }
}
