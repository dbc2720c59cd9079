//! Asymptotic minimax MSE of singular value soft thresholding.
//!
//! The curve value at `(ρ, β)` is the minimum over the normalized threshold
//! `Λ` of the proxy
//!
//! ```text
//! M_α(Λ; ρ, ρ̃) = ρ + ρ̃ - ρρ̃ + (1 - ρ̃)[ρΛ² + α(1 - ρ)(P_γ(Λ²;1) - 2Λ P_γ(Λ²;½) + Λ² P_γ(Λ²;0))]
//! ```
//!
//! with `γ = (ρ̃ - ρρ̃)/(ρ - ρρ̃)`. General matrices use `α = 1, ρ̃ = βρ`;
//! positive semidefinite symmetric matrices use `α = ½, ρ̃ = ρ`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float;

use crate::error::{domain, Error, Result};
use crate::mp::{quarter_circle_moment, MomentIntegrator, MomentOrder, MpShape};

/// Matrix class whose minimax curve is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ensemble {
    /// General `M × N` real matrices.
    Mat,
    /// Symmetric positive semidefinite `N × N` matrices.
    Sym,
}

impl Ensemble {
    pub fn alpha(self) -> f64 {
        match self {
            Ensemble::Mat => 1.0,
            Ensemble::Sym => 0.5,
        }
    }
}

/// A point `(ρ, β)` on one of the minimax curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveQuery {
    pub rho: f64,
    pub beta: f64,
    pub ensemble: Ensemble,
}

impl CurveQuery {
    pub fn new(rho: f64, beta: f64, ensemble: Ensemble) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(domain(alloc::format!("rank fraction must lie in [0, 1], got {rho}")));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain(alloc::format!("aspect ratio must lie in (0, 1], got {beta}")));
        }
        if ensemble == Ensemble::Sym && beta != 1.0 {
            return Err(domain("symmetric ensemble requires beta = 1"));
        }
        Ok(Self { rho, beta, ensemble })
    }

    pub fn mat(rho: f64, beta: f64) -> Result<Self> {
        Self::new(rho, beta, Ensemble::Mat)
    }

    pub fn sym(rho: f64) -> Result<Self> {
        Self::new(rho, 1.0, Ensemble::Sym)
    }
}

/// Parameters `(α, ρ, ρ̃)` of the proxy together with the derived MP shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyParams {
    alpha: f64,
    rho: f64,
    rho_tilde: f64,
    /// `None` exactly when `ρ = 1`, where the bulk term carries a zero factor.
    shape: Option<MpShape>,
}

impl ProxyParams {
    /// Builds the parameters from `(α, ρ, ρ̃)`; requires `0 < ρ ≤ 1`.
    pub fn new(alpha: f64, rho: f64, rho_tilde: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(domain(alloc::format!("rho must lie in (0, 1], got {rho}")));
        }
        if !(0.0..=1.0).contains(&rho_tilde) {
            return Err(domain(alloc::format!("rho_tilde must lie in [0, 1], got {rho_tilde}")));
        }
        let shape = if rho < 1.0 {
            let gamma = (rho_tilde - rho * rho_tilde) / (rho - rho * rho_tilde);
            Some(MpShape::new(gamma)?)
        } else {
            None
        };
        Ok(Self { alpha, rho, rho_tilde, shape })
    }

    /// Parameters for a curve query; `γ` is taken in the closed form
    /// `β(1 - ρ)/(1 - βρ)` so that `ρ = 0` is admissible.
    pub fn for_query(q: &CurveQuery) -> Result<Self> {
        let (alpha, rho_tilde, gamma) = match q.ensemble {
            Ensemble::Mat => (1.0, q.beta * q.rho, q.beta * (1.0 - q.rho) / (1.0 - q.beta * q.rho)),
            Ensemble::Sym => (0.5, q.rho, 1.0),
        };
        let shape = if q.rho < 1.0 { Some(MpShape::new(gamma)?) } else { None };
        Ok(Self { alpha, rho: q.rho, rho_tilde, shape })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn rho_tilde(&self) -> f64 {
        self.rho_tilde
    }

    pub fn shape(&self) -> Option<&MpShape> {
        self.shape.as_ref()
    }

    /// Upper end of the threshold range, `√γ₊` (zero when `ρ = 1`).
    pub fn lambda_max(&self) -> f64 {
        self.shape.map_or(0.0, |s| s.gamma_plus().sqrt())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha == 1.0 || alpha == 0.5 {
        Ok(())
    } else {
        Err(domain(alloc::format!("alpha must be 1 or 1/2, got {alpha}")))
    }
}

/// Evaluates the proxy `M_α(Λ; ρ, ρ̃)`.
pub fn proxy(params: &ProxyParams, lambda: f64) -> Result<f64> {
    proxy_with(&MomentIntegrator::new(), params, lambda)
}

pub(crate) fn proxy_with(q: &MomentIntegrator, p: &ProxyParams, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(domain(alloc::format!("threshold must be nonnegative, got {lambda}")));
    }
    let (rho, rt) = (p.rho, p.rho_tilde);
    let base = rho + rt - rho * rt;
    let l2 = lambda * lambda;
    let bulk = match p.shape {
        Some(shape) => {
            let p1 = q.moment(&shape, l2, MomentOrder::One)?;
            let ph = q.moment(&shape, l2, MomentOrder::Half)?;
            let p0 = q.moment(&shape, l2, MomentOrder::Zero)?;
            p.alpha * (1.0 - rho) * (p1 - 2.0 * lambda * ph + l2 * p0)
        }
        None => 0.0,
    };
    Ok(base + (1.0 - rt) * (rho * l2 + bulk))
}

/// Root of `Λ⁻¹ P_γ(Λ²;½) - P_γ(Λ²;0) = ρ/(α(1 - ρ))`, the minimizer of the proxy.
pub fn argmin_lambda(params: &ProxyParams) -> Result<f64> {
    argmin_lambda_with(&MomentIntegrator::new(), params)
}

pub(crate) fn argmin_lambda_with(q: &MomentIntegrator, p: &ProxyParams) -> Result<f64> {
    let shape = match p.shape {
        Some(s) if p.rho > 0.0 => s,
        _ => return Err(domain("argmin_lambda requires 0 < rho < 1")),
    };
    let rhs = p.rho / (p.alpha * (1.0 - p.rho));
    let g = |lam: f64| -> Result<f64> {
        let l2 = lam * lam;
        Ok(q.moment(&shape, l2, MomentOrder::Half)? / lam - q.moment(&shape, l2, MomentOrder::Zero)? - rhs)
    };
    let mut lo = 1e-9;
    let mut hi = shape.gamma_plus().sqrt() - 1e-9;
    let (glo, ghi) = (g(lo)?, g(hi)?);
    if glo.signum() == ghi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// A tabulated curve point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub rho: f64,
    pub mse: f64,
    pub lambda_star: f64,
}

/// Minimax MSE `M(ρ, β | ensemble)`.
pub fn minimax_mse(query: &CurveQuery) -> Result<f64> {
    curve_point(query).map(|p| p.mse)
}

/// Minimax MSE together with the minimizing normalized threshold.
pub fn curve_point(query: &CurveQuery) -> Result<CurvePoint> {
    curve_point_with(&MomentIntegrator::new(), query)
}

fn curve_point_with(q: &MomentIntegrator, query: &CurveQuery) -> Result<CurvePoint> {
    let params = ProxyParams::for_query(query)?;
    let rho = query.rho;
    if rho == 0.0 {
        return Ok(CurvePoint { rho, mse: 0.0, lambda_star: params.lambda_max() });
    }
    if rho == 1.0 {
        return Ok(CurvePoint { rho, mse: 1.0, lambda_star: 0.0 });
    }
    let lambda_star = argmin_lambda_with(q, &params)?;
    let mse = proxy_with(q, &params, lambda_star)?;
    Ok(CurvePoint { rho, mse, lambda_star })
}

/// Tabulates the curve on a grid of rank fractions, sharing one quadrature rule.
pub fn tabulate(ensemble: Ensemble, beta: f64, rhos: &[f64]) -> Result<Vec<CurvePoint>> {
    let q = MomentIntegrator::new();
    rhos.iter()
        .map(|&rho| curve_point_with(&q, &CurveQuery::new(rho, beta, ensemble)?))
        .collect()
}

/// Square-case proxy `M_α(Λ; ρ, ρ)` written with the quarter-circle moments.
pub fn proxy_square(alpha: f64, rho: f64, lambda: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(domain(alloc::format!("rho must lie in [0, 1], got {rho}")));
    }
    let q0 = quarter_circle_moment(lambda, 0)?;
    let q1 = quarter_circle_moment(lambda, 1)?;
    let q2 = quarter_circle_moment(lambda, 2)?;
    let l2 = lambda * lambda;
    Ok(rho * (2.0 - rho)
        + (1.0 - rho) * (rho * l2 + alpha * (1.0 - rho) * (q2 - 2.0 * lambda * q1 + l2 * q0)))
}

/// `θ + cot θ (1 - cos²θ / 3)`, decreasing from `+∞` at `0` to `π/2` at `π/2`.
fn theta_lhs(theta: f64) -> f64 {
    let c = theta.cos();
    theta + c / theta.sin() * (1.0 - c * c / 3.0)
}

/// Solves the square-case stationarity equation for `θ ∈ (0, π/2]`;
/// the optimal threshold is then `2 sin θ`.
pub fn solve_theta(alpha: f64, rho: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..1.0).contains(&rho) {
        return Err(domain(alloc::format!("rho must lie in [0, 1), got {rho}")));
    }
    if rho == 0.0 {
        return Ok(FRAC_PI_2);
    }
    let target = PI * (1.0 + rho / alpha - rho) / (2.0 * (1.0 - rho));
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, FRAC_PI_2);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if theta_lhs(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton polish; h'(θ) = -(2/3) cos⁴θ / sin²θ
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..3 {
        let (s, c) = (theta.sin(), theta.cos());
        let d = -(2.0 / 3.0) * c.powi(4) / (s * s);
        if d == 0.0 {
            break;
        }
        let next = theta - (theta_lhs(theta) - target) / d;
        if next > 0.0 && next <= FRAC_PI_2 && (theta_lhs(next) - target).abs() < (theta_lhs(theta) - target).abs() {
            theta = next;
        } else {
            break;
        }
    }
    Ok(theta)
}

/// Point `(ρ(θ), M(θ))` of the square-case parametric representation.
///
/// The rank fraction follows from the stationarity equation:
/// `ρ(θ) = (2h - π)/(2h + π(1/α - 1))` with `h = θ + cot θ (1 - cos²θ/3)`.
pub fn parametric_point(ensemble: Ensemble, theta: f64) -> (f64, f64) {
    let alpha = ensemble.alpha();
    if theta >= FRAC_PI_2 {
        return (0.0, 0.0);
    }
    let h = theta_lhs(theta);
    let rho = (2.0 * h - PI) / (2.0 * h + PI * (1.0 / alpha - 1.0));
    let (s, c) = (theta.sin(), theta.cos());
    let one_minus = 1.0 - rho;
    let bracket = (PI - 2.0 * theta) * (1.25 - c * c)
        + (2.0 * theta).sin() / 12.0 * ((2.0 * theta).cos() - 14.0);
    let mse = 2.0 * rho - rho * rho
        + 4.0 * rho * one_minus * s * s
        + 4.0 * alpha / PI * one_minus * one_minus * bracket;
    (rho, mse)
}

/// Maps a grid of angles through [`parametric_point`].
pub fn parametric_curve(ensemble: Ensemble, thetas: &[f64]) -> Result<Vec<(f64, f64)>> {
    thetas
        .iter()
        .map(|&t| {
            if !(0.0..=FRAC_PI_2).contains(&t) {
                return Err(domain(alloc::format!("theta must lie in [0, pi/2], got {t}")));
            }
            Ok(parametric_point(ensemble, t))
        })
        .collect()
}

/// Slope `2(1 + β + √β)` of the general-matrix curve at `ρ → 0`.
pub fn small_rho_slope(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(domain(alloc::format!("aspect ratio must lie in (0, 1], got {beta}")));
    }
    Ok(2.0 * (1.0 + beta + beta.sqrt()))
}
