//! Complementary incomplete moments of the Marčenko-Pastur law and of the
//! quarter-circle law.
//!
//! For shape `γ ∈ (0, 1]` with edges `γ± = (1 ± √γ)²`,
//!
//! ```text
//! P_γ(x; k) = 1/(2πγ) ∫_{max(x, γ-)}^{γ+} t^(k-1) √((γ+ - t)(t - γ-)) dt
//! ```
//!
//! The integral is evaluated after the substitution
//! `t = γ- + (γ+ - γ-) sin²φ`, which turns the integrand into
//! `2w² t^(k-1) sin²φ cos²φ` (with `w = γ+ - γ-`). Both square-root endpoint
//! singularities disappear, and for `γ = 1` (so `γ- = 0`) the factors
//! `t^(-1)` and `t^(-1/2)` cancel against `sin²φ` exactly, leaving a smooth
//! integrand for every supported order. As `γ → 1` from below the integrand
//! stays bounded but develops a boundary layer of width `√(γ-/w)` in `φ`;
//! panels are graded geometrically across that layer.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float;

use crate::error::{domain, Result};
use crate::quad::GaussLegendre;

const PANEL_NODES: usize = 64;
const MIN_PANELS: usize = 4;

/// Shape of a Marčenko-Pastur law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpShape {
    gamma: f64,
    gamma_minus: f64,
    gamma_plus: f64,
}

impl MpShape {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(domain(alloc::format!(
                "Marcenko-Pastur shape must lie in (0, 1], got {gamma}"
            )));
        }
        let s = gamma.sqrt();
        Ok(Self {
            gamma,
            gamma_minus: (1.0 - s) * (1.0 - s),
            gamma_plus: (1.0 + s) * (1.0 + s),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_minus(&self) -> f64 {
        self.gamma_minus
    }

    pub fn gamma_plus(&self) -> f64 {
        self.gamma_plus
    }
}

/// Moment order `k` supported by [`mp_incomplete_moment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrder {
    Zero,
    Half,
    One,
}

impl MomentOrder {
    pub fn value(self) -> f64 {
        match self {
            MomentOrder::Zero => 0.0,
            MomentOrder::Half => 0.5,
            MomentOrder::One => 1.0,
        }
    }
}

impl TryFrom<f64> for MomentOrder {
    type Error = crate::Error;

    fn try_from(k: f64) -> Result<Self> {
        if k == 0.0 {
            Ok(MomentOrder::Zero)
        } else if k == 0.5 {
            Ok(MomentOrder::Half)
        } else if k == 1.0 {
            Ok(MomentOrder::One)
        } else {
            Err(domain(alloc::format!(
                "moment order must be 0, 1/2 or 1, got {k}"
            )))
        }
    }
}

/// Evaluates `P_γ(x; k)`.
pub fn mp_incomplete_moment(shape: &MpShape, x: f64, k: MomentOrder) -> Result<f64> {
    MomentIntegrator::new().moment(shape, x, k)
}

/// Reusable quadrature state for repeated moment evaluations.
///
/// Holds only the Gauss-Legendre rule; every evaluation is a pure function
/// of `(γ, x, k)`.
#[derive(Debug, Clone)]
pub struct MomentIntegrator {
    rule: GaussLegendre,
}

impl Default for MomentIntegrator {
    fn default() -> Self {
        Self::new()
    }
}

impl MomentIntegrator {
    pub fn new() -> Self {
        Self {
            rule: GaussLegendre::new(PANEL_NODES),
        }
    }

    pub fn moment(&self, shape: &MpShape, x: f64, k: MomentOrder) -> Result<f64> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(domain(alloc::format!(
                "moment argument must be finite and nonnegative, got {x}"
            )));
        }
        let (gm, gp) = (shape.gamma_minus, shape.gamma_plus);
        if x >= gp {
            return Ok(0.0);
        }
        let w = gp - gm;
        let lower = x.max(gm);
        // sin²φ₀ = (lower - γ-)/w
        let phi0 = ((lower - gm) / w).clamp(0.0, 1.0).sqrt().asin();
        let kexp = k.value();
        let integrand = |phi: f64| {
            let (s, c) = (phi.sin(), phi.cos());
            let s2 = s * s;
            let c2 = c * c;
            match k {
                MomentOrder::One => 2.0 * w * w * s2 * c2,
                MomentOrder::Half if gm == 0.0 => 2.0 * w * w.sqrt() * s * c2,
                MomentOrder::Zero if gm == 0.0 => 2.0 * w * c2,
                _ => {
                    let t = gm + w * s2;
                    2.0 * w * w * t.powf(kexp - 1.0) * s2 * c2
                }
            }
        };
        let total: f64 = panels(phi0, FRAC_PI_2, gm, w)
            .windows(2)
            .map(|p| self.rule.integrate(p[0], p[1], integrand))
            .sum();
        Ok((total / (2.0 * PI * shape.gamma)).max(0.0))
    }
}

/// Panel boundaries on `[a, b]`: `MIN_PANELS` equal pieces, refined
/// geometrically near `a` when the lower edge `γ-` is small but nonzero.
fn panels(a: f64, b: f64, gm: f64, w: f64) -> Vec<f64> {
    let mut cuts = Vec::new();
    cuts.push(a);
    if gm > 0.0 && a < 1e-3 {
        let layer = (gm / w).sqrt();
        let coarse = (b - a) / MIN_PANELS as f64;
        let mut offset = layer / 8.0;
        while offset < coarse {
            cuts.push(a + offset);
            offset *= 2.0;
        }
    }
    for i in 1..=MIN_PANELS {
        cuts.push(a + (b - a) * i as f64 / MIN_PANELS as f64);
    }
    cuts
}

/// Closed-form complementary incomplete moments `Q_k(x) = (1/π) ∫_x^2 s^k √(4 - s²) ds`
/// of the quarter-circle law, for `k ∈ {0, 1, 2}` and `x ∈ [0, 2]`.
pub fn quarter_circle_moment(x: f64, k: u32) -> Result<f64> {
    if !(0.0..=2.0).contains(&x) {
        return Err(domain(alloc::format!(
            "quarter-circle argument must lie in [0, 2], got {x}"
        )));
    }
    let root = (4.0 - x * x).max(0.0).sqrt();
    let v = match k {
        0 => 1.0 - x * root / (2.0 * PI) - 2.0 / PI * x.atan2(root),
        1 => root * root * root / (3.0 * PI),
        2 => 1.0 - x * root * (x * x - 2.0) / (4.0 * PI) - 2.0 / PI * (x / 2.0).asin(),
        _ => {
            return Err(domain(alloc::format!(
                "quarter-circle moment order must be 0, 1 or 2, got {k}"
            )))
        }
    };
    Ok(v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Trapezoid rule on the cosine substitution `t = γ- + w(1 - cos u)/2`,
    /// independent of the Gauss-Legendre path.
    fn trapezoid_oracle(gamma: f64, x: f64, k: f64, n: usize) -> f64 {
        let s = gamma.sqrt();
        let gm = (1.0 - s) * (1.0 - s);
        let gp = (1.0 + s) * (1.0 + s);
        let w = gp - gm;
        let lo = x.max(gm);
        if lo >= gp {
            return 0.0;
        }
        let u0 = (1.0 - 2.0 * (lo - gm) / w).clamp(-1.0, 1.0).acos();
        let f = |u: f64| {
            let t = gm + w * (1.0 - u.cos()) / 2.0;
            // dt = w sin(u)/2 du and √((γ+ - t)(t - γ-)) = w sin(u)/2
            let jac = w * u.sin() / 2.0;
            if t <= 0.0 {
                // limit as t → 0, only reached when γ- = 0
                return if k == 0.0 { w } else { 0.0 };
            }
            t.powf(k - 1.0) * jac * jac
        };
        let h = (PI - u0) / n as f64;
        let mut acc = 0.5 * (f(u0) + f(PI));
        for i in 1..n {
            acc += f(u0 + i as f64 * h);
        }
        acc * h / (2.0 * PI * gamma)
    }

    #[test]
    fn empty_range_is_zero() {
        let shape = MpShape::new(1.0).unwrap();
        for x in [4.0, 4.5, 100.0] {
            assert_eq!(mp_incomplete_moment(&shape, x, MomentOrder::Zero).unwrap(), 0.0);
        }
    }

    #[test]
    fn unit_mass_and_unit_mean_at_gamma_one() {
        let shape = MpShape::new(1.0).unwrap();
        let mass = mp_incomplete_moment(&shape, 0.0, MomentOrder::Zero).unwrap();
        let mean = mp_incomplete_moment(&shape, 0.0, MomentOrder::One).unwrap();
        assert!((mass - 1.0).abs() < 1e-12, "{mass}");
        assert!((mean - 1.0).abs() < 1e-12, "{mean}");
    }

    #[test]
    fn matches_trapezoid_oracle() {
        for &gamma in &[0.1, 0.5, 0.78, 0.95] {
            let shape = MpShape::new(gamma).unwrap();
            for &x in &[0.0, 0.3, 1.0, 2.2] {
                for k in [MomentOrder::Zero, MomentOrder::Half, MomentOrder::One] {
                    let got = mp_incomplete_moment(&shape, x, k).unwrap();
                    let want = trapezoid_oracle(gamma, x, k.value(), 400_000);
                    assert!(
                        (got - want).abs() < 1e-10,
                        "gamma={gamma} x={x} k={k:?}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn oracle_unit_mass_cross_check() {
        // The oracle itself reproduces the known totals.
        assert!((trapezoid_oracle(0.5, 0.0, 0.0, 200_000) - 1.0).abs() < 1e-10);
        assert!((trapezoid_oracle(0.5, 0.0, 1.0, 200_000) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shape_near_one_is_accurate() {
        // boundary layer of width ~1e-4 in φ
        let gamma = (1.0f64 - 2e-4).powi(2);
        let shape = MpShape::new(gamma).unwrap();
        for k in [MomentOrder::Zero, MomentOrder::Half, MomentOrder::One] {
            let got = mp_incomplete_moment(&shape, 0.0, k).unwrap();
            let want = trapezoid_oracle(gamma, 0.0, k.value(), 4_000_000);
            assert!((got - want).abs() < 1e-9, "{k:?}: {got} vs {want}");
        }
        // mass is always one
        let mass = mp_incomplete_moment(&shape, 0.0, MomentOrder::Zero).unwrap();
        assert!((mass - 1.0).abs() < 1e-11);
    }

    #[test]
    fn endpoint_continuity() {
        for &gamma in &[0.2, 0.6, 0.9] {
            let shape = MpShape::new(gamma).unwrap();
            for k in [MomentOrder::Zero, MomentOrder::Half, MomentOrder::One] {
                let at_edge = mp_incomplete_moment(&shape, shape.gamma_minus(), k).unwrap();
                let at_zero = mp_incomplete_moment(&shape, 0.0, k).unwrap();
                assert_eq!(at_edge, at_zero);
            }
        }
    }

    #[test]
    fn monotone_in_x() {
        for &gamma in &[0.25, 1.0] {
            let shape = MpShape::new(gamma).unwrap();
            for k in [MomentOrder::Zero, MomentOrder::Half, MomentOrder::One] {
                let mut prev = f64::INFINITY;
                for i in 0..100 {
                    let x = shape.gamma_plus() * 1.05 * i as f64 / 99.0;
                    let v = mp_incomplete_moment(&shape, x, k).unwrap();
                    assert!(v <= prev + 1e-14, "gamma={gamma} k={k:?} x={x}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn gamma_one_matches_quarter_circle() {
        // MP(γ=1) is the law of the square of a quarter-circle variable:
        // P_1(x²; k) = Q_{2k}(x)
        let shape = MpShape::new(1.0).unwrap();
        for i in 0..=40 {
            let x = 2.0 * i as f64 / 40.0;
            for (k, q) in [(MomentOrder::Zero, 0), (MomentOrder::Half, 1), (MomentOrder::One, 2)] {
                let p = mp_incomplete_moment(&shape, x * x, k).unwrap();
                let closed = quarter_circle_moment(x, q).unwrap();
                assert!((p - closed).abs() < 1e-8, "x={x} k={k:?}: {p} vs {closed}");
            }
        }
    }

    #[test]
    fn quarter_circle_values() {
        assert!((quarter_circle_moment(0.0, 1).unwrap() - 8.0 / (3.0 * PI)).abs() < 1e-14);
        for k in 0..3 {
            assert_eq!(quarter_circle_moment(2.0, k).unwrap(), 0.0);
        }
        assert!((quarter_circle_moment(0.0, 0).unwrap() - 1.0).abs() < 1e-15);
        assert!((quarter_circle_moment(0.0, 2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quarter_circle_brute_force() {
        // midpoint rule on s = 2 sin(u) against the closed forms
        let n = 200_000;
        for &x in &[0.0, 0.7, 1.5] {
            let u0 = (x / 2.0).asin();
            let h = (FRAC_PI_2 - u0) / n as f64;
            for k in 0..3 {
                let mut acc = 0.0;
                for i in 0..n {
                    let u = u0 + (i as f64 + 0.5) * h;
                    let s = 2.0 * u.sin();
                    let c = 2.0 * u.cos();
                    acc += s.powi(k as i32) * c * c;
                }
                let brute = acc * h / PI;
                let closed = quarter_circle_moment(x, k).unwrap();
                assert!((brute - closed).abs() < 1e-9, "x={x} k={k}: {brute} vs {closed}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(MpShape::new(0.0).is_err());
        assert!(MpShape::new(1.5).is_err());
        assert!(MpShape::new(f64::NAN).is_err());
        assert!(MomentOrder::try_from(2.0).is_err());
        assert!(MomentOrder::try_from(0.5).is_ok());
        let shape = MpShape::new(0.5).unwrap();
        assert!(mp_incomplete_moment(&shape, -1.0, MomentOrder::One).is_err());
        assert!(quarter_circle_moment(2.5, 0).is_err());
        assert!(quarter_circle_moment(1.0, 3).is_err());
    }
}
