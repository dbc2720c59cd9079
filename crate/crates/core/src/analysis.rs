//! Logistic response fits of success curves and the finite-N slope diagnostic.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods are only available with std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::harness::SuccessCurvePoint;

const MAX_ITERS: usize = 100;
const LL_TOL: f64 = 1e-10;

/// Fitted model `logit π = a + b (δ - M(ρ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFit {
    pub a: f64,
    pub b: f64,
    pub se_a: f64,
    pub se_b: f64,
    /// `a / se_a`.
    pub z: f64,
    pub m_rho: f64,
    /// `M(ρ) - a/b`, or the separating midpoint.
    pub delta_hat: f64,
    pub converged: bool,
    /// The data were (quasi-)completely separated; the slope is infinite.
    pub separated: bool,
    pub iterations: usize,
}

impl LogisticFit {
    /// Fit with the given coefficients and no sampling information.
    pub fn from_coefficients(a: f64, b: f64, m_rho: f64) -> Self {
        Self {
            a,
            b,
            se_a: f64::NAN,
            se_b: f64::NAN,
            z: f64::NAN,
            m_rho,
            delta_hat: m_rho - a / b,
            converged: true,
            separated: false,
            iterations: 0,
        }
    }

    /// Success probability predicted at `delta`.
    pub fn predict(&self, delta: f64) -> f64 {
        sigmoid(self.a + self.b * (delta - self.m_rho))
    }

    /// A negative slope means success becomes less likely with more measurements.
    pub fn anomalous_slope(&self) -> bool {
        self.b < 0.0
    }
}

/// Grouped binomial observation: `successes` out of `trials` at `delta`.
/// Counts may be fractional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialObs {
    pub delta: f64,
    pub trials: f64,
    pub successes: f64,
}

impl From<&SuccessCurvePoint> for BinomialObs {
    fn from(p: &SuccessCurvePoint) -> Self {
        Self { delta: p.delta, trials: p.trials as f64, successes: p.successes as f64 }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log σ(t)`, stable for large `|t|`.
fn log_sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

fn log_likelihood(obs: &[BinomialObs], m_rho: f64, a: f64, b: f64) -> f64 {
    obs.iter()
        .map(|o| {
            let eta = a + b * (o.delta - m_rho);
            o.successes * log_sigmoid(eta) + (o.trials - o.successes) * log_sigmoid(-eta)
        })
        .sum()
}

/// Fits the logistic model to a success curve.
pub fn fit_logistic(points: &[SuccessCurvePoint], m_rho: f64) -> Result<LogisticFit> {
    let obs: Vec<BinomialObs> = points.iter().map(BinomialObs::from).collect();
    fit_grouped(&obs, m_rho)
}

/// Maximum-likelihood fit by iteratively reweighted least squares.
pub fn fit_grouped(obs: &[BinomialObs], m_rho: f64) -> Result<LogisticFit> {
    let obs: Vec<BinomialObs> = obs.iter().filter(|o| o.trials > 0.0).cloned().collect();
    if obs.iter().any(|o| !(o.successes >= 0.0 && o.successes <= o.trials) || !o.delta.is_finite()) {
        return Err(Error::Domain("successes must lie in [0, trials]".into()));
    }
    let mut xs: Vec<f64> = obs.iter().map(|o| o.delta).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(Error::InsufficientData("need at least two distinct δ values".into()));
    }
    let total: f64 = obs.iter().map(|o| o.trials).sum();
    let succ: f64 = obs.iter().map(|o| o.successes).sum();
    if succ == 0.0 || succ == total {
        return Err(Error::InsufficientData("all outcomes identical".into()));
    }
    if let Some(fit) = separation(&obs, m_rho) {
        return Ok(fit);
    }

    let (mut a, mut b) = (0.0, 0.0);
    let mut ll = log_likelihood(&obs, m_rho, a, b);
    let mut converged = false;
    let mut iterations = 0;
    let mut info = [0.0; 3];
    while iterations < MAX_ITERS {
        iterations += 1;
        let (step, fisher) = newton_step(&obs, m_rho, a, b);
        info = fisher;
        let (mut na, mut nb) = (a + step.0, b + step.1);
        let mut nll = log_likelihood(&obs, m_rho, na, nb);
        // step halving keeps the likelihood non-decreasing
        let mut halvings = 0;
        while nll < ll && halvings < 30 {
            na = (a + na) / 2.0;
            nb = (b + nb) / 2.0;
            nll = log_likelihood(&obs, m_rho, na, nb);
            halvings += 1;
        }
        let gain = nll - ll;
        a = na;
        b = nb;
        ll = nll;
        if gain.abs() < LL_TOL {
            // one more Newton step settles the score equations to rounding
            let (step, fisher) = newton_step(&obs, m_rho, a, b);
            a += step.0;
            b += step.1;
            info = fisher;
            converged = true;
            break;
        }
    }
    let det = info[0] * info[2] - info[1] * info[1];
    let (se_a, se_b) = ((info[2] / det).sqrt(), (info[0] / det).sqrt());
    Ok(LogisticFit {
        a,
        b,
        se_a,
        se_b,
        z: a / se_a,
        m_rho,
        delta_hat: m_rho - a / b,
        converged,
        separated: false,
        iterations,
    })
}

/// Newton step for `(a, b)` and the Fisher information `[Iaa, Iab, Ibb]`.
fn newton_step(obs: &[BinomialObs], m_rho: f64, a: f64, b: f64) -> ((f64, f64), [f64; 3]) {
    let (mut ga, mut gb) = (0.0, 0.0);
    let mut info = [0.0; 3];
    for o in obs {
        let x = o.delta - m_rho;
        let p = sigmoid(a + b * x);
        let r = o.successes - o.trials * p;
        let w = o.trials * p * (1.0 - p);
        ga += r;
        gb += r * x;
        info[0] += w;
        info[1] += w * x;
        info[2] += w * x * x;
    }
    let det = info[0] * info[2] - info[1] * info[1];
    let da = (info[2] * ga - info[1] * gb) / det;
    let db = (info[0] * gb - info[1] * ga) / det;
    ((da, db), info)
}

/// Score vector `(∂ℓ/∂a, ∂ℓ/∂b)` at the fitted coefficients.
pub fn score_equations(obs: &[BinomialObs], fit: &LogisticFit) -> (f64, f64) {
    obs.iter().fold((0.0, 0.0), |(ga, gb), o| {
        let x = o.delta - fit.m_rho;
        let r = o.successes - o.trials * sigmoid(fit.a + fit.b * x);
        (ga + r, gb + r * x)
    })
}

/// Detects complete or quasi-complete separation along δ. Returns the fit
/// with an infinite slope and the midpoint of the separating gap (or the
/// single mixed δ) as the transition estimate.
fn separation(obs: &[BinomialObs], m_rho: f64) -> Option<LogisticFit> {
    // per distinct δ: (δ, all failures, all successes)
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for o in obs {
        match groups.iter_mut().find(|g| g.0 == o.delta) {
            Some(g) => {
                g.1 += o.trials;
                g.2 += o.successes;
            }
            None => groups.push((o.delta, o.trials, o.successes)),
        }
    }
    groups.sort_by(|x, y| x.0.total_cmp(&y.0));
    let class = |g: &(f64, f64, f64)| {
        if g.2 == 0.0 {
            0
        } else if g.2 == g.1 {
            2
        } else {
            1
        }
    };
    let classes: Vec<u8> = groups.iter().map(class).collect();
    for (sign, ordered) in [(1.0, classes.clone()), (-1.0, classes.iter().rev().cloned().collect::<Vec<_>>())] {
        let mixed: Vec<usize> = (0..ordered.len()).filter(|&i| ordered[i] == 1).collect();
        if mixed.len() > 1 || !ordered.windows(2).all(|w| w[0] <= w[1]) {
            continue;
        }
        let idx = |i: usize| if sign > 0.0 { i } else { groups.len() - 1 - i };
        let delta_hat = match mixed.first() {
            Some(&i) => groups[idx(i)].0,
            None => {
                let k = ordered.iter().position(|&c| c == 2)?;
                (groups[idx(k - 1)].0 + groups[idx(k)].0) / 2.0
            }
        };
        let b = sign * f64::INFINITY;
        let a = if delta_hat == m_rho { 0.0 } else { -b * (delta_hat - m_rho) };
        return Some(LogisticFit {
            a,
            b,
            se_a: f64::INFINITY,
            se_b: f64::INFINITY,
            z: f64::NAN,
            m_rho,
            delta_hat,
            converged: false,
            separated: true,
            iterations: 0,
        });
    }
    None
}

/// Empirical phase transition: the δ where the fitted success probability is 1/2.
pub fn empirical_pt(fit: &LogisticFit) -> f64 {
    fit.delta_hat
}

/// Least-squares line of slope `b` against `N`, plus the `a/b` ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingDiagnostic {
    pub intercept: f64,
    pub slope: f64,
    pub ab_ratios: Vec<(usize, f64)>,
}

pub fn scaling_diagnostic(fits: &[(usize, LogisticFit)]) -> Result<ScalingDiagnostic> {
    let mut ns: Vec<usize> = fits.iter().map(|f| f.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::InsufficientData("need at least three distinct N".into()));
    }
    let usable: Vec<(f64, f64)> = fits.iter().filter(|f| f.1.b.is_finite()).map(|f| (f.0 as f64, f.1.b)).collect();
    let k = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / k;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("need finite slopes at three distinct N".into()));
    }
    let slope = sxy / sxx;
    Ok(ScalingDiagnostic {
        intercept: my - slope * mx,
        slope,
        ab_ratios: fits.iter().map(|f| (f.0, f.1.a / f.1.b)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamTag};
    use proptest::prelude::*;
    use rand::Rng;

    fn expected_counts(a: f64, b: f64, m: f64, deltas: &[f64], t: f64) -> Vec<BinomialObs> {
        deltas
            .iter()
            .map(|&d| BinomialObs { delta: d, trials: t, successes: t * sigmoid(a + b * (d - m)) })
            .collect()
    }

    fn grid(m: f64) -> Vec<f64> {
        (0..13).map(|i| m - 0.05 + 0.1 * i as f64 / 12.0).collect()
    }

    #[test]
    fn exact_counts_recover_table_row() {
        let m = 0.351;
        let fit = fit_grouped(&expected_counts(-0.128, 182.978, m, &grid(m), 400.0), m).unwrap();
        assert!(fit.converged);
        assert!((fit.a + 0.128).abs() < 1e-8);
        assert!((fit.b - 182.978).abs() < 1e-6);
        assert!((fit.delta_hat - 0.3517).abs() < 1e-4);
        assert!((fit.z - fit.a / fit.se_a).abs() < 1e-15);
    }

    #[test]
    fn table_arithmetic() {
        let f = LogisticFit::from_coefficients(1.306, 180.027, 0.844);
        assert!((empirical_pt(&f) - 0.8367).abs() < 1e-4);
        assert_eq!(empirical_pt(&LogisticFit::from_coefficients(0.0, 50.0, 0.4)), 0.4);
        assert!(LogisticFit::from_coefficients(0.3, -20.0, 0.4).anomalous_slope());
        assert!(empirical_pt(&LogisticFit::from_coefficients(0.3, -20.0, 0.4)).is_finite());
    }

    #[test]
    fn mirror_symmetric_data_centers_the_fit() {
        let d0 = 0.42;
        let obs: Vec<BinomialObs> = [1.0, 3.0, 8.0, 10.0, 12.0, 17.0, 19.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| BinomialObs { delta: d0 + 0.01 * (i as f64 - 3.0), trials: 20.0, successes: s })
            .collect();
        let fit = fit_grouped(&obs, d0).unwrap();
        assert!(fit.a.abs() < 1e-10, "{}", fit.a);
        assert!((fit.delta_hat - d0).abs() < 1e-10);
    }

    #[test]
    fn complete_separation_reports_midpoint() {
        let obs = [(0.30, 0.0), (0.32, 0.0), (0.34, 10.0), (0.36, 10.0)]
            .map(|(d, s)| BinomialObs { delta: d, trials: 10.0, successes: s });
        let fit = fit_grouped(&obs, 0.35).unwrap();
        assert!(fit.separated && !fit.converged);
        assert_eq!(fit.b, f64::INFINITY);
        assert!((fit.delta_hat - 0.33).abs() < 1e-15);
    }

    #[test]
    fn quasi_separation_uses_mixed_point() {
        let obs = [(0.30, 0.0), (0.32, 4.0), (0.34, 10.0)].map(|(d, s)| BinomialObs { delta: d, trials: 10.0, successes: s });
        let fit = fit_grouped(&obs, 0.35).unwrap();
        assert!(fit.separated);
        assert_eq!(fit.delta_hat, 0.32);
        let reversed = [(0.30, 10.0), (0.32, 0.0)].map(|(d, s)| BinomialObs { delta: d, trials: 10.0, successes: s });
        let fit = fit_grouped(&reversed, 0.31).unwrap();
        assert_eq!(fit.b, f64::NEG_INFINITY);
        assert!((fit.delta_hat - 0.31).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        let one = [BinomialObs { delta: 0.3, trials: 10.0, successes: 4.0 }];
        assert!(fit_grouped(&one, 0.3).is_err());
        let same = [0.3, 0.4].map(|d| BinomialObs { delta: d, trials: 5.0, successes: 5.0 });
        assert!(fit_grouped(&same, 0.3).is_err());
    }

    #[test]
    fn wald_intervals_are_calibrated() {
        let (a0, b0, m) = (0.5, 200.0, 0.35);
        let deltas = grid(m);
        let reps = 2000;
        let (mut cov_a, mut cov_b) = (0, 0);
        for rep in 0..reps {
            let mut rng = stream(77, rep, StreamTag::Noise);
            let obs: Vec<BinomialObs> = deltas
                .iter()
                .map(|&d| {
                    let p = sigmoid(a0 + b0 * (d - m));
                    let s = (0..200).filter(|_| rng.random::<f64>() < p).count() as f64;
                    BinomialObs { delta: d, trials: 200.0, successes: s }
                })
                .collect();
            let fit = fit_grouped(&obs, m).unwrap();
            cov_a += usize::from((fit.a - a0).abs() <= 2.0 * fit.se_a);
            cov_b += usize::from((fit.b - b0).abs() <= 2.0 * fit.se_b);
        }
        // nominal two-sided 2σ coverage, minus three Monte Carlo standard errors
        let nominal = 0.9545;
        let floor = nominal - 3.0 * (nominal * (1.0 - nominal) / reps as f64).sqrt();
        let (ra, rb) = (cov_a as f64 / reps as f64, cov_b as f64 / reps as f64);
        assert!(ra >= floor && rb >= floor, "{ra} {rb} < {floor}");
    }

    #[test]
    fn slope_regression() {
        let line = |n: usize| LogisticFit::from_coefficients(0.1, 10.0 + 3.0 * n as f64, 0.3);
        let fits: Vec<_> = [30, 40, 60, 90].iter().map(|&n| (n, line(n))).collect();
        let d = scaling_diagnostic(&fits).unwrap();
        assert!((d.slope - 3.0).abs() < 1e-12);
        assert!((d.intercept - 10.0).abs() < 1e-10);
        assert!(scaling_diagnostic(&fits[..2]).is_err());
    }

    #[test]
    fn slope_grows_with_n_in_table() {
        let rows = [(40, -0.128, 182.978), (50, 0.282, 200.131), (60, -0.096, 221.212), (80, 0.415, 295.049), (100, 0.641, 383.493)];
        let fits: Vec<_> = rows.iter().map(|&(n, a, b)| (n, LogisticFit::from_coefficients(a, b, 0.351))).collect();
        let d = scaling_diagnostic(&fits).unwrap();
        assert!(d.slope > 0.0);
        let last = d.ab_ratios[4].1.abs();
        assert!((last - 1.67e-3).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn fit_invariants(seed in any::<u64>(), shift in -0.2f64..0.2) {
            let m = 0.4;
            let mut rng = stream(seed, 0, StreamTag::Noise);
            let obs: Vec<BinomialObs> = grid(m)
                .iter()
                .map(|&d| {
                    let p = sigmoid(0.3 + 120.0 * (d - m));
                    let s = (0..30).filter(|_| rng.random::<f64>() < p).count() as f64;
                    BinomialObs { delta: d, trials: 30.0, successes: s }
                })
                .collect();
            let fit = fit_grouped(&obs, m).unwrap();
            if !fit.separated {
                prop_assert!(fit.converged);
                let (ga, gb) = score_equations(&obs, &fit);
                prop_assert!(ga.abs() <= 1e-8 && gb.abs() <= 1e-8, "{} {}", ga, gb);
                prop_assert!((fit.predict(fit.delta_hat) - 0.5).abs() <= 1e-10);
                let moved: Vec<BinomialObs> = obs.iter().map(|o| BinomialObs { delta: o.delta + shift, ..*o }).collect();
                let g = fit_grouped(&moved, m + shift).unwrap();
                prop_assert!((g.a - fit.a).abs() <= 1e-10 * (1.0 + fit.a.abs()));
                prop_assert!((g.b - fit.b).abs() <= 1e-10 * fit.b.abs().max(1.0));
            }
        }
    }
}
