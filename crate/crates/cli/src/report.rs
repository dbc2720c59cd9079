//! Phase-transition fits of trial logs and their tabular output.

use std::fmt::Write as _;

use nucpt_core::analysis::{fit_logistic, LogisticFit};
use nucpt_core::ensembles::class_dim;
use nucpt_core::harness::{aggregate, SuccessCurvePoint, TrialRecord};
use nucpt_core::minimax::{minimax_mse, CurveQuery, Ensemble};
use nucpt_core::Result;

/// One experiment's records reduced to a fitted transition.
#[derive(Debug, Clone, PartialEq)]
pub struct PtRow {
    pub experiment: String,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub rho: f64,
    pub beta: f64,
    /// Largest trial count at any single δ.
    pub trials_per_point: usize,
    pub trials_total: usize,
    pub points: Vec<SuccessCurvePoint>,
    pub fit: LogisticFit,
}

/// Groups by `(experiment, M, N, rank)` in order of first appearance and fits each group.
/// `beta` overrides the aspect ratio implied by the dimensions.
pub fn fit_log(records: &[TrialRecord], curve: Ensemble, beta: Option<f64>) -> Result<Vec<PtRow>> {
    let mut groups: Vec<((String, usize, usize, usize), Vec<TrialRecord>)> = Vec::new();
    for r in records {
        let key = (r.experiment.clone(), r.rows, r.cols, r.rank);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.clone()),
            None => groups.push((key, vec![r.clone()])),
        }
    }
    groups
        .into_iter()
        .map(|((experiment, rows, cols, rank), recs)| {
            let beta = beta.unwrap_or(rows.min(cols) as f64 / rows.max(cols) as f64);
            let rho = recs[0].rho;
            let query = match curve {
                Ensemble::Mat => CurveQuery::mat(rho, beta)?,
                Ensemble::Sym => CurveQuery::sym(rho)?,
            };
            let m_rho = minimax_mse(&query)?;
            let mut points = aggregate(&recs, class_dim(curve, rows, cols));
            points.sort_by(|a, b| a.delta.total_cmp(&b.delta));
            let fit = fit_logistic(&points, m_rho)?;
            Ok(PtRow {
                experiment,
                rows,
                cols,
                rank,
                rho,
                beta,
                trials_per_point: points.iter().map(|p| p.trials).max().unwrap_or(0),
                trials_total: recs.len(),
                points,
                fit,
            })
        })
        .collect()
}

/// Three decimals with trailing zeros removed; `-0` prints as `0`.
pub fn format3(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let s = format!("{x:.3}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn fixed3(x: f64) -> String {
    if x.is_finite() { format!("{x:.3}") } else { x.to_string() }
}

pub fn render_table(rows: &[PtRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6} {:>5} {:>6} {:>7} {:>6} {:>6} {:>9} {:>9} {:>8}", "rho", "N", "T", "T_tot", "M", "dhat", "a", "b", "Z");
    for r in rows {
        let f = &r.fit;
        let _ = write!(
            s,
            "{:>6} {:>5} {:>6} {:>7} {:>6} {:>6} {:>9} {:>9} {:>8}",
            fixed3(r.rho),
            r.cols,
            r.trials_per_point,
            r.trials_total,
            fixed3(f.m_rho),
            fixed3(f.delta_hat),
            fixed3(f.a),
            fixed3(f.b),
            fixed3(f.z)
        );
        if f.separated {
            s.push_str("  separated");
        } else if f.anomalous_slope() {
            s.push_str("  negative-slope");
        }
        s.push('\n');
    }
    s
}

pub fn render_csv(rows: &[PtRow]) -> String {
    let mut s = String::from("experiment,m,n,rank,rho,beta,trials_per_point,trials_total,m_rho,delta_hat,a,b,se_a,se_b,z,separated\n");
    for r in rows {
        let f = &r.fit;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.rows,
            r.cols,
            r.rank,
            r.rho,
            r.beta,
            r.trials_per_point,
            r.trials_total,
            f.m_rho,
            f.delta_hat,
            f.a,
            f.b,
            f.se_a,
            f.se_b,
            f.z,
            f.separated
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use nucpt_core::harness::instance_code;

    fn record(exp: &str, delta: f64, t: usize, success: bool) -> TrialRecord {
        TrialRecord {
            line: 0,
            project: "P".into(),
            experiment: exp.into(),
            rows: 20,
            cols: 20,
            stack: 1,
            instance: instance_code(t),
            rank: 2,
            rho: 0.1,
            delta: delta,
            err0: 0.0,
            err1: u8::from(success),
            err2: 1.0,
        }
    }

    #[test]
    fn three_decimals() {
        assert_eq!(format3(0.35123), "0.351");
        assert_eq!(format3(0.0), "0");
        assert_eq!(format3(-0.0001), "0");
        assert_eq!(format3(1.0), "1");
        assert_eq!(format3(0.5), "0.5");
    }

    #[test]
    fn groups_and_fits() {
        let mut recs = Vec::new();
        for (g, delta) in [0.30, 0.35, 0.40, 0.45].into_iter().enumerate() {
            for t in 0..10 {
                recs.push(record("A", delta, t, t < 2 + 2 * g));
                recs.push(record("B", delta, t, t < 1 + 3 * g));
            }
        }
        let rows = fit_log(&recs, Ensemble::Mat, None).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].experiment, "A");
        assert_eq!(rows[0].trials_per_point, 10);
        assert_eq!(rows[0].trials_total, 40);
        assert_eq!(rows[0].beta, 1.0);
        assert!((rows[0].fit.m_rho - 0.351).abs() < 5e-4);
        assert!(rows[0].fit.b > 0.0);
        assert!(!rows[0].fit.separated);
        let table = render_table(&rows);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(1).unwrap().trim_start().starts_with("0.100"));
        let csv = render_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().starts_with("B,20,20,2,0.1,1,10,40,"));
    }
}
