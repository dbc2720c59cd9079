//! `key = value` configuration files for batch sweeps over `(N, r)` grids.
//!
//! ```text
//! # comment
//! class = mat            # mat | sym
//! measurement = gauss    # gauss | rademacher
//! n = 30, 40             # column counts N
//! m = 30                 # optional row count M (defaults to N)
//! rank = 1, 3            # ranks r; every (N, r) pair with r <= min(M, N) runs
//! trials = 20
//! window = 0.05
//! points = 13
//! tol = 0.001
//! seed = 7
//! project = NUCPT
//! ```

use std::collections::BTreeMap;
use std::fmt;

use nucpt_core::ensembles::Measurement;
use nucpt_core::harness::PlanSpec;
use nucpt_core::minimax::Ensemble;

use crate::applog::valid_identifier;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub plans: Vec<PlanSpec>,
    pub seed: u64,
}

const KEYS: [&str; 12] = ["class", "measurement", "n", "m", "rank", "trials", "window", "points", "tol", "seed", "project", "center"];

pub fn parse_class(s: &str) -> Result<Ensemble, ConfigError> {
    match s.to_ascii_lowercase().as_str() {
        "mat" => Ok(Ensemble::Mat),
        "sym" => Ok(Ensemble::Sym),
        other => Err(err(format!("unknown class '{other}' (expected mat or sym)"))),
    }
}

pub fn parse_measurement(s: &str) -> Result<Measurement, ConfigError> {
    match s.to_ascii_lowercase().as_str() {
        "gauss" | "gaussian" => Ok(Measurement::Gaussian),
        "rademacher" => Ok(Measurement::Rademacher),
        other => Err(err(format!("unknown measurement '{other}' (expected gauss or rademacher)"))),
    }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| err(format!("{key}: cannot parse '{s}'"))))
        .collect()
}

fn one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| err(format!("{key}: cannot parse '{v}'")))
}

pub fn parse(text: &str) -> Result<BatchConfig, ConfigError> {
    let mut kv: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(err(format!("line {}: unknown key '{k}'", i + 1)));
        }
        if kv.insert(k, v.trim()).is_some() {
            return Err(err(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    let class = parse_class(kv.get("class").ok_or_else(|| err("missing key 'class'"))?)?;
    let measurement = kv.get("measurement").map(|v| parse_measurement(v)).transpose()?.unwrap_or(Measurement::Gaussian);
    let ns: Vec<usize> = list("n", kv.get("n").ok_or_else(|| err("missing key 'n'"))?)?;
    let ranks: Vec<usize> = list("rank", kv.get("rank").ok_or_else(|| err("missing key 'rank'"))?)?;
    let m: Option<usize> = kv.get("m").map(|v| one("m", v)).transpose()?;
    if ns.is_empty() || ranks.is_empty() {
        return Err(err("'n' and 'rank' need at least one value"));
    }
    let project = kv.get("project").copied().unwrap_or("NUCPT").to_string();
    if !valid_identifier(&project) {
        return Err(err("project must be a single token"));
    }
    let seed = kv.get("seed").map(|v| one("seed", v)).transpose()?.unwrap_or(0);

    let mut plans = Vec::new();
    for &n in &ns {
        let rows = m.unwrap_or(n);
        for &r in &ranks {
            if r > rows.min(n) || r == 0 {
                continue;
            }
            let mut p = PlanSpec::new(class, measurement, rows, n, r);
            if let Some(v) = kv.get("trials") {
                p.trials = one("trials", v)?;
            }
            if let Some(v) = kv.get("window") {
                p.window = one("window", v)?;
            }
            if let Some(v) = kv.get("points") {
                p.points = one("points", v)?;
            }
            if let Some(v) = kv.get("tol") {
                p.success_tol = one("tol", v)?;
            }
            if let Some(v) = kv.get("center") {
                p.center = Some(one("center", v)?);
            }
            p.project = project.clone();
            p.experiment = format!("{project}_M{rows}N{n}r{r}");
            plans.push(p);
        }
    }
    if plans.is_empty() {
        return Err(err("no (N, rank) pair satisfies 1 <= rank <= min(M, N)"));
    }
    Ok(BatchConfig { plans, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grid() {
        let cfg = parse("class = sym # psd\nn = 20, 30\nrank = 1,25\ntrials=4\nseed = 9\n\nproject = P1\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.plans.len(), 3);
        assert_eq!(cfg.plans[0].class, Ensemble::Sym);
        assert_eq!(cfg.plans[2].rank, 25);
        assert_eq!(cfg.plans[2].cols, 30);
        assert_eq!(cfg.plans[1].trials, 4);
        assert_eq!(cfg.plans[1].experiment, "P1_M30N30r1");
        assert_eq!(cfg.plans[0].points, 13);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("class = mat\nn = 10\n").is_err());
        assert!(parse("class = cube\nn = 10\nrank = 1\n").is_err());
        assert!(parse("class = mat\nn = 10\nrank = 1\ncolour = red\n").is_err());
        assert!(parse("class = mat\nn = 10\nn = 11\nrank = 1\n").is_err());
        assert!(parse("class = mat\nn = 10\nrank = x\n").is_err());
        assert!(parse("class = mat\nn = 10\nrank = 11\n").is_err());
        assert!(parse("class mat\n").is_err());
    }
}
