//! Whitespace-separated trial logs, one line per trial.

use std::fmt::Write as _;
use std::io::{self, BufRead};

use nucpt_core::harness::TrialRecord;

pub const HEADER: &str = "Line Project Experiment M N S Instance rank rho delta Err0 Err1 Err2";
const FIELDS: usize = 13;

/// Formats `x` with 17 significant digits, trailing zeros removed.
/// Plain notation for exponents in `[-5, 17)`, scientific otherwise.
pub fn format_full(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".to_string() } else { x.to_string() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One log line (without newline).
pub fn format_record(r: &TrialRecord) -> String {
    let mut s = String::with_capacity(160);
    write!(
        s,
        "{} {} {} {} {} {} {} {} {} {} {} {} {}",
        r.line,
        r.project,
        r.experiment,
        r.rows,
        r.cols,
        r.stack,
        r.instance,
        r.rank,
        format_full(r.rho),
        format_full(r.delta),
        format_full(r.err0),
        r.err1,
        format_full(r.err2)
    )
    .expect("writing to a String");
    s
}

/// Header plus one line per record.
pub fn render(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 + 160 * records.len());
    out.push_str(HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format_record(r));
        out.push('\n');
    }
    out
}

/// Identifiers must be non-empty and free of whitespace to survive a round trip.
pub fn valid_identifier(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

fn bad(line: usize, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("log line {line}: {msg}"))
}

/// Parses one data line.
pub fn parse_record(text: &str, line_no: usize) -> io::Result<TrialRecord> {
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != FIELDS {
        return Err(bad(line_no, format!("expected {FIELDS} fields, found {}", f.len())));
    }
    fn num<T: std::str::FromStr>(s: &str, line: usize, name: &str) -> io::Result<T> {
        s.parse().map_err(|_| bad(line, format!("invalid {name} '{s}'")))
    }
    Ok(TrialRecord {
        line: num(f[0], line_no, "Line")?,
        project: f[1].to_string(),
        experiment: f[2].to_string(),
        rows: num(f[3], line_no, "M")?,
        cols: num(f[4], line_no, "N")?,
        stack: num(f[5], line_no, "S")?,
        instance: f[6].to_string(),
        rank: num(f[7], line_no, "rank")?,
        rho: num(f[8], line_no, "rho")?,
        delta: num(f[9], line_no, "delta")?,
        err0: num(f[10], line_no, "Err0")?,
        err1: num(f[11], line_no, "Err1")?,
        err2: num(f[12], line_no, "Err2")?,
    })
}

/// Reads a log: an optional header line followed by data lines. Blank lines are skipped.
pub fn read<R: BufRead>(reader: R) -> io::Result<Vec<TrialRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (i == 0 && trimmed.starts_with("Line")) {
            continue;
        }
        out.push(parse_record(trimmed, i + 1)?);
    }
    Ok(out)
}
