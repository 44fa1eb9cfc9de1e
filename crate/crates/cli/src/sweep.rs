//! The benchmark sweep descriptor.
//!
//! A descriptor is a comma-separated list of `key=value` or `key=lo..hi`
//! (inclusive) clauses over the instance parameters `n`, `m`, `l`, `Nc`,
//! e.g. `n=2..100,Nc=2` or `Nc=2..4,m=1,l=1`. Missing keys default to
//! n=2, m=1, l=1, Nc=2. The expansion is the Cartesian product in
//! lexicographic order (n outermost, Nc innermost). The empty descriptor
//! expands to no instances at all.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepPoint {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub nc: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepError {
    UnknownKey(String),
    DuplicateKey(String),
    BadClause(String),
    BadRange { key: String, why: String },
    /// The expansion would exceed the row cap.
    TooManyRows { rows: usize, cap: usize },
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepError::UnknownKey(k) => write!(f, "unknown sweep key \"{k}\""),
            SweepError::DuplicateKey(k) => write!(f, "duplicate sweep key \"{k}\""),
            SweepError::BadClause(c) => write!(f, "malformed clause \"{c}\" (want key=v or key=lo..hi)"),
            SweepError::BadRange { key, why } => write!(f, "range for \"{key}\": {why}"),
            SweepError::TooManyRows { rows, cap } => {
                write!(f, "sweep expands to {rows} rows, cap is {cap}")
            }
        }
    }
}

impl std::error::Error for SweepError {}

const ROW_CAP: usize = 100_000;

/// Parse and expand a sweep descriptor.
pub fn parse_sweep(desc: &str) -> Result<Vec<SweepPoint>, SweepError> {
    if desc.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut n: Option<(usize, usize)> = None;
    let mut m: Option<(usize, usize)> = None;
    let mut l: Option<(usize, usize)> = None;
    let mut nc: Option<(usize, usize)> = None;

    for clause in desc.split(',') {
        let clause = clause.trim();
        let (key, value) = clause
            .split_once('=')
            .ok_or_else(|| SweepError::BadClause(clause.to_string()))?;
        let key = key.trim();
        let range = parse_range(key, value.trim())?;
        let slot = match key {
            "n" => &mut n,
            "m" => &mut m,
            "l" => &mut l,
            "Nc" => &mut nc,
            _ => return Err(SweepError::UnknownKey(key.to_string())),
        };
        if slot.is_some() {
            return Err(SweepError::DuplicateKey(key.to_string()));
        }
        *slot = Some(range);
    }

    let n = n.unwrap_or((2, 2));
    let m = m.unwrap_or((1, 1));
    let l = l.unwrap_or((1, 1));
    let nc = nc.unwrap_or((2, 2));
    check_min("n", n.0, 1)?;
    check_min("m", m.0, 1)?;
    check_min("l", l.0, 1)?;
    check_min("Nc", nc.0, 2)?;

    let count = |r: (usize, usize)| (r.1 - r.0).checked_add(1);
    let rows = [count(n), count(m), count(l), count(nc)]
        .into_iter()
        .try_fold(1usize, |acc, c| c.and_then(|c| acc.checked_mul(c)))
        .unwrap_or(usize::MAX);
    if rows > ROW_CAP {
        return Err(SweepError::TooManyRows { rows, cap: ROW_CAP });
    }

    let mut out = Vec::with_capacity(rows);
    for vn in n.0..=n.1 {
        for vm in m.0..=m.1 {
            for vl in l.0..=l.1 {
                for vnc in nc.0..=nc.1 {
                    out.push(SweepPoint {
                        n: vn,
                        m: vm,
                        l: vl,
                        nc: vnc,
                    });
                }
            }
        }
    }
    Ok(out)
}

fn check_min(key: &str, value: usize, min: usize) -> Result<(), SweepError> {
    if value < min {
        return Err(SweepError::BadRange {
            key: key.to_string(),
            why: format!("must be at least {min}"),
        });
    }
    Ok(())
}

fn parse_range(key: &str, value: &str) -> Result<(usize, usize), SweepError> {
    let bad = |why: &str| SweepError::BadRange {
        key: key.to_string(),
        why: why.to_string(),
    };
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad("lower bound is not an integer"))?;
        let hi: usize = hi.trim().parse().map_err(|_| bad("upper bound is not an integer"))?;
        if lo > hi {
            return Err(bad("lower bound exceeds upper bound"));
        }
        Ok((lo, hi))
    } else {
        let v: usize = value.parse().map_err(|_| bad("not an integer"))?;
        Ok((v, v))
    }
}
