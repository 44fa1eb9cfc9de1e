//! The problem-instance file format.
//!
//! A spec file is a JSON document with row-major matrices:
//!
//! ```json
//! {
//!   "A": [[1.0, 1.0], [0.0, 1.0]],
//!   "B": [[0.0], [1.0]],
//!   "C": [[1.0, 0.0]],
//!   "Q": [[1.0, 0.0], [0.0, 1.0]],
//!   "R": [[0.5]],
//!   "P": "riccati",
//!   "Nc": 2,
//!   "y_min": [-5.0], "y_max": [5.0],
//!   "u_min": [-1.0], "u_max": [1.0],
//!   "epsilon": 1e-6,
//!   "budget_seconds": 30.0,
//!   "domain_box": { "min": [-5.0, -3.0], "max": [5.0, 3.0] }
//! }
//! ```
//!
//! `P` may be a matrix or the directive `"riccati"` (also assumed when the
//! key is absent), in which case the terminal cost and the feedback gain are
//! computed from (A, B, Q, R). `K` is optional. `epsilon`,
//! `budget_seconds`, and `domain_box` are optional. Errors name the failing
//! key; JSON syntax errors carry line and column.

use arenkit_core::mpc::{dare_solve, CondenseError, DareError, MpcSpec};
use nalgebra::{DMatrix, DVector};
use serde_json::Value;
use std::fmt;

#[derive(Debug)]
pub enum SpecFileError {
    /// Malformed JSON; carries serde's line/column diagnostics.
    Json(serde_json::Error),
    MissingKey(&'static str),
    BadValue { key: String, why: String },
    /// The parsed instance violates a structural invariant.
    Invalid(CondenseError),
    /// The "riccati" directive failed to produce a terminal cost.
    Riccati(DareError),
}

impl fmt::Display for SpecFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecFileError::Json(e) => write!(f, "invalid JSON: {e}"),
            SpecFileError::MissingKey(k) => write!(f, "missing key \"{k}\""),
            SpecFileError::BadValue { key, why } => write!(f, "key \"{key}\": {why}"),
            SpecFileError::Invalid(e) => write!(f, "invalid specification: {e}"),
            SpecFileError::Riccati(e) => write!(f, "riccati directive failed: {e}"),
        }
    }
}

impl std::error::Error for SpecFileError {}

impl SpecFileError {
    /// Whether this is a solver failure rather than a parse failure.
    pub fn is_solver_error(&self) -> bool {
        matches!(self, SpecFileError::Riccati(_))
    }
}

/// A parsed instance plus the file-level options that ride along with it.
#[derive(Debug, Clone)]
pub struct ParsedSpec {
    pub spec: MpcSpec,
    /// True when P (and K) came from the Riccati directive.
    pub riccati_used: bool,
    pub budget_seconds: Option<f64>,
    pub domain_box: Option<(DVector<f64>, DVector<f64>)>,
}

pub fn parse_spec_str(text: &str) -> Result<ParsedSpec, SpecFileError> {
    let root: Value = serde_json::from_str(text).map_err(SpecFileError::Json)?;
    let obj = root
        .as_object()
        .ok_or(SpecFileError::BadValue {
            key: "<root>".into(),
            why: "expected a JSON object".into(),
        })?;

    let a = matrix(obj, "A")?;
    let b = matrix(obj, "B")?;
    let c = matrix(obj, "C")?;
    let q = matrix(obj, "Q")?;
    let r = matrix(obj, "R")?;
    let nc = integer(obj, "Nc")?;
    if nc > 10_000 {
        return Err(SpecFileError::BadValue {
            key: "Nc".into(),
            why: "horizons beyond 10000 are not supported".into(),
        });
    }
    let y_min = vector(obj, "y_min")?;
    let y_max = vector(obj, "y_max")?;
    let u_min = vector(obj, "u_min")?;
    let u_max = vector(obj, "u_max")?;
    let epsilon = match obj.get("epsilon") {
        None => 1e-6,
        Some(v) => finite_number(v, "epsilon")?,
    };

    let riccati_requested = match obj.get("P") {
        None => true,
        Some(Value::String(s)) if s == "riccati" => true,
        Some(Value::String(s)) => {
            return Err(SpecFileError::BadValue {
                key: "P".into(),
                why: format!("expected a matrix or \"riccati\", got \"{s}\""),
            })
        }
        Some(_) => false,
    };
    let (p, k) = if riccati_requested {
        let (p, k) = dare_solve(&a, &b, &q, &r).map_err(SpecFileError::Riccati)?;
        let k = match obj.get("K") {
            None => k,
            Some(_) => matrix(obj, "K")?,
        };
        (p, k)
    } else {
        let p = matrix(obj, "P")?;
        let k = match obj.get("K") {
            None => DMatrix::zeros(b.ncols(), a.nrows()),
            Some(_) => matrix(obj, "K")?,
        };
        (p, k)
    };

    let budget_seconds = match obj.get("budget_seconds") {
        None => None,
        Some(v) => {
            let s = finite_number(v, "budget_seconds")?;
            if s < 0.0 {
                return Err(SpecFileError::BadValue {
                    key: "budget_seconds".into(),
                    why: "must be nonnegative".into(),
                });
            }
            Some(s)
        }
    };

    let domain_box = match obj.get("domain_box") {
        None => None,
        Some(v) => {
            let bx = v.as_object().ok_or(SpecFileError::BadValue {
                key: "domain_box".into(),
                why: "expected an object with \"min\" and \"max\"".into(),
            })?;
            let lo = vector(bx, "min").map_err(prefix_key("domain_box."))?;
            let hi = vector(bx, "max").map_err(prefix_key("domain_box."))?;
            if lo.len() != a.nrows() || hi.len() != a.nrows() {
                return Err(SpecFileError::BadValue {
                    key: "domain_box".into(),
                    why: format!("min/max must have length {}", a.nrows()),
                });
            }
            if (0..lo.len()).any(|i| lo[i] >= hi[i]) {
                return Err(SpecFileError::BadValue {
                    key: "domain_box".into(),
                    why: "min must be element-wise below max".into(),
                });
            }
            Some((lo, hi))
        }
    };

    let spec = MpcSpec {
        a,
        b,
        c,
        p,
        q,
        r,
        k,
        horizon: nc,
        y_min,
        y_max,
        u_min,
        u_max,
        epsilon,
    };
    spec.validate().map_err(SpecFileError::Invalid)?;
    Ok(ParsedSpec {
        spec,
        riccati_used: riccati_requested,
        budget_seconds,
        domain_box,
    })
}

fn prefix_key(prefix: &'static str) -> impl Fn(SpecFileError) -> SpecFileError {
    move |e| match e {
        SpecFileError::MissingKey(k) => SpecFileError::BadValue {
            key: format!("{prefix}{k}"),
            why: "missing".into(),
        },
        SpecFileError::BadValue { key, why } => SpecFileError::BadValue {
            key: format!("{prefix}{key}"),
            why,
        },
        other => other,
    }
}

fn get<'v>(
    obj: &'v serde_json::Map<String, Value>,
    key: &'static str,
) -> Result<&'v Value, SpecFileError> {
    obj.get(key).ok_or(SpecFileError::MissingKey(key))
}

fn finite_number(v: &Value, key: &str) -> Result<f64, SpecFileError> {
    let x = v.as_f64().ok_or_else(|| SpecFileError::BadValue {
        key: key.into(),
        why: "expected a number".into(),
    })?;
    if !x.is_finite() {
        return Err(SpecFileError::BadValue {
            key: key.into(),
            why: "must be finite".into(),
        });
    }
    Ok(x)
}

fn integer(obj: &serde_json::Map<String, Value>, key: &'static str) -> Result<usize, SpecFileError> {
    let v = get(obj, key)?;
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| SpecFileError::BadValue {
            key: key.into(),
            why: "expected a nonnegative integer".into(),
        })
}

fn vector(obj: &serde_json::Map<String, Value>, key: &'static str) -> Result<DVector<f64>, SpecFileError> {
    let v = get(obj, key)?;
    let arr = v.as_array().ok_or_else(|| SpecFileError::BadValue {
        key: key.into(),
        why: "expected an array of numbers".into(),
    })?;
    if arr.is_empty() {
        return Err(SpecFileError::BadValue {
            key: key.into(),
            why: "must not be empty".into(),
        });
    }
    let mut out = Vec::with_capacity(arr.len());
    for (i, x) in arr.iter().enumerate() {
        out.push(finite_number(x, &format!("{key}[{i}]"))?);
    }
    Ok(DVector::from_vec(out))
}

fn matrix(obj: &serde_json::Map<String, Value>, key: &'static str) -> Result<DMatrix<f64>, SpecFileError> {
    let v = get(obj, key)?;
    let rows = v.as_array().ok_or_else(|| SpecFileError::BadValue {
        key: key.into(),
        why: "expected an array of row arrays".into(),
    })?;
    if rows.is_empty() {
        return Err(SpecFileError::BadValue {
            key: key.into(),
            why: "must have at least one row".into(),
        });
    }
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let cells = row.as_array().ok_or_else(|| SpecFileError::BadValue {
            key: format!("{key}[{i}]"),
            why: "expected a row array".into(),
        })?;
        if cells.is_empty() {
            return Err(SpecFileError::BadValue {
                key: format!("{key}[{i}]"),
                why: "row must not be empty".into(),
            });
        }
        let mut r = Vec::with_capacity(cells.len());
        for (j, x) in cells.iter().enumerate() {
            r.push(finite_number(x, &format!("{key}[{i}][{j}]"))?);
        }
        if i > 0 && r.len() != data[0].len() {
            return Err(SpecFileError::BadValue {
                key: key.into(),
                why: format!("row {i} has {} entries, row 0 has {}", r.len(), data[0].len()),
            });
        }
        data.push(r);
    }
    let nrows = data.len();
    let ncols = data[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| data[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{
        "A": [[1.0, 1.0], [0.0, 1.0]],
        "B": [[0.0], [1.0]],
        "C": [[1.0, 0.0]],
        "Q": [[1.0, 0.0], [0.0, 1.0]],
        "R": [[0.5]],
        "P": "riccati",
        "Nc": 2,
        "y_min": [-5.0], "y_max": [5.0],
        "u_min": [-1.0], "u_max": [1.0]
    }"#;

    #[test]
    fn parses_a_well_formed_spec() {
        let parsed = parse_spec_str(GOOD).unwrap();
        assert!(parsed.riccati_used);
        assert_eq!(parsed.spec.horizon, 2);
        assert_eq!(parsed.spec.n_states(), 2);
        // Riccati residual: P = Q + A'PA - A'PB(R + B'PB)^{-1}B'PA.
        let s = &parsed.spec;
        let inner = (&s.r + s.b.transpose() * &s.p * &s.b).try_inverse().unwrap();
        let resid = &s.q + s.a.transpose() * &s.p * &s.a
            - s.a.transpose() * &s.p * &s.b * inner * s.b.transpose() * &s.p * &s.a
            - &s.p;
        assert!(resid.abs().max() < 1e-8);
    }

    #[test]
    fn missing_r_is_named() {
        let text = GOOD.replace("\"R\": [[0.5]],", "");
        let err = parse_spec_str(&text).unwrap_err();
        assert!(err.to_string().contains('R'), "got: {err}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_spec_str("{ \"A\": [[1.0,]] }").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "got: {msg}");
    }

    #[test]
    fn explicit_p_matrix_is_used() {
        let text = GOOD.replace("\"riccati\"", "[[2.0, 0.0], [0.0, 2.0]]");
        let parsed = parse_spec_str(&text).unwrap();
        assert!(!parsed.riccati_used);
        assert_eq!(parsed.spec.p[(0, 0)], 2.0);
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let text = GOOD.replace("[[1.0, 0.0], [0.0, 1.0]],\n        \"R\"", "[[1.0, 0.0], [0.0]],\n        \"R\"");
        let err = parse_spec_str(&text).unwrap_err();
        assert!(err.to_string().contains('Q'), "got: {err}");
    }

    #[test]
    fn invalid_bounds_fail_validation() {
        let text = GOOD.replace("\"u_min\": [-1.0]", "\"u_min\": [2.0]");
        assert!(matches!(
            parse_spec_str(&text),
            Err(SpecFileError::Invalid(_))
        ));
    }

    #[test]
    fn domain_box_parses() {
        let text = GOOD.replace(
            "\"u_min\": [-1.0], \"u_max\": [1.0]",
            "\"u_min\": [-1.0], \"u_max\": [1.0], \"domain_box\": {\"min\": [-2.0, -1.0], \"max\": [2.0, 1.0]}",
        );
        let parsed = parse_spec_str(&text).unwrap();
        let (lo, hi) = parsed.domain_box.unwrap();
        assert_eq!(lo[1], -1.0);
        assert_eq!(hi[0], 2.0);
    }
}
