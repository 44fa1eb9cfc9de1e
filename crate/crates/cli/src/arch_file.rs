//! The emitted architecture file format.
//!
//! JSON with a `metadata` object and a `layers` array. Every potentially
//! large integer (the estimates, the parameter count, and the layer sizes
//! themselves) is serialized as a decimal string so downstream consumers
//! never hit 2^64 limits. Files round-trip losslessly through
//! [`parse_arch_str`]; the `timing_ms` object is the only part expected to
//! differ between two runs on the same input.

use arenkit_core::lattice::{ArchDescriptor, LayerRole, LayerSpec};
use arenkit_core::ordering::HyperplaneCounting;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArchFile {
    pub metadata: ArchMetadata,
    pub layers: Vec<ArchLayer>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArchMetadata {
    pub tool_version: String,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub nc: usize,
    pub omega: usize,
    pub rho: usize,
    pub epsilon: f64,
    /// Whether P and K came from the Riccati directive.
    pub riccati: bool,
    /// Decimal strings.
    pub n_est: String,
    pub m_est: String,
    pub two_pow_rho: String,
    pub parameter_count: String,
    /// Which hyperplane count fed the unique-order bound:
    /// "pairwise-equality" (default) or "local-function-count".
    pub uo_counting: String,
    /// n_est is an exact union size (not the capped sum bound).
    pub exact_union: bool,
    /// The enumeration ran to completion; when false the file is a partial
    /// result produced under a budget and n_est is not a sound bound.
    pub complete: bool,
    pub resource_warning: bool,
    pub ratio_two_pow_rho_over_n_est: f64,
    pub lp_calls: usize,
    pub sat_calls: usize,
    pub timing_ms: TimingMs,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TimingMs {
    pub condense: u128,
    pub region_count: u128,
    pub unique_order: u128,
    pub architecture: u128,
    pub total: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ArchLayer {
    /// Decimal strings: layer sizes can exceed 2^64.
    #[serde(rename = "in")]
    pub in_dim: String,
    #[serde(rename = "out")]
    pub out_dim: String,
    pub role: String,
    pub activation: bool,
}

#[derive(Debug)]
pub enum ArchFileError {
    Json(serde_json::Error),
    BadNumber { field: String, value: String },
    BadRole(String),
    NotComposable { layer: usize },
}

impl fmt::Display for ArchFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArchFileError::Json(e) => write!(f, "invalid JSON: {e}"),
            ArchFileError::BadNumber { field, value } => {
                write!(f, "field \"{field}\": \"{value}\" is not a decimal integer")
            }
            ArchFileError::BadRole(r) => write!(f, "unknown layer role \"{r}\""),
            ArchFileError::NotComposable { layer } => {
                write!(f, "layer {layer} input does not match the previous output")
            }
        }
    }
}

impl std::error::Error for ArchFileError {}

/// Assemble the file payload from the descriptor and run metadata.
#[allow(clippy::too_many_arguments)]
pub fn build_arch_file(
    desc: &ArchDescriptor,
    l: usize,
    nc: usize,
    omega: usize,
    rho: usize,
    epsilon: f64,
    riccati: bool,
    two_pow_rho: &BigUint,
    exact_union: bool,
    complete: bool,
    lp_calls: usize,
    sat_calls: usize,
    uo_counting: HyperplaneCounting,
    timing_ms: TimingMs,
) -> ArchFile {
    let ratio = big_ratio(two_pow_rho, &desc.n_local);
    ArchFile {
        metadata: ArchMetadata {
            tool_version: TOOL_VERSION.to_string(),
            n: desc.input_dim,
            m: desc.output_dim,
            l,
            nc,
            omega,
            rho,
            epsilon,
            riccati,
            n_est: desc.n_local.to_string(),
            m_est: desc.n_order.to_string(),
            two_pow_rho: two_pow_rho.to_string(),
            parameter_count: desc.parameter_count.to_string(),
            uo_counting: match uo_counting {
                HyperplaneCounting::PairwiseEquality => "pairwise-equality".to_string(),
                HyperplaneCounting::LocalFunctionCount => "local-function-count".to_string(),
            },
            exact_union,
            complete,
            resource_warning: desc.resource_warning,
            ratio_two_pow_rho_over_n_est: ratio,
            lp_calls,
            sat_calls,
            timing_ms,
        },
        layers: desc
            .layers
            .iter()
            .map(|spec| ArchLayer {
                in_dim: spec.in_dim.to_string(),
                out_dim: spec.out_dim.to_string(),
                role: spec.role.as_str().to_string(),
                activation: spec.has_activation,
            })
            .collect(),
    }
}

fn big_ratio(num: &BigUint, den: &BigUint) -> f64 {
    use num_traits::ToPrimitive;
    match (num.to_f64(), den.to_f64()) {
        (Some(a), Some(b)) if b > 0.0 => a / b,
        _ => f64::INFINITY,
    }
}

pub fn to_json_string(file: &ArchFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("arch file serializes");
    s.push('\n');
    s
}

/// Parse and validate an architecture file: dimensions must be decimal
/// integers, roles known, and consecutive layers composable.
pub fn parse_arch_str(text: &str) -> Result<ArchFile, ArchFileError> {
    let file: ArchFile = serde_json::from_str(text).map_err(ArchFileError::Json)?;
    for field in ["n_est", "m_est", "two_pow_rho", "parameter_count"] {
        let value = match field {
            "n_est" => &file.metadata.n_est,
            "m_est" => &file.metadata.m_est,
            "two_pow_rho" => &file.metadata.two_pow_rho,
            _ => &file.metadata.parameter_count,
        };
        BigUint::from_str(value).map_err(|_| ArchFileError::BadNumber {
            field: field.into(),
            value: value.clone(),
        })?;
    }
    let mut prev_out: Option<BigUint> = None;
    for (idx, layer) in file.layers.iter().enumerate() {
        let in_dim = BigUint::from_str(&layer.in_dim).map_err(|_| ArchFileError::BadNumber {
            field: format!("layers[{idx}].in"),
            value: layer.in_dim.clone(),
        })?;
        let out_dim = BigUint::from_str(&layer.out_dim).map_err(|_| ArchFileError::BadNumber {
            field: format!("layers[{idx}].out"),
            value: layer.out_dim.clone(),
        })?;
        if LayerRole::from_tag(&layer.role).is_none() {
            return Err(ArchFileError::BadRole(layer.role.clone()));
        }
        if let Some(prev) = prev_out {
            if prev != in_dim {
                return Err(ArchFileError::NotComposable { layer: idx });
            }
        }
        prev_out = Some(out_dim);
    }
    Ok(file)
}

/// Reconstruct the layer list of a parsed file as descriptor layer specs.
/// Fails on sizes beyond u128, which also bounds what the in-memory
/// descriptor type can hold.
pub fn layers_to_specs(file: &ArchFile) -> Result<Vec<LayerSpec>, ArchFileError> {
    file.layers
        .iter()
        .enumerate()
        .map(|(idx, l)| {
            let in_dim = u128::from_str(&l.in_dim).map_err(|_| ArchFileError::BadNumber {
                field: format!("layers[{idx}].in"),
                value: l.in_dim.clone(),
            })?;
            let out_dim = u128::from_str(&l.out_dim).map_err(|_| ArchFileError::BadNumber {
                field: format!("layers[{idx}].out"),
                value: l.out_dim.clone(),
            })?;
            let role = LayerRole::from_tag(&l.role).ok_or(ArchFileError::BadRole(l.role.clone()))?;
            Ok(LayerSpec {
                in_dim,
                out_dim,
                role,
                has_activation: l.activation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use arenkit_core::infer_architecture;

    fn sample_file() -> ArchFile {
        let desc = infer_architecture(
            &BigUint::from(3u32),
            &BigUint::from(4u32),
            2,
            1,
        )
        .unwrap();
        build_arch_file(
            &desc,
            1,
            2,
            3,
            10,
            1e-6,
            true,
            &BigUint::from(1024u32),
            true,
            true,
            16,
            17,
            HyperplaneCounting::PairwiseEquality,
            TimingMs {
                condense: 1,
                region_count: 2,
                unique_order: 3,
                architecture: 4,
                total: 10,
            },
        )
    }

    #[test]
    fn round_trips_losslessly() {
        let file = sample_file();
        let text = to_json_string(&file);
        let back = parse_arch_str(&text).unwrap();
        assert_eq!(file, back);
        assert_eq!(to_json_string(&back), text);
    }

    #[test]
    fn composability_is_validated() {
        let mut file = sample_file();
        file.layers[1].in_dim = "999".into();
        let text = to_json_string(&file);
        assert!(matches!(
            parse_arch_str(&text),
            Err(ArchFileError::NotComposable { layer: 1 })
        ));
    }

    #[test]
    fn bad_numbers_are_rejected() {
        let mut file = sample_file();
        file.metadata.n_est = "not-a-number".into();
        let text = to_json_string(&file);
        assert!(matches!(
            parse_arch_str(&text),
            Err(ArchFileError::BadNumber { .. })
        ));
    }

    #[test]
    fn specs_reconstruct() {
        let file = sample_file();
        let specs = layers_to_specs(&file).unwrap();
        assert_eq!(specs.len(), file.layers.len());
        assert_eq!(specs[0].in_dim, 2);
    }
}
