//! Upper bounds on unique-order region counts via hyperplane arrangements.
//!
//! A family of N affine functions induces pairwise equality hyperplanes in
//! state space; the cells of that arrangement are the regions on which the
//! value-ordering of the family is constant. An arrangement of N hyperplanes
//! in dimension n has at most `sum_{i=0}^{n} C(N, i)` regions (equality in
//! general position), which is what this module evaluates, in arbitrary
//! precision, since the counts overflow 64 bits quickly.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// How to count hyperplanes from a local-function count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperplaneCounting {
    /// One hyperplane per pair of local functions: C(N, 2). Conservative,
    /// and the default.
    PairwiseEquality,
    /// One hyperplane per local function: N. Smaller, kept for comparison.
    LocalFunctionCount,
}

/// The unique-order bound for a given local-function count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UoBound {
    /// The local-function count the bound was derived from.
    pub n_local: BigUint,
    /// Number of ordering hyperplanes fed into the region bound.
    pub n_hyperplanes: BigUint,
    /// State dimension.
    pub n_state: usize,
    /// The region bound itself: an upper bound on the number of
    /// unique-order regions.
    pub m_est: BigUint,
}

/// Binomial coefficient C(n, k) for big n and machine-sized k.
pub fn binomial(n: &BigUint, k: usize) -> BigUint {
    let k_big = BigUint::from(k);
    if *n < k_big {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for t in 0..k {
        acc = acc * (n - BigUint::from(t)) / BigUint::from(t + 1);
    }
    acc
}

/// Maximum number of regions an arrangement of `num_hyperplanes` hyperplanes
/// can create in dimension `dim`: `sum_{i=0}^{dim} C(N, i)`, exactly.
///
/// Equals `2^N` whenever `dim >= N`.
pub fn region_bound(num_hyperplanes: &BigUint, dim: usize) -> BigUint {
    assert!(dim >= 1, "dimension must be at least 1");
    if let Some(n_small) = num_hyperplanes.to_u64() {
        if dim as u64 >= n_small {
            return BigUint::one() << n_small;
        }
    }
    let mut total = BigUint::zero();
    for i in 0..=dim {
        total += binomial(num_hyperplanes, i);
    }
    total
}

/// Bound the number of unique-order regions of a CPWL function with at most
/// `n_est` local linear functions in `n_state` dimensions, counting one
/// equality hyperplane per pair of functions.
pub fn estimate_unique_order_count(n_est: &BigUint, n_state: usize) -> UoBound {
    estimate_unique_order_count_with(n_est, n_state, HyperplaneCounting::PairwiseEquality)
}

/// [`estimate_unique_order_count`] with an explicit hyperplane-counting rule.
pub fn estimate_unique_order_count_with(
    n_est: &BigUint,
    n_state: usize,
    counting: HyperplaneCounting,
) -> UoBound {
    assert!(!n_est.is_zero(), "local-function count must be at least 1");
    let n_hyperplanes = match counting {
        HyperplaneCounting::PairwiseEquality => binomial(n_est, 2),
        HyperplaneCounting::LocalFunctionCount => n_est.clone(),
    };
    let m_est = region_bound(&n_hyperplanes, n_state);
    UoBound {
        n_local: n_est.clone(),
        n_hyperplanes,
        n_state,
        m_est,
    }
}
