//! Region-count estimation for the condensed QP.
//!
//! Upper-bounds the number of distinct affine pieces of the MPC control law
//! without solving the QP family: enumerate the maximal row subsets of
//! `G H^{-1}` that admit a common strict descent direction, then count the
//! union of their power sets. Enumeration alternates a maximum-cardinality
//! Boolean search proposing candidate subsets with an LP feasibility check,
//! learning an irreducibly infeasible subset as an exclusion clause whenever
//! the LP refutes a candidate, and a subset-blocking clause whenever it
//! confirms one.

use crate::linfeas::{check_feasible, extract_iis, Feasibility, IneqSystem, LinfeasError};
use crate::mpc::{CondenseError, CondensedQp};
use crate::sat::{add_blocking, maximize_true, BoolConstraint, Literal};
use nalgebra::{DMatrix, DVector};
use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};
use std::collections::BTreeSet;
use std::fmt;
use std::time::{Duration, Instant};

/// Default strict-feasibility margin for the row subsystems.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Default cap on the number of maximal sets fed to inclusion–exclusion.
pub const DEFAULT_INCLUSION_EXCLUSION_LIMIT: usize = 20;

/// A sorted, duplicate-free subset of the constraint indices `1..=rho`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActiveSet {
    indices: BTreeSet<usize>,
}

impl ActiveSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        ActiveSet {
            indices: indices.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        ActiveSet {
            indices: BTreeSet::new(),
        }
    }

    pub fn indices(&self) -> &BTreeSet<usize> {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn is_subset(&self, other: &ActiveSet) -> bool {
        self.indices.is_subset(&other.indices)
    }

    /// The |alpha| x rho selector matrix: row t is the unit row picking the
    /// t-th smallest member. Satisfies sel * sel' = identity.
    pub fn selector_matrix(&self, rho: usize) -> DMatrix<f64> {
        let mut sel = DMatrix::zeros(self.len(), rho);
        for (t, &i) in self.indices.iter().enumerate() {
            assert!(i >= 1 && i <= rho, "index {i} outside 1..={rho}");
            sel[(t, i - 1)] = 1.0;
        }
        sel
    }
}

impl FromIterator<usize> for ActiveSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        ActiveSet::new(iter)
    }
}

/// Outcome of a region-count run.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCountReport {
    /// The maximal non-trivially feasible subsets found, an anti-chain.
    pub maximal_sets: Vec<ActiveSet>,
    /// The region-count estimate: the size of the union of the power sets
    /// of `maximal_sets` (or its sum bound, see `exact_union`).
    pub n_est: BigUint,
    pub two_pow_rho: BigUint,
    /// The strict-feasibility margin the run used; the feasible-subset
    /// family can depend on it, so every report records it.
    pub epsilon: f64,
    /// True when `n_est` is the exact union size; false when it is the
    /// capped sum bound (too many maximal sets for inclusion–exclusion).
    pub exact_union: bool,
    /// False when the wall-clock budget expired before enumeration
    /// finished. An incomplete run's `n_est` only covers the sets found so
    /// far and is not a sound upper bound.
    pub complete: bool,
    pub wall_time: Duration,
    /// Feasibility subproblems posed by the enumeration loop (the deletion
    /// filter's internal probes are not counted).
    pub lp_calls: usize,
    pub sat_calls: usize,
    /// Every IIS learned during the run, re-checkable by the caller.
    pub learned_iis: Vec<ActiveSet>,
}

#[derive(Debug)]
pub enum RegionCountError {
    Condense(CondenseError),
    Linfeas(LinfeasError),
    /// epsilon must be strictly positive.
    BadEpsilon(f64),
}

impl fmt::Display for RegionCountError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionCountError::Condense(e) => write!(f, "{e}"),
            RegionCountError::Linfeas(e) => write!(f, "{e}"),
            RegionCountError::BadEpsilon(v) => write!(f, "epsilon must be positive, got {v}"),
        }
    }
}

impl std::error::Error for RegionCountError {}

impl From<CondenseError> for RegionCountError {
    fn from(e: CondenseError) -> Self {
        RegionCountError::Condense(e)
    }
}

impl From<LinfeasError> for RegionCountError {
    fn from(e: LinfeasError) -> Self {
        RegionCountError::Linfeas(e)
    }
}

/// Options for [`estimate_region_count`].
#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub epsilon: f64,
    /// Optional wall-clock budget; `None` runs to completion.
    pub budget: Option<Duration>,
    pub inclusion_exclusion_limit: usize,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            epsilon: DEFAULT_EPSILON,
            budget: None,
            inclusion_exclusion_limit: DEFAULT_INCLUSION_EXCLUSION_LIMIT,
        }
    }
}

/// The reduced test matrix `G H^{-1}` (rho x omega).
///
/// A subset alpha is non-trivially feasible exactly when the rows alpha of
/// this matrix admit a common vector v with row . v <= -epsilon: G has full
/// column rank (it contains both unit rows of every input bound), so
/// `G H^{-1} G' chi` ranges over the same values as `G H^{-1} v` and the
/// omega-dimensional test is equivalent to the rho-dimensional one.
pub fn feasibility_matrix(qp: &CondensedQp) -> Result<DMatrix<f64>, CondenseError> {
    let chol = qp.h_cholesky()?;
    Ok(chol.solve(&qp.g.transpose()).transpose())
}

/// Enumerate the maximal non-trivially feasible subsets of the condensed
/// QP's constraint rows and count the union of their power sets.
pub fn estimate_region_count(
    qp: &CondensedQp,
    opts: &EstimateOptions,
) -> Result<RegionCountReport, RegionCountError> {
    if opts.epsilon.is_nan() || opts.epsilon <= 0.0 {
        return Err(RegionCountError::BadEpsilon(opts.epsilon));
    }
    let start = Instant::now();
    let t_mat = feasibility_matrix(qp)?;
    let rho = qp.rho;

    let mut constraints: Vec<BoolConstraint> = Vec::new();
    let mut maximal: Vec<ActiveSet> = Vec::new();
    let mut learned_iis: Vec<ActiveSet> = Vec::new();
    let mut lp_calls = 0usize;
    let mut sat_calls = 0usize;
    let mut complete = true;

    loop {
        if let Some(budget) = opts.budget {
            if start.elapsed() > budget {
                complete = false;
                break;
            }
        }
        sat_calls += 1;
        let assignment = match maximize_true(rho, &constraints) {
            None => break,
            Some(a) => a,
        };
        if assignment.true_set.is_empty() {
            // The empty set is the only assignment left; it is always
            // non-trivially feasible and is covered by every power set.
            break;
        }
        let candidate = ActiveSet::new(assignment.true_set.iter().copied());
        let sub = row_subsystem(&t_mat, &candidate, opts.epsilon);
        lp_calls += 1;
        match check_feasible(&sub)? {
            Feasibility::Feasible { .. } => {
                log::debug!("maximal set of size {} found", candidate.len());
                add_blocking(&mut constraints, candidate.indices())
                    .expect("candidate is nonempty");
                maximal.push(candidate);
            }
            Feasibility::Infeasible { .. } => {
                let iis = extract_iis(&sub)?;
                log::debug!("learned IIS of size {}", iis.len());
                constraints.push(BoolConstraint::Clause(
                    iis.iter().map(|&i| Literal::neg(i)).collect(),
                ));
                learned_iis.push(ActiveSet::new(iis));
            }
        }
    }

    let two_pow_rho = BigUint::one() << rho;
    let (n_est, exact_union) = if complete {
        let c = count_unique_subsets_with(&maximal, rho, opts.inclusion_exclusion_limit);
        (c.count, c.exact)
    } else {
        // Partial result: fall back to the sum bound over the sets found so
        // far, capped at 2^rho. Not sound as an upper bound on regions.
        (sum_bound(&maximal, rho), false)
    };

    Ok(RegionCountReport {
        maximal_sets: maximal,
        n_est,
        two_pow_rho,
        epsilon: opts.epsilon,
        exact_union,
        complete,
        wall_time: start.elapsed(),
        lp_calls,
        sat_calls,
        learned_iis,
    })
}

/// The subsystem `rows(alpha) of t . v <= -eps`, labeled with 1-based
/// constraint indices.
pub(crate) fn row_subsystem(t: &DMatrix<f64>, alpha: &ActiveSet, eps: f64) -> IneqSystem {
    let rows: Vec<usize> = alpha.indices().iter().map(|&i| i - 1).collect();
    let m = DMatrix::from_fn(rows.len(), t.ncols(), |i, j| t[(rows[i], j)]);
    let rhs = DVector::from_element(rows.len(), -eps);
    IneqSystem::with_labels(m, rhs, alpha.indices().iter().copied().collect())
        .expect("active set is nonempty and labels are unique")
}

/// Result of a power-set union count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetCount {
    pub count: BigUint,
    /// True when `count` is the exact union size, false when it is the
    /// capped sum bound.
    pub exact: bool,
}

/// Count `|union over alpha of 2^alpha|` for an anti-chain of active sets.
///
/// Exact by inclusion–exclusion over intersections when there are at most
/// [`DEFAULT_INCLUSION_EXCLUSION_LIMIT`] sets; beyond that the capped sum
/// `min(sum 2^|alpha|, 2^rho)` is returned with `exact = false`. The empty
/// family counts 1: the empty active set alone.
pub fn count_unique_subsets(maximal_sets: &[ActiveSet], rho: usize) -> SubsetCount {
    count_unique_subsets_with(maximal_sets, rho, DEFAULT_INCLUSION_EXCLUSION_LIMIT)
}

pub fn count_unique_subsets_with(
    maximal_sets: &[ActiveSet],
    rho: usize,
    limit: usize,
) -> SubsetCount {
    debug_assert!(is_anti_chain(maximal_sets), "sets must be mutually non-contained");
    if maximal_sets.is_empty() {
        return SubsetCount {
            count: BigUint::one(),
            exact: true,
        };
    }
    if maximal_sets.len() > limit {
        return SubsetCount {
            count: sum_bound(maximal_sets, rho),
            exact: false,
        };
    }

    // Inclusion–exclusion: |union 2^{a_i}| =
    //   sum over nonempty families T of (-1)^{|T|+1} 2^{|intersection T|},
    // with sets held as bit masks so intersections are word-ANDs.
    let words = rho.div_ceil(64).max(1);
    let masks: Vec<Vec<u64>> = maximal_sets
        .iter()
        .map(|a| {
            let mut mask = vec![0u64; words];
            for &i in a.indices() {
                let bit = i - 1;
                mask[bit / 64] |= 1u64 << (bit % 64);
            }
            mask
        })
        .collect();

    let mut total = BigInt::zero();
    let mut stack_mask = vec![0u64; words];
    fn dfs(
        masks: &[Vec<u64>],
        from: usize,
        depth: usize,
        inter: &mut Vec<u64>,
        total: &mut BigInt,
    ) {
        for i in from..masks.len() {
            let saved = inter.clone();
            if depth == 0 {
                inter.copy_from_slice(&masks[i]);
            } else {
                for (w, m) in inter.iter_mut().zip(&masks[i]) {
                    *w &= m;
                }
            }
            let bits: u64 = inter.iter().map(|w| w.count_ones() as u64).sum();
            let term = BigInt::from(BigUint::one() << bits);
            if depth.is_multiple_of(2) {
                *total += term;
            } else {
                *total -= term;
            }
            dfs(masks, i + 1, depth + 1, inter, total);
            *inter = saved;
        }
    }
    dfs(&masks, 0, 0, &mut stack_mask, &mut total);

    let (sign, count) = total.into_parts();
    debug_assert_eq!(sign, Sign::Plus);
    SubsetCount { count, exact: true }
}

fn sum_bound(sets: &[ActiveSet], rho: usize) -> BigUint {
    let mut sum = BigUint::zero();
    for a in sets {
        sum += BigUint::one() << a.len();
    }
    if sets.is_empty() {
        sum = BigUint::one();
    }
    sum.min(BigUint::one() << rho)
}

fn is_anti_chain(sets: &[ActiveSet]) -> bool {
    for (i, a) in sets.iter().enumerate() {
        for (j, b) in sets.iter().enumerate() {
            if i != j && a.is_subset(b) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linfeas;
    use crate::mpc::{condense, MpcSpec};

    fn raw_qp(g: DMatrix<f64>, h: DMatrix<f64>) -> CondensedQp {
        let rho = g.nrows();
        let omega = g.ncols();
        CondensedQp {
            h,
            f: DMatrix::zeros(1, omega),
            y: DMatrix::zeros(1, 1),
            g,
            w: DVector::zeros(rho),
            e: DMatrix::zeros(rho, 1),
            s: DMatrix::zeros(rho, 1),
            omega,
            rho,
            n_states: 1,
            n_inputs: 1,
            n_outputs: 1,
            horizon: 2,
            epsilon: DEFAULT_EPSILON,
        }
    }

    fn double_integrator() -> MpcSpec {
        MpcSpec {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            c: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            p: DMatrix::identity(2, 2),
            q: DMatrix::identity(2, 2),
            r: DMatrix::identity(1, 1),
            k: DMatrix::zeros(1, 2),
            horizon: 2,
            y_min: DVector::from_element(1, -5.0),
            y_max: DVector::from_element(1, 5.0),
            u_min: DVector::from_element(1, -1.0),
            u_max: DVector::from_element(1, 1.0),
            epsilon: 1e-6,
        }
    }

    /// Brute-force oracle: test every nonempty subset with the LP directly,
    /// keep the feasible ones, reduce to maximal sets, and count every
    /// subset of the union of their power sets by enumeration.
    fn oracle(t: &DMatrix<f64>, eps: f64) -> (Vec<ActiveSet>, BigUint) {
        let rho = t.nrows();
        assert!(rho <= 16);
        let mut feasible: Vec<u32> = vec![0]; // empty set is always feasible
        for mask in 1u32..(1 << rho) {
            let alpha = ActiveSet::new((1..=rho).filter(|i| mask & (1 << (i - 1)) != 0));
            let sub = row_subsystem(t, &alpha, eps);
            if linfeas::check_feasible(&sub).unwrap().is_feasible() {
                feasible.push(mask);
            }
        }
        let maximal: Vec<u32> = feasible
            .iter()
            .copied()
            .filter(|&m| {
                m != 0
                    && !feasible
                        .iter()
                        .any(|&o| o != m && (m & o) == m)
            })
            .collect();
        let mut covered = 0u64;
        for mask in 0u32..(1 << rho) {
            if maximal.iter().any(|&mx| mask & !mx == 0) || mask == 0 {
                covered += 1;
            }
        }
        let sets = maximal
            .iter()
            .map(|&m| ActiveSet::new((1..=rho).filter(|i| m & (1 << (i - 1)) != 0)))
            .collect();
        (sets, BigUint::from(covered))
    }

    #[test]
    fn identity_feasibility_matrix() {
        let qp = raw_qp(DMatrix::identity(3, 3), DMatrix::identity(3, 3));
        let t = feasibility_matrix(&qp).unwrap();
        assert!((t - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn full_product_is_symmetric() {
        let spec = double_integrator();
        let qp = condense(&spec).unwrap();
        let t = feasibility_matrix(&qp).unwrap();
        let full = &t * qp.g.transpose();
        assert!((&full - full.transpose()).abs().max() < 1e-10);
    }

    #[test]
    fn reduced_matrix_matches_hand_inversion() {
        // H = [[2,1],[1,2]] has inverse (1/3)[[2,-1],[-1,2]].
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let g = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let qp = raw_qp(g.clone(), h);
        let t = feasibility_matrix(&qp).unwrap();
        let h_inv = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]) / 3.0;
        assert!((t - g * h_inv).abs().max() < 1e-12);
    }

    #[test]
    fn all_positive_rows_admit_one_full_maximal_set() {
        // Every row of G H^{-1} entrywise positive with omega = 1: the test
        // vector is free, so a common negative v satisfies every row at
        // once and the single maximal set is the full universe.
        let g = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let qp = raw_qp(g, DMatrix::identity(1, 1));
        let t = feasibility_matrix(&qp).unwrap();
        let (oracle_max, oracle_count) = oracle(&t, DEFAULT_EPSILON);
        assert_eq!(oracle_max, vec![ActiveSet::new([1, 2, 3])]);
        assert_eq!(oracle_count, BigUint::from(8u32));

        let report = estimate_region_count(&qp, &EstimateOptions::default()).unwrap();
        assert_eq!(report.maximal_sets, oracle_max);
        assert_eq!(report.n_est, oracle_count);
        assert!(report.exact_union && report.complete);
    }

    #[test]
    fn opposed_rows_split_into_two_maximal_sets() {
        // Rows v and -v cannot both be strictly negative.
        let g = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let qp = raw_qp(g, DMatrix::identity(1, 1));
        let report = estimate_region_count(&qp, &EstimateOptions::default()).unwrap();
        assert_eq!(
            report.maximal_sets,
            vec![ActiveSet::new([1]), ActiveSet::new([2])]
        );
        // {}, {1}, {2}
        assert_eq!(report.n_est, BigUint::from(3u32));
    }

    #[test]
    fn zero_rows_are_excluded_from_every_set() {
        let g = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, -2.0]);
        let qp = raw_qp(g, DMatrix::identity(1, 1));
        let report = estimate_region_count(&qp, &EstimateOptions::default()).unwrap();
        for set in &report.maximal_sets {
            assert!(!set.contains(1), "zero row can never be strictly negative");
        }
        let t = feasibility_matrix(&qp).unwrap();
        let (_, oracle_count) = oracle(&t, DEFAULT_EPSILON);
        assert_eq!(report.n_est, oracle_count);
    }

    #[test]
    fn double_integrator_matches_bruteforce_oracle() {
        let spec = double_integrator();
        let qp = condense(&spec).unwrap();
        assert_eq!(qp.rho, 10);
        let report = estimate_region_count(&qp, &EstimateOptions::default()).unwrap();
        assert_eq!(report.two_pow_rho, BigUint::from(1024u32));
        assert!(report.n_est <= report.two_pow_rho);

        let t = feasibility_matrix(&qp).unwrap();
        let (oracle_max, oracle_count) = oracle(&t, DEFAULT_EPSILON);
        let mut got = report.maximal_sets.clone();
        got.sort();
        let mut want = oracle_max;
        want.sort();
        assert_eq!(got, want);
        assert_eq!(report.n_est, oracle_count);
    }

    #[test]
    fn maximality_antichain_and_iis_invariants() {
        let spec = double_integrator();
        let qp = condense(&spec).unwrap();
        let report = estimate_region_count(&qp, &EstimateOptions::default()).unwrap();
        let t = feasibility_matrix(&qp).unwrap();

        // Anti-chain: no returned set contains another.
        for (i, a) in report.maximal_sets.iter().enumerate() {
            for (j, b) in report.maximal_sets.iter().enumerate() {
                if i != j {
                    assert!(!a.is_subset(b));
                }
            }
        }
        // Maximality: adding any outside row makes the subsystem infeasible.
        for a in &report.maximal_sets {
            for j in 1..=qp.rho {
                if a.contains(j) {
                    continue;
                }
                let mut grown: BTreeSet<usize> = a.indices().clone();
                grown.insert(j);
                let sub = row_subsystem(&t, &ActiveSet::new(grown), report.epsilon);
                assert!(!linfeas::check_feasible(&sub).unwrap().is_feasible());
            }
        }
        // Every learned IIS is genuinely infeasible.
        for iis in &report.learned_iis {
            let sub = row_subsystem(&t, iis, report.epsilon);
            assert!(!linfeas::check_feasible(&sub).unwrap().is_feasible());
        }
    }

    #[test]
    fn determinism_modulo_wall_time() {
        let spec = double_integrator();
        let qp = condense(&spec).unwrap();
        let a = estimate_region_count(&qp, &EstimateOptions::default()).unwrap();
        let b = estimate_region_count(&qp, &EstimateOptions::default()).unwrap();
        assert_eq!(a.maximal_sets, b.maximal_sets);
        assert_eq!(a.n_est, b.n_est);
        assert_eq!(a.lp_calls, b.lp_calls);
        assert_eq!(a.sat_calls, b.sat_calls);
    }

    #[test]
    fn union_count_by_inclusion_exclusion() {
        let sets = vec![ActiveSet::new([1, 2]), ActiveSet::new([2, 3])];
        let c = count_unique_subsets(&sets, 3);
        assert!(c.exact);
        assert_eq!(c.count, BigUint::from(6u32));

        // Enumeration oracle over all subsets of {1,2,3}.
        let mut covered = 0;
        for mask in 0u32..8 {
            let sub: BTreeSet<usize> = (1..=3).filter(|i| mask & (1 << (i - 1)) != 0).collect();
            if sets.iter().any(|s| sub.is_subset(s.indices())) {
                covered += 1;
            }
        }
        assert_eq!(c.count, BigUint::from(covered as u32));
    }

    #[test]
    fn union_count_single_and_empty() {
        let single = count_unique_subsets(&[ActiveSet::new([1, 2, 3])], 5);
        assert_eq!(single.count, BigUint::from(8u32));
        assert!(single.exact);

        let none = count_unique_subsets(&[], 5);
        assert_eq!(none.count, BigUint::one());
        assert!(none.exact);
    }

    #[test]
    fn union_count_falls_back_beyond_the_limit() {
        let sets: Vec<ActiveSet> = (1..=4).map(|i| ActiveSet::new([i])).collect();
        let c = count_unique_subsets_with(&sets, 4, 2);
        assert!(!c.exact);
        // sum bound: 4 * 2^1 = 8, capped at 2^4 = 16.
        assert_eq!(c.count, BigUint::from(8u32));
    }

    #[test]
    fn selector_matrix_is_orthonormal() {
        let a = ActiveSet::new([2, 5, 7]);
        let sel = a.selector_matrix(8);
        let prod = &sel * sel.transpose();
        assert!((prod - DMatrix::identity(3, 3)).abs().max() < 1e-15);
    }

    #[test]
    fn budget_zero_yields_incomplete_report() {
        let spec = double_integrator();
        let qp = condense(&spec).unwrap();
        let opts = EstimateOptions {
            budget: Some(Duration::from_secs(0)),
            ..EstimateOptions::default()
        };
        let report = estimate_region_count(&qp, &opts).unwrap();
        assert!(!report.complete);
        assert!(report.n_est <= report.two_pow_rho);
    }
}
