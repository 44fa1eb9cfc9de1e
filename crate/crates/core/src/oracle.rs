//! Desk-scale explicit-MPC ground truth.
//!
//! Enumerates the parametric QP solution by brute force over all 2^rho
//! active sets, yielding the exact piecewise-affine control law, its exact
//! number of distinct affine pieces, a pointwise QP solver for
//! cross-checking, and a two-level lattice description of the law for
//! end-to-end network verification. Everything here exists to validate the
//! estimator and the network construction; it is deliberately not a
//! scalable explicit-MPC implementation.

use crate::lattice::CpwlDescription;
use crate::linfeas::{check_feasible, chebyshev_center, Chebyshev, Feasibility, IneqSystem, LinfeasError};
use crate::mpc::{CondenseError, CondensedQp};
use crate::regions::ActiveSet;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::fmt;

/// Hard cap on the constraint count for brute-force enumeration.
pub const ORACLE_LIMIT: usize = 16;

/// A Chebyshev radius above this makes a region count as full-dimensional.
pub const FULL_DIM_TOL: f64 = 1e-7;

/// Slack for deciding that a point lies inside a region.
pub const CONTAINMENT_TOL: f64 = 1e-7;

/// Tolerance for deduplicating affine laws.
pub const LAW_TOL: f64 = 1e-8;

#[derive(Debug)]
pub enum OracleError {
    /// rho exceeds [`ORACLE_LIMIT`]; brute force over 2^rho is off the table.
    TooManyConstraints { rho: usize, limit: usize },
    Condense(CondenseError),
    Linfeas(LinfeasError),
    /// A feasible verification sample landed in no full-dimensional piece.
    CoverageGap { sample: Vec<f64> },
    /// The lattice description failed to reproduce the law on the grid.
    ExtractionFailed(String),
    /// The pointwise dual ascent ran out of iterations.
    NoConvergence,
    /// The QP is infeasible at the origin, so no axis-aligned domain box
    /// around it exists.
    InfeasibleOrigin,
    /// Too few feasible samples could be drawn from the domain box.
    SamplingExhausted { wanted: usize, got: usize },
}

impl fmt::Display for OracleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleError::TooManyConstraints { rho, limit } => {
                write!(f, "rho = {rho} exceeds the brute-force limit {limit}")
            }
            OracleError::Condense(e) => write!(f, "{e}"),
            OracleError::Linfeas(e) => write!(f, "{e}"),
            OracleError::CoverageGap { sample } => {
                write!(f, "feasible sample {sample:?} lies in no piece")
            }
            OracleError::ExtractionFailed(s) => write!(f, "lattice extraction failed: {s}"),
            OracleError::NoConvergence => write!(f, "pointwise dual ascent did not converge"),
            OracleError::InfeasibleOrigin => write!(f, "QP infeasible at x = 0"),
            OracleError::SamplingExhausted { wanted, got } => {
                write!(f, "only {got} of {wanted} feasible samples found")
            }
        }
    }
}

impl std::error::Error for OracleError {}

impl From<CondenseError> for OracleError {
    fn from(e: CondenseError) -> Self {
        OracleError::Condense(e)
    }
}

impl From<LinfeasError> for OracleError {
    fn from(e: LinfeasError) -> Self {
        OracleError::Linfeas(e)
    }
}

/// One affine piece of the explicit control law.
#[derive(Debug, Clone)]
pub struct CriticalRegion {
    pub active_set: ActiveSet,
    pub control_gain: DMatrix<f64>,
    pub control_offset: DVector<f64>,
    /// The region in x-space: multiplier-nonnegativity rows, inactive
    /// constraint rows, and the domain-box rows.
    pub region: IneqSystem,
    pub full_dim: bool,
    pub chebyshev_center: DVector<f64>,
    pub chebyshev_radius: f64,
}

impl CriticalRegion {
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        let resid = &self.region.m * x - &self.region.rhs;
        resid.max() <= CONTAINMENT_TOL
    }

    pub fn control(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.control_gain * x + &self.control_offset
    }
}

/// The explicit control law: affine pieces over a domain box.
#[derive(Debug, Clone)]
pub struct PwaFunction {
    pub pieces: Vec<CriticalRegion>,
    pub domain_min: DVector<f64>,
    pub domain_max: DVector<f64>,
}

impl PwaFunction {
    /// Evaluate the law at x via the first full-dimensional piece
    /// containing it. Adjacent pieces agree on shared boundaries, so the
    /// choice among containing pieces does not matter.
    pub fn eval(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.pieces
            .iter()
            .find(|p| p.full_dim && p.contains(x))
            .map(|p| p.control(x))
    }

    pub fn n_full_dim(&self) -> usize {
        self.pieces.iter().filter(|p| p.full_dim).count()
    }
}

/// Solver internals shared by the oracle entry points.
struct QpWork {
    h_inv_gt: DMatrix<f64>, // omega x rho
    h_inv_ft: DMatrix<f64>, // omega x n
    big_m: DMatrix<f64>,    // G H^{-1} G', rho x rho
}

fn workspace(qp: &CondensedQp) -> Result<QpWork, OracleError> {
    let chol = qp.h_cholesky()?;
    let h_inv_gt = chol.solve(&qp.g.transpose());
    let h_inv_ft = chol.solve(&qp.f.transpose());
    let big_m = &qp.g * &h_inv_gt;
    Ok(QpWork {
        h_inv_gt,
        h_inv_ft,
        big_m,
    })
}

/// Enumerate the explicit solution by brute force over all active sets.
///
/// For each subset alpha with an invertible reduced KKT block, the
/// multipliers and minimizer are affine in x; back-substitution yields the
/// critical region as linear inequalities in x. Regions with empty
/// intersection with the domain box are dropped; singular blocks are
/// skipped with a debug log entry (degenerate active sets). Pieces are
/// produced in ascending active-set order, so output is deterministic.
pub fn enumerate_explicit(
    qp: &CondensedQp,
    domain_min: &DVector<f64>,
    domain_max: &DVector<f64>,
) -> Result<PwaFunction, OracleError> {
    if qp.rho > ORACLE_LIMIT {
        return Err(OracleError::TooManyConstraints {
            rho: qp.rho,
            limit: ORACLE_LIMIT,
        });
    }
    let work = workspace(qp)?;
    let n = qp.n_states;
    let m = qp.n_inputs;
    let rho = qp.rho;
    let mut pieces = Vec::new();
    let mut skipped_singular = 0usize;

    for mask in 0u32..(1u32 << rho) {
        let alpha: Vec<usize> = (0..rho).filter(|i| mask & (1 << i) != 0).collect();
        if alpha.len() > qp.omega {
            // rank(G_a H^{-1} G_a') <= omega, so the block is singular.
            continue;
        }
        let piece = match solve_active_set(qp, &work, &alpha) {
            Some(p) => p,
            None => {
                if !alpha.is_empty() {
                    skipped_singular += 1;
                }
                continue;
            }
        };
        let (gain, offset, lam_gain, lam_off) = piece;

        // Region rows: -Lambda x <= lambda0 (multipliers stay nonnegative),
        // inactive rows of G z(x) <= W + S x, and the domain box.
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        for r in 0..alpha.len() {
            rows.push((-lam_gain.row(r).transpose(), lam_off[r]));
        }
        // z(x) = -H^{-1} G_a' lambda(x); G_j z - S_j x <= W_j for j inactive.
        let z_gain = -(sub_cols(&work.h_inv_gt, &alpha) * &lam_gain); // omega x n
        let z_off = -(sub_cols(&work.h_inv_gt, &alpha) * &lam_off);
        for j in 0..rho {
            if alpha.binary_search(&j).is_ok() {
                continue;
            }
            let gj = qp.g.row(j);
            let coeff = (gj * &z_gain).transpose() - qp.s.row(j).transpose();
            let rhs = qp.w[j] - (gj * &z_off)[(0, 0)];
            rows.push((coeff, rhs));
        }
        for i in 0..n {
            let mut up = DVector::zeros(n);
            up[i] = 1.0;
            rows.push((up.clone(), domain_max[i]));
            rows.push((-up, -domain_min[i]));
        }

        // Vacuous rows break the Chebyshev LP; contradictory ones kill the
        // region outright.
        let mut kept: Vec<(DVector<f64>, f64)> = Vec::new();
        let mut empty = false;
        for (coeff, rhs) in rows {
            if coeff.amax() <= 1e-12 {
                if rhs < -crate::linfeas::FEAS_TOL {
                    empty = true;
                    break;
                }
                continue;
            }
            kept.push((coeff, rhs));
        }
        if empty || kept.is_empty() {
            continue;
        }
        let region_m = DMatrix::from_fn(kept.len(), n, |i, j| kept[i].0[j]);
        let region_rhs = DVector::from_fn(kept.len(), |i, _| kept[i].1);
        let region = IneqSystem::new(region_m, region_rhs)?;
        let (center, radius) = match chebyshev_center(&region)? {
            Chebyshev::Empty => continue,
            Chebyshev::Center { center, radius } => (center, radius),
        };

        let full_gain = &gain - work.h_inv_ft.rows(0, m);
        pieces.push(CriticalRegion {
            active_set: ActiveSet::new(alpha.iter().map(|&i| i + 1)),
            control_gain: full_gain,
            control_offset: offset,
            region,
            full_dim: radius > FULL_DIM_TOL,
            chebyshev_center: center,
            chebyshev_radius: radius,
        });
    }
    if skipped_singular > 0 {
        log::debug!("skipped {skipped_singular} singular reduced KKT blocks");
    }
    Ok(PwaFunction {
        pieces,
        domain_min: domain_min.clone(),
        domain_max: domain_max.clone(),
    })
}

/// Solve the reduced KKT block for one active set. Returns the z-part gain
/// and offset of the first control move (before the -H^{-1}F'x term) and
/// the multiplier law (Lambda, lambda0), or None for singular blocks.
#[allow(clippy::type_complexity)]
fn solve_active_set(
    qp: &CondensedQp,
    work: &QpWork,
    alpha: &[usize],
) -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let n = qp.n_states;
    let m = qp.n_inputs;
    let k = alpha.len();
    if k == 0 {
        // No active constraints: z = 0, u = -H^{-1}F'x (applied by caller).
        return Some((
            DMatrix::zeros(m, n),
            DVector::zeros(m),
            DMatrix::zeros(0, n),
            DVector::zeros(0),
        ));
    }
    let m_a = DMatrix::from_fn(k, k, |i, j| work.big_m[(alpha[i], alpha[j])]);
    let s_a = DMatrix::from_fn(k, n, |i, j| qp.s[(alpha[i], j)]);
    let w_a = DVector::from_fn(k, |i, _| qp.w[alpha[i]]);

    let lu = m_a.clone().full_piv_lu();
    if !lu.is_invertible() {
        return None;
    }
    // -M_a lambda = W_a + S_a x  =>  lambda(x) = -M_a^{-1}(W_a + S_a x)
    let lam_gain = -lu.solve(&s_a)?;
    let lam_off = -lu.solve(&w_a)?;
    // Guard against near-singular blocks that slipped past the pivot test.
    let resid = (&m_a * &lam_gain + &s_a).abs().max().max((&m_a * &lam_off + &w_a).abs().max());
    let scale = 1.0 + s_a.abs().max().max(w_a.abs().max());
    if resid > 1e-6 * scale {
        return None;
    }

    // z(x) = -H^{-1} G_a' lambda(x); the control's z-part is its first m rows.
    let h_inv_ga = sub_cols(&work.h_inv_gt, alpha);
    let z_gain = -(&h_inv_ga * &lam_gain);
    let z_off = -(&h_inv_ga * &lam_off);
    Some((
        z_gain.rows(0, m).into_owned(),
        z_off.rows(0, m).into_owned(),
        lam_gain,
        lam_off,
    ))
}

fn sub_cols(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

/// Number of distinct affine laws among the full-dimensional pieces,
/// deduplicated to [`LAW_TOL`].
pub fn exact_maximal_region_count(pwa: &PwaFunction) -> usize {
    let mut laws: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::new();
    for p in pwa.pieces.iter().filter(|p| p.full_dim) {
        let dup = laws.iter().any(|(g, o)| {
            (g - &p.control_gain).abs().max() <= LAW_TOL
                && (o - &p.control_offset).abs().max() <= LAW_TOL
        });
        if !dup {
            laws.push((p.control_gain.clone(), p.control_offset.clone()));
        }
    }
    laws.len()
}

/// Solve the QP at a single state by Hildreth's dual coordinate ascent and
/// return the first control move, or `None` when the QP is infeasible at x.
///
/// Constraint rows with zero G coefficients are pure state conditions: they
/// are checked directly and excluded from the dual (their diagonal is
/// zero). Convergence is 1e-10 on the multiplier change with a cap of 1e5
/// sweeps.
pub fn solve_pointwise(
    qp: &CondensedQp,
    x: &DVector<f64>,
) -> Result<Option<DVector<f64>>, OracleError> {
    let work = workspace(qp)?;
    let rhs = &qp.w + &qp.s * x;
    let mut rows: Vec<usize> = Vec::new();
    for j in 0..qp.rho {
        if qp.g.row(j).amax() <= 1e-12 {
            if rhs[j] < -crate::linfeas::FEAS_TOL {
                return Ok(None);
            }
        } else {
            rows.push(j);
        }
    }
    let g_sub = DMatrix::from_fn(rows.len(), qp.omega, |i, j| qp.g[(rows[i], j)]);
    let rhs_sub = DVector::from_fn(rows.len(), |i, _| rhs[rows[i]]);
    match check_feasible(&IneqSystem::new(g_sub, rhs_sub.clone())?)? {
        Feasibility::Infeasible { .. } => return Ok(None),
        Feasibility::Feasible { .. } => {}
    }

    let k = rows.len();
    let mut lambda = DVector::zeros(k);
    let m_sub = DMatrix::from_fn(k, k, |i, j| work.big_m[(rows[i], rows[j])]);
    let mut converged = false;
    for _ in 0..100_000 {
        let mut delta: f64 = 0.0;
        for i in 0..k {
            let mii = m_sub[(i, i)];
            if mii <= 1e-14 {
                continue;
            }
            let grad = m_sub.row(i).transpose().dot(&lambda) + rhs_sub[i];
            let new = (lambda[i] - grad / mii).max(0.0);
            delta = delta.max((new - lambda[i]).abs());
            lambda[i] = new;
        }
        if delta <= 1e-10 * (1.0 + lambda.amax()) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(OracleError::NoConvergence);
    }
    // z = -H^{-1} G' lambda over the retained rows; u = z - H^{-1}F'x.
    let h_inv_ga = sub_cols(&work.h_inv_gt, &rows);
    let z = -(h_inv_ga * &lambda);
    let u_full = z - &work.h_inv_ft * x;
    Ok(Some(u_full.rows(0, qp.n_inputs).into_owned()))
}

/// The largest axis-aligned feasibility extents around the origin, found by
/// bisection along each signed axis, capped at `cap`.
pub fn default_domain_box(
    qp: &CondensedQp,
    cap: f64,
) -> Result<(DVector<f64>, DVector<f64>), OracleError> {
    let n = qp.n_states;
    let feasible_at = |x: &DVector<f64>| -> Result<bool, OracleError> {
        let rhs = &qp.w + &qp.s * x;
        // Zero-G rows are state-only conditions.
        let mut rows: Vec<usize> = Vec::new();
        for j in 0..qp.rho {
            if qp.g.row(j).amax() <= 1e-12 {
                if rhs[j] < -crate::linfeas::FEAS_TOL {
                    return Ok(false);
                }
            } else {
                rows.push(j);
            }
        }
        let g_sub = DMatrix::from_fn(rows.len(), qp.omega, |i, j| qp.g[(rows[i], j)]);
        let rhs_sub = DVector::from_fn(rows.len(), |i, _| rhs[rows[i]]);
        Ok(check_feasible(&IneqSystem::new(g_sub, rhs_sub)?)?.is_feasible())
    };
    if !feasible_at(&DVector::zeros(n))? {
        return Err(OracleError::InfeasibleOrigin);
    }
    let mut lo_v = DVector::zeros(n);
    let mut hi_v = DVector::zeros(n);
    for i in 0..n {
        for (sign, slot) in [(1.0, false), (-1.0, true)] {
            let probe = |t: f64| {
                let mut x = DVector::zeros(n);
                x[i] = sign * t;
                x
            };
            let mut lo = 0.0;
            let mut hi = cap;
            if feasible_at(&probe(cap))? {
                lo = cap;
            } else {
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if feasible_at(&probe(mid))? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
            if slot {
                lo_v[i] = -lo;
            } else {
                hi_v[i] = lo;
            }
        }
    }
    Ok((lo_v, hi_v))
}

/// Draw `count` feasible samples uniformly from the domain box by
/// rejection, deterministically for a fixed seed.
pub fn sample_feasible_points(
    qp: &CondensedQp,
    pwa: &PwaFunction,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = qp.n_states;
    let mut out = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(200).max(1000);
    for _ in 0..max_attempts {
        if out.len() >= count {
            break;
        }
        let x = DVector::from_fn(n, |i, _| {
            rng.random_range(pwa.domain_min[i]..=pwa.domain_max[i])
        });
        if qp_feasible(qp, &x)? {
            out.push(x);
        }
    }
    if out.len() < count {
        return Err(OracleError::SamplingExhausted {
            wanted: count,
            got: out.len(),
        });
    }
    Ok(out)
}

fn qp_feasible(qp: &CondensedQp, x: &DVector<f64>) -> Result<bool, OracleError> {
    let rhs = &qp.w + &qp.s * x;
    let mut rows: Vec<usize> = Vec::new();
    for j in 0..qp.rho {
        if qp.g.row(j).amax() <= 1e-12 {
            if rhs[j] < -crate::linfeas::FEAS_TOL {
                return Ok(false);
            }
        } else {
            rows.push(j);
        }
    }
    let g_sub = DMatrix::from_fn(rows.len(), qp.omega, |i, j| qp.g[(rows[i], j)]);
    let rhs_sub = DVector::from_fn(rows.len(), |i, _| rhs[rows[i]]);
    Ok(check_feasible(&IneqSystem::new(g_sub, rhs_sub)?)?.is_feasible())
}

/// Extract a per-channel two-level lattice description of the explicit law.
///
/// Local functions are the distinct channel laws of the full-dimensional
/// pieces. Subsets come from sampling: at each region's Chebyshev center
/// plus 32 seeded interior points, the subset is the set of laws whose
/// value at the sample is at least the function value (ties collapsed at
/// 1e-9). A verification pass over feasible samples then patches any
/// ordering cell the region sampling missed (each patch is itself a
/// genuine unique-order subset, so the description stays exact) and fails
/// loudly if the lattice still disagrees with the law afterwards.
pub fn extract_lattice(
    pwa: &PwaFunction,
    qp: &CondensedQp,
    seed: u64,
) -> Result<Vec<CpwlDescription>, OracleError> {
    let m = qp.n_inputs;
    let full: Vec<&CriticalRegion> = pwa.pieces.iter().filter(|p| p.full_dim).collect();
    if full.is_empty() {
        return Err(OracleError::ExtractionFailed("no full-dimensional pieces".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Sample points: Chebyshev center plus 32 interior points per region.
    let mut samples: Vec<(DVector<f64>, usize)> = Vec::new(); // (point, piece idx)
    for (pi, piece) in full.iter().enumerate() {
        samples.push((piece.chebyshev_center.clone(), pi));
        for _ in 0..32 {
            if let Some(x) = interior_point(piece, &mut rng) {
                samples.push((x, pi));
            }
        }
    }

    let mut channels = Vec::with_capacity(m);
    for c in 0..m {
        // Distinct channel-c laws across the full-dimensional pieces.
        let mut laws: Vec<(DVector<f64>, f64)> = Vec::new();
        let mut law_of_piece: Vec<usize> = Vec::with_capacity(full.len());
        for piece in &full {
            let gain = piece.control_gain.row(c).transpose();
            let off = piece.control_offset[c];
            let found = laws
                .iter()
                .position(|(g, o)| (g - &gain).abs().max() <= LAW_TOL && (o - off).abs() <= LAW_TOL);
            match found {
                Some(idx) => law_of_piece.push(idx),
                None => {
                    laws.push((gain, off));
                    law_of_piece.push(laws.len() - 1);
                }
            }
        }

        let mut subsets: BTreeSet<BTreeSet<usize>> = BTreeSet::new();
        for (x, pi) in &samples {
            subsets.insert(subset_at(&laws, law_of_piece[*pi], x));
        }

        let mut desc = CpwlDescription {
            local_functions: laws.clone(),
            subsets: subsets.iter().cloned().collect(),
        };

        // Verification and patching pass over feasible samples.
        let grid = sample_feasible_points(qp, pwa, 2000, seed ^ 0x9e37_79b9)?;
        for pass in 0..8 {
            let mut clean = true;
            for x in &grid {
                let piece = match full.iter().position(|p| p.contains(x)) {
                    Some(pi) => pi,
                    None => {
                        return Err(OracleError::CoverageGap {
                            sample: x.iter().copied().collect(),
                        })
                    }
                };
                let want = full[piece].control(x)[c];
                let got = desc.eval(x);
                if (got - want).abs() > 1e-9 * (1.0 + want.abs()) {
                    subsets.insert(subset_at(&laws, law_of_piece[piece], x));
                    clean = false;
                }
            }
            desc.subsets = subsets.iter().cloned().collect();
            if clean {
                break;
            }
            if pass == 7 {
                return Err(OracleError::ExtractionFailed(
                    "lattice still disagrees with the law after patching".into(),
                ));
            }
        }
        channels.push(desc);
    }
    Ok(channels)
}

/// The lattice subset at a point: laws with value >= the active law's
/// value, ties collapsed at 1e-9.
fn subset_at(laws: &[(DVector<f64>, f64)], active: usize, x: &DVector<f64>) -> BTreeSet<usize> {
    let f = laws[active].0.dot(x) + laws[active].1;
    laws.iter()
        .enumerate()
        .filter(|(_, (g, o))| g.dot(x) + o >= f - 1e-9)
        .map(|(j, _)| j)
        .collect()
}

/// A pseudo-random interior point of a region: a uniform step from the
/// Chebyshev center toward the boundary along a random direction.
fn interior_point(piece: &CriticalRegion, rng: &mut ChaCha8Rng) -> Option<DVector<f64>> {
    let n = piece.chebyshev_center.len();
    let dir = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0f64));
    let norm = dir.norm();
    if norm < 1e-9 {
        return None;
    }
    let dir = dir / norm;
    // Largest t with center + t*dir still inside.
    let mut t_max = f64::INFINITY;
    for i in 0..piece.region.nrows() {
        let row = piece.region.m.row(i);
        let along = (row * &dir)[(0, 0)];
        if along > 1e-12 {
            let slack = piece.region.rhs[i] - (row * &piece.chebyshev_center)[(0, 0)];
            t_max = t_max.min(slack / along);
        }
    }
    if !t_max.is_finite() {
        t_max = 1.0;
    }
    let t = rng.random_range(0.0..0.95) * t_max.max(0.0);
    Some(&piece.chebyshev_center + dir * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{assemble_lattice_net, forward};
    use crate::mpc::{condense, MpcSpec};

    fn scalar_spec(tight_inputs: bool) -> MpcSpec {
        MpcSpec {
            a: DMatrix::from_element(1, 1, 0.9),
            b: DMatrix::identity(1, 1),
            c: DMatrix::identity(1, 1),
            p: DMatrix::identity(1, 1),
            q: DMatrix::identity(1, 1),
            r: DMatrix::from_element(1, 1, 0.1),
            k: DMatrix::zeros(1, 1),
            horizon: 2,
            y_min: DVector::from_element(1, -10.0),
            y_max: DVector::from_element(1, 10.0),
            u_min: DVector::from_element(1, if tight_inputs { -0.4 } else { -50.0 }),
            u_max: DVector::from_element(1, if tight_inputs { 0.4 } else { 50.0 }),
            epsilon: 1e-6,
        }
    }

    fn double_integrator() -> MpcSpec {
        MpcSpec {
            a: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            c: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            p: DMatrix::identity(2, 2),
            q: DMatrix::identity(2, 2),
            r: DMatrix::from_element(1, 1, 0.5),
            k: DMatrix::zeros(1, 2),
            horizon: 2,
            y_min: DVector::from_element(1, -5.0),
            y_max: DVector::from_element(1, 5.0),
            u_min: DVector::from_element(1, -1.0),
            u_max: DVector::from_element(1, 1.0),
            epsilon: 1e-6,
        }
    }

    #[test]
    fn unconstrained_interior_matches_closed_form() {
        let qp = condense(&scalar_spec(false)).unwrap();
        let work = workspace(&qp).unwrap();
        let x = DVector::from_element(1, 0.3);
        let u = solve_pointwise(&qp, &x).unwrap().unwrap();
        let expect = -(work.h_inv_ft.rows(0, 1) * &x);
        assert!((u - expect).abs().max() < 1e-7);
    }

    #[test]
    fn saturation_pieces_appear() {
        let spec = scalar_spec(true);
        let qp = condense(&spec).unwrap();
        let (lo, hi) = default_domain_box(&qp, 1e3).unwrap();
        let pwa = enumerate_explicit(&qp, &lo, &hi).unwrap();
        let laws: Vec<(f64, f64)> = pwa
            .pieces
            .iter()
            .filter(|p| p.full_dim)
            .map(|p| (p.control_gain[(0, 0)], p.control_offset[0]))
            .collect();
        // Both input saturation laws u = u_max and u = u_min show up.
        assert!(laws.iter().any(|(g, o)| g.abs() < 1e-8 && (o - 0.4).abs() < 1e-8));
        assert!(laws.iter().any(|(g, o)| g.abs() < 1e-8 && (o + 0.4).abs() < 1e-8));

        // Piece laws agree with pointwise QP solves.
        let samples = sample_feasible_points(&qp, &pwa, 100, 7).unwrap();
        for x in &samples {
            let via_pieces = pwa.eval(x).expect("sample must be covered");
            let via_qp = solve_pointwise(&qp, x).unwrap().expect("sample is feasible");
            assert!(
                (via_pieces - via_qp).abs().max() < 1e-7,
                "piece law and pointwise solve disagree at {x:?}"
            );
        }
    }

    #[test]
    fn double_integrator_grid_classification() {
        let spec = double_integrator();
        let qp = condense(&spec).unwrap();
        let (lo, hi) = default_domain_box(&qp, 1e3).unwrap();
        let pwa = enumerate_explicit(&qp, &lo, &hi).unwrap();
        let exact = exact_maximal_region_count(&pwa);
        assert!(exact >= 3, "expected saturated and interior laws, got {exact}");

        // Cross-validate the law count against pointwise classification on
        // a grid: every feasible grid point must be covered and its
        // pointwise control must match its piece law.
        let mut seen = std::collections::BTreeSet::new();
        let steps = 60;
        for gi in 0..steps {
            for gj in 0..steps {
                let x = DVector::from_column_slice(&[
                    lo[0] + (hi[0] - lo[0]) * gi as f64 / (steps - 1) as f64,
                    lo[1] + (hi[1] - lo[1]) * gj as f64 / (steps - 1) as f64,
                ]);
                if !qp_feasible(&qp, &x).unwrap() {
                    continue;
                }
                let u_qp = solve_pointwise(&qp, &x).unwrap().unwrap();
                let piece = pwa
                    .pieces
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.full_dim && p.contains(&x))
                    .min_by(|(_, a), (_, b)| {
                        let da = (a.control(&x) - &u_qp).abs().max();
                        let db = (b.control(&x) - &u_qp).abs().max();
                        da.partial_cmp(&db).unwrap()
                    });
                let (pi, p) = piece.expect("feasible grid point not covered");
                assert!(
                    (p.control(&x) - &u_qp).abs().max() < 1e-6,
                    "law mismatch at {x:?}"
                );
                seen.insert(pi);
            }
        }
        assert!(!seen.is_empty());
    }

    #[test]
    fn pointwise_origin_of_symmetric_problem_is_zero() {
        let qp = condense(&scalar_spec(true)).unwrap();
        let u = solve_pointwise(&qp, &DVector::zeros(1)).unwrap().unwrap();
        assert!(u.abs().max() < 1e-9);
    }

    #[test]
    fn pointwise_detects_infeasibility() {
        let mut spec = scalar_spec(true);
        // Very tight output corridor: far states are infeasible.
        spec.y_min[0] = -1.0;
        spec.y_max[0] = 1.0;
        let qp = condense(&spec).unwrap();
        let u = solve_pointwise(&qp, &DVector::from_element(1, 50.0)).unwrap();
        assert!(u.is_none());
    }

    #[test]
    fn law_deduplication() {
        let spec = scalar_spec(true);
        let qp = condense(&spec).unwrap();
        let (lo, hi) = default_domain_box(&qp, 1e3).unwrap();
        let mut pwa = enumerate_explicit(&qp, &lo, &hi).unwrap();
        let base = exact_maximal_region_count(&pwa);
        // Duplicating a piece must not change the distinct-law count.
        let clone = pwa.pieces.iter().find(|p| p.full_dim).unwrap().clone();
        pwa.pieces.push(clone);
        assert_eq!(exact_maximal_region_count(&pwa), base);

        let empty = PwaFunction {
            pieces: Vec::new(),
            domain_min: lo,
            domain_max: hi,
        };
        assert_eq!(exact_maximal_region_count(&empty), 0);
    }

    #[test]
    fn exact_count_on_hand_built_saturating_law() {
        // A saturating scalar law built by hand: u = -0.4, u = -x, u = 0.4,
        // with the middle law appearing in two pieces.
        let piece = |gain: f64, offset: f64, lo: f64, hi: f64| {
            let region = IneqSystem::new(
                DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
                DVector::from_column_slice(&[hi, -lo]),
            )
            .unwrap();
            CriticalRegion {
                active_set: ActiveSet::empty(),
                control_gain: DMatrix::from_element(1, 1, gain),
                control_offset: DVector::from_element(1, offset),
                region,
                full_dim: true,
                chebyshev_center: DVector::from_element(1, 0.5 * (lo + hi)),
                chebyshev_radius: 0.5 * (hi - lo),
            }
        };
        let pwa = PwaFunction {
            pieces: vec![
                piece(0.0, 0.4, -2.0, -0.4),
                piece(-1.0, 0.0, -0.4, 0.0),
                piece(-1.0, 0.0, 0.0, 0.4),
                piece(0.0, -0.4, 0.4, 2.0),
            ],
            domain_min: DVector::from_element(1, -2.0),
            domain_max: DVector::from_element(1, 2.0),
        };
        assert_eq!(exact_maximal_region_count(&pwa), 3);
    }

    #[test]
    fn lattice_round_trip_on_saturating_law() {
        let spec = scalar_spec(true);
        let qp = condense(&spec).unwrap();
        let (lo, hi) = default_domain_box(&qp, 1e3).unwrap();
        let pwa = enumerate_explicit(&qp, &lo, &hi).unwrap();
        let channels = extract_lattice(&pwa, &qp, 42).unwrap();
        assert_eq!(channels.len(), 1);
        let net = assemble_lattice_net(&channels[0]).unwrap();

        let samples = sample_feasible_points(&qp, &pwa, 500, 11).unwrap();
        for x in &samples {
            let want = pwa.eval(x).unwrap()[0];
            let got = forward(&net.net, x).unwrap()[0];
            assert!(
                (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                "round trip mismatch at {x:?}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn affine_law_extracts_to_single_function() {
        let qp = condense(&scalar_spec(false)).unwrap();
        // Restrict to a box deep inside the unconstrained region.
        let lo = DVector::from_element(1, -0.5);
        let hi = DVector::from_element(1, 0.5);
        let pwa = enumerate_explicit(&qp, &lo, &hi).unwrap();
        let channels = extract_lattice(&pwa, &qp, 1).unwrap();
        assert_eq!(channels[0].local_functions.len(), 1);
        assert_eq!(channels[0].subsets.len(), 1);
    }

    #[test]
    fn oracle_limit_enforced() {
        let spec = MpcSpec {
            horizon: 4, // rho = 2*4 + 2*5 = 18 > 16
            ..double_integrator()
        };
        let qp = condense(&spec).unwrap();
        let res = enumerate_explicit(&qp, &DVector::zeros(2), &DVector::zeros(2));
        assert!(matches!(res, Err(OracleError::TooManyConstraints { rho: 18, limit: 16 })));
    }
}
