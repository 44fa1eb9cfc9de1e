//! Dense linear-feasibility engine.
//!
//! Decides strict/non-strict feasibility of systems `M x <= rhs` with free
//! variables, produces Farkas infeasibility certificates, extracts
//! irreducibly infeasible subsets (IIS) by deletion filtering, and computes
//! Chebyshev centers as a full-dimensionality test.
//!
//! Everything runs on a dense two-phase simplex with Bland's rule, so results
//! are deterministic for a fixed input. The single numeric contract of the
//! module is a feasibility tolerance of 1e-9 absolute on row residuals.

use nalgebra::{DMatrix, DVector};
use std::collections::BTreeSet;
use std::fmt;

/// Absolute tolerance on row residuals; the module's one numeric contract.
pub const FEAS_TOL: f64 = 1e-9;

/// Tolerance for the Farkas certificate residual `|cert^T M|`.
pub const CERT_TOL: f64 = 1e-8;

const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

/// A system of linear inequalities `M x <= rhs`, one label per row.
///
/// Labels carry the caller's constraint indices through subsystem
/// extraction, so an IIS can be reported in the caller's numbering.
#[derive(Debug, Clone)]
pub struct IneqSystem {
    pub m: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinfeasError {
    /// Simplex exceeded its anti-cycling pivot budget or a returned
    /// witness/certificate failed its residual verification; the input is
    /// degenerate or badly scaled.
    NumericalBreakdown,
    /// `extract_iis` was called on a feasible system.
    NotInfeasible,
    /// A row required to have nonzero norm (Chebyshev) was zero.
    ZeroRow(usize),
    /// Row count, column count, or label count disagree.
    DimensionMismatch,
    /// Duplicate row label.
    DuplicateLabel(usize),
    /// Input contains NaN or infinity.
    NonFinite,
    /// The system has no rows.
    Empty,
}

impl fmt::Display for LinfeasError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinfeasError::NumericalBreakdown => write!(f, "simplex numerical breakdown"),
            LinfeasError::NotInfeasible => write!(f, "system is feasible; no IIS exists"),
            LinfeasError::ZeroRow(i) => write!(f, "row {i} has zero norm"),
            LinfeasError::DimensionMismatch => write!(f, "inconsistent system dimensions"),
            LinfeasError::DuplicateLabel(l) => write!(f, "duplicate row label {l}"),
            LinfeasError::NonFinite => write!(f, "system contains non-finite entries"),
            LinfeasError::Empty => write!(f, "system has no rows"),
        }
    }
}

impl std::error::Error for LinfeasError {}

impl IneqSystem {
    /// Build a system with labels `0..r`.
    pub fn new(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self, LinfeasError> {
        let labels = (0..m.nrows()).collect();
        Self::with_labels(m, rhs, labels)
    }

    pub fn with_labels(
        m: DMatrix<f64>,
        rhs: DVector<f64>,
        labels: Vec<usize>,
    ) -> Result<Self, LinfeasError> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(LinfeasError::Empty);
        }
        if rhs.len() != m.nrows() || labels.len() != m.nrows() {
            return Err(LinfeasError::DimensionMismatch);
        }
        if m.iter().any(|v| !v.is_finite()) || rhs.iter().any(|v| !v.is_finite()) {
            return Err(LinfeasError::NonFinite);
        }
        let mut seen = BTreeSet::new();
        for &l in &labels {
            if !seen.insert(l) {
                return Err(LinfeasError::DuplicateLabel(l));
            }
        }
        Ok(IneqSystem { m, rhs, labels })
    }

    pub fn nrows(&self) -> usize {
        self.m.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.m.ncols()
    }

    /// The subsystem with the given row positions (not labels), keeping labels.
    pub fn subsystem(&self, rows: &[usize]) -> Result<Self, LinfeasError> {
        if rows.is_empty() {
            return Err(LinfeasError::Empty);
        }
        let m = DMatrix::from_fn(rows.len(), self.ncols(), |i, j| self.m[(rows[i], j)]);
        let rhs = DVector::from_fn(rows.len(), |i, _| self.rhs[rows[i]]);
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Self::with_labels(m, rhs, labels)
    }
}

/// Outcome of a feasibility check: a point satisfying every row, or a
/// nonnegative Farkas combination proving none exists.
#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible { witness: DVector<f64> },
    Infeasible { certificate: DVector<f64> },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Chebyshev-center result. `radius` is `f64::INFINITY` when the inscribed
/// ball is unbounded, which still certifies a nonempty interior.
#[derive(Debug, Clone)]
pub enum Chebyshev {
    Center { center: DVector<f64>, radius: f64 },
    Empty,
}

/// Decide feasibility of `M x <= rhs` with `x` free.
///
/// Feasible outputs satisfy every row to within [`FEAS_TOL`]; infeasible
/// outputs carry a certificate `y >= 0` with `y^T M = 0` (to [`CERT_TOL`])
/// and `y^T rhs < 0`, normalized so its largest entry is one.
pub fn check_feasible(sys: &IneqSystem) -> Result<Feasibility, LinfeasError> {
    let mut sx = Simplex::phase_one(&sys.m, &sys.rhs)?;
    match sx.run_phase_one()? {
        PhaseOne::Feasible => {
            let witness = sx.extract_point();
            let resid = (&sys.m * &witness - &sys.rhs).max();
            if resid > FEAS_TOL {
                return Err(LinfeasError::NumericalBreakdown);
            }
            Ok(Feasibility::Feasible { witness })
        }
        PhaseOne::Infeasible => {
            let mut cert = sx.farkas_certificate();
            let peak = cert.max();
            if peak.is_nan() || peak <= 0.0 {
                return Err(LinfeasError::NumericalBreakdown);
            }
            cert /= peak;
            let row_resid = (cert.transpose() * &sys.m).abs().max();
            let scale = 1.0 + sys.m.abs().max();
            if row_resid > CERT_TOL * scale || cert.dot(&sys.rhs) >= 0.0 {
                return Err(LinfeasError::NumericalBreakdown);
            }
            Ok(Feasibility::Infeasible { certificate: cert })
        }
    }
}

/// Extract an irreducibly infeasible subset of rows, returned as labels.
///
/// Deletion filter: walk the rows in ascending label order, dropping any row
/// whose removal leaves the system infeasible. Whatever survives is
/// irreducible: removing any single row of it restores feasibility.
pub fn extract_iis(sys: &IneqSystem) -> Result<BTreeSet<usize>, LinfeasError> {
    if check_feasible(sys)?.is_feasible() {
        return Err(LinfeasError::NotInfeasible);
    }
    let mut order: Vec<usize> = (0..sys.nrows()).collect();
    order.sort_by_key(|&i| sys.labels[i]);

    let mut active: Vec<usize> = order.clone();
    for &row in &order {
        if active.len() == 1 {
            break;
        }
        let candidate: Vec<usize> = active.iter().copied().filter(|&r| r != row).collect();
        if candidate.len() == active.len() {
            continue;
        }
        let sub = sys.subsystem(&candidate)?;
        if !check_feasible(&sub)?.is_feasible() {
            active = candidate;
        }
    }
    Ok(active.iter().map(|&i| sys.labels[i]).collect())
}

/// Chebyshev center: the center and radius of a largest inscribed ball.
///
/// A radius above the caller's tolerance certifies a nonempty interior. All
/// rows must have nonzero norm.
pub fn chebyshev_center(sys: &IneqSystem) -> Result<Chebyshev, LinfeasError> {
    let r = sys.nrows();
    let c = sys.ncols();
    let mut norms = Vec::with_capacity(r);
    for i in 0..r {
        let n = sys.m.row(i).norm();
        if n <= 0.0 {
            return Err(LinfeasError::ZeroRow(i));
        }
        norms.push(n);
    }

    // Variables (x, rad): maximize rad subject to
    //   M x + ||M_i|| rad <= rhs_i  and  -rad <= 0.
    let mut am = DMatrix::zeros(r + 1, c + 1);
    let mut arhs = DVector::zeros(r + 1);
    for i in 0..r {
        for j in 0..c {
            am[(i, j)] = sys.m[(i, j)];
        }
        am[(i, c)] = norms[i];
        arhs[i] = sys.rhs[i];
    }
    am[(r, c)] = -1.0;

    let mut cost = DVector::zeros(c + 1);
    cost[c] = -1.0; // minimize -rad

    match solve_lp(&am, &arhs, &cost)? {
        LpOutcome::Infeasible => Ok(Chebyshev::Empty),
        LpOutcome::Optimal(point) => Ok(Chebyshev::Center {
            center: point.rows(0, c).into_owned(),
            radius: point[c].max(0.0),
        }),
        LpOutcome::Unbounded(point) => Ok(Chebyshev::Center {
            center: point.rows(0, c).into_owned(),
            radius: f64::INFINITY,
        }),
    }
}

enum LpOutcome {
    Optimal(DVector<f64>),
    Unbounded(DVector<f64>),
    Infeasible,
}

/// Minimize `cost^T x` subject to `m x <= rhs`, `x` free.
fn solve_lp(
    m: &DMatrix<f64>,
    rhs: &DVector<f64>,
    cost: &DVector<f64>,
) -> Result<LpOutcome, LinfeasError> {
    let mut sx = Simplex::phase_one(m, rhs)?;
    match sx.run_phase_one()? {
        PhaseOne::Infeasible => Ok(LpOutcome::Infeasible),
        PhaseOne::Feasible => {
            sx.enter_phase_two(cost)?;
            match sx.run_phase_two()? {
                PhaseTwo::Optimal => Ok(LpOutcome::Optimal(sx.extract_point())),
                PhaseTwo::Unbounded => Ok(LpOutcome::Unbounded(sx.extract_point())),
            }
        }
    }
}

enum PhaseOne {
    Feasible,
    Infeasible,
}

enum PhaseTwo {
    Optimal,
    Unbounded,
}

/// Dense tableau simplex over the standard form of `M x <= rhs` with free x.
///
/// Columns are laid out as [p | q | s | a] for the split x = p - q, slack s,
/// and artificials a on the rows whose right-hand side had to be negated.
struct Simplex {
    rows: usize,
    nx: usize,
    n_struct: usize, // p, q, s columns
    n_total: usize,  // plus artificials
    // tableau: rows x (n_total + 1), last column is the current rhs
    t: Vec<f64>,
    basis: Vec<usize>,
    red: Vec<f64>, // reduced costs, len n_total
    obj: f64,      // current objective value of the active phase
    in_phase_two: bool,
}

impl Simplex {
    fn phase_one(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<Self, LinfeasError> {
        let rows = m.nrows();
        let nx = m.ncols();
        if rows == 0 || nx == 0 {
            return Err(LinfeasError::Empty);
        }
        let n_struct = 2 * nx + rows;
        let artif_rows: Vec<usize> = (0..rows).filter(|&i| rhs[i] < 0.0).collect();
        let n_total = n_struct + artif_rows.len();
        let width = n_total + 1;

        let mut t = vec![0.0; rows * width];
        let mut basis = vec![0; rows];
        let mut flip = vec![1.0; rows];
        for &i in &artif_rows {
            flip[i] = -1.0;
        }
        let mut next_artif = n_struct;
        for i in 0..rows {
            let f = flip[i];
            for j in 0..nx {
                t[i * width + j] = f * m[(i, j)];
                t[i * width + nx + j] = -f * m[(i, j)];
            }
            t[i * width + 2 * nx + i] = f;
            t[i * width + n_total] = f * rhs[i];
            if f < 0.0 {
                t[i * width + next_artif] = 1.0;
                basis[i] = next_artif;
                next_artif += 1;
            } else {
                basis[i] = 2 * nx + i;
            }
        }

        // Phase-1 objective: minimize the sum of artificials. Reduced costs
        // start at c_j - sum over artificial-basic rows of the column entry.
        let mut red = vec![0.0; n_total];
        let mut obj = 0.0;
        for j in 0..n_total {
            let mut v = if j >= n_struct { 1.0 } else { 0.0 };
            for i in 0..rows {
                if basis[i] >= n_struct {
                    v -= t[i * width + j];
                }
            }
            red[j] = v;
        }
        for i in 0..rows {
            if basis[i] >= n_struct {
                obj += t[i * width + n_total];
            }
        }

        Ok(Simplex {
            rows,
            nx,
            n_struct,
            n_total,
            t,
            basis,
            red,
            obj,
            in_phase_two: false,
        })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.n_total + 1) + j]
    }

    fn rhs_col(&self, i: usize) -> f64 {
        self.at(i, self.n_total)
    }

    /// Bland's rule: the smallest-index column with negative reduced cost.
    fn entering(&self) -> Option<usize> {
        (0..self.n_total).find(|&j| {
            self.red[j] < -PIVOT_TOL && !(self.in_phase_two && j >= self.n_struct)
        })
    }

    /// Min-ratio leaving row; ties broken by smallest basic column index.
    fn leaving(&self, col: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let d = self.at(i, col);
            if d > PIVOT_TOL {
                let ratio = self.rhs_col(i) / d;
                match best {
                    None => best = Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - PIVOT_TOL
                            || (ratio <= br + PIVOT_TOL && self.basis[i] < self.basis[bi])
                        {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.n_total + 1;
        let p = self.t[row * width + col];
        for j in 0..width {
            self.t[row * width + j] /= p;
        }
        self.t[row * width + col] = 1.0;
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let f = self.t[i * width + col];
            if f != 0.0 {
                for j in 0..width {
                    self.t[i * width + j] -= f * self.t[row * width + j];
                }
                self.t[i * width + col] = 0.0;
            }
        }
        let f = self.red[col];
        if f != 0.0 {
            for j in 0..self.n_total {
                self.red[j] -= f * self.t[row * width + j];
            }
            // The entering variable takes the normalized rhs value, moving
            // the objective by its reduced cost times that value.
            self.obj += f * self.t[row * width + self.n_total];
            self.red[col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn run_phase_one(&mut self) -> Result<PhaseOne, LinfeasError> {
        for _ in 0..MAX_PIVOTS {
            match self.entering() {
                None => {
                    return if self.obj > FEAS_TOL {
                        Ok(PhaseOne::Infeasible)
                    } else {
                        Ok(PhaseOne::Feasible)
                    };
                }
                Some(col) => match self.leaving(col) {
                    // Phase 1 is bounded below by 0, so no leaving row can
                    // only mean numeric trouble.
                    None => return Err(LinfeasError::NumericalBreakdown),
                    Some(row) => self.pivot(row, col),
                },
            }
        }
        Err(LinfeasError::NumericalBreakdown)
    }

    /// Farkas certificate for the original rows: at a positive phase-1
    /// optimum the reduced costs of the slack columns are exactly the
    /// multipliers y >= 0 with y^T M = 0 and y^T rhs < 0.
    fn farkas_certificate(&self) -> DVector<f64> {
        DVector::from_fn(self.rows, |i, _| self.red[2 * self.nx + i].max(0.0))
    }

    /// Swap in the phase-2 objective `cost` on x = p - q. Basic artificials
    /// left over from phase 1 are pivoted out where possible; rows where
    /// that fails are dependent and stay inert.
    fn enter_phase_two(&mut self, cost: &DVector<f64>) -> Result<(), LinfeasError> {
        let width = self.n_total + 1;
        for i in 0..self.rows {
            if self.basis[i] >= self.n_struct {
                if let Some(col) =
                    (0..self.n_struct).find(|&j| self.at(i, j).abs() > PIVOT_TOL)
                {
                    self.pivot(i, col);
                }
            }
        }
        let mut c_full = vec![0.0; self.n_total];
        for j in 0..self.nx {
            c_full[j] = cost[j];
            c_full[self.nx + j] = -cost[j];
        }
        // red_j = c_j - c_B^T B^{-1} A_j over the current tableau
        for j in 0..self.n_total {
            let mut v = c_full[j];
            for i in 0..self.rows {
                let cb = c_full[self.basis[i]];
                if cb != 0.0 {
                    v -= cb * self.t[i * width + j];
                }
            }
            self.red[j] = v;
        }
        self.obj = (0..self.rows)
            .map(|i| c_full[self.basis[i]] * self.rhs_col(i))
            .sum();
        self.in_phase_two = true;
        Ok(())
    }

    fn run_phase_two(&mut self) -> Result<PhaseTwo, LinfeasError> {
        for _ in 0..MAX_PIVOTS {
            match self.entering() {
                None => return Ok(PhaseTwo::Optimal),
                Some(col) => match self.leaving(col) {
                    None => return Ok(PhaseTwo::Unbounded),
                    Some(row) => self.pivot(row, col),
                },
            }
        }
        Err(LinfeasError::NumericalBreakdown)
    }

    /// Current x = p - q from the basic solution.
    fn extract_point(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.nx);
        for i in 0..self.rows {
            let b = self.basis[i];
            let v = self.rhs_col(i);
            if b < self.nx {
                x[b] += v;
            } else if b < 2 * self.nx {
                x[b - self.nx] -= v;
            }
        }
        x
    }
}
