//! Condensed parametric QP construction for linear MPC.
//!
//! Takes a constrained LTI optimal-control problem over a finite horizon and
//! eliminates the dynamics, producing the dense quadratic program
//!
//! ```text
//!   min_U  1/2 x'Yx + 1/2 U'HU + x'FU   s.t.  G U <= W + E x
//! ```
//!
//! together with the completed-square form `min_z 1/2 z'Hz  s.t.
//! G z <= W + S x` under `z = U + H^{-1}F'x`, which is what the region
//! estimator and the explicit oracle consume.

use nalgebra::{Cholesky, DMatrix, DVector};
use std::fmt;

/// Default relative tolerance for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// An MPC problem instance.
///
/// The prediction horizon is `horizon` (= N_c); output constraints apply at
/// steps `1..=horizon` and input constraints at steps `0..=horizon`. The
/// terminal weight `p` is typically the Riccati cost-to-go for the feedback
/// gain `k` (see [`dare_solve`]); with the prediction and control horizons
/// tied together here, `k` does not enter the condensed matrices.
#[derive(Debug, Clone)]
pub struct MpcSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub horizon: usize,
    pub y_min: DVector<f64>,
    pub y_max: DVector<f64>,
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    /// Strict-feasibility margin used by the region estimator.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CondenseError {
    /// The condensed Hessian failed its Cholesky factorization; the cost is
    /// ill-posed (R not positive definite relative to the plant structure).
    NonPositiveDefiniteH,
    DimensionMismatch(String),
    NotSymmetric(&'static str),
    NotPositiveSemidefinite(&'static str),
    /// y_min < y_max or u_min < u_max violated element-wise.
    InvalidBounds(&'static str),
    /// The horizon must be at least 2.
    HorizonTooShort,
    NonFinite,
}

impl fmt::Display for CondenseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CondenseError::NonPositiveDefiniteH => {
                write!(f, "condensed Hessian H is not positive definite")
            }
            CondenseError::DimensionMismatch(what) => write!(f, "dimension mismatch: {what}"),
            CondenseError::NotSymmetric(which) => write!(f, "matrix {which} is not symmetric"),
            CondenseError::NotPositiveSemidefinite(which) => {
                write!(f, "matrix {which} is not positive semidefinite")
            }
            CondenseError::InvalidBounds(which) => {
                write!(f, "bounds violate min < max for {which}")
            }
            CondenseError::HorizonTooShort => write!(f, "horizon must be at least 2"),
            CondenseError::NonFinite => write!(f, "specification contains non-finite entries"),
        }
    }
}

impl std::error::Error for CondenseError {}

/// The condensed QP: cost matrices, constraint matrices in both the
/// U-variable and z-variable forms, and the problem counts.
#[derive(Debug, Clone)]
pub struct CondensedQp {
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub w: DVector<f64>,
    pub e: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub omega: usize,
    pub rho: usize,
    pub n_states: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub horizon: usize,
    /// Strict-feasibility margin carried over from the spec.
    pub epsilon: f64,
}

impl CondensedQp {
    /// Cholesky factor of H. H is validated positive definite at
    /// construction, so this cannot fail on a `condense` output.
    pub fn h_cholesky(&self) -> Result<Cholesky<f64, nalgebra::Dyn>, CondenseError> {
        Cholesky::new(self.h.clone()).ok_or(CondenseError::NonPositiveDefiniteH)
    }
}

impl MpcSpec {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Check the structural invariants: shapes, symmetry (to relative
    /// 1e-10), positive semidefiniteness of Q and P (shifted Cholesky
    /// attempt), ordered bounds, and a horizon of at least 2. R is checked
    /// for symmetry only; its definiteness requirement surfaces through the
    /// Cholesky of H in [`condense`].
    pub fn validate(&self) -> Result<(), CondenseError> {
        let n = self.n_states();
        let m = self.n_inputs();
        let l = self.n_outputs();
        let dims: [(&str, usize, usize, usize, usize); 7] = [
            ("A", self.a.nrows(), self.a.ncols(), n, n),
            ("B", self.b.nrows(), self.b.ncols(), n, m),
            ("C", self.c.nrows(), self.c.ncols(), l, n),
            ("P", self.p.nrows(), self.p.ncols(), n, n),
            ("Q", self.q.nrows(), self.q.ncols(), n, n),
            ("R", self.r.nrows(), self.r.ncols(), m, m),
            ("K", self.k.nrows(), self.k.ncols(), m, n),
        ];
        for (name, ar, ac, er, ec) in dims {
            if ar != er || ac != ec {
                return Err(CondenseError::DimensionMismatch(format!(
                    "{name} is {ar}x{ac}, expected {er}x{ec}"
                )));
            }
        }
        if self.y_min.len() != l || self.y_max.len() != l {
            return Err(CondenseError::DimensionMismatch(format!(
                "output bounds must have length {l}"
            )));
        }
        if self.u_min.len() != m || self.u_max.len() != m {
            return Err(CondenseError::DimensionMismatch(format!(
                "input bounds must have length {m}"
            )));
        }
        let all = [&self.a, &self.b, &self.c, &self.p, &self.q, &self.r, &self.k];
        if all.iter().any(|mat| mat.iter().any(|v| !v.is_finite()))
            || [&self.y_min, &self.y_max, &self.u_min, &self.u_max]
                .iter()
                .any(|v| v.iter().any(|x| !x.is_finite()))
        {
            return Err(CondenseError::NonFinite);
        }
        for (name, mat) in [("Q", &self.q), ("P", &self.p), ("R", &self.r)] {
            if !is_symmetric(mat, SYMMETRY_TOL) {
                return Err(CondenseError::NotSymmetric(name));
            }
        }
        for (name, mat) in [("Q", &self.q), ("P", &self.p)] {
            if !is_psd(mat) {
                return Err(CondenseError::NotPositiveSemidefinite(name));
            }
        }
        if (0..l).any(|i| self.y_min[i] >= self.y_max[i]) {
            return Err(CondenseError::InvalidBounds("y"));
        }
        if (0..m).any(|i| self.u_min[i] >= self.u_max[i]) {
            return Err(CondenseError::InvalidBounds("u"));
        }
        if self.horizon < 2 {
            return Err(CondenseError::HorizonTooShort);
        }
        Ok(())
    }
}

fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let scale = 1.0 + m.abs().max();
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst <= rel_tol * scale
}

fn is_psd(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let shift = 1e-9 * (1.0 + m.abs().max());
    Cholesky::new(m + DMatrix::identity(n, n) * shift).is_some()
}

/// Number of decision variables: m (N_c + 1).
pub fn decision_count(n_inputs: usize, horizon: usize) -> usize {
    n_inputs * (horizon + 1)
}

/// Number of inequality constraints: 2 l N_c + 2 m (N_c + 1).
pub fn constraint_count(n_inputs: usize, n_outputs: usize, horizon: usize) -> usize {
    2 * n_outputs * horizon + 2 * n_inputs * (horizon + 1)
}

/// Build the condensed QP from an MPC instance.
///
/// The returned matrices satisfy, for every state x and input stack U,
/// `J(U, x) = 1/2 x'Yx + 1/2 U'HU + x'FU` with J the stage-cost rollout,
/// and `{U : GU <= W + Ex}` equals the rolled-out constraint set. Constraint
/// rows come in a fixed order, so active-set indices are stable: output
/// upper bounds for k = 1..N_c, output lower bounds for k = 1..N_c, input
/// upper bounds for k = 0..N_c, input lower bounds for k = 0..N_c.
pub fn condense(spec: &MpcSpec) -> Result<CondensedQp, CondenseError> {
    spec.validate()?;
    let n = spec.n_states();
    let m = spec.n_inputs();
    let l = spec.n_outputs();
    let nc = spec.horizon;
    let ny = nc + 1;
    let omega = decision_count(m, nc);
    let rho = constraint_count(m, l, nc);

    // State prediction: stack x_0..x_Ny as Sx * x + Su * U.
    let mut a_pows: Vec<DMatrix<f64>> = Vec::with_capacity(ny + 1);
    a_pows.push(DMatrix::identity(n, n));
    for k in 1..=ny {
        let next = &a_pows[k - 1] * &spec.a;
        a_pows.push(next);
    }
    let mut sx = DMatrix::zeros((ny + 1) * n, n);
    let mut su = DMatrix::zeros((ny + 1) * n, omega);
    for k in 0..=ny {
        sx.view_mut((k * n, 0), (n, n)).copy_from(&a_pows[k]);
        for j in 0..k.min(nc + 1) {
            let blk = &a_pows[k - 1 - j] * &spec.b;
            su.view_mut((k * n, j * m), (n, m)).copy_from(&blk);
        }
    }

    // Stacked stage weights: Q on steps 0..Ny-1, P on the terminal step.
    let mut qbar = DMatrix::zeros((ny + 1) * n, (ny + 1) * n);
    for k in 0..ny {
        qbar.view_mut((k * n, k * n), (n, n)).copy_from(&spec.q);
    }
    qbar.view_mut((ny * n, ny * n), (n, n)).copy_from(&spec.p);
    let mut rbar = DMatrix::zeros(omega, omega);
    for k in 0..=nc {
        rbar.view_mut((k * m, k * m), (m, m)).copy_from(&spec.r);
    }

    // The cost rollout has no leading 1/2, the condensed form does, so H,
    // F, Y absorb the factor 2.
    let sut_qbar = su.transpose() * &qbar;
    let mut h = (&sut_qbar * &su + rbar) * 2.0;
    h = (&h + h.transpose()) * 0.5;
    let f = (sx.transpose() * &qbar * &su) * 2.0;
    let y = (sx.transpose() * &qbar * &sx) * 2.0;

    let chol = Cholesky::new(h.clone()).ok_or(CondenseError::NonPositiveDefiniteH)?;

    let mut g = DMatrix::zeros(rho, omega);
    let mut w = DVector::zeros(rho);
    let mut e = DMatrix::zeros(rho, n);
    let mut row = 0;
    // Output upper bounds, k = 1..=N_c: C x_k <= y_max.
    for k in 1..=nc {
        let cs = &spec.c * su.view((k * n, 0), (n, omega));
        let ca = &spec.c * &a_pows[k];
        g.view_mut((row, 0), (l, omega)).copy_from(&cs);
        w.rows_mut(row, l).copy_from(&spec.y_max);
        e.view_mut((row, 0), (l, n)).copy_from(&(-&ca));
        row += l;
    }
    // Output lower bounds, k = 1..=N_c: -C x_k <= -y_min.
    for k in 1..=nc {
        let cs = &spec.c * su.view((k * n, 0), (n, omega));
        let ca = &spec.c * &a_pows[k];
        g.view_mut((row, 0), (l, omega)).copy_from(&(-&cs));
        w.rows_mut(row, l).copy_from(&(-&spec.y_min));
        e.view_mut((row, 0), (l, n)).copy_from(&ca);
        row += l;
    }
    // Input upper bounds, k = 0..=N_c: u_k <= u_max.
    for k in 0..=nc {
        for i in 0..m {
            g[(row + i, k * m + i)] = 1.0;
        }
        w.rows_mut(row, m).copy_from(&spec.u_max);
        row += m;
    }
    // Input lower bounds, k = 0..=N_c: -u_k <= -u_min.
    for k in 0..=nc {
        for i in 0..m {
            g[(row + i, k * m + i)] = -1.0;
        }
        w.rows_mut(row, m).copy_from(&(-&spec.u_min));
        row += m;
    }
    debug_assert_eq!(row, rho);

    // The substitution z = U + H^{-1}F'x forces S = E + G H^{-1} F'.
    let h_inv_ft = chol.solve(&f.transpose());
    let s = &e + &g * h_inv_ft;

    Ok(CondensedQp {
        h,
        f,
        y,
        g,
        w,
        e,
        s,
        omega,
        rho,
        n_states: n,
        n_inputs: m,
        n_outputs: l,
        horizon: nc,
        epsilon: spec.epsilon,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DareError {
    /// The fixed-point iteration failed to converge; the pair (A, B) is
    /// likely not stabilizable.
    NoConvergence { iterations: usize },
    /// R + B'PB became singular during the iteration.
    SingularIteration,
    DimensionMismatch,
}

impl fmt::Display for DareError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DareError::NoConvergence { iterations } => {
                write!(f, "Riccati iteration did not converge in {iterations} steps")
            }
            DareError::SingularIteration => write!(f, "R + B'PB singular during iteration"),
            DareError::DimensionMismatch => write!(f, "inconsistent matrix shapes"),
        }
    }
}

impl std::error::Error for DareError {}

/// Solve the discrete algebraic Riccati equation by fixed-point iteration
/// and return the cost-to-go P together with the LQR gain K (for u = -Kx).
///
/// Iterates `P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA` from `P = Q` until
/// the update falls below 1e-10 relative, up to `max_iter` steps
/// (10000 by default via [`dare_solve`]).
pub fn dare_solve_with(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    max_iter: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>), DareError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.nrows() != n || q.ncols() != n {
        return Err(DareError::DimensionMismatch);
    }
    if r.nrows() != m || r.ncols() != m {
        return Err(DareError::DimensionMismatch);
    }
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    for _ in 0..max_iter {
        let inner = r + &bt * &p * b;
        let inner_inv = inner.try_inverse().ok_or(DareError::SingularIteration)?;
        let next = q + &at * &p * a - &at * &p * b * &inner_inv * &bt * &p * a;
        let delta = (&next - &p).abs().max();
        let scale = 1.0 + p.abs().max();
        p = next;
        if !delta.is_finite() {
            return Err(DareError::NoConvergence { iterations: max_iter });
        }
        if delta <= 1e-10 * scale {
            let inner = r + &bt * &p * b;
            let inner_inv = inner.try_inverse().ok_or(DareError::SingularIteration)?;
            let k = inner_inv * &bt * &p * a;
            return Ok((p, k));
        }
    }
    Err(DareError::NoConvergence { iterations: max_iter })
}

/// [`dare_solve_with`] at the default iteration cap of 10000.
pub fn dare_solve(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>), DareError> {
    dare_solve_with(a, b, q, r, 10_000)
}
