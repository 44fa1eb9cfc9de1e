//! Boolean enumeration engine: maximum-cardinality satisfying assignments
//! over clause-style constraints, with subset blocking.
//!
//! This is the Boolean half of the alternation loop in
//! [`crate::regions::estimate_region_count`]: it proposes candidate row
//! subsets of maximum cardinality, and learns exclusion clauses as the LP
//! side refutes them. Variables are `1..=universe`.

use std::collections::BTreeSet;
use std::fmt;

/// A single literal: a variable index with a polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, positive: false }
    }
}

/// A constraint over the Boolean universe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolConstraint {
    /// Disjunction of literals; an empty clause is unsatisfiable.
    Clause(Vec<Literal>),
    /// At least one of the listed variables is true.
    AtLeastOne(BTreeSet<usize>),
    /// The true-set must not be a subset of `inside` (the set itself
    /// included): at least one variable outside `inside` must be true.
    /// Blocking the whole universe therefore makes everything unsatisfiable.
    BlockSubsetsOf(BTreeSet<usize>),
}

/// A satisfying assignment, stored as its set of true variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub true_set: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatError {
    /// `add_blocking` requires a nonempty solved set.
    EmptyBlockingSet,
}

impl fmt::Display for SatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SatError::EmptyBlockingSet => write!(f, "cannot block the empty set"),
        }
    }
}

impl std::error::Error for SatError {}

/// Evaluate whether `true_set` satisfies every constraint.
pub fn satisfies(true_set: &BTreeSet<usize>, constraints: &[BoolConstraint]) -> bool {
    constraints.iter().all(|c| match c {
        BoolConstraint::Clause(lits) => lits
            .iter()
            .any(|l| true_set.contains(&l.var) == l.positive),
        BoolConstraint::AtLeastOne(vars) => vars.iter().any(|v| true_set.contains(v)),
        BoolConstraint::BlockSubsetsOf(inside) => {
            true_set.iter().any(|v| !inside.contains(v))
        }
    })
}

/// Find a satisfying assignment of maximum cardinality, or `None` when the
/// constraints are unsatisfiable.
///
/// Search is DPLL-style with a cardinality bound that decreases linearly
/// from the universe size: for each k the solver looks for an assignment
/// with at least k true variables, so the first hit has exactly the maximum
/// count. Branching tries `true` first in ascending variable order, which
/// makes the result the lexicographically smallest true-set among the
/// maxima, and runs deterministic.
///
/// # Panics
///
/// Panics if a constraint mentions a variable outside `1..=universe` or if
/// `universe` is zero.
pub fn maximize_true(universe: usize, constraints: &[BoolConstraint]) -> Option<Assignment> {
    assert!(universe >= 1, "universe must be at least 1");
    let clauses = normalize(universe, constraints);
    if clauses.iter().any(|c| c.is_empty()) {
        return None;
    }
    for k in (0..=universe).rev() {
        let mut search = Search {
            universe,
            clauses: &clauses,
            min_true: k,
            value: vec![None; universe + 1],
        };
        if let Some(true_set) = search.run(1, 0) {
            let a = Assignment { true_set };
            debug_assert!(satisfies(&a.true_set, constraints));
            return Some(a);
        }
    }
    None
}

/// Append a constraint excluding every subset of `solved` (itself included)
/// from future searches; assignments with any true variable outside
/// `solved` stay representable.
pub fn add_blocking(
    constraints: &mut Vec<BoolConstraint>,
    solved: &BTreeSet<usize>,
) -> Result<(), SatError> {
    if solved.is_empty() {
        return Err(SatError::EmptyBlockingSet);
    }
    constraints.push(BoolConstraint::BlockSubsetsOf(solved.clone()));
    Ok(())
}

/// Lower every constraint to a plain literal clause.
fn normalize(universe: usize, constraints: &[BoolConstraint]) -> Vec<Vec<Literal>> {
    let check = |v: usize| {
        assert!(
            v >= 1 && v <= universe,
            "variable {v} outside universe 1..={universe}"
        );
    };
    constraints
        .iter()
        .map(|c| match c {
            BoolConstraint::Clause(lits) => {
                for l in lits {
                    check(l.var);
                }
                lits.clone()
            }
            BoolConstraint::AtLeastOne(vars) => {
                vars.iter().map(|&v| {
                    check(v);
                    Literal::pos(v)
                }).collect()
            }
            BoolConstraint::BlockSubsetsOf(inside) => {
                for &v in inside {
                    check(v);
                }
                (1..=universe)
                    .filter(|v| !inside.contains(v))
                    .map(Literal::pos)
                    .collect()
            }
        })
        .collect()
}

struct Search<'a> {
    universe: usize,
    clauses: &'a [Vec<Literal>],
    min_true: usize,
    value: Vec<Option<bool>>, // 1-based
}

impl Search<'_> {
    /// Depth-first over variables `var..=universe` with `n_true` already set.
    fn run(&mut self, var: usize, n_true: usize) -> Option<BTreeSet<usize>> {
        if n_true + (self.universe + 1 - var) < self.min_true {
            return None;
        }
        if self.conflict() {
            return None;
        }
        if var > self.universe {
            return Some(
                (1..=self.universe)
                    .filter(|&v| self.value[v] == Some(true))
                    .collect(),
            );
        }
        for choice in [true, false] {
            self.value[var] = Some(choice);
            let found = self.run(var + 1, n_true + choice as usize);
            if found.is_some() {
                return found;
            }
        }
        self.value[var] = None;
        None
    }

    /// A clause with every literal assigned false can no longer be satisfied.
    fn conflict(&self) -> bool {
        self.clauses.iter().any(|clause| {
            clause.iter().all(|l| self.value[l.var] == Some(!l.positive))
        })
    }
}
