//! Sound architecture sizing for ReLU implementations of linear MPC.
//!
//! Given an LTI system with quadratic cost and box constraints, this crate
//! over-approximates the number of affine pieces of the optimal MPC control
//! law without solving the MPC explicitly, and turns the counts into a ReLU
//! network architecture guaranteed to admit weights that implement the law
//! exactly. The pipeline is
//!
//! 1. [`mpc::condense`]: eliminate the dynamics into a dense parametric QP;
//! 2. [`regions::estimate_region_count`]: bound the number of distinct
//!    affine pieces by enumerating maximal non-trivially feasible row
//!    subsets of `G H^{-1}` with an alternating SAT/LP loop;
//! 3. [`ordering::estimate_unique_order_count`]: bound the number of
//!    unique-order regions via the hyperplane-arrangement region bound;
//! 4. [`lattice::infer_architecture`]: size the two-level lattice network
//!    for those counts.
//!
//! The [`oracle`] module computes the exact explicit law by brute force at
//! desk scale, which is how the bounds and the network construction are
//! validated end to end.

pub mod lattice;
pub mod linfeas;
pub mod mpc;
pub mod oracle;
pub mod ordering;
pub mod regions;
pub mod sat;

pub use lattice::{
    assemble_lattice_net, assemble_vector_lattice_net, embed, embedded_forward, forward,
    infer_architecture, ArchDescriptor, CpwlDescription, LatticeNet, WeightedNet,
};
pub use linfeas::{check_feasible, chebyshev_center, extract_iis, Feasibility, IneqSystem};
pub use mpc::{condense, dare_solve, CondensedQp, MpcSpec};
pub use oracle::{
    default_domain_box, enumerate_explicit, exact_maximal_region_count, extract_lattice,
    solve_pointwise, PwaFunction,
};
pub use ordering::{estimate_unique_order_count, region_bound, UoBound};
pub use regions::{
    count_unique_subsets, estimate_region_count, feasibility_matrix, ActiveSet, EstimateOptions,
    RegionCountReport,
};
pub use sat::{add_blocking, maximize_true, Assignment, BoolConstraint, Literal};
