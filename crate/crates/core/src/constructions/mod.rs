//! Explicit test functions: constant profile, branching, recovery
//! sequences and the bounded-energy example with unbounded `d2 u`.

mod assembly;
mod branch;
mod example;
mod recovery;

pub use assembly::{
    alpha_range, branching_profile, branching_profile_with, default_alpha, BranchingAssemblySpec,
    BranchingOptions,
};
pub use branch::{branch_cell, end_trace, BranchCellSpec, Stripe};
pub use example::example_sequence;
pub use recovery::{recovery_sequence, recovery_sequence_with, strip_guard, RecoveryOptions};

use crate::fields::{AnalyticProfile, BoundaryCondition, Rect};
use crate::poly::Poly2;
use crate::scalar::Real;

/// `v = 0` on the unit square.
pub fn constant_profile<T: Real>() -> AnalyticProfile<T> {
    AnalyticProfile::single(Rect::unit(), Poly2::zero(), BoundaryCondition::DirichletLeftZero)
        .expect("single cell is a valid tiling")
}
