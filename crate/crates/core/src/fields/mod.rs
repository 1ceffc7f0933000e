//! Discrete grid fields and exact piecewise-polynomial profiles on the unit square.

mod grid;
pub mod io;
mod profile;

pub use grid::{d1, d2, l1_distance, second_total_variation, BoundaryCondition, GridField, TRACE_TOL};
pub use profile::{
    sample_profile, AnalyticProfile, Column, Discontinuity, Interface, InterfaceKind, Rect,
    AREA_TOL, CONTINUITY_TOL,
};
