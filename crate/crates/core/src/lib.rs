#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constructions;
pub mod covering;
pub mod energy;
pub mod error;
pub mod fields;
pub mod minimizer;
pub mod poly;
pub mod quadrature;
pub mod scaling_lab;
pub mod sbv_limit;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type GridField64 = fields::GridField<f64>;
pub type GridField32 = fields::GridField<f32>;
pub type AnalyticProfile64 = fields::AnalyticProfile<f64>;
pub type EnergyParams64 = energy::EnergyParams<f64>;
pub type EnergyBreakdown64 = energy::EnergyBreakdown<f64>;
pub type PiecewiseSBV64 = sbv_limit::PiecewiseSBV<f64>;
pub type SweepRecord64 = scaling_lab::SweepRecord<f64>;
