//! Location-dependent write and read channel models for 1S1R crossbar
//! resistive memory, with capacity, threshold design and Monte-Carlo
//! validation.
//!
//! Everything numeric is generic over [`Scalar`] (`f64` or `f32`); the
//! `*F64` and `*F32` aliases name the common instantiations.

// `!(x > 0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod capacity;
pub mod circuit;
pub mod config;
pub mod error;
pub mod grid;
pub mod monte_carlo;
pub mod quadrature;
pub mod read_channel;
pub mod scalar;
pub mod sweep;
pub mod threshold;
pub mod write_channel;

pub use capacity::{
    averaged_capacity, capacity_grid, cascade, cell_capacity, mutual_information, report_grid, CapacityResult,
    CascadeParams, CellChannel, CellReport, Coupling,
};
pub use circuit::{
    cumulative_line_resistance, effective_write_voltage_ideal, read_current_ideal, selected_port, solve_kcl_grid,
    BiasKind, BiasScheme, KclSolution, ResistanceGrid, SelectedPort, SelectorRole,
};
pub use config::{
    load_config, parse_config, render_config, save_config, ArrayGeometry, DeviceModel, ModelBundle, OperatingPoint,
    Resistance, SwitchingLaw, Violation,
};
pub use error::{Error, Result};
pub use grid::{Bit, Cell, CellGrid};
pub use monte_carlo::{
    estimate_channel_grid, simulate_read, simulate_write, BinomialEstimate, Confidence, EmpiricalBac, ReadMode,
    SamplingPlan,
};
pub use read_channel::{detect, read_channel_params, read_channel_params_general, read_channel_params_ideal, ReadChannelParams};
pub use scalar::{binary_entropy, q_function, Scalar};
pub use sweep::SweepSpec;
pub use threshold::{
    baseline_threshold, dtec_threshold, jensen_bound, scheme_average_ber, stmc_approx, stmc_exact, LineOffsets,
    SchemeKind, Scope, StmcTrace, ThresholdScheme,
};
pub use write_channel::{median_switch_time, write_channel_params, SwitchOp, WriteChannelParams};

pub type ArrayGeometryF64 = ArrayGeometry<f64>;
pub type ArrayGeometryF32 = ArrayGeometry<f32>;
pub type DeviceModelF64 = DeviceModel<f64>;
pub type DeviceModelF32 = DeviceModel<f32>;
pub type OperatingPointF64 = OperatingPoint<f64>;
pub type OperatingPointF32 = OperatingPoint<f32>;
pub type ModelBundleF64 = ModelBundle<f64>;
pub type ModelBundleF32 = ModelBundle<f32>;
pub type WriteChannelParamsF64 = WriteChannelParams<f64>;
pub type ReadChannelParamsF64 = ReadChannelParams<f64>;
pub type CellReportF64 = CellReport<f64>;
