//! One-sided representation toolkit for generalized dynamic factor models.
//!
//! Modules:
//! - [`polyalg`]: matrix-polynomial algebra, zeros, causal inverses.
//! - [`simulate`]: seeded panel generation.
//! - [`spectral`]: lag-window spectral estimates and eigen-diagnostics.
//! - [`blocking`]: partitioning filter rows into invertible blocks.
//! - [`recovery`]: one-sided shock recovery and diagnostics.
//! - [`io`]: CSV and JSON file formats.

pub mod blocking;
pub mod error;
pub mod io;
pub mod linalg;
pub mod par;
pub mod polyalg;
pub mod recovery;
pub mod simulate;
pub mod spectral;
pub mod types;

pub use error::{Error, Result};
pub use blocking::{plan_blocks, BlockPlan, PlanConfig, Strategy};
pub use recovery::{recover, RecoveryOptions, RecoveryReport, Truth};
pub use simulate::{example_panel, simulate_gdfm, ExampleKind, SimulatedPanel};
pub use types::{
    frequency_grid, GdfmSpec, IdioSpec, MatrixPolynomial, Panel, PerSeries, ShockSeries,
    SpectralGrid, C64,
};
