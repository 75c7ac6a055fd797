//! Deterministic simulation and analysis of fair heat-deficit allocation in
//! district heating networks.
//!
//! When aggregate demand exceeds the available heat power, somebody has to
//! shiver; the question is who, and by how much. This crate models each
//! connected building as a two-state RC system with a local heating-curve
//! controller, couples the buildings through a minimal central round (every
//! unit uploads its desired load, the centre broadcasts the shortfall) and
//! lets a per-unit weight vector decide how the deficit is shared. Four
//! weighting policies are built in, from the uncoordinated worst case to
//! price-differentiated shares, together with the discomfort and consumption
//! metrics needed to compare them.
//!
//! Modules:
//! - [`thermal`]: unit dynamics, exact zero-order-hold stepping, stationary
//!   solutions
//! - [`control`]: heating-curve feedforward, proportional feedback, tuning
//! - [`coordination`]: deficit computation, weighting strategies, allocation
//! - [`weather`]: CSV ingestion, interpolation, synthetic profiles
//! - [`scenario`]: run configuration and the bundled benchmark scenarios
//! - [`engine`]: the deterministic simulation loop and result emission
//! - [`metrics`]: discomfort/consumption metrics and strategy comparison
//!
//! ```
//! use heatfair::scenario::bundled_scenario;
//!
//! let mut scenario = bundled_scenario("demo-gain").unwrap();
//! scenario.t_end_h = 24.0;
//! let result = heatfair::run(&scenario).unwrap();
//! assert_eq!(result.unit_ids.len(), 3);
//! assert!((result.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
//! ```

pub mod control;
pub mod coordination;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod scenario;
pub mod thermal;
pub mod weather;

pub use coordination::{AllocationMode, Strategy};
pub use engine::{run, SimulationResult};
pub use error::{Error, Result};
pub use scenario::Scenario;
pub use thermal::{UnitParams, UnitState};
