//! Port-selection CSI acquisition for FDD cell-free massive MIMO with
//! zero-forcing precoding: channel statistics, correlated channel sampling,
//! EDT feedback, closed-form and Monte Carlo sum rates, and greedy joint
//! port selection.

pub mod analytic;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod feedback;
pub mod linalg;
pub mod portsel;
pub mod precoder;
pub mod rng;
pub mod scenario;
pub mod selection;

pub use config::{AnalyticConfig, RunConfig, SelectionConfig, SimConfig, SystemConfig};
pub use error::{Error, Result, SelectionError};
pub use selection::PortSelection;
