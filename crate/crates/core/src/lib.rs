//! Model of query-driven (pull) and Framed-ALOHA (push) traffic sharing one
//! slotted frame.
//!
//! The frame holds `F` slots of duration `tau`. Reserving room for `q`
//! scheduled query services leaves `k_a` random-access slots for push
//! packets. This crate provides:
//!
//! - [`math`]: Poisson pmf and sampling, Erlang-B blocking.
//! - [`frame`]: frame geometry and the split induced by `q`.
//! - [`metrics`]: closed-form success probabilities and throughput.
//! - [`optimize`]: optimal `q`, maximum supportable rates, crossovers.
//! - [`sim`]: frame-stepped Monte Carlo validation.

pub mod error;
pub mod frame;
pub mod math;
pub mod metrics;
pub mod optimize;
pub mod sim;

pub use error::{Error, Result};
pub use frame::{FrameConfig, FrameSplit};
pub use math::{erlang_b, poisson_pmf, sample_poisson, PoissonMean, PoissonSampler};
pub use metrics::{metrics, MetricsReport, TrafficLoad, Weights};
pub use optimize::{
    crossover_lambda_p, crossover_points, guidelines, max_lambda_p, max_lambda_q, optimal_q,
    GuidelineRow, OptimizationResult, QRow,
};
pub use sim::{load_grid, simulate, validate_grid, SimConfig, SimResult, ValidationPoint, ValidationSummary};
