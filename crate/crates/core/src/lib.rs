//! Delay-optimal buffer-aware probabilistic scheduling.
//!
//! The crate evaluates transmission policies of a single-buffer queue with
//! Bernoulli packet arrivals as a Markov reward process and computes the
//! optimal average-delay/average-power tradeoff two ways: by walking
//! threshold policies ([`pareto::threshold_walk`]) and by sweeping a linear
//! program over occupation measures ([`lp::sweep`]). Exhaustive enumeration
//! and Monte-Carlo simulation are provided to cross-check both.

pub mod error;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod mrp;
pub mod pareto;
pub mod policies;
pub mod random;
pub mod sim;
pub mod validate;

pub use error::{Error, ParamError, Result};
pub use model::{ModelParams, Policy, RawParams, ThresholdPolicy};
pub use mrp::{evaluate, DelayPowerPoint};
pub use pareto::{brute_force_frontier, lower_convex_hull, threshold_walk, ParetoCurve};
