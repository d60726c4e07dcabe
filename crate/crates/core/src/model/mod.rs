//! System parameters, scheduling policies and their feasibility rules.
//!
//! A transmitter holds at most `Q` bits. At the start of each slot a packet of
//! `A` bits arrives with probability `alpha`; the scheduler then sees the total
//! backlog `t = q + A·a` (a state in `0..=K` with `K = Q + A`) and transmits
//! `m ≤ M` bits at power cost `P_m`. A [`Policy`] gives the probability of each
//! `m` for each total backlog.

mod params;
mod policy;
mod threshold;

pub use params::{ModelParams, RawParams};
pub use policy::Policy;
pub use threshold::{threshold_to_policy, RandomizedThreshold, ThresholdPolicy};

/// Absolute tolerance used when checking that probabilities are valid.
pub const PROB_TOL: f64 = 1e-12;
