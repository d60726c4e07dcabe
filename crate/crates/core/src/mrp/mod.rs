//! The total-backlog process as a Markov reward process.
//!
//! For a fixed policy the backlog `t[n]` is a finite Markov chain. Its
//! stationary law gives the long-run average power and, through Little's law,
//! the average queueing delay.

mod chain;
mod mixing;
mod reward;

pub use chain::{
    build_transition_enumerative, build_transition_piecewise, stationary_distribution,
    StationaryDistribution, TransitionMatrix, PIVOT_TOL,
};
pub use mixing::{mix_policies, mixing_analysis, segment_slope, MixingAnalysis, SegmentSlope};
pub use reward::{
    analyze, average_delay, average_power, evaluate, DelayPowerPoint, Evaluator, PolicyAnalysis,
};
