//! Model instances shared by the benchmarks.

use bufsched::ModelParams;

/// The small reference model: 8 states, 2304 deterministic policies.
pub fn reference() -> ModelParams {
    ModelParams::new(0.4, 2, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).expect("valid reference model")
}

/// A larger model with a long frontier; too many policies to enumerate.
pub fn large() -> ModelParams {
    let power = (0..=4).map(|m| (m * m) as f64 + 0.5 * m as f64).collect();
    ModelParams::new(0.5, 3, 4, 40, power).expect("valid large model")
}

/// Reference arrivals and powers with buffer `q`, for scaling runs.
pub fn with_buffer(q: usize) -> ModelParams {
    ModelParams::new(0.4, 2, 3, q, vec![0.0, 1.0, 4.0, 9.0]).expect("valid model")
}
