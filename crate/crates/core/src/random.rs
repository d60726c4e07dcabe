//! Random parameter sets and policies for property checks and the CLI
//! verification battery.

use rand::Rng;

use crate::model::{ModelParams, Policy};

/// Random valid model with `K ≤ max_state`. Power follows
/// `P_m = c·m·(1 + g·(m − 1))`, which has strictly increasing per-bit cost
/// for any `c, g > 0`.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R, max_state: usize) -> ModelParams {
    assert!(max_state >= 1);
    loop {
        let a = rng.random_range(1..=3usize.min(max_state));
        let m = rng.random_range(a..=a + 2);
        let q = rng.random_range(0..=max_state - a);
        let alpha = rng.random_range(0.05..=0.95);
        let scale = rng.random_range(0.5..2.0);
        let growth = rng.random_range(0.1..1.5);
        let power = (0..=m)
            .map(|i| {
                let i = i as f64;
                scale * i * (1.0 + growth * (i - 1.0).max(0.0))
            })
            .collect();
        if let Ok(p) = ModelParams::new(alpha, a, m, q, power) {
            return p;
        }
    }
}

/// Fully randomized policy: every feasible action gets positive probability.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, params: &ModelParams) -> Policy {
    let rows = (0..params.num_states())
        .map(|k| {
            let feasible = params.feasible_range(k);
            let mut row = vec![0.0; params.num_actions()];
            for m in feasible {
                row[m] = rng.random_range(0.05..1.0);
            }
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= sum);
            row
        })
        .collect();
    Policy::new(params, rows).expect("random rows are valid")
}

/// Uniformly random feasible action in every state.
pub fn random_deterministic_policy<R: Rng + ?Sized>(rng: &mut R, params: &ModelParams) -> Policy {
    let actions: Vec<usize> = (0..params.num_states())
        .map(|k| rng.random_range(params.feasible_range(k)))
        .collect();
    Policy::deterministic(params, &actions).expect("feasible by construction")
}

/// Copy of `policy` with row `k` replaced by a different random row.
pub fn perturb_row<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ModelParams,
    policy: &Policy,
    k: usize,
) -> Policy {
    let mut row = vec![0.0; params.num_actions()];
    for m in params.feasible_range(k) {
        row[m] = rng.random_range(0.05..1.0);
    }
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= sum);
    // Other rows are copied bit for bit so the pair differs in row k only.
    let mut matrix = policy.matrix().clone();
    matrix.row_mut(k).copy_from_slice(&row);
    Policy::from_matrix_unchecked(matrix)
}

/// Two random fully-randomized policies that differ in exactly one row, or
/// `None` when every state has a single feasible action.
pub fn random_one_row_pair<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ModelParams,
) -> Option<(Policy, Policy)> {
    let choices: Vec<usize> = (0..params.num_states())
        .filter(|&k| params.feasible_range(k).count() >= 2)
        .collect();
    if choices.is_empty() {
        return None;
    }
    let base = random_policy(rng, params);
    let k = choices[rng.random_range(0..choices.len())];
    let other = perturb_row(rng, params, &base, k);
    Some((base, other))
}
