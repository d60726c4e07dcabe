use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use super::chain::{factor_system, solve_stationary, stationary_system};
use super::{
    build_transition_enumerative, stationary_distribution, StationaryDistribution, TransitionMatrix,
};
use crate::error::Result;
use crate::linalg::{DenseMatrix, Lu};
use crate::model::{ModelParams, Policy};

/// Average power (abstract units) and average delay (slots) of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayPowerPoint {
    pub power: f64,
    pub delay: f64,
}

impl DelayPowerPoint {
    pub fn new(power: f64, delay: f64) -> Self {
        Self { power, delay }
    }

    pub fn max_abs_diff(&self, other: &DelayPowerPoint) -> f64 {
        (self.power - other.power)
            .abs()
            .max((self.delay - other.delay).abs())
    }
}

/// `P = Σ_k π_k Σ_m P_m f[k][m]`.
pub fn average_power(params: &ModelParams, policy: &Policy, pi: &StationaryDistribution) -> f64 {
    policy
        .state_power(params)
        .iter()
        .zip(pi.probs())
        .map(|(p, q)| p * q)
        .sum()
}

/// Little's law: mean queue length `Σ k π_k − αA` over the arrival rate `αA`.
pub fn average_delay(params: &ModelParams, pi: &StationaryDistribution) -> f64 {
    let d = pi.mean_state() / params.arrival_rate() - 1.0;
    if (-1e-10..0.0).contains(&d) {
        0.0
    } else {
        d
    }
}

/// Average power and delay of `policy`.
pub fn evaluate(params: &ModelParams, policy: &Policy) -> Result<DelayPowerPoint> {
    let chain = build_transition_enumerative(params, policy)?;
    let pi = stationary_distribution(&chain)?;
    Ok(DelayPowerPoint {
        power: average_power(params, policy, &pi),
        delay: average_delay(params, &pi),
    })
}

/// Everything derived from one policy that the mixing formulas need: the
/// stationary system `H`, its factorization, the per-state power vector and
/// the reward pair.
#[derive(Debug)]
pub struct PolicyAnalysis {
    pub policy: Policy,
    pub chain: TransitionMatrix,
    pub stationary: StationaryDistribution,
    pub state_power: Vec<f64>,
    pub point: DelayPowerPoint,
    pub(crate) system: DenseMatrix,
    pub(crate) lu: Lu,
    inverse: OnceLock<DenseMatrix>,
}

impl PolicyAnalysis {
    /// `H = [1ᵀ; (Λ − I)(0..K−1, :)]`.
    pub fn system(&self) -> &DenseMatrix {
        &self.system
    }

    /// `H⁻¹`, computed on first use.
    pub fn system_inverse(&self) -> &DenseMatrix {
        self.inverse.get_or_init(|| self.lu.inverse())
    }

    /// Solves `H x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve(b)
    }
}

pub fn analyze(params: &ModelParams, policy: &Policy) -> Result<PolicyAnalysis> {
    let chain = build_transition_enumerative(params, policy)?;
    let system = stationary_system(&chain);
    let lu = factor_system(&system)?;
    let stationary = solve_stationary(&lu)?;
    let state_power = policy.state_power(params);
    let point = DelayPowerPoint {
        power: average_power(params, policy, &stationary),
        delay: average_delay(params, &stationary),
    };
    Ok(PolicyAnalysis {
        policy: policy.clone(),
        chain,
        stationary,
        state_power,
        point,
        system,
        lu,
        inverse: OnceLock::new(),
    })
}

/// Memoizes [`PolicyAnalysis`] by policy for the duration of one frontier
/// computation. Not shared between threads.
#[derive(Debug)]
pub struct Evaluator<'a> {
    params: &'a ModelParams,
    cache: HashMap<Vec<u64>, Arc<PolicyAnalysis>>,
    hits: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        Self {
            params,
            cache: HashMap::new(),
            hits: 0,
        }
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    pub fn analyze(&mut self, policy: &Policy) -> Result<Arc<PolicyAnalysis>> {
        let key: Vec<u64> = policy
            .to_rows()
            .iter()
            .flatten()
            .map(|v| v.to_bits())
            .collect();
        if let Some(hit) = self.cache.get(&key) {
            self.hits += 1;
            return Ok(Arc::clone(hit));
        }
        let analysis = Arc::new(analyze(self.params, policy)?);
        self.cache.insert(key, Arc::clone(&analysis));
        Ok(analysis)
    }

    pub fn evaluate(&mut self, policy: &Policy) -> Result<DelayPowerPoint> {
        Ok(self.analyze(policy)?.point)
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    pub fn hits(&self) -> usize {
        self.hits
    }
}
