//! Monte-Carlo simulation of the buffer under a fixed policy.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`. Arrivals
//! use stream 0 and transmission choices stream 1, one uniform per slot each,
//! so a run is reproducible bit for bit on any platform.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Policy};
use crate::mrp::StationaryDistribution;

pub const ARRIVAL_STREAM: u64 = 0;
pub const TRANSMIT_STREAM: u64 = 1;
pub const MAX_TRACE_ROWS: usize = 100_000;
const MAX_BURN_IN: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub slots: u64,
    /// Leading slots excluded from the averages.
    pub burn_in: u64,
    pub seed: u64,
    pub empirical_power: f64,
    /// Mean buffer content divided by the arrival rate.
    pub empirical_delay: f64,
    /// Fraction of measured slots spent in each decision state `t[n]`.
    pub occupancy: Vec<f64>,
    pub overflow_violations: u64,
    pub underflow_violations: u64,
}

impl SimulationResult {
    /// Total-variation distance between the occupancy histogram and `pi`.
    pub fn tv_distance(&self, pi: &StationaryDistribution) -> f64 {
        0.5 * self
            .occupancy
            .iter()
            .zip(pi.probs())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TraceRow {
    pub n: u64,
    pub a: u8,
    pub t: usize,
    pub s: usize,
    pub q: usize,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("n,a,t,s,q\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.n, r.a, r.t, r.s, r.q);
    }
    s
}

pub fn burn_in(slots: u64) -> u64 {
    (slots / 10).min(MAX_BURN_IN)
}

pub fn simulate(
    params: &ModelParams,
    policy: &Policy,
    slots: u64,
    seed: u64,
) -> Result<SimulationResult> {
    run(params, policy, slots, seed, 0).map(|(r, _)| r)
}

/// Like [`simulate`], also returning the first `min(slots, 10^5)` slots.
pub fn simulate_traced(
    params: &ModelParams,
    policy: &Policy,
    slots: u64,
    seed: u64,
) -> Result<(SimulationResult, Vec<TraceRow>)> {
    run(params, policy, slots, seed, MAX_TRACE_ROWS)
}

fn run(
    params: &ModelParams,
    policy: &Policy,
    slots: u64,
    seed: u64,
    trace_cap: usize,
) -> Result<(SimulationResult, Vec<TraceRow>)> {
    if slots == 0 {
        return Err(Error::Format("simulation needs at least one slot".into()));
    }
    policy.check_shape(params)?;
    let cumulative: Vec<Vec<f64>> = (0..params.num_states())
        .map(|k| {
            policy
                .row(k)
                .iter()
                .scan(0.0, |acc, &p| {
                    *acc += p;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let last_positive: Vec<usize> = (0..params.num_states())
        .map(|k| policy.row(k).iter().rposition(|&p| p > 0.0).unwrap_or(0))
        .collect();

    let mut arrivals = ChaCha8Rng::seed_from_u64(seed);
    arrivals.set_stream(ARRIVAL_STREAM);
    let mut choices = ChaCha8Rng::seed_from_u64(seed);
    choices.set_stream(TRANSMIT_STREAM);

    let alpha = params.alpha();
    let a_bits = params.packet_size();
    let q_max = params.buffer();
    let power = params.power();
    let skip = burn_in(slots);

    let mut q = 0usize;
    let mut power_sum = 0.0;
    let mut queue_sum = 0.0;
    let mut visits = vec![0u64; params.num_states()];
    let (mut overflow, mut underflow) = (0u64, 0u64);
    let mut trace = Vec::with_capacity(trace_cap.min(slots as usize));

    for n in 0..slots {
        let arrived = arrivals.random::<f64>() < alpha;
        let t = q + if arrived { a_bits } else { 0 };
        let u: f64 = choices.random();
        let s = cumulative[t]
            .iter()
            .position(|&c| u < c)
            .unwrap_or(last_positive[t]);
        if trace.len() < trace_cap {
            trace.push(TraceRow {
                n,
                a: arrived as u8,
                t,
                s,
                q,
            });
        }
        if n >= skip {
            power_sum += power[s];
            queue_sum += q as f64;
            visits[t] += 1;
        }
        let next = if s > t {
            underflow += 1;
            0
        } else {
            t - s
        };
        q = if next > q_max {
            overflow += 1;
            q_max
        } else {
            next
        };
    }

    let measured = (slots - skip) as f64;
    let result = SimulationResult {
        slots,
        burn_in: skip,
        seed,
        empirical_power: power_sum / measured,
        empirical_delay: queue_sum / measured / params.arrival_rate(),
        occupancy: visits.iter().map(|&v| v as f64 / measured).collect(),
        overflow_violations: overflow,
        underflow_violations: underflow,
    };
    Ok((result, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_single_bit_queue() {
        let p = ModelParams::new(1.0, 1, 1, 1, vec![0.0, 2.5]).unwrap();
        let policy = Policy::deterministic(&p, &[0, 1, 1]).unwrap();
        let r = simulate(&p, &policy, 1000, 3).unwrap();
        assert_eq!(r.empirical_power, 2.5);
        assert_eq!(r.empirical_delay, 0.0);
        assert_eq!(r.burn_in, 100);
        assert_eq!(r.overflow_violations + r.underflow_violations, 0);
    }

    #[test]
    fn same_seed_same_result() {
        let p = ModelParams::new(0.4, 2, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).unwrap();
        let policy = Policy::deterministic(&p, &[0, 1, 1, 1, 1, 1, 1, 2]).unwrap();
        let a = simulate(&p, &policy, 20_000, 11).unwrap();
        let b = simulate(&p, &policy, 20_000, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate(&p, &policy, 20_000, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trace_matches_recursion() {
        let p = ModelParams::new(0.4, 2, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).unwrap();
        let policy = Policy::deterministic(&p, &[0, 1, 1, 1, 1, 1, 1, 2]).unwrap();
        let (r, rows) = simulate_traced(&p, &policy, 1000, 5).unwrap();
        assert_eq!(rows.len(), 1000);
        assert_eq!(rows[0].q, 0);
        for w in rows.windows(2) {
            assert_eq!(w[0].t, w[0].q + 2 * w[0].a as usize);
            assert_eq!(w[1].q, w[0].t - w[0].s);
        }
        assert_eq!(r, simulate(&p, &policy, 1000, 5).unwrap());
        assert_eq!(trace_csv(&rows).lines().count(), 1001);
    }

    #[test]
    fn zero_slots_rejected() {
        let p = ModelParams::new(0.5, 1, 1, 1, vec![0.0, 1.0]).unwrap();
        assert!(simulate(&p, &Policy::immediate(&p), 0, 0).is_err());
    }
}
