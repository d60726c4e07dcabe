//! Generating and classifying policies.

use crate::error::{Error, Result};
use crate::model::{ModelParams, Policy, RandomizedThreshold, ThresholdPolicy};

/// Default bound on the number of deterministic policies enumerated.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Number of deterministic policies: the product of the feasible-action set
/// sizes over all states.
pub fn deterministic_policy_count(params: &ModelParams) -> u128 {
    (0..params.num_states())
        .map(|k| params.feasible_range(k).count() as u128)
        .product()
}

/// Every deterministic policy, in lexicographic order of the action map
/// (state 0 most significant).
#[derive(Debug, Clone)]
pub struct DeterministicPolicies<'a> {
    params: &'a ModelParams,
    lows: Vec<usize>,
    sizes: Vec<usize>,
    count: u128,
    next: u128,
}

pub fn enumerate_deterministic(
    params: &ModelParams,
    cap: u128,
) -> Result<DeterministicPolicies<'_>> {
    let count = deterministic_policy_count(params);
    if count > cap {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let (lows, sizes) = (0..params.num_states())
        .map(|k| {
            let r = params.feasible_range(k);
            (*r.start(), r.count())
        })
        .unzip();
    Ok(DeterministicPolicies {
        params,
        lows,
        sizes,
        count,
        next: 0,
    })
}

impl DeterministicPolicies<'_> {
    pub fn total(&self) -> u128 {
        self.count
    }

    /// Action map of the policy at position `index` in enumeration order.
    pub fn action_map_at(&self, index: u128) -> Vec<usize> {
        assert!(index < self.count, "index {index} out of range");
        let mut rest = index;
        let mut actions = vec![0; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            let size = self.sizes[k] as u128;
            actions[k] = self.lows[k] + (rest % size) as usize;
            rest /= size;
        }
        actions
    }

    pub fn policy_at(&self, index: u128) -> Policy {
        Policy::deterministic(self.params, &self.action_map_at(index))
            .expect("enumerated actions are feasible")
    }
}

impl Iterator for DeterministicPolicies<'_> {
    type Item = Policy;

    fn next(&mut self) -> Option<Policy> {
        if self.next >= self.count {
            return None;
        }
        let policy = self.policy_at(self.next);
        self.next += 1;
        Some(policy)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = usize::try_from(self.count - self.next).unwrap_or(usize::MAX);
        (left, Some(left))
    }
}

/// Threshold form of `policy`, if it has one: a nondecreasing action map that
/// idles only in state 0, plus at most one row split between adjacent actions
/// `m` and `m + 1` at the last state of interval `m`.
pub fn is_threshold(params: &ModelParams, policy: &Policy) -> Option<ThresholdPolicy> {
    if policy.num_states() != params.num_states() || policy.num_actions() != params.num_actions() {
        return None;
    }
    let mut actions = Vec::with_capacity(policy.num_states());
    let mut split: Option<(usize, RandomizedThreshold)> = None;
    for k in 0..policy.num_states() {
        if let Some(m) = policy.action(k) {
            actions.push(m);
            continue;
        }
        let support: Vec<usize> = (0..policy.num_actions())
            .filter(|&m| policy.prob(k, m) > 0.0)
            .collect();
        match support.as_slice() {
            [lo, hi] if *hi == lo + 1 && split.is_none() => {
                split = Some((
                    k,
                    RandomizedThreshold {
                        index: *lo,
                        weight: policy.prob(k, *lo),
                    },
                ));
                actions.push(*lo);
            }
            _ => return None,
        }
    }
    let tp = ThresholdPolicy::from_actions(params, &actions)?;
    match split {
        None => Some(tp),
        Some((state, r)) => {
            if tp.thresholds()[r.index] != state {
                return None;
            }
            ThresholdPolicy::new(params, tp.thresholds().to_vec(), Some(r)).ok()
        }
    }
}

/// Legal one-step increments `k_m → k_m + 1` of a deterministic threshold
/// policy. Each move hands one more state to the smaller action `m`.
pub fn neighbors_increase_threshold(
    params: &ModelParams,
    tp: &ThresholdPolicy,
) -> Vec<ThresholdPolicy> {
    let base = tp.thresholds();
    let mut out = Vec::new();
    for m in 0..base.len() {
        let mut next = base.to_vec();
        next[m] += 1;
        if let Ok(candidate) = ThresholdPolicy::deterministic(params, next.clone()) {
            // completion must not have moved any other threshold
            if candidate.thresholds() == next.as_slice() {
                out.push(tp.with_thresholds(next));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    fn reference() -> ModelParams {
        ModelParams::new(0.4, 2, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).unwrap()
    }

    /// Recursive product over the feasible sets, independent of the odometer.
    fn all_action_maps(params: &ModelParams) -> Vec<Vec<usize>> {
        fn go(params: &ModelParams, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == params.num_states() {
                out.push(cur.clone());
                return;
            }
            for m in params.feasible_actions(k).unwrap() {
                cur.push(m);
                go(params, k + 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        go(params, 0, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn reference_count() {
        let p = reference();
        assert_eq!(deterministic_policy_count(&p), 2304);
        let it = enumerate_deterministic(&p, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(it.total(), 2304);
        assert_eq!(it.total(), 2304);
    }

    #[test]
    fn odometer_matches_recursive_product() {
        for (q, a, m) in [(5, 2, 3), (2, 1, 3), (3, 3, 4), (0, 2, 2), (4, 2, 4)] {
            let power: Vec<f64> = (0..=m).map(|i| (i * i) as f64).collect();
            let p = ModelParams::new(0.5, a, m, q, power).unwrap();
            let odometer: Vec<Vec<usize>> = enumerate_deterministic(&p, 10_000)
                .unwrap()
                .map(|f| f.actions().unwrap())
                .collect();
            let recursive = all_action_maps(&p);
            // same order, not just the same set
            assert_eq!(odometer, recursive);
        }
    }

    #[test]
    fn forced_actions_without_buffer() {
        let p = ModelParams::new(0.5, 2, 3, 0, vec![0.0, 1.0, 4.0, 9.0]).unwrap();
        let all: Vec<Policy> = enumerate_deterministic(&p, 10).unwrap().collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].actions().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn cap_is_enforced() {
        let p = reference();
        assert!(matches!(
            enumerate_deterministic(&p, 2303),
            Err(Error::EnumerationTooLarge {
                count: 2304,
                cap: 2303
            })
        ));
    }

    #[test]
    fn threshold_recognition() {
        let p = reference();
        let monotone = Policy::deterministic(&p, &[0, 1, 1, 2, 2, 2, 2, 2]).unwrap();
        assert_eq!(
            is_threshold(&p, &monotone).unwrap().thresholds(),
            &[0, 2, 7, 7]
        );

        let decreasing = Policy::deterministic(&p, &[0, 1, 0, 1, 1, 1, 1, 2]).unwrap();
        assert!(is_threshold(&p, &decreasing).is_none());

        let mut rows = monotone.to_rows();
        rows[3] = vec![0.5, 0.0, 0.5, 0.0];
        assert!(is_threshold(&p, &Policy::new(&p, rows).unwrap()).is_none());

        let mut rows = monotone.to_rows();
        rows[3] = vec![0.0, 0.0, 0.25, 0.75];
        assert!(is_threshold(&p, &Policy::new(&p, rows).unwrap()).is_none());

        let mut rows = monotone.to_rows();
        rows[2] = vec![0.0, 0.25, 0.75, 0.0];
        let tp = is_threshold(&p, &Policy::new(&p, rows).unwrap()).unwrap();
        assert_eq!(tp.thresholds(), &[0, 2, 7, 7]);
        assert_eq!(
            tp.randomized(),
            Some(RandomizedThreshold {
                index: 1,
                weight: 0.25
            })
        );

        // split in the middle of an interval
        let mut rows = monotone.to_rows();
        rows[5] = vec![0.0, 0.0, 0.25, 0.75];
        assert!(is_threshold(&p, &Policy::new(&p, rows).unwrap()).is_none());
    }

    #[test]
    fn threshold_round_trip_over_all_monotone_maps() {
        let p = reference();
        let mut seen = 0;
        for f in enumerate_deterministic(&p, DEFAULT_ENUMERATION_CAP).unwrap() {
            if let Some(tp) = is_threshold(&p, &f) {
                seen += 1;
                let back = tp.to_policy(&p).unwrap();
                assert_eq!(back, f);
                assert_eq!(is_threshold(&p, &back).unwrap(), tp);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn neighbors_of_immediate_start() {
        let p = reference();
        let start = ThresholdPolicy::immediate(&p);
        let n: Vec<Vec<usize>> = neighbors_increase_threshold(&p, &start)
            .iter()
            .map(|t| t.thresholds().to_vec())
            .collect();
        assert_eq!(n, vec![vec![0, 2, 7, 7]]);
    }

    #[test]
    fn neighbors_respect_monotonicity_and_feasibility() {
        let p = reference();
        let tp = ThresholdPolicy::deterministic(&p, vec![0, 2, 2, 7]).unwrap();
        let n: BTreeSet<Vec<usize>> = neighbors_increase_threshold(&p, &tp)
            .iter()
            .map(|t| t.thresholds().to_vec())
            .collect();
        // k_1 = k_2 blocks k_1; k_0 and k_3 can never move
        assert_eq!(n, BTreeSet::from([vec![0, 2, 3, 7]]));

        // state 7 cannot drop to one bit
        let tp = ThresholdPolicy::deterministic(&p, vec![0, 6, 7, 7]).unwrap();
        assert!(neighbors_increase_threshold(&p, &tp).is_empty());
    }

    #[test]
    fn every_neighbor_is_a_unit_step() {
        let p = reference();
        for f in enumerate_deterministic(&p, DEFAULT_ENUMERATION_CAP).unwrap() {
            let Some(tp) = is_threshold(&p, &f) else {
                continue;
            };
            for n in neighbors_increase_threshold(&p, &tp) {
                let diffs: Vec<(usize, i64)> = tp
                    .thresholds()
                    .iter()
                    .zip(n.thresholds())
                    .enumerate()
                    .filter(|(_, (a, b))| a != b)
                    .map(|(m, (a, b))| (m, *b as i64 - *a as i64))
                    .collect();
                assert_eq!(diffs.len(), 1);
                assert_eq!(diffs[0].1, 1);
                let pol = n.to_policy(&p).unwrap();
                assert_eq!(pol.differing_rows(&f).len(), 1);
            }
        }
    }
}
