use serde::Serialize;

use super::{ModelParams, Policy};
use crate::error::{Error, Result};

/// A single randomized threshold: in state `k_index` the policy transmits
/// `index` bits with probability `weight` and `index + 1` bits otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RandomizedThreshold {
    pub index: usize,
    pub weight: f64,
}

/// Threshold form of a policy: `m` bits are sent when the total backlog lies
/// in `(k_{m-1}, k_m]`, with `k_{-1} = -1`.
///
/// Thresholds are stored in canonical form: `k_0 = 0`, nondecreasing, and
/// `k_M = K`, so every state has an action. Vectors that stop short of `K`
/// are completed by giving each uncovered state the smallest feasible action
/// not below its predecessor's.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdPolicy {
    thresholds: Vec<usize>,
    randomized: Option<RandomizedThreshold>,
}

impl ThresholdPolicy {
    pub fn new(
        params: &ModelParams,
        thresholds: Vec<usize>,
        randomized: Option<RandomizedThreshold>,
    ) -> Result<Self> {
        let malformed = |reason: &str| Error::MalformedThresholds {
            thresholds: thresholds.clone(),
            reason: reason.to_string(),
        };
        let k_max = params.max_state();
        if thresholds.len() != params.num_actions() {
            return Err(malformed("expected one threshold per action 0..=M"));
        }
        if thresholds[0] != 0 {
            return Err(malformed("k_0 must be 0"));
        }
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(malformed("thresholds must be nondecreasing"));
        }
        if thresholds.iter().any(|&k| k > k_max) {
            return Err(malformed("threshold exceeds the largest state K"));
        }

        let covered = *thresholds.last().expect("nonempty");
        let mut actions: Vec<usize> = Vec::with_capacity(params.num_states());
        for k in 0..=k_max {
            let m = if k <= covered {
                thresholds.iter().position(|&t| k <= t).expect("k <= k_M")
            } else {
                let prev = actions[k - 1];
                prev.max(k.saturating_sub(params.buffer()))
            };
            if !params.is_feasible(k, m) {
                return Err(Error::InfeasibleThresholds {
                    thresholds,
                    state: k,
                    action: m,
                });
            }
            actions.push(m);
        }

        let randomized = match randomized {
            None => None,
            Some(r) => {
                if !(0.0..=1.0).contains(&r.weight) {
                    return Err(malformed("randomization weight must lie in [0, 1]"));
                }
                if r.index >= params.max_transmit() {
                    return Err(malformed("randomized index must be below M"));
                }
                let state = thresholds[r.index];
                if r.index > 0 && thresholds[r.index - 1] == state {
                    return Err(malformed("randomized threshold has an empty interval"));
                }
                if !params.is_feasible(state, r.index + 1) {
                    return Err(Error::InfeasibleThresholds {
                        thresholds,
                        state,
                        action: r.index + 1,
                    });
                }
                if r.weight == 0.0 {
                    actions[state] = r.index + 1;
                    None
                } else if r.weight == 1.0 {
                    None
                } else {
                    Some(r)
                }
            }
        };

        let tp = Self::from_monotone_actions(&actions, params.max_transmit(), randomized)
            .ok_or_else(|| malformed("completed policy idles in a nonempty state"))?;
        Ok(tp)
    }

    pub fn deterministic(params: &ModelParams, thresholds: Vec<usize>) -> Result<Self> {
        Self::new(params, thresholds, None)
    }

    /// `k_m = min(m, A)` completed to full coverage: every arrival is sent at
    /// once, so the buffer is always empty after transmission.
    pub fn immediate(params: &ModelParams) -> Self {
        let thresholds = (0..=params.max_transmit())
            .map(|m| m.min(params.packet_size()))
            .collect();
        Self::deterministic(params, thresholds).expect("immediate thresholds are always legal")
    }

    /// Threshold form of a deterministic action map, if it has one.
    pub fn from_actions(params: &ModelParams, actions: &[usize]) -> Option<Self> {
        if actions.len() != params.num_states()
            || actions
                .iter()
                .enumerate()
                .any(|(k, &m)| !params.is_feasible(k, m))
        {
            return None;
        }
        Self::from_monotone_actions(actions, params.max_transmit(), None)
    }

    /// `k_m = max{k : action(k) ≤ m}`, provided the map is nondecreasing and
    /// only state 0 idles.
    pub(crate) fn from_monotone_actions(
        actions: &[usize],
        max_transmit: usize,
        randomized: Option<RandomizedThreshold>,
    ) -> Option<Self> {
        if actions.first() != Some(&0) || actions.windows(2).any(|w| w[0] > w[1]) {
            return None;
        }
        if actions.iter().skip(1).any(|&m| m == 0) {
            return None;
        }
        let thresholds = (0..=max_transmit)
            .map(|m| {
                actions
                    .iter()
                    .rposition(|&a| a <= m)
                    .expect("state 0 idles")
            })
            .collect();
        Some(Self {
            thresholds,
            randomized,
        })
    }

    pub fn thresholds(&self) -> &[usize] {
        &self.thresholds
    }

    pub fn randomized(&self) -> Option<RandomizedThreshold> {
        self.randomized
    }

    pub fn is_deterministic(&self) -> bool {
        self.randomized.is_none()
    }

    pub fn max_state(&self) -> usize {
        *self.thresholds.last().expect("nonempty")
    }

    /// Deterministic part of the action map; the randomized state reports its
    /// lower action.
    pub fn action_map(&self) -> Vec<usize> {
        (0..=self.max_state())
            .map(|k| {
                self.thresholds
                    .iter()
                    .position(|&t| k <= t)
                    .expect("k <= K")
            })
            .collect()
    }

    /// Copy with the deterministic part replaced, used for neighbor moves.
    pub(crate) fn with_thresholds(&self, thresholds: Vec<usize>) -> Self {
        Self {
            thresholds,
            randomized: None,
        }
    }
}

/// Expands a threshold policy into its probability matrix.
pub fn threshold_to_policy(params: &ModelParams, tp: &ThresholdPolicy) -> Result<Policy> {
    if tp.thresholds.len() != params.num_actions() || tp.max_state() != params.max_state() {
        return Err(Error::MalformedThresholds {
            thresholds: tp.thresholds.clone(),
            reason: "threshold vector does not match the model".into(),
        });
    }
    let actions = tp.action_map();
    let mut rows = vec![vec![0.0; params.num_actions()]; params.num_states()];
    for (k, &m) in actions.iter().enumerate() {
        if !params.is_feasible(k, m) {
            return Err(Error::InfeasibleThresholds {
                thresholds: tp.thresholds.clone(),
                state: k,
                action: m,
            });
        }
        rows[k][m] = 1.0;
    }
    if let Some(r) = tp.randomized {
        let state = tp.thresholds[r.index];
        rows[state][r.index] = r.weight;
        rows[state][r.index + 1] = 1.0 - r.weight;
    }
    Policy::new(params, rows)
}

impl ThresholdPolicy {
    pub fn to_policy(&self, params: &ModelParams) -> Result<Policy> {
        threshold_to_policy(params, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> ModelParams {
        ModelParams::new(0.4, 2, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).unwrap()
    }

    #[test]
    fn immediate_start_is_completed() {
        let p = reference();
        let tp = ThresholdPolicy::immediate(&p);
        assert_eq!(tp.thresholds(), &[0, 1, 7, 7]);
        let f = tp.to_policy(&p).unwrap();
        assert_eq!(f.actions().unwrap(), vec![0, 1, 2, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn expands_capped_thresholds() {
        let p = reference();
        let f = ThresholdPolicy::deterministic(&p, vec![0, 1, 7, 7])
            .unwrap()
            .to_policy(&p)
            .unwrap();
        let expected: Vec<usize> = (0..=7).map(|k: usize| k.min(2)).collect();
        assert_eq!(f.actions().unwrap(), expected);

        let f = ThresholdPolicy::deterministic(&p, vec![0, 1, 2, 7])
            .unwrap()
            .to_policy(&p)
            .unwrap();
        assert_eq!(f.actions().unwrap(), vec![0, 1, 2, 3, 3, 3, 3, 3]);
    }

    #[test]
    fn single_active_threshold() {
        // one bit per slot everywhere is infeasible at K when A = 2 ...
        let p = reference();
        assert!(matches!(
            ThresholdPolicy::deterministic(&p, vec![0, 7, 7, 7]),
            Err(Error::InfeasibleThresholds {
                state: 7,
                action: 1,
                ..
            })
        ));
        // ... and feasible when A = 1.
        let p1 = ModelParams::new(0.4, 1, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).unwrap();
        let f = ThresholdPolicy::deterministic(&p1, vec![0, 6, 6, 6])
            .unwrap()
            .to_policy(&p1)
            .unwrap();
        assert_eq!(f.actions().unwrap(), vec![0, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn randomized_threshold_has_two_fractional_entries() {
        let p = reference();
        let tp = ThresholdPolicy::new(
            &p,
            vec![0, 3, 7, 7],
            Some(RandomizedThreshold {
                index: 1,
                weight: 0.5,
            }),
        )
        .unwrap();
        let f = tp.to_policy(&p).unwrap();
        let fractional: Vec<(usize, usize, f64)> = (0..8)
            .flat_map(|k| (0..4).map(move |m| (k, m)))
            .map(|(k, m)| (k, m, f.prob(k, m)))
            .filter(|&(_, _, v)| v > 0.0 && v < 1.0)
            .collect();
        assert_eq!(fractional, vec![(3, 1, 0.5), (3, 2, 0.5)]);
    }

    #[test]
    fn degenerate_weights_collapse_to_deterministic() {
        let p = reference();
        let r = |weight| Some(RandomizedThreshold { index: 1, weight });
        let one = ThresholdPolicy::new(&p, vec![0, 3, 7, 7], r(1.0)).unwrap();
        assert_eq!(
            one,
            ThresholdPolicy::deterministic(&p, vec![0, 3, 7, 7]).unwrap()
        );
        let zero = ThresholdPolicy::new(&p, vec![0, 3, 7, 7], r(0.0)).unwrap();
        assert_eq!(
            zero,
            ThresholdPolicy::deterministic(&p, vec![0, 2, 7, 7]).unwrap()
        );
    }

    #[test]
    fn malformed_vectors() {
        let p = reference();
        for bad in [
            vec![1, 1, 7, 7],
            vec![0, 3, 2, 7],
            vec![0, 1, 8, 8],
            vec![0, 1, 7],
        ] {
            assert!(matches!(
                ThresholdPolicy::deterministic(&p, bad),
                Err(Error::MalformedThresholds { .. })
            ));
        }
        let r = Some(RandomizedThreshold {
            index: 3,
            weight: 0.5,
        });
        assert!(ThresholdPolicy::new(&p, vec![0, 1, 7, 7], r).is_err());
        // empty interval at the randomized index
        let r = Some(RandomizedThreshold {
            index: 2,
            weight: 0.5,
        });
        assert!(ThresholdPolicy::new(&p, vec![0, 7, 7, 7], r).is_err());
    }

    #[test]
    fn from_actions_requires_monotone_busy_map() {
        let p = reference();
        let tp = ThresholdPolicy::from_actions(&p, &[0, 1, 1, 1, 1, 1, 1, 2]).unwrap();
        assert_eq!(tp.thresholds(), &[0, 6, 7, 7]);
        assert!(ThresholdPolicy::from_actions(&p, &[0, 1, 0, 1, 1, 1, 1, 2]).is_none());
        assert!(ThresholdPolicy::from_actions(&p, &[0, 0, 2, 2, 2, 2, 2, 2]).is_none());
        assert!(ThresholdPolicy::from_actions(&p, &[0, 1, 1, 1, 1, 1, 1, 1]).is_none());
    }
}
