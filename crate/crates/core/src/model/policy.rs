use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use super::{ModelParams, PROB_TOL};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Row-stochastic `(K+1)×(M+1)` matrix: entry `(k, m)` is the probability of
/// transmitting `m` bits when the total backlog is `k`.
///
/// Every constructor checks the feasibility mask, so a `Policy` never
/// underflows or overflows the buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    probs: DenseMatrix,
}

impl Policy {
    /// Validates `rows` against `params`. Entries within [`PROB_TOL`] of a
    /// bound are snapped to it and rows whose sum is within tolerance of one
    /// are renormalized; anything else is rejected.
    pub fn new(params: &ModelParams, rows: Vec<Vec<f64>>) -> Result<Self> {
        let expected_rows = params.num_states();
        let expected_cols = params.num_actions();
        if rows.len() != expected_rows || rows.iter().any(|r| r.len() != expected_cols) {
            return Err(Error::PolicyShape {
                rows: rows.len(),
                cols: rows.first().map_or(0, Vec::len),
                expected_rows,
                expected_cols,
            });
        }
        let mut probs = DenseMatrix::from_rows(&rows);
        for k in 0..expected_rows {
            let row = probs.row_mut(k);
            for (m, v) in row.iter_mut().enumerate() {
                if !v.is_finite() {
                    return Err(row_error(k, format!("entry {m} is {v}")));
                }
                if !params.is_feasible(k, m) {
                    if v.abs() > PROB_TOL {
                        return Err(row_error(
                            k,
                            format!("action {m} is infeasible but has probability {v}"),
                        ));
                    }
                    *v = 0.0;
                    continue;
                }
                if *v < -PROB_TOL || *v > 1.0 + PROB_TOL {
                    return Err(row_error(k, format!("entry {m} = {v} is outside [0, 1]")));
                }
                *v = v.clamp(0.0, 1.0);
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(row_error(k, format!("row sums to {sum}")));
            }
            if sum != 1.0 {
                row.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(Self { probs })
    }

    /// Deterministic policy transmitting `actions[k]` bits in state `k`.
    pub fn deterministic(params: &ModelParams, actions: &[usize]) -> Result<Self> {
        if actions.len() != params.num_states() {
            return Err(Error::PolicyShape {
                rows: actions.len(),
                cols: params.num_actions(),
                expected_rows: params.num_states(),
                expected_cols: params.num_actions(),
            });
        }
        let mut rows = vec![vec![0.0; params.num_actions()]; params.num_states()];
        for (k, &m) in actions.iter().enumerate() {
            if !params.is_feasible(k, m) {
                return Err(row_error(k, format!("action {m} is infeasible")));
            }
            rows[k][m] = 1.0;
        }
        Ok(Self {
            probs: DenseMatrix::from_rows(&rows),
        })
    }

    /// Transmits the whole backlog (up to `M` bits) every slot. On its
    /// recurrent states `{0, A}` this empties the buffer, giving zero delay.
    pub fn immediate(params: &ModelParams) -> Self {
        let actions: Vec<usize> = (0..params.num_states())
            .map(|k| k.min(params.max_transmit()))
            .collect();
        Self::deterministic(params, &actions).expect("immediate transmission is always feasible")
    }

    pub(crate) fn from_matrix_unchecked(probs: DenseMatrix) -> Self {
        Self { probs }
    }

    pub fn num_states(&self) -> usize {
        self.probs.rows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.cols()
    }

    pub fn prob(&self, k: usize, m: usize) -> f64 {
        self.probs[(k, m)]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        self.probs.row(k)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.probs
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.probs.to_rows()
    }

    /// The action taken with probability one in state `k`, if any.
    pub fn action(&self, k: usize) -> Option<usize> {
        self.row(k).iter().position(|&v| v == 1.0)
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.num_states()).all(|k| self.action(k).is_some())
    }

    /// Action map of a deterministic policy.
    pub fn actions(&self) -> Option<Vec<usize>> {
        (0..self.num_states()).map(|k| self.action(k)).collect()
    }

    /// Expected power spent in each state, `Σ_m P_m f[k][m]`.
    pub fn state_power(&self, params: &ModelParams) -> Vec<f64> {
        (0..self.num_states())
            .map(|k| {
                self.row(k)
                    .iter()
                    .zip(params.power())
                    .map(|(f, p)| f * p)
                    .sum()
            })
            .collect()
    }

    pub(crate) fn check_shape(&self, params: &ModelParams) -> Result<()> {
        if self.num_states() != params.num_states() || self.num_actions() != params.num_actions() {
            return Err(Error::PolicyShape {
                rows: self.num_states(),
                cols: self.num_actions(),
                expected_rows: params.num_states(),
                expected_cols: params.num_actions(),
            });
        }
        Ok(())
    }

    /// Indices of rows where `self` and `other` differ.
    pub fn differing_rows(&self, other: &Policy) -> Vec<usize> {
        (0..self.num_states())
            .filter(|&k| self.row(k) != other.row(k))
            .collect()
    }

    /// CSV with a `k,m0,..,mM` header and one row per state; probabilities
    /// are written with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k");
        for m in 0..self.num_actions() {
            let _ = write!(s, ",m{m}");
        }
        s.push('\n');
        for k in 0..self.num_states() {
            let _ = write!(s, "{k}");
            for v in self.row(k) {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(params: &ModelParams, text: &str) -> Result<Self> {
        let mut rows = vec![None; params.num_states()];
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('k') || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let bad = |what: &str| Error::Format(format!("policy CSV line {}: {what}", lineno + 1));
            let k: usize = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| bad("bad state index"))?;
            let row: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|_| bad("bad probability")))
                .collect::<Result<_>>()?;
            let slot = rows.get_mut(k).ok_or_else(|| Error::StateOutOfRange {
                state: k,
                max: params.max_state(),
            })?;
            if slot.replace(row).is_some() {
                return Err(bad("duplicate state"));
            }
        }
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(k, r)| {
                r.ok_or_else(|| Error::Format(format!("policy CSV is missing state {k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(params, rows)
    }
}

impl Serialize for Policy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

fn row_error(row: usize, reason: String) -> Error {
    Error::InvalidPolicyRow { row, reason }
}
