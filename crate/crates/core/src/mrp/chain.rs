use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Lu};
use crate::model::{ModelParams, Policy};

/// Pivots below this magnitude mark the stationary system as singular.
pub const PIVOT_TOL: f64 = 1e-12;

const CLAMP_TOL: f64 = 1e-12;

/// Column-stochastic transition matrix: entry `(j, i)` is the probability of
/// moving from state `i` to state `j`, so each column is the law of the next
/// state given the current one.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    lambda: DenseMatrix,
}

impl TransitionMatrix {
    pub fn num_states(&self) -> usize {
        self.lambda.rows()
    }

    /// Probability of the move `from → to`.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.lambda[(to, from)]
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.lambda
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.num_states())
            .map(|i| self.lambda.column(i).iter().sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        self.lambda.max_abs_diff(&other.lambda)
    }

    /// Next-slot law from the current law.
    pub fn step(&self, law: &[f64]) -> Vec<f64> {
        self.lambda.mul_vec(law)
    }

    /// `to,from_0,..,from_K` rows at full precision.
    pub fn to_csv(&self) -> String {
        let n = self.num_states();
        let mut s = String::from("to");
        for i in 0..n {
            let _ = write!(s, ",from{i}");
        }
        s.push('\n');
        for j in 0..n {
            let _ = write!(s, "{j}");
            for v in self.lambda.row(j) {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s
    }
}

/// Builds the chain by walking the queue dynamics: from state `i`, sending
/// `m` bits leads to `i - m` without an arrival and `i - m + A` with one.
pub fn build_transition_enumerative(
    params: &ModelParams,
    policy: &Policy,
) -> Result<TransitionMatrix> {
    policy.check_shape(params)?;
    let n = params.num_states();
    let a = params.packet_size();
    let alpha = params.alpha();
    let mut lambda = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for (m, &f) in policy.row(i).iter().enumerate() {
            if f > 0.0 {
                let left = i - m;
                lambda[(left, i)] += (1.0 - alpha) * f;
                lambda[(left + a, i)] += alpha * f;
            }
        }
    }
    Ok(TransitionMatrix { lambda })
}

/// Builds the chain from the closed-form case split on `i - j` and `j`.
/// This route is kept independent of [`build_transition_enumerative`] so the
/// two can check each other.
pub fn build_transition_piecewise(
    params: &ModelParams,
    policy: &Policy,
) -> Result<TransitionMatrix> {
    policy.check_shape(params)?;
    let n = params.num_states();
    let k_max = params.max_state() as i64;
    let a = params.packet_size() as i64;
    let m_max = params.max_transmit() as i64;
    let alpha = params.alpha();
    let f = |i: i64, m: i64| policy.prob(i as usize, m as usize);

    let mut lambda = DenseMatrix::zeros(n, n);
    for i in 0..=k_max {
        for j in 0..=k_max {
            let d = i - j;
            let value = if m_max - a < d && d <= m_max {
                (1.0 - alpha) * f(i, d)
            } else if (0..=m_max - a).contains(&d) {
                if j < a {
                    (1.0 - alpha) * f(i, d)
                } else if j <= k_max - a {
                    (1.0 - alpha) * f(i, d) + alpha * f(i, d + a)
                } else {
                    alpha * f(i, d + a)
                }
            } else if -a <= d && d < 0 && j >= a {
                alpha * f(i, d + a)
            } else {
                0.0
            };
            lambda[(j as usize, i as usize)] = value;
        }
    }
    Ok(TransitionMatrix { lambda })
}

/// Long-run state occupancy of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pi: Vec<f64>,
}

impl StationaryDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.pi
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.pi[k]
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// Point mass or any other law given directly; entries must be a
    /// probability vector.
    pub fn from_probs(pi: Vec<f64>) -> Result<Self> {
        let sum: f64 = pi.iter().sum();
        if pi.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Format(format!(
                "not a probability vector (sum {sum})"
            )));
        }
        Ok(Self { pi })
    }

    /// `‖Λπ − π‖∞`.
    pub fn residual(&self, chain: &TransitionMatrix) -> f64 {
        chain
            .step(&self.pi)
            .iter()
            .zip(&self.pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Mean backlog `Σ k π_k`.
    pub fn mean_state(&self) -> f64 {
        self.pi.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,pi\n");
        for (k, p) in self.pi.iter().enumerate() {
            let _ = writeln!(s, "{k},{p:.16e}");
        }
        s
    }
}

/// `H = [1ᵀ; (Λ − I) without its last row]`; `Hπ = e_0` pins the
/// normalization in place of the redundant balance equation.
pub(crate) fn stationary_system(chain: &TransitionMatrix) -> DenseMatrix {
    let n = chain.num_states();
    let mut h = DenseMatrix::zeros(n, n);
    h.row_mut(0).fill(1.0);
    for r in 1..n {
        let j = r - 1;
        for i in 0..n {
            h[(r, i)] = chain.lambda[(j, i)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    h
}

pub(crate) fn factor_system(h: &DenseMatrix) -> Result<Lu> {
    Lu::factor(h, PIVOT_TOL).map_err(|e| Error::SingularChain {
        column: e.column,
        pivot: e.pivot,
    })
}

pub(crate) fn solve_stationary(lu: &Lu) -> Result<StationaryDistribution> {
    let n = lu.dim();
    let mut c = vec![0.0; n];
    c[0] = 1.0;
    let mut pi = lu.solve(&c);
    for (state, p) in pi.iter_mut().enumerate() {
        if *p < -CLAMP_TOL {
            return Err(Error::NegativeStationary { state, value: *p });
        }
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let sum: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= sum);
    Ok(StationaryDistribution { pi })
}

/// Solves `Hπ = e_0` by Gaussian elimination with partial pivoting.
///
/// A pivot below [`PIVOT_TOL`] is reported as [`Error::SingularChain`]: the
/// chain has more than one recurrent class and no unique stationary law.
pub fn stationary_distribution(chain: &TransitionMatrix) -> Result<StationaryDistribution> {
    let h = stationary_system(chain);
    let lu = factor_system(&h)?;
    solve_stationary(&lu)
}
