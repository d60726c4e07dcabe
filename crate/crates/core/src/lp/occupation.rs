use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::model::{ModelParams, Policy, PROB_TOL};
use crate::mrp::StationaryDistribution;

use super::mps::write_mps;
use super::simplex::{self, Certificate, LinearProgram, LpStatus, Relation, SimplexOptions};

/// Below this arrival probability the balance rows are divided by `α`.
const SCALE_BELOW_ALPHA: f64 = 0.1;

/// Mass below which a state counts as unreachable during recovery.
const REACHABLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LpProblem {
    params: ModelParams,
    budget: f64,
    vars: Vec<(usize, usize)>,
    index: Vec<Vec<Option<usize>>>,
    program: LinearProgram,
    /// Row of the power constraint, absent for an infinite budget.
    power_row: Option<usize>,
    first_balance_row: usize,
    balance_scale: f64,
}

impl LpProblem {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// `(k, m)` of each variable, in column order.
    pub fn variables(&self) -> &[(usize, usize)] {
        &self.vars
    }

    pub fn var_index(&self, k: usize, m: usize) -> Option<usize> {
        self.index.get(k)?.get(m).copied().flatten()
    }

    pub fn program(&self) -> &LinearProgram {
        &self.program
    }

    pub fn power_row(&self) -> Option<usize> {
        self.power_row
    }

    /// Program row holding the balance equation of cut `k` (`1 ≤ k ≤ K`).
    pub fn balance_row(&self, k: usize) -> usize {
        assert!(k >= 1 && k <= self.params.max_state());
        self.first_balance_row + k - 1
    }

    pub fn normalization_row(&self) -> usize {
        self.first_balance_row + self.params.max_state()
    }

    /// Inflow minus outflow across each cut, in unscaled units.
    pub fn balance_residuals(&self, x: &[f64]) -> Vec<f64> {
        (1..=self.params.max_state())
            .map(|k| dot(&self.program.rows[self.balance_row(k)], x) / self.balance_scale)
            .collect()
    }

    pub fn max_balance_residual(&self, x: &[f64]) -> f64 {
        self.balance_residuals(x)
            .into_iter()
            .fold(0.0, |w, r| w.max(r.abs()))
    }

    pub fn power_of(&self, x: &[f64]) -> f64 {
        let p = self.params.power();
        self.vars.iter().zip(x).map(|(&(_, m), v)| p[m] * v).sum()
    }

    pub fn delay_of(&self, x: &[f64]) -> f64 {
        let rate = self.params.arrival_rate();
        self.vars
            .iter()
            .zip(x)
            .map(|(&(k, _), v)| k as f64 * v)
            .sum::<f64>()
            / rate
            - 1.0
    }

    pub fn to_mps(&self) -> String {
        let mut rows = Vec::with_capacity(self.program.num_constraints());
        if self.power_row.is_some() {
            rows.push("POWER".to_string());
        }
        for k in 1..=self.params.max_state() {
            rows.push(format!("BAL{k}"));
        }
        rows.push("NORM".to_string());
        let cols: Vec<String> = self
            .vars
            .iter()
            .enumerate()
            .map(|(j, &(k, m))| {
                let name = format!("X{k}_{m}");
                if name.len() <= 8 {
                    name
                } else {
                    format!("C{j}")
                }
            })
            .collect();
        let mut header = String::new();
        let _ = writeln!(
            header,
            "* minimize average queue length; delay = objective - 1"
        );
        let _ = writeln!(
            header,
            "* {}",
            self.params.to_kv_string().replace('\n', " ")
        );
        if self.balance_scale != 1.0 {
            let _ = writeln!(header, "* balance rows scaled by {:e}", self.balance_scale);
        }
        header + &write_mps(&self.program, "OCCUPY", &rows, &cols)
    }
}

/// Builds the program for budget `p_th`; an infinite budget drops the power
/// row.
pub fn build_lp(params: &ModelParams, p_th: f64) -> Result<LpProblem> {
    if p_th.is_nan() || p_th < 0.0 {
        return Err(Error::InvalidBudget(p_th));
    }
    let k_max = params.max_state();
    let m_max = params.max_transmit();
    let a = params.packet_size();
    let alpha = params.alpha();

    let mut vars = Vec::new();
    let mut index = vec![vec![None; m_max + 1]; k_max + 1];
    for (k, slots) in index.iter_mut().enumerate() {
        for m in params.feasible_range(k) {
            slots[m] = Some(vars.len());
            vars.push((k, m));
        }
    }
    let n = vars.len();
    let rate = params.arrival_rate();
    let objective = vars.iter().map(|&(k, _)| k as f64 / rate).collect();
    let mut program = LinearProgram::new(objective);

    let power_row = if p_th.is_finite() {
        let row = vars.iter().map(|&(_, m)| params.power()[m]).collect();
        program.add_constraint(row, Relation::Le, p_th);
        Some(0)
    } else {
        None
    };

    let balance_scale = if alpha < SCALE_BELOW_ALPHA {
        1.0 / alpha
    } else {
        1.0
    };
    let first_balance_row = program.num_constraints();
    for k in 1..=k_max {
        let mut row = vec![0.0; n];
        let mut add = |l: usize, lo: usize, hi: usize, w: f64| {
            let hi = hi.min(m_max);
            if lo > hi {
                return;
            }
            for j in index[l][lo..=hi].iter().flatten() {
                row[*j] += w * balance_scale;
            }
        };
        // Arrivals lift state l < k to l − m + A ≥ k.
        for l in k.saturating_sub(a)..k {
            add(l, 0, l + a - k, alpha);
        }
        // State r ≥ k drops below k when r − m < k: without an arrival if
        // r − m + A ≥ k, always otherwise.
        for r in k..=(k + m_max - 1).min(k_max) {
            add(r, r - k + 1, r - k + a, -(1.0 - alpha));
            add(r, r - k + a + 1, m_max, -1.0);
        }
        program.add_constraint(row, Relation::Eq, 0.0);
    }
    program.add_constraint(vec![1.0; n], Relation::Eq, 1.0);

    Ok(LpProblem {
        params: params.clone(),
        budget: p_th,
        vars,
        index,
        program,
        power_row,
        first_balance_row,
        balance_scale,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Variable values in [`LpProblem::variables`] order.
    pub x: Vec<f64>,
    /// `(K+1) × (M+1)` occupation measure with zeros outside the mask.
    pub occupation: DenseMatrix,
    pub delay: f64,
    pub power: f64,
    pub pivots: usize,
    pub certificate: Option<Certificate>,
    /// Largest unscaled balance residual.
    pub balance_residual: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    let sol = simplex::solve(&problem.program, &SimplexOptions::default())?;
    let params = &problem.params;
    let mut occupation = DenseMatrix::zeros(params.num_states(), params.num_actions());
    if sol.status != LpStatus::Optimal {
        return Ok(LpSolution {
            status: sol.status,
            x: sol.x,
            occupation,
            delay: f64::NAN,
            power: f64::NAN,
            pivots: sol.pivots,
            certificate: None,
            balance_residual: f64::NAN,
        });
    }
    for (&(k, m), &v) in problem.vars.iter().zip(&sol.x) {
        occupation[(k, m)] = v;
    }
    let mut delay = problem.delay_of(&sol.x);
    if delay < 0.0 && delay > -1e-9 {
        delay = 0.0;
    }
    Ok(LpSolution {
        status: sol.status,
        power: problem.power_of(&sol.x),
        balance_residual: problem.max_balance_residual(&sol.x),
        delay,
        x: sol.x,
        occupation,
        pivots: sol.pivots,
        certificate: sol.certificate,
    })
}

pub fn solve_budget(params: &ModelParams, p_th: f64) -> Result<LpSolution> {
    solve_lp(&build_lp(params, p_th)?)
}

/// `x_{k,m} = π_k f_{k,m}` in the variable order of `problem`.
pub fn occupation_measure(
    problem: &LpProblem,
    policy: &Policy,
    pi: &StationaryDistribution,
) -> Vec<f64> {
    problem
        .vars
        .iter()
        .map(|&(k, m)| pi.prob(k) * policy.prob(k, m))
        .collect()
}

/// Inverts the substitution. States carrying no mass take the smallest
/// feasible action at least as large as any action used one state below.
pub fn recover_policy(params: &ModelParams, sol: &LpSolution) -> Result<Policy> {
    if !sol.is_optimal() {
        return Err(Error::DegenerateSolution {
            state: 0,
            reason: format!("solution status is {}", sol.status),
        });
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(params.num_states());
    for k in 0..params.num_states() {
        let raw = sol.occupation.row(k);
        if let Some(m) = raw.iter().position(|&v| v < -1e-10) {
            return Err(Error::DegenerateSolution {
                state: k,
                reason: format!("x[{k}][{m}] = {:e} is negative", raw[m]),
            });
        }
        let clean: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
        let mass: f64 = clean.iter().sum();
        let mut row = vec![0.0; params.num_actions()];
        if mass > REACHABLE_TOL {
            for (f, x) in row.iter_mut().zip(&clean) {
                *f = x / mass;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::DegenerateSolution {
                    state: k,
                    reason: format!("recovered row sums to {sum}"),
                });
            }
        } else {
            let prev = rows
                .last()
                .and_then(|r| r.iter().rposition(|&v| v > 0.0))
                .unwrap_or(0);
            let feasible = params.feasible_range(k);
            let m = prev.max(*feasible.start()).min(*feasible.end());
            row[m] = 1.0;
        }
        rows.push(row);
    }
    Policy::new(params, rows).map_err(|e| Error::DegenerateSolution {
        state: 0,
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub budget: f64,
    pub result: Result<LpSolution, String>,
}

impl SweepPoint {
    pub fn status(&self) -> String {
        match &self.result {
            Ok(s) => s.status.to_string(),
            Err(e) => format!("error: {e}"),
        }
    }

    pub fn delay(&self) -> Option<f64> {
        match &self.result {
            Ok(s) if s.is_optimal() => Some(s.delay),
            _ => None,
        }
    }

    /// `p_th,delay,status` rows; the delay is empty when no optimum exists.
    pub fn to_csv(points: &[SweepPoint]) -> String {
        let mut s = String::from("p_th,delay,status\n");
        for p in points {
            match p.delay() {
                Some(d) => {
                    let _ = writeln!(s, "{:.17e},{:.17e},{}", p.budget, d, p.status());
                }
                None => {
                    let _ = writeln!(s, "{:.17e},,{}", p.budget, p.status());
                }
            }
        }
        s
    }
}

/// One independent solve per budget, run in parallel; failures are recorded
/// per budget and do not stop the sweep.
pub fn sweep(params: &ModelParams, budgets: &[f64]) -> Vec<SweepPoint> {
    budgets
        .par_iter()
        .map(|&budget| SweepPoint {
            budget,
            result: solve_budget(params, budget).map_err(|e| e.to_string()),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ThresholdPolicy;
    use crate::mrp::analyze;

    fn reference() -> ModelParams {
        ModelParams::new(0.4, 2, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).unwrap()
    }

    #[test]
    fn variable_count_matches_mask() {
        let lp = build_lp(&reference(), 1.0).unwrap();
        assert_eq!(lp.num_vars(), 23);
        assert_eq!(lp.program().num_constraints(), 1 + 7 + 1);
        assert_eq!(lp.var_index(0, 1), None);
        assert_eq!(lp.var_index(7, 1), None);
        assert!(lp.var_index(7, 2).is_some());
    }

    #[test]
    fn last_cut_uses_only_top_rows() {
        let p = reference();
        let lp = build_lp(&p, 1.0).unwrap();
        let row = &lp.program().rows[lp.balance_row(7)];
        for (j, &(k, _)) in lp.variables().iter().enumerate() {
            if row[j] != 0.0 {
                assert!(k >= 5, "variable for state {k} in the last cut");
            }
        }
    }

    #[test]
    fn policy_occupation_satisfies_balance() {
        let p = reference();
        let lp = build_lp(&p, f64::INFINITY).unwrap();
        for t in [vec![0, 1, 7, 7], vec![0, 3, 5, 7], vec![0, 6, 7, 7]] {
            let policy = ThresholdPolicy::deterministic(&p, t)
                .unwrap()
                .to_policy(&p)
                .unwrap();
            let a = analyze(&p, &policy).unwrap();
            let x = occupation_measure(&lp, &policy, &a.stationary);
            assert!(lp.max_balance_residual(&x) <= 1e-12);
            assert!((lp.power_of(&x) - a.point.power).abs() < 1e-12);
            assert!((lp.delay_of(&x) - a.point.delay).abs() < 1e-12);
        }
    }

    #[test]
    fn full_budget_gives_zero_delay() {
        let p = reference();
        for budget in [1.6, f64::INFINITY] {
            let sol = solve_budget(&p, budget).unwrap();
            assert!(sol.is_optimal());
            assert!(sol.delay.abs() <= 1e-9, "{}", sol.delay);
            let policy = recover_policy(&p, &sol).unwrap();
            assert_eq!(policy.row(0)[0], 1.0);
            assert_eq!(policy.row(2)[2], 1.0);
        }
    }

    #[test]
    fn zero_budget_is_infeasible() {
        let sol = solve_budget(&reference(), 0.0).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(matches!(
            build_lp(&reference(), -1.0),
            Err(Error::InvalidBudget(_))
        ));
    }

    #[test]
    fn small_alpha_rows_are_scaled() {
        let p = ModelParams::new(0.05, 1, 2, 3, vec![0.0, 1.0, 3.0]).unwrap();
        let lp = build_lp(&p, 0.06).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert!(sol.is_optimal());
        assert!(sol.balance_residual <= 1e-9);
        assert!(sol.power <= 0.06 + 1e-9);
        assert_eq!(solve_budget(&p, 0.04).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn sweep_delays_do_not_increase() {
        let p = reference();
        let budgets: Vec<f64> = (0..=8).map(|i| 0.8 + 0.1 * i as f64).collect();
        let pts = sweep(&p, &budgets);
        // the cheapest policy needs 2788/3325 > 0.8
        assert_eq!(pts[0].status(), "infeasible");
        let delays: Vec<f64> = pts.iter().filter_map(SweepPoint::delay).collect();
        assert_eq!(delays.len(), 8);
        assert!(delays.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let csv = SweepPoint::to_csv(&pts);
        assert_eq!(csv.lines().count(), 10);
    }
}
