//! Dense two-phase simplex: most-negative-reduced-cost pricing, with Bland's
//! rule taking over on degenerate stalls so it cannot cycle.
//!
//! Problems are small (tens of columns), so the full tableau is kept and the
//! final basis is re-factored to certify the answer independently of the
//! pivoting history.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, dot_compensated, DenseMatrix, Lu};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// `min cᵀx` subject to `rows[i]·x (relation) rhs[i]` and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub relations: Vec<Relation>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    pub fn add_constraint(&mut self, row: Vec<f64>, relation: Relation, rhs: f64) {
        assert_eq!(row.len(), self.num_vars(), "constraint width");
        self.rows.push(row);
        self.relations.push(relation);
        self.rhs.push(rhs);
    }

    /// Largest violation of any constraint at `x`, including `x ≥ 0`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0f64, |w, &v| w.max(-v));
        for ((row, rel), &b) in self.rows.iter().zip(&self.relations).zip(&self.rhs) {
            let lhs = dot(row, x);
            let v = match rel {
                Relation::Le => lhs - b,
                Relation::Ge => b - lhs,
                Relation::Eq => (lhs - b).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub max_pivots: usize,
    /// Phase-one objective above this means no feasible point.
    pub feasibility_tol: f64,
    /// Reduced cost below `-optimality_tol` fails the certificate.
    pub optimality_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_pivots: 1_000_000,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
        }
    }
}

/// Evidence recomputed from the final basis alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    /// Smallest reduced cost over all structural and slack columns.
    pub min_reduced_cost: f64,
    /// Smallest reduced cost divided by `max(1, |c_j| + sum_i |y_i a_ij|)`, the
    /// magnitude of the terms it is computed from. Optimality is judged on
    /// this, since large duals make the absolute value uncertain.
    pub min_scaled_reduced_cost: f64,
    /// Largest constraint violation of the returned point.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
    pub certificate: Option<Certificate>,
}

const ENTER_TOL: f64 = 1e-11;
const RATIO_TOL: f64 = 1e-11;
const DRIVE_OUT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before pricing falls back to
/// Bland's rule.
const BLAND_AFTER: usize = 50;
/// Steps at or below this do not move the objective.
const DEGENERATE_STEP: f64 = 1e-12;
/// Pivot entries must be at least this fraction of the largest entry in
/// their column.
const RELATIVE_PIVOT_TOL: f64 = 1e-9;
/// Primal infeasibility the ratio test may create to pick a larger pivot.
const HARRIS_TOL: f64 = 1e-12;
const REINVERT_EVERY: usize = 64;
const LU_PIVOT_TOL: f64 = 1e-14;

struct Tableau {
    /// Constraint rows, last column is the right-hand side.
    t: DenseMatrix,
    basis: Vec<usize>,
    /// Original constraint index of each tableau row.
    row_ids: Vec<usize>,
    pivots: usize,
    max_pivots: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.t.cols() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) -> Result<()> {
        if self.pivots >= self.max_pivots {
            return Err(Error::IterationLimit(self.max_pivots));
        }
        self.pivots += 1;
        let cols = self.t.cols();
        let p = self.t[(row, col)];
        for v in self.t.row_mut(row) {
            *v /= p;
        }
        let pivot_row = self.t.row(row).to_vec();
        for i in 0..self.t.rows() {
            if i == row {
                continue;
            }
            let factor = self.t[(i, col)];
            if factor != 0.0 {
                let r = self.t.row_mut(i);
                for j in 0..cols {
                    r[j] -= factor * pivot_row[j];
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
        // the two-pass ratio test lets basics dip to -HARRIS_TOL; put them back
        let rhs = cols - 1;
        for i in 0..self.t.rows() {
            if self.t[(i, rhs)] < 0.0 && self.t[(i, rhs)] >= -HARRIS_TOL {
                self.t[(i, rhs)] = 0.0;
            }
        }
        Ok(())
    }

    /// Reduced costs `c_j − c_Bᵀ B⁻¹ a_j` for the first `width` columns,
    /// summed in extended precision: entries of `B⁻¹ a_j` can be large on
    /// badly scaled bases and cancel in plain arithmetic.
    fn reduced_costs(&self, cost: &[f64], width: usize) -> Vec<f64> {
        let mut weights: Vec<f64> = self.basis.iter().map(|&b| -cost[b]).collect();
        weights.push(1.0);
        (0..width)
            .map(|j| {
                let mut col: Vec<f64> = (0..self.t.rows()).map(|i| self.t[(i, j)]).collect();
                col.push(cost[j]);
                dot_compensated(&weights, &col)
            })
            .collect()
    }

    /// Pivots over columns `< allowed` until optimal; returns false when
    /// unbounded. Prices by most negative reduced cost, switching to Bland's
    /// rule after `BLAND_AFTER` degenerate pivots in a row so that cycling is
    /// impossible. Bland's rule alone is correct but needs exponentially many
    /// pivots on longer buffers.
    fn optimize(&mut self, original: &DenseMatrix, cost: &[f64], allowed: usize) -> Result<bool> {
        let mut degenerate_run = 0;
        let mut since_reinversion = 0;
        loop {
            if since_reinversion >= REINVERT_EVERY {
                // rebuild from the original columns before rounding piles up
                if let Ok((lu, basis_matrix)) = self.factor_basis(original) {
                    self.reinvert(original, &lu, &basis_matrix);
                }
                since_reinversion = 0;
            }
            let r = self.reduced_costs(cost, allowed);
            let bland = degenerate_run >= BLAND_AFTER;
            let enter = if bland {
                (0..allowed).find(|&j| r[j] < -ENTER_TOL)
            } else {
                (0..allowed)
                    .filter(|&j| r[j] < -ENTER_TOL)
                    .min_by(|&a, &b| r[a].total_cmp(&r[b]).then(a.cmp(&b)))
            };
            let Some(enter) = enter else {
                return Ok(true);
            };
            let Some((row, step)) = self.ratio_test(enter, bland) else {
                return Ok(false);
            };
            if step <= DEGENERATE_STEP {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, enter)?;
            since_reinversion += 1;
        }
    }

    /// Leaving row for `enter` by a two-pass (Harris) ratio test: the first
    /// pass finds the longest step that keeps every basic variable above
    /// `-HARRIS_TOL`, the second takes the largest pivot among rows blocking
    /// within that step. Under Bland's rule ties go to the smallest basic
    /// index instead. Entries tiny relative to the column are never pivots.
    fn ratio_test(&self, enter: usize, bland: bool) -> Option<(usize, f64)> {
        let rhs = self.width();
        let rows = self.t.rows();
        let col_max = (0..rows).fold(0.0f64, |m, i| m.max(self.t[(i, enter)].abs()));
        let pivot_tol = RATIO_TOL.max(RELATIVE_PIVOT_TOL * col_max);
        let candidates: Vec<usize> = (0..rows)
            .filter(|&i| self.t[(i, enter)] > pivot_tol)
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let value = |i: usize| self.t[(i, rhs)].max(0.0);
        let bound = candidates
            .iter()
            .map(|&i| (value(i) + HARRIS_TOL) / self.t[(i, enter)])
            .fold(f64::INFINITY, f64::min);
        let blocking = candidates
            .into_iter()
            .filter(|&i| value(i) / self.t[(i, enter)] <= bound);
        let row = if bland {
            let min_ratio = blocking
                .clone()
                .map(|i| value(i) / self.t[(i, enter)])
                .fold(f64::INFINITY, f64::min);
            blocking
                .filter(|&i| value(i) / self.t[(i, enter)] <= min_ratio)
                .min_by_key(|&i| self.basis[i])
        } else {
            blocking.max_by(|&a, &b| {
                self.t[(a, enter)]
                    .total_cmp(&self.t[(b, enter)])
                    .then(self.basis[b].cmp(&self.basis[a]))
            })
        }?;
        Some((row, value(row) / self.t[(row, enter)]))
    }

    fn factor_basis(&self, original: &DenseMatrix) -> Result<(Lu, DenseMatrix)> {
        let size = self.basis.len();
        let mut b = DenseMatrix::zeros(size, size);
        for (r, &orig_row) in self.row_ids.iter().enumerate() {
            for (c, &col) in self.basis.iter().enumerate() {
                b[(r, c)] = original[(orig_row, col)];
            }
        }
        let lu = Lu::factor(&b, LU_PIVOT_TOL).map_err(|e| Error::NotOptimal {
            reason: "final basis is singular",
            value: e.pivot,
        })?;
        Ok((lu, b))
    }

    /// Replaces every row by `B⁻¹` applied to the original constraints.
    fn reinvert(&mut self, original: &DenseMatrix, lu: &Lu, basis_matrix: &DenseMatrix) {
        for j in 0..self.t.cols() {
            let col: Vec<f64> = self.row_ids.iter().map(|&r| original[(r, j)]).collect();
            for (i, v) in lu.solve_refined(basis_matrix, &col).into_iter().enumerate() {
                self.t[(i, j)] = v;
            }
        }
    }

    fn remove_row(&mut self, row: usize) {
        let keep: Vec<Vec<f64>> = (0..self.t.rows())
            .filter(|&i| i != row)
            .map(|i| self.t.row(i).to_vec())
            .collect();
        self.t = if keep.is_empty() {
            DenseMatrix::zeros(0, self.t.cols())
        } else {
            DenseMatrix::from_rows(&keep)
        };
        self.basis.remove(row);
        self.row_ids.remove(row);
    }
}

/// Solves `lp` and certifies any optimum it reports.
pub fn solve(lp: &LinearProgram, options: &SimplexOptions) -> Result<SimplexSolution> {
    let n = lp.num_vars();
    let m = lp.num_constraints();

    // Standard form with nonnegative right-hand sides.
    let mut rows: Vec<Vec<f64>> = lp.rows.clone();
    let mut rhs = lp.rhs.clone();
    let mut rel = lp.relations.clone();
    for i in 0..m {
        if rhs[i] < 0.0 {
            rows[i].iter_mut().for_each(|v| *v = -*v);
            rhs[i] = -rhs[i];
            rel[i] = match rel[i] {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }
    let n_slack = rel.iter().filter(|r| **r != Relation::Eq).count();
    let n_art = rel.iter().filter(|r| **r != Relation::Le).count();
    let structural = n + n_slack;
    let total = structural + n_art;

    let mut t = DenseMatrix::zeros(m, total + 1);
    let mut basis = vec![0; m];
    let (mut s, mut a) = (n, structural);
    for i in 0..m {
        t.row_mut(i)[..n].copy_from_slice(&rows[i]);
        t[(i, total)] = rhs[i];
        match rel[i] {
            Relation::Le => {
                t[(i, s)] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                t[(i, s)] = -1.0;
                s += 1;
                t[(i, a)] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Relation::Eq => {
                t[(i, a)] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    // Columns of the standard-form matrix before any pivoting, used by the
    // certificate.
    let original = t.clone();
    let mut tab = Tableau {
        t,
        basis,
        row_ids: (0..m).collect(),
        pivots: 0,
        max_pivots: options.max_pivots,
    };

    if n_art > 0 {
        let mut phase_one = vec![0.0; total];
        phase_one[structural..].iter_mut().for_each(|v| *v = 1.0);
        tab.optimize(&original, &phase_one, total)?;
        let infeasibility: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= structural)
            .map(|(i, _)| tab.t[(i, total)])
            .sum();
        if infeasibility > options.feasibility_tol {
            return Ok(SimplexSolution {
                status: LpStatus::Infeasible,
                x: vec![0.0; n],
                objective: f64::NAN,
                pivots: tab.pivots,
                certificate: None,
            });
        }
        // Drive remaining artificials out of the basis, dropping rows that
        // turn out to be linear combinations of the others.
        let mut i = 0;
        while i < tab.basis.len() {
            if tab.basis[i] >= structural {
                let col = (0..structural)
                    .filter(|&j| tab.t[(i, j)].abs() > DRIVE_OUT_TOL)
                    .max_by(|&x, &y| tab.t[(i, x)].abs().total_cmp(&tab.t[(i, y)].abs()));
                match col {
                    Some(j) => {
                        tab.pivot(i, j)?;
                        i += 1;
                    }
                    None => tab.remove_row(i),
                }
            } else {
                i += 1;
            }
        }
    }

    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(&lp.objective);
    let mut attempt = 0;
    loop {
        if !tab.optimize(&original, &cost, structural)? {
            return Ok(SimplexSolution {
                status: LpStatus::Unbounded,
                x: vec![0.0; n],
                objective: f64::NEG_INFINITY,
                pivots: tab.pivots,
                certificate: None,
            });
        }
        let (lu, basis_matrix, x, certificate) = certify(lp, &original, &tab, &cost, structural)?;
        let optimal = certificate.min_scaled_reduced_cost >= -options.optimality_tol;
        let feasible = certificate.max_residual <= options.feasibility_tol;
        if optimal && feasible {
            return Ok(SimplexSolution {
                status: LpStatus::Optimal,
                objective: dot(&lp.objective, &x),
                x,
                pivots: tab.pivots,
                certificate: Some(certificate),
            });
        }
        if attempt == MAX_REINVERSIONS {
            return Err(if optimal {
                Error::NotOptimal {
                    reason: "reported optimum violates a constraint",
                    value: certificate.max_residual,
                }
            } else {
                Error::NotOptimal {
                    reason: "negative reduced cost at reported optimum",
                    value: certificate.min_scaled_reduced_cost,
                }
            });
        }
        // Rounding has drifted the tableau away from the basis it claims;
        // rebuild it from the original columns and keep pivoting.
        attempt += 1;
        tab.reinvert(&original, &lu, &basis_matrix);
    }
}

/// Number of times a drifted tableau is rebuilt before giving up.
const MAX_REINVERSIONS: usize = 3;

/// Recomputes the basic solution, duals and reduced costs from the original
/// columns of the current basis.
fn certify(
    lp: &LinearProgram,
    original: &DenseMatrix,
    tab: &Tableau,
    cost: &[f64],
    structural: usize,
) -> Result<(Lu, DenseMatrix, Vec<f64>, Certificate)> {
    let rhs_col = original.cols() - 1;
    let (lu, b) = tab.factor_basis(original)?;
    let b_rhs: Vec<f64> = tab
        .row_ids
        .iter()
        .map(|&r| original[(r, rhs_col)])
        .collect();
    let x_b = lu.solve_refined(&b, &b_rhs);
    let mut x = vec![0.0; lp.num_vars()];
    for (c, &col) in tab.basis.iter().enumerate() {
        if col < x.len() {
            x[col] = x_b[c];
        }
    }
    let c_b: Vec<f64> = tab.basis.iter().map(|&col| cost[col]).collect();
    let y = lu.solve_transpose_refined(&b, &c_b);
    let (mut min_reduced_cost, mut min_scaled_reduced_cost) = (f64::INFINITY, f64::INFINITY);
    for j in 0..structural {
        let mut col: Vec<f64> = tab.row_ids.iter().map(|&r| original[(r, j)]).collect();
        let magnitude = col
            .iter()
            .zip(&y)
            .fold(cost[j].abs(), |acc, (a, yi)| acc + (a * yi).abs());
        let mut ys = y.clone();
        col.push(cost[j]);
        ys.push(-1.0);
        let rc = -dot_compensated(&col, &ys);
        min_reduced_cost = min_reduced_cost.min(rc);
        min_scaled_reduced_cost = min_scaled_reduced_cost.min(rc / magnitude.max(1.0));
    }
    let certificate = Certificate {
        min_reduced_cost,
        min_scaled_reduced_cost,
        max_residual: lp.max_violation(&x),
    };
    Ok((lu, b, x, certificate))
}
