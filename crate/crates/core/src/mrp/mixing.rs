//! Convex mixing of two policies that differ in a single state.
//!
//! If `F` and `F'` differ only in row `k`, then `H_{F'} − H_F` is nonzero only
//! in column `k` (call it `δ`) and `p_{F'} − p_F` only in entry `k` (call it
//! `ζ`). With `h_k` the `k`-th row of `H_F⁻¹` and `β = h_kᵀδ`, the mixture
//! `(1−ε)F + εF'` has reward pair `(1−ε')·(P_F, D_F) + ε'·(P_{F'}, D_{F'})`
//! where `ε' = ε(1+β)/(1+εβ)`. The mixed points therefore trace the segment
//! between the two endpoints, and its slope has a closed form in `H_F⁻¹`.

use super::{analyze, DelayPowerPoint, PolicyAnalysis};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::model::{ModelParams, Policy};

/// `(1 − ε)·F + ε·F2`. With `require_one_row` set, the two policies must
/// differ in exactly one row.
pub fn mix_policies(
    f: &Policy,
    f2: &Policy,
    epsilon: f64,
    require_one_row: bool,
) -> Result<Policy> {
    if f.num_states() != f2.num_states() || f.num_actions() != f2.num_actions() {
        return Err(Error::PolicyShape {
            rows: f2.num_states(),
            cols: f2.num_actions(),
            expected_rows: f.num_states(),
            expected_cols: f.num_actions(),
        });
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Format(format!(
            "mixing weight {epsilon} is outside [0, 1]"
        )));
    }
    if require_one_row {
        let n = f.differing_rows(f2).len();
        if n != 1 {
            return Err(Error::RowDiffCountMismatch(n));
        }
    }
    let mut m = f.matrix().clone();
    for k in 0..f.num_states() {
        for (dst, (&a, &b)) in m.row_mut(k).iter_mut().zip(f.row(k).iter().zip(f2.row(k))) {
            *dst = (1.0 - epsilon) * a + epsilon * b;
        }
    }
    Ok(Policy::from_matrix_unchecked(m))
}

/// Closed-form description of the segment traced by mixing two one-row
/// neighbors.
#[derive(Debug, Clone)]
pub struct MixingAnalysis {
    /// The row in which the policies differ.
    pub row: usize,
    /// Column `row` of `H_{F2} − H_F`.
    pub delta: Vec<f64>,
    /// `p_{F2}[row] − p_F[row]`.
    pub zeta: f64,
    /// Row `row` of `H_F⁻¹`.
    pub h_row: Vec<f64>,
    /// `h_rowᵀ δ`.
    pub beta: f64,
    pub start: DelayPowerPoint,
    pub end: DelayPowerPoint,
}

impl MixingAnalysis {
    /// Segment position `ε'` reached by the policy mixture with weight `ε`.
    pub fn epsilon_prime(&self, epsilon: f64) -> f64 {
        (epsilon + epsilon * self.beta) / (1.0 + epsilon * self.beta)
    }

    /// Reward pair of the mixture predicted without solving its chain.
    pub fn predicted_point(&self, epsilon: f64) -> DelayPowerPoint {
        let e = self.epsilon_prime(epsilon);
        DelayPowerPoint {
            power: (1.0 - e) * self.start.power + e * self.end.power,
            delay: (1.0 - e) * self.start.delay + e * self.end.delay,
        }
    }
}

fn single_differing_row(f: &Policy, f2: &Policy) -> Result<usize> {
    let rows = f.differing_rows(f2);
    match rows.as_slice() {
        [k] => Ok(*k),
        _ => Err(Error::RowDiffCountMismatch(rows.len())),
    }
}

fn delta_column(base: &PolicyAnalysis, other: &PolicyAnalysis, k: usize) -> Vec<f64> {
    let h = base.system();
    let h2 = other.system();
    (0..h.rows()).map(|r| h2[(r, k)] - h[(r, k)]).collect()
}

pub fn mixing_analysis(params: &ModelParams, f: &Policy, f2: &Policy) -> Result<MixingAnalysis> {
    let k = single_differing_row(f, f2)?;
    let base = analyze(params, f)?;
    let other = analyze(params, f2)?;
    let delta = delta_column(&base, &other, k);
    let zeta = other.state_power[k] - base.state_power[k];
    let h_row = base.system_inverse().row(k).to_vec();
    let beta = dot(&h_row, &delta);
    Ok(MixingAnalysis {
        row: k,
        delta,
        zeta,
        h_row,
        beta,
        start: base.point,
        end: other.point,
    })
}

/// Slope `dD/dP` of the segment between two one-row neighbors, from the
/// closed form and from the endpoint difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSlope {
    /// `dᵀH⁻¹δ / (αA (p_Fᵀ H⁻¹δ − ζ))`.
    pub closed_form: f64,
    /// `(D_{F2} − D_F) / (P_{F2} − P_F)`.
    pub finite_difference: f64,
}

pub fn segment_slope(params: &ModelParams, f: &Policy, f2: &Policy) -> Result<SegmentSlope> {
    let k = single_differing_row(f, f2)?;
    let base = analyze(params, f)?;
    let other = analyze(params, f2)?;
    let end = other.point;
    let dp = end.power - base.point.power;
    if dp.abs() < 1e-12 {
        return Err(Error::DegenerateSegment(dp.abs()));
    }
    let finite_difference = (end.delay - base.point.delay) / dp;

    let delta = delta_column(&base, &other, k);
    let zeta = f2.state_power(params)[k] - base.state_power[k];
    let h_inv_delta = base.solve(&delta);
    let states: Vec<f64> = (0..params.num_states()).map(|s| s as f64).collect();
    let closed_form = dot(&states, &h_inv_delta)
        / (params.arrival_rate() * (dot(&base.state_power, &h_inv_delta) - zeta));
    Ok(SegmentSlope {
        closed_form,
        finite_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ThresholdPolicy;
    use crate::mrp::evaluate;

    fn reference() -> ModelParams {
        ModelParams::new(0.4, 2, 3, 5, vec![0.0, 1.0, 4.0, 9.0]).unwrap()
    }

    fn pair(p: &ModelParams) -> (Policy, Policy) {
        let a = ThresholdPolicy::deterministic(p, vec![0, 2, 7, 7])
            .unwrap()
            .to_policy(p)
            .unwrap();
        let b = ThresholdPolicy::deterministic(p, vec![0, 3, 7, 7])
            .unwrap()
            .to_policy(p)
            .unwrap();
        (a, b)
    }

    #[test]
    fn mixing_endpoints_and_midpoint() {
        let p = reference();
        let (a, b) = pair(&p);
        assert_eq!(mix_policies(&a, &b, 0.0, true).unwrap(), a);
        assert_eq!(mix_policies(&a, &b, 1.0, true).unwrap(), b);
        let mid = mix_policies(&a, &b, 0.5, true).unwrap();
        assert_eq!(mid.row(3), &[0.0, 0.5, 0.5, 0.0]);
        for k in (0..8).filter(|&k| k != 3) {
            assert_eq!(mid.row(k), a.row(k));
        }
    }

    #[test]
    fn one_row_flag_is_enforced() {
        let p = reference();
        let (a, _) = pair(&p);
        let far = Policy::immediate(&p);
        assert!(matches!(
            mix_policies(&a, &far, 0.5, true),
            Err(Error::RowDiffCountMismatch(_))
        ));
        assert!(mix_policies(&a, &far, 0.5, false).is_ok());
        assert!(matches!(
            mixing_analysis(&p, &a, &a),
            Err(Error::RowDiffCountMismatch(0))
        ));
        assert!(mix_policies(&a, &far, 1.5, false).is_err());
    }

    #[test]
    fn prediction_matches_direct_evaluation() {
        let p = reference();
        let (a, b) = pair(&p);
        let mix = mixing_analysis(&p, &a, &b).unwrap();
        assert_eq!(mix.row, 3);
        assert_eq!(mix.epsilon_prime(0.0), 0.0);
        assert_eq!(mix.epsilon_prime(1.0), 1.0);
        for i in 1..10 {
            let eps = i as f64 / 10.0;
            let direct = evaluate(&p, &mix_policies(&a, &b, eps, true).unwrap()).unwrap();
            assert!(direct.max_abs_diff(&mix.predicted_point(eps)) < 1e-12);
        }
    }

    #[test]
    fn slope_forms_agree_and_are_symmetric() {
        let p = reference();
        let (a, b) = pair(&p);
        let s = segment_slope(&p, &a, &b).unwrap();
        assert!((s.closed_form - s.finite_difference).abs() < 1e-12);
        let r = segment_slope(&p, &b, &a).unwrap();
        assert!((r.closed_form - s.closed_form).abs() < 1e-12);
        assert!(s.closed_form < 0.0);
    }

    #[test]
    fn zero_length_segment_is_degenerate() {
        let p = reference();
        let (a, _) = pair(&p);
        // differs only in unreachable state 7
        let mut rows = a.to_rows();
        rows[7] = vec![0.0, 0.0, 0.0, 1.0];
        let b = Policy::new(&p, rows).unwrap();
        assert!(matches!(
            segment_slope(&p, &a, &b),
            Err(Error::DegenerateSegment(_))
        ));
    }
}
