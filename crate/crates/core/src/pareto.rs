//! The optimal delay-power tradeoff curve.
//!
//! Achievable (power, delay) pairs form a polyhedron whose vertices come from
//! deterministic policies, so its lower-left boundary is piecewise linear.
//! [`threshold_walk`] follows that boundary from the zero-delay vertex by
//! moving one threshold at a time; [`brute_force_frontier`] evaluates every
//! deterministic policy and takes the convex hull, and is the reference the
//! walk is checked against.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::{debug, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, Policy, ThresholdPolicy};
use crate::mrp::{evaluate, DelayPowerPoint, Evaluator};
use crate::policies::{
    enumerate_deterministic, is_threshold, neighbors_increase_threshold, DEFAULT_ENUMERATION_CAP,
};

/// Cross products at or below this are treated as collinear.
pub const CROSS_TOL: f64 = 1e-12;

/// Relative tolerance under which two walk slopes count as tied.
const SLOPE_TIE_TOL: f64 = 1e-9;

/// Minimum power decrease (and maximum delay decrease) accepted as a move.
const MOVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveVertex {
    #[serde(flatten)]
    pub point: DelayPowerPoint,
    pub thresholds: Option<ThresholdPolicy>,
    pub policy: Option<Policy>,
}

impl CurveVertex {
    pub fn bare(point: DelayPowerPoint) -> Self {
        Self {
            point,
            thresholds: None,
            policy: None,
        }
    }
}

/// Piecewise-linear frontier, ordered by decreasing power (increasing delay).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoCurve {
    vertices: Vec<CurveVertex>,
}

/// Whether `a -> b -> c` bends strictly upward (a left turn in the power-delay
/// plane). The cross product must clear both the roundoff it can carry, which
/// scales with the edge lengths, and a relative angle of `CROSS_TOL`. An
/// absolute cutoff would flatten genuine corners between very short edges.
fn turns_left(a: &DelayPowerPoint, b: &DelayPowerPoint, c: &DelayPowerPoint) -> bool {
    let (ux, uy) = (b.power - a.power, b.delay - a.delay);
    let (vx, vy) = (c.power - a.power, c.delay - a.delay);
    let cross = ux * vy - uy * vx;
    let (nu, nv) = (ux.hypot(uy), vx.hypot(vy));
    let scale = [a, b, c]
        .iter()
        .fold(1.0_f64, |s, p| s.max(p.power.abs()).max(p.delay.abs()));
    let roundoff = 8.0 * f64::EPSILON * scale * (nu + nv);
    cross > roundoff.max(CROSS_TOL * nu * nv)
}

impl ParetoCurve {
    /// Builds a curve from vertices in decreasing-power order, dropping any
    /// vertex collinear with its neighbors.
    pub fn from_vertices(vertices: Vec<CurveVertex>) -> Self {
        let mut kept: Vec<CurveVertex> = Vec::with_capacity(vertices.len());
        // Prune in increasing-power order so the test matches the hull scan.
        for v in vertices.into_iter().rev() {
            while kept.len() >= 2
                && !turns_left(
                    &kept[kept.len() - 2].point,
                    &kept[kept.len() - 1].point,
                    &v.point,
                )
            {
                kept.pop();
            }
            kept.push(v);
        }
        kept.reverse();
        Self { vertices: kept }
    }

    pub fn vertices(&self) -> &[CurveVertex] {
        &self.vertices
    }

    pub fn points(&self) -> Vec<DelayPowerPoint> {
        self.vertices.iter().map(|v| v.point).collect()
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Delay increase per unit of power saved, one entry per segment; the
    /// sequence is nonnegative and increasing on a convex frontier.
    pub fn slopes(&self) -> Vec<f64> {
        self.vertices
            .windows(2)
            .map(|w| (w[1].point.delay - w[0].point.delay) / (w[0].point.power - w[1].point.power))
            .collect()
    }

    pub fn min_power(&self) -> f64 {
        self.vertices.last().map_or(f64::NAN, |v| v.point.power)
    }

    pub fn max_power(&self) -> f64 {
        self.vertices.first().map_or(f64::NAN, |v| v.point.power)
    }

    /// Minimum delay achievable with average power at most `power`, read off
    /// the curve; `None` below the cheapest vertex.
    pub fn delay_at(&self, power: f64) -> Option<f64> {
        let first = self.vertices.first()?;
        if power >= first.point.power {
            return Some(first.point.delay);
        }
        if power < self.min_power() - MOVE_TOL {
            return None;
        }
        for w in self.vertices.windows(2) {
            let (hi, lo) = (w[0].point, w[1].point);
            if power >= lo.power {
                let t = (hi.power - power) / (hi.power - lo.power);
                return Some(hi.delay + t * (lo.delay - hi.delay));
            }
        }
        self.vertices.last().map(|v| v.point.delay)
    }

    /// Largest coordinate difference between matching vertices, or `None`
    /// when the vertex counts differ.
    pub fn max_vertex_diff(&self, other: &ParetoCurve) -> Option<f64> {
        if self.len() != other.len() {
            return None;
        }
        Some(
            self.vertices
                .iter()
                .zip(&other.vertices)
                .map(|(a, b)| a.point.max_abs_diff(&b.point))
                .fold(0.0, f64::max),
        )
    }

    /// `power,delay,k0..kM` rows; threshold columns are empty for vertices
    /// without a threshold form.
    pub fn to_csv(&self, params: &ModelParams) -> String {
        let mut s = String::from("power,delay");
        for m in 0..params.num_actions() {
            let _ = write!(s, ",k{m}");
        }
        s.push('\n');
        for v in &self.vertices {
            let _ = write!(s, "{:.17e},{:.17e}", v.point.power, v.point.delay);
            match &v.thresholds {
                Some(tp) => {
                    for k in tp.thresholds() {
                        let _ = write!(s, ",{k}");
                    }
                }
                None => s.push_str(&",".repeat(params.num_actions())),
            }
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self, params: &ModelParams) -> serde_json::Value {
        serde_json::json!({
            "params": params,
            "vertices": self.vertices,
            "slopes": self.slopes(),
        })
    }

    /// Two whitespace-separated columns for plotting.
    pub fn to_dat(&self) -> String {
        let mut s = String::from("# power delay\n");
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v.point.power, v.point.delay);
        }
        s
    }
}

/// Indices of the Pareto-optimal lower convex hull vertices, in decreasing
/// power order. Among coincident points the smallest index is kept.
pub fn hull_indices(points: &[DelayPowerPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.power
            .total_cmp(&pb.power)
            .then(pa.delay.total_cmp(&pb.delay))
            .then(a.cmp(&b))
    });

    // Points whose power agrees up to roundoff are stacked vertically; only
    // the lowest of each stack can be on the frontier.
    let mut columns: Vec<usize> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    for i in order {
        let p = points[i].power;
        if p - anchor <= CROSS_TOL * p.abs().max(1.0) {
            let best = columns.last_mut().expect("anchor set");
            if points[i].delay < points[*best].delay - CROSS_TOL {
                *best = i;
            }
        } else {
            anchor = p;
            columns.push(i);
        }
    }

    let mut hull: Vec<usize> = Vec::new();
    for i in columns {
        let pt = points[i];
        while hull.len() >= 2
            && !turns_left(
                &points[hull[hull.len() - 2]],
                &points[hull[hull.len() - 1]],
                &pt,
            )
        {
            hull.pop();
        }
        hull.push(i);
    }

    // Keep the part of the lower hull along which delay still falls.
    let mut frontier: Vec<usize> = Vec::with_capacity(hull.len());
    for i in hull {
        match frontier.last() {
            Some(&last) if points[i].delay >= points[last].delay - CROSS_TOL => break,
            _ => frontier.push(i),
        }
    }
    frontier.reverse();
    frontier
}

/// Pareto-optimal part of the lower convex hull of a point cloud.
pub fn lower_convex_hull(points: &[DelayPowerPoint]) -> ParetoCurve {
    ParetoCurve {
        vertices: hull_indices(points)
            .into_iter()
            .map(|i| CurveVertex::bare(points[i]))
            .collect(),
    }
}

/// One evaluated deterministic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudEntry {
    pub actions: Vec<usize>,
    /// `None` when the chain has more than one recurrent class.
    pub point: Option<DelayPowerPoint>,
    pub threshold: bool,
}

/// Reward pairs of every deterministic policy, in enumeration order.
#[derive(Debug, Clone)]
pub struct PolicyCloud {
    pub entries: Vec<CloudEntry>,
    pub singular: usize,
}

impl PolicyCloud {
    pub fn points(&self) -> Vec<DelayPowerPoint> {
        self.entries.iter().filter_map(|e| e.point).collect()
    }

    pub fn frontier(&self, params: &ModelParams) -> ParetoCurve {
        let evaluated: Vec<&CloudEntry> =
            self.entries.iter().filter(|e| e.point.is_some()).collect();
        let points: Vec<DelayPowerPoint> = evaluated.iter().map(|e| e.point.unwrap()).collect();
        let vertices = hull_indices(&points)
            .into_iter()
            .map(|i| {
                let policy = Policy::deterministic(params, &evaluated[i].actions)
                    .expect("enumerated actions are feasible");
                CurveVertex {
                    point: points[i],
                    thresholds: is_threshold(params, &policy),
                    policy: Some(policy),
                }
            })
            .collect();
        ParetoCurve { vertices }
    }

    /// `index,status,power,delay,threshold,a0..aK`; singular policies keep
    /// their row with empty reward columns.
    pub fn to_csv(&self) -> String {
        let n = self.entries.first().map_or(0, |e| e.actions.len());
        let mut s = String::from("index,status,power,delay,threshold");
        for k in 0..n {
            let _ = write!(s, ",a{k}");
        }
        s.push('\n');
        for (i, e) in self.entries.iter().enumerate() {
            match e.point {
                Some(p) => {
                    let _ = write!(
                        s,
                        "{i},ok,{:.17e},{:.17e},{}",
                        p.power, p.delay, e.threshold as u8
                    );
                }
                None => {
                    let _ = write!(s, "{i},singular,,,{}", e.threshold as u8);
                }
            }
            for a in &e.actions {
                let _ = write!(s, ",{a}");
            }
            s.push('\n');
        }
        s
    }

    /// Plot data: all evaluated points, then a blank-line-separated block of
    /// the threshold policies.
    pub fn to_dat(&self) -> String {
        let mut s = String::from("# power delay (all deterministic policies)\n");
        for p in self.entries.iter().filter_map(|e| e.point) {
            let _ = writeln!(s, "{:.17e} {:.17e}", p.power, p.delay);
        }
        s.push_str("\n\n# power delay (threshold policies)\n");
        for e in self.entries.iter().filter(|e| e.threshold) {
            if let Some(p) = e.point {
                let _ = writeln!(s, "{:.17e} {:.17e}", p.power, p.delay);
            }
        }
        s
    }
}

/// Evaluates every deterministic policy, in parallel on the current rayon
/// pool. Output order is the enumeration order regardless of scheduling.
pub fn evaluate_deterministic_cloud(params: &ModelParams, cap: u128) -> Result<PolicyCloud> {
    let all = enumerate_deterministic(params, cap)?;
    let count = u64::try_from(all.total()).map_err(|_| Error::EnumerationTooLarge {
        count: all.total(),
        cap,
    })?;
    let entries: Vec<CloudEntry> = (0..count)
        .into_par_iter()
        .map(|i| {
            let actions = all.action_map_at(i as u128);
            let policy = Policy::deterministic(params, &actions).expect("feasible");
            let point = match evaluate(params, &policy) {
                Ok(p) => Some(p),
                Err(Error::SingularChain { .. }) | Err(Error::NegativeStationary { .. }) => None,
                Err(e) => panic!("unexpected evaluation failure: {e}"),
            };
            let threshold = ThresholdPolicy::from_actions(params, &actions).is_some();
            CloudEntry {
                actions,
                point,
                threshold,
            }
        })
        .collect();
    let singular = entries.iter().filter(|e| e.point.is_none()).count();
    if singular > 0 {
        warn!(
            "{singular} of {count} deterministic policies have a singular chain and were skipped"
        );
    }
    Ok(PolicyCloud { entries, singular })
}

/// Frontier of the convex hull of all deterministic policies.
pub fn brute_force_frontier(params: &ModelParams) -> Result<ParetoCurve> {
    Ok(evaluate_deterministic_cloud(params, DEFAULT_ENUMERATION_CAP)?.frontier(params))
}

/// Walks the frontier from the zero-delay policy towards lower power.
///
/// Each round expands every policy in the current tie set by all legal
/// single-threshold increments and keeps the candidates that save power
/// without reducing delay at the smallest delay-per-power slope. The walk
/// stops when no increment saves power. Increments whose chain has several
/// recurrent classes have no well-defined reward and are skipped; a singular
/// starting policy is an error.
pub fn threshold_walk(params: &ModelParams) -> Result<ParetoCurve> {
    let mut evaluator = Evaluator::new(params);
    let mut eval = |tp: &ThresholdPolicy| -> Result<(Policy, DelayPowerPoint)> {
        let policy = tp.to_policy(params)?;
        match evaluator.evaluate(&policy) {
            Ok(point) => Ok((policy, point)),
            Err(Error::SingularChain { .. }) | Err(Error::NegativeStationary { .. }) => {
                Err(Error::SingularThresholds {
                    thresholds: tp.thresholds().to_vec(),
                })
            }
            Err(e) => Err(e),
        }
    };

    // With certain arrivals the completed start can leave its unreachable
    // states in their own closed classes; sending everything avoids that
    // whenever any threshold policy can.
    let start = ThresholdPolicy::immediate(params);
    let (start, policy, mut current) = match eval(&start) {
        Ok((policy, point)) => (start, policy, point),
        Err(Error::SingularThresholds { thresholds }) => {
            let actions = Policy::immediate(params).actions().expect("deterministic");
            let flush = ThresholdPolicy::from_actions(params, &actions).expect("monotone");
            warn!(
                "start {thresholds:?} is singular, starting from {:?}",
                flush.thresholds()
            );
            let (policy, point) = eval(&flush)?;
            (flush, policy, point)
        }
        Err(e) => return Err(e),
    };
    let mut vertices = vec![CurveVertex {
        point: current,
        thresholds: Some(start.clone()),
        policy: Some(policy),
    }];
    let mut frontier_set: BTreeMap<Vec<usize>, ThresholdPolicy> =
        BTreeMap::from([(start.thresholds().to_vec(), start)]);

    loop {
        let mut best = f64::INFINITY;
        let mut tied: BTreeMap<Vec<usize>, (ThresholdPolicy, Policy, DelayPowerPoint)> =
            BTreeMap::new();
        for tp in frontier_set.values() {
            for next in neighbors_increase_threshold(params, tp) {
                let key = next.thresholds().to_vec();
                if tied.contains_key(&key) {
                    continue;
                }
                let (policy, point) = match eval(&next) {
                    Ok(v) => v,
                    Err(Error::SingularThresholds { thresholds }) => {
                        warn!("skipping threshold policy {thresholds:?}: singular chain");
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                if point.power >= current.power - MOVE_TOL || point.delay < current.delay - MOVE_TOL
                {
                    continue;
                }
                let slope = (point.delay - current.delay) / (current.power - point.power);
                let tie = SLOPE_TIE_TOL * best.abs().max(1.0);
                if best.is_infinite() || slope < best - tie {
                    best = slope;
                    tied.clear();
                    tied.insert(key, (next, policy, point));
                } else if (slope - best).abs() <= tie {
                    tied.insert(key, (next, policy, point));
                }
            }
        }
        if tied.is_empty() {
            break;
        }
        // The farthest tied candidate along the segment is the next vertex;
        // the BTreeMap order makes the lexicographically smallest threshold
        // vector win among coincident points.
        let (_, (tp, policy, point)) = tied
            .iter()
            .fold(
                None::<(&Vec<usize>, &(ThresholdPolicy, Policy, DelayPowerPoint))>,
                |acc, (k, v)| match acc {
                    Some((_, a)) if a.2.power <= v.2.power + MOVE_TOL => acc,
                    _ => Some((k, v)),
                },
            )
            .expect("nonempty");
        debug!(
            "walk vertex {:?} at ({:.6}, {:.6}), slope {best:.6}, {} tied",
            tp.thresholds(),
            point.power,
            point.delay,
            tied.len()
        );
        current = *point;
        vertices.push(CurveVertex {
            point: *point,
            thresholds: Some(tp.clone()),
            policy: Some(policy.clone()),
        });
        frontier_set = tied.into_iter().map(|(k, (tp, _, _))| (k, tp)).collect();
    }
    debug!(
        "walk finished: {} raw vertices, {} policies evaluated",
        vertices.len(),
        evaluator.cached()
    );
    Ok(ParetoCurve::from_vertices(vertices))
}
