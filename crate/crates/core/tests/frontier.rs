//! Frontier vertices checked against exact fractions computed independently
//! (see `data/frontier_oracle.py`).

use bufsched::mrp::DelayPowerPoint;
use bufsched::pareto::{evaluate_deterministic_cloud, threshold_walk, ParetoCurve};
use bufsched::policies::{deterministic_policy_count, is_threshold, DEFAULT_ENUMERATION_CAP};
use bufsched::random::random_params;
use bufsched::validate::curve_distance;
use bufsched::{brute_force_frontier, ModelParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn params(alpha: f64, a: usize, m: usize, q: usize, power: &[f64]) -> ModelParams {
    ModelParams::new(alpha, a, m, q, power.to_vec()).unwrap()
}

fn reference() -> ModelParams {
    params(0.4, 2, 3, 5, &[0.0, 1.0, 4.0, 9.0])
}

fn assert_vertices(curve: &ParetoCurve, expected: &[(f64, f64)]) {
    let got = curve.points();
    assert_eq!(got.len(), expected.len(), "vertex count: {got:?}");
    for (g, &(p, d)) in got.iter().zip(expected) {
        assert!(
            g.max_abs_diff(&DelayPowerPoint::new(p, d)) <= TOL,
            "got {g:?}, want ({p}, {d})"
        );
    }
}

fn oracle_cases() -> Vec<(ModelParams, Vec<(f64, f64)>)> {
    vec![
        (
            reference(),
            vec![
                (8.0 / 5.0, 0.0),
                (28.0 / 25.0, 1.0 / 2.0),
                (92.0 / 95.0, 35.0 / 38.0),
                (292.0 / 325.0, 33.0 / 26.0),
                (908.0 / 1055.0, 655.0 / 422.0),
                (2788.0 / 3325.0, 473.0 / 266.0),
            ],
        ),
        (
            params(0.6, 2, 3, 5, &[0.0, 1.0, 4.0, 9.0]),
            vec![
                (2.4, 0.0),
                (1.92, 0.5),
                (1.768421052632, 1.052631578947),
                (1.698461538462, 1.653846153846),
                (1.660663507109, 2.298578199052),
                (1.638496240602, 2.981203007519),
            ],
        ),
        (
            params(0.5, 3, 4, 3, &[0.0, 1.0, 3.0, 6.0, 10.0]),
            vec![
                (3.0, 0.0),
                (5.0 / 2.0, 1.0 / 3.0),
                (19.0 / 8.0, 1.0 / 2.0),
                (16.0 / 7.0, 2.0 / 3.0),
                (9.0 / 4.0, 7.0 / 9.0),
            ],
        ),
        (
            params(0.3, 2, 4, 4, &[0.0, 1.0, 2.5, 4.5, 7.0]),
            vec![
                (3.0 / 4.0, 0.0),
                (129.0 / 200.0, 1.0 / 2.0),
                (195.0 / 316.0, 65.0 / 79.0),
                (7041.0 / 11600.0, 59.0 / 58.0),
                (9987.0 / 16564.0, 4670.0 / 4141.0),
            ],
        ),
        (
            params(0.7, 1, 3, 4, &[0.0, 1.0, 3.0, 6.0]),
            vec![(0.7, 0.0)],
        ),
        (
            params(1.0, 2, 3, 3, &[0.0, 1.0, 4.0, 9.0]),
            vec![(4.0, 0.0)],
        ),
    ]
}

#[test]
fn walk_matches_exact_vertices() {
    for (p, expected) in oracle_cases() {
        assert_vertices(&threshold_walk(&p).unwrap(), &expected);
    }
}

#[test]
fn brute_force_matches_exact_vertices() {
    for (p, expected) in oracle_cases() {
        assert_vertices(&brute_force_frontier(&p).unwrap(), &expected);
    }
}

#[test]
fn reference_cloud_size_and_singular_count() {
    let cloud = evaluate_deterministic_cloud(&reference(), DEFAULT_ENUMERATION_CAP).unwrap();
    assert_eq!(cloud.entries.len(), 2304);
    assert_eq!(cloud.singular, 539);
    assert_eq!(cloud.to_csv().lines().count(), 2305);
}

#[test]
fn cheapest_reference_vertex_sends_one_bit() {
    let p = reference();
    let curve = threshold_walk(&p).unwrap();
    let last = curve.vertices().last().unwrap();
    assert_eq!(
        last.thresholds.as_ref().unwrap().thresholds(),
        &[0, 6, 7, 7]
    );
    let brute = brute_force_frontier(&p).unwrap();
    let actions = brute
        .vertices()
        .last()
        .unwrap()
        .policy
        .as_ref()
        .unwrap()
        .actions();
    assert_eq!(actions, Some(vec![0, 1, 1, 1, 1, 1, 1, 2]));
}

#[test]
fn no_policy_lies_below_the_curve() {
    for (p, _) in oracle_cases() {
        let curve = threshold_walk(&p).unwrap();
        let cloud = evaluate_deterministic_cloud(&p, DEFAULT_ENUMERATION_CAP).unwrap();
        for point in cloud.points() {
            assert!(point.power >= curve.min_power() - TOL);
            let bound = curve.delay_at(point.power).unwrap();
            assert!(point.delay >= bound - TOL, "{point:?} below {bound}");
        }
    }
}

#[test]
fn curve_is_convex_and_decreasing() {
    for (p, _) in oracle_cases() {
        let curve = threshold_walk(&p).unwrap();
        let slopes = curve.slopes();
        assert!(slopes.iter().all(|&s| s > 0.0));
        assert!(slopes.windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn vertices_are_deterministic_threshold_policies() {
    for (p, _) in oracle_cases() {
        for v in threshold_walk(&p).unwrap().vertices() {
            let policy = v.policy.as_ref().unwrap();
            assert!(policy.is_deterministic());
            let tp = is_threshold(&p, policy).unwrap();
            assert_eq!(Some(&tp), v.thresholds.as_ref());
        }
    }
}

#[test]
fn exports_have_one_row_per_vertex() {
    let p = reference();
    let curve = threshold_walk(&p).unwrap();
    let csv = curve.to_csv(&p);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("power,delay,k0,k1,k2,k3"));
    assert_eq!(lines.count(), 6);
    let json = curve.to_json(&p);
    assert_eq!(json["vertices"].as_array().unwrap().len(), 6);
    assert_eq!(json["slopes"].as_array().unwrap().len(), 5);
    assert_eq!(json["params"]["A"], 2);
    assert_eq!(curve.to_dat().lines().count(), 7);
}

fn vertex_thresholds(curve: &ParetoCurve) -> Vec<Vec<usize>> {
    curve
        .vertices()
        .iter()
        .map(|v| v.thresholds.as_ref().unwrap().thresholds().to_vec())
        .collect()
}

fn assert_walk_matches_brute(p: &ModelParams) {
    let walk = threshold_walk(p).unwrap();
    let brute = brute_force_frontier(p).unwrap();
    let d = curve_distance(&walk, &brute);
    assert!(
        d <= TOL,
        "{p:?}: distance {d:e}\n{:?}\n{:?}",
        walk.points(),
        brute.points()
    );
}

#[test]
fn tied_slopes_advance_the_whole_tie_set() {
    // two increments share the best slope here; following only one of them
    // skips a vertex
    let p = params(
        0.4400106984738444,
        3,
        3,
        5,
        &[0.0, 0.8489608419284103, 4.093182331012504, 9.73266446725228],
    );
    let walk = threshold_walk(&p).unwrap();
    let ks = vertex_thresholds(&walk);
    assert!(ks.contains(&vec![0, 2, 6, 8]), "{ks:?}");
    assert!(ks.contains(&vec![0, 2, 7, 8]), "{ks:?}");
    assert_walk_matches_brute(&p);
}

#[test]
fn hull_keeps_corners_between_short_edges() {
    // two vertices 1.4e-7 apart in power; an absolute collinearity cutoff
    // merged them
    let p = params(
        0.07112003298615648,
        3,
        3,
        7,
        &[
            0.0,
            1.5725110463816958,
            3.745835415327125,
            6.519973106836288,
        ],
    );
    let walk = threshold_walk(&p).unwrap();
    let ks = vertex_thresholds(&walk);
    assert_eq!(ks.len(), 15);
    assert!(
        ks.contains(&vec![0, 2, 7, 10]) && ks.contains(&vec![0, 3, 8, 10]),
        "{ks:?}"
    );
    assert_walk_matches_brute(&p);
}

#[test]
fn walk_matches_brute_force_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 40 {
        let p = random_params(&mut rng, 9);
        if deterministic_policy_count(&p) > 100_000 {
            continue;
        }
        checked += 1;
        assert_walk_matches_brute(&p);
    }
}
