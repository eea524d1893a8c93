use approx::assert_relative_eq;
use fieldmapper::diagnostics::{fill_distance, separation_radius, SpreadTracker};
use fieldmapper::field::{eval_field, make_test_grid};
use fieldmapper::gp::{kernel, GpModel, TrainSet};
use fieldmapper::hough::{Circle, CircleSet};
use fieldmapper::planner::{replan, MeasurementPlan, RelocationParams};
use fieldmapper::swarm::{encounters, pairwise_average, Estimate};
use fieldmapper::{DomainBox, FieldSpec, KernelParams, Point};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_point() -> impl Strategy<Value = Point> {
    (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(x, y)| Point::new(x, y))
}

fn circle() -> impl Strategy<Value = Circle> {
    (0.0..=1.0f64, 0.0..=1.0f64, 0.05..=0.15f64).prop_map(|(x, y, r)| Circle::new(x, y, r))
}

fn params() -> KernelParams {
    KernelParams::new(1.0, 0.1).unwrap()
}

#[test]
fn kernel_matches_closed_form() {
    let p = params();
    let o = Point::new(0.0, 0.0);
    assert_eq!(kernel(&o, &o, &p).unwrap(), 1.0);
    assert_relative_eq!(
        kernel(&o, &Point::new(0.1, 0.0), &p).unwrap(),
        0.6065306597126334,
        max_relative = 1e-15
    );
    let q = KernelParams::new(2.0, 0.5).unwrap();
    assert_relative_eq!(
        kernel(&o, &Point::new(0.3, 0.4), &q).unwrap(),
        4.0 * (-0.5f64).exp(),
        max_relative = 1e-15
    );
}

#[test]
fn two_point_posterior_matches_explicit_inverse() {
    let p = params();
    let jitter = 1e-8;
    let x1 = Point::new(0.2, 0.3);
    let x2 = Point::new(0.27, 0.3);
    let (y1, y2) = (0.8, -0.4);
    let star = Point::new(0.25, 0.35);

    let a = 1.0 + jitter;
    let b = kernel(&x1, &x2, &p).unwrap();
    let det = a * a - b * b;
    let (w1, w2) = ((a * y1 - b * y2) / det, (a * y2 - b * y1) / det);
    let (k1, k2) = (kernel(&star, &x1, &p).unwrap(), kernel(&star, &x2, &p).unwrap());
    let mean = k1 * w1 + k2 * w2;
    let var = 1.0 - (a * k1 * k1 - 2.0 * b * k1 * k2 + a * k2 * k2) / det;

    let model = GpModel::new(p, jitter).unwrap();
    let train = TrainSet::from_pairs(vec![x1, x2], vec![y1, y2]).unwrap();
    let post = model.posterior(&train, &[star]).unwrap();
    assert_relative_eq!(post.mean[0], mean, max_relative = 1e-9);
    assert_relative_eq!(post.cov_diag[0], var, max_relative = 1e-9);

    let mut inc = model.incremental(vec![star]).unwrap();
    inc.push(x1, y1).unwrap();
    inc.push(x2, y2).unwrap();
    assert_relative_eq!(inc.mean()[0], mean, max_relative = 1e-9);
    assert_relative_eq!(inc.variance()[0], var, max_relative = 1e-9);
}

#[test]
fn sinusoid_field_reference_values() {
    let f = FieldSpec::reference_sinusoid();
    let at = |x, y| eval_field(&f, &Point::new(x, y)).unwrap();
    assert_relative_eq!(at(0.25, 0.0), 2.0, epsilon = 1e-15);
    assert_relative_eq!(at(0.75, 0.25), -2.0, epsilon = 1e-15);
    assert_relative_eq!(at(0.0, 0.125), 0.0, epsilon = 1e-15);
    assert_eq!(f.bounds(), (-2.0, 2.0));
}

#[test]
fn tracker_agrees_with_brute_force() {
    let grid = make_test_grid(&DomainBox::unit(), 25).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<Point> = (0..30).map(|_| DomainBox::unit().sample(&mut rng)).collect();
    let mut tracker = SpreadTracker::new(&grid);
    for t in 1..=pts.len() {
        tracker.push(pts[t - 1], &grid);
        assert_eq!(tracker.fill_distance().unwrap(), fill_distance(&pts[..t], &grid).unwrap());
        if t >= 2 {
            assert_eq!(tracker.separation_radius().unwrap(), separation_radius(&pts[..t]).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn replan_clears_circles_and_keeps_cardinality(
        circles in prop::collection::vec(circle(), 1..8),
        plan in prop::collection::vec(unit_point(), 1..60),
        executed in 0usize..5,
        seed in any::<u64>(),
    ) {
        let margin = 1.0 / 99.0;
        let set = CircleSet::from_circles(circles.clone());
        let n = plan.len();
        let mut plan = MeasurementPlan::new(plan);
        let executed = executed.min(n);
        for step in 1..=executed {
            plan.execute_next(step, 0.0, false);
        }
        let before: Vec<Point> = plan.executed().iter().map(|e| e.location).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let report = replan(&mut plan, &set, &DomainBox::unit(), &RelocationParams { margin, max_attempts: 20 }, &mut rng);
        prop_assert_eq!(report.exposed, 0);
        prop_assert_eq!(plan.len(), n);
        let after: Vec<Point> = plan.executed().iter().map(|e| e.location).collect();
        prop_assert_eq!(before, after);
        for p in plan.future() {
            prop_assert!(DomainBox::unit().contains(p));
            for c in &circles {
                prop_assert!(p.distance(&c.center()) >= c.r + margin);
            }
        }
    }

    #[test]
    fn extra_measurement_never_raises_variance(
        pts in prop::collection::vec(unit_point(), 1..15),
        extra in unit_point(),
        probes in prop::collection::vec(unit_point(), 1..20),
    ) {
        let model = GpModel::new(params(), 1e-8).unwrap();
        let ys = vec![0.0; pts.len()];
        let train = TrainSet::from_pairs(pts, ys).unwrap();
        let mut more = train.clone();
        more.push(extra, 0.0);
        let a = model.posterior(&train, &probes).unwrap();
        let b = model.posterior(&more, &probes).unwrap();
        for (v0, v1) in a.cov_diag.iter().zip(&b.cov_diag) {
            prop_assert!(*v1 <= v0 + 1e-9, "{} -> {}", v0, v1);
            prop_assert!(*v1 >= -1e-9 && *v1 <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn posterior_interpolates_well_separated_data(
        pts in prop::collection::vec(unit_point(), 1..25),
    ) {
        let f = FieldSpec::reference_sinusoid();
        let mut kept: Vec<Point> = Vec::new();
        for p in pts {
            if kept.iter().all(|q| q.distance(&p) > 0.02) {
                kept.push(p);
            }
        }
        let ys: Vec<f64> = kept.iter().map(|p| eval_field(&f, p).unwrap()).collect();
        let train = TrainSet::from_pairs(kept.clone(), ys.clone()).unwrap();
        let post = GpModel::new(params(), 1e-8).unwrap().posterior(&train, &kept).unwrap();
        for (m, y) in post.mean.iter().zip(&ys) {
            prop_assert!((m - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn averaging_is_symmetric_and_idempotent(
        a in prop::collection::vec(-5.0..5.0f64, 10),
        b in prop::collection::vec(-5.0..5.0f64, 10),
    ) {
        let ea = Estimate { mean: a.clone(), variance: a.iter().map(|x| x.abs()).collect() };
        let eb = Estimate { mean: b.clone(), variance: b.iter().map(|x| x.abs()).collect() };
        let ab = pairwise_average(&ea, &eb).unwrap();
        prop_assert_eq!(&ab, &pairwise_average(&eb, &ea).unwrap());
        prop_assert_eq!(&ab, &pairwise_average(&ab, &ab).unwrap());
    }

    #[test]
    fn encounters_are_ordered_pairs_within_range(
        positions in prop::collection::vec(unit_point(), 0..8),
        rc in 0.0..0.8f64,
    ) {
        let pairs = encounters(&positions, rc);
        let mut sorted = pairs.clone();
        sorted.sort_unstable();
        prop_assert_eq!(&pairs, &sorted);
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                let near = positions[i].distance(&positions[j]) <= rc;
                prop_assert_eq!(near, pairs.contains(&(i, j)));
            }
        }
    }
}
