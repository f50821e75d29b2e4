mod common;

use approx::assert_relative_eq;
use common::{support_set_radius, XorShift};
use nhpp_core::{metric_distance, min_bounding_sphere, Domain, Point};
use proptest::prelude::*;

fn weighted_domain(dim: usize) -> Domain {
    let weights: Vec<f64> = (0..dim).map(|i| 1.0 + 0.5 * i as f64).collect();
    Domain::with_options(vec![0.0; dim], vec![1.0; dim], weights, false).unwrap()
}

#[test]
fn matches_support_set_oracle() {
    let mut rng = XorShift(0x9e3779b97f4a7c15);
    for trial in 0..400 {
        let dim = 2 + trial % 2;
        let n = 1 + (rng.next_f64() * 8.0) as usize;
        let domain = weighted_domain(dim);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.next_f64()).collect()).collect();
        let embedded: Vec<Vec<f64>> =
            pts.iter().map(|p| p.iter().zip(domain.weights()).map(|(x, w)| x * w).collect()).collect();
        let want = support_set_radius(&embedded);
        let points: Vec<Point> = pts.into_iter().map(Point::new).collect();
        let got = min_bounding_sphere(&points, &domain).unwrap();
        assert_relative_eq!(got.radius, want, max_relative = 1e-9, epsilon = 1e-15);
    }
}

#[test]
fn two_points_give_midpoint() {
    let d = Domain::unit_square();
    let s = min_bounding_sphere(&[Point::new([0.2, 0.2]), Point::new([0.6, 0.5])], &d).unwrap();
    assert_relative_eq!(s.radius, 0.25, max_relative = 1e-12);
    assert_relative_eq!(s.center[0], 0.4, max_relative = 1e-12);
    assert_relative_eq!(s.center[1], 0.35, max_relative = 1e-12);
}

#[test]
fn single_and_repeated_points() {
    let d = Domain::unit_square();
    let p = Point::new([0.3, 0.7]);
    assert_eq!(min_bounding_sphere(std::slice::from_ref(&p), &d).unwrap().radius, 0.0);
    assert_eq!(min_bounding_sphere(&[p.clone(), p.clone(), p.clone()], &d).unwrap().radius, 0.0);
}

#[test]
fn collinear_points() {
    let d = Domain::unit_square();
    let pts: Vec<Point> = (0..5).map(|i| Point::new([0.1 + 0.1 * i as f64, 0.5])).collect();
    let s = min_bounding_sphere(&pts, &d).unwrap();
    assert_relative_eq!(s.radius, 0.2, max_relative = 1e-12);
}

#[test]
fn wrapped_axis_uses_short_arc() {
    let d = Domain::frb_default();
    let pts = [Point::new([359.0, 10.0, 500.0]), Point::new([1.0, 10.0, 500.0])];
    let s = min_bounding_sphere(&pts, &d).unwrap();
    assert_relative_eq!(s.radius, 1.0, max_relative = 1e-12);
    assert!(s.center[0] < 1e-9 || s.center[0] > 360.0 - 1e-9, "{:?}", s.center);
    assert_relative_eq!(metric_distance(&pts[0], &pts[1], &d).unwrap(), 2.0, max_relative = 1e-12);
}

#[test]
fn empty_and_mismatched_inputs_rejected() {
    let d = Domain::unit_square();
    assert!(min_bounding_sphere(&[], &d).is_err());
    assert!(min_bounding_sphere(&[Point::new([0.1, 0.2, 0.3])], &d).is_err());
    assert!(metric_distance(&Point::new([0.1, f64::NAN]), &Point::new([0.1, 0.2]), &d).is_err());
}

fn frb_point() -> impl Strategy<Value = Point> {
    (0.0..360.0f64, -11.0..90.0f64, 0.0..5000.0f64).prop_map(|(a, b, c)| Point::new([a, b, c]))
}

proptest! {
    #[test]
    fn triangle_inequality(a in frb_point(), b in frb_point(), c in frb_point()) {
        let d = Domain::frb_default();
        let ab = metric_distance(&a, &b, &d).unwrap();
        let bc = metric_distance(&b, &c, &d).unwrap();
        let ac = metric_distance(&a, &c, &d).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9 * (1.0 + ab + bc));
        prop_assert!((ab - metric_distance(&b, &a, &d).unwrap()).abs() <= 1e-12 * (1.0 + ab));
    }

    #[test]
    fn sphere_contains_every_point(pts in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 3), 1..12)) {
        let d = weighted_domain(3);
        let points: Vec<Point> = pts.into_iter().map(Point::new).collect();
        let s = min_bounding_sphere(&points, &d).unwrap();
        for p in &points {
            prop_assert!(metric_distance(p, &s.center, &d).unwrap() <= s.radius * (1.0 + 1e-12));
        }
    }

    #[test]
    fn order_does_not_matter(pts in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 2), 2..10)) {
        let d = Domain::unit_square();
        let mut points: Vec<Point> = pts.into_iter().map(Point::new).collect();
        let r1 = min_bounding_sphere(&points, &d).unwrap().radius;
        points.reverse();
        let r2 = min_bounding_sphere(&points, &d).unwrap().radius;
        prop_assert!((r1 - r2).abs() <= 1e-9 * r1.max(1e-12));
    }

    #[test]
    fn clusters_near_the_seam(center in 0.0..360.0f64, offsets in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 2..6)) {
        // shifting the whole cluster along the wrapped axis leaves the radius unchanged
        let d = Domain::frb_default();
        let make = |shift: f64| -> Vec<Point> {
            offsets.iter().map(|(x, y)| Point::new([d.wrap_value(0, center + shift + x), 40.0 + y, 1000.0])).collect()
        };
        let r1 = min_bounding_sphere(&make(0.0), &d).unwrap().radius;
        let r2 = min_bounding_sphere(&make(180.0), &d).unwrap().radius;
        prop_assert!((r1 - r2).abs() <= 1e-9 * (1.0 + r1));
    }
}
