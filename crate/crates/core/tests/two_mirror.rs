use periscope::geometry::segment_slope;
use periscope::two_mirror::{
    legendre_check, measure_recovery, recover_gradient, synthesize_piecewise, synthesize_two_mirror, Piece,
    PiecewiseSpec, TwoMirrorSpec,
};
use periscope::verifier::{trace_ray, verify_system, TraceStatus, VerifyOptions};
use periscope::{Domain, Error, PlaneMap, Point2, ScalarField};

fn unit_disc() -> Domain {
    Domain::disc(Point2::zeros(), 1.0).unwrap()
}

fn translation_system() -> periscope::system::MirrorSystem {
    synthesize_two_mirror(&ScalarField::parse("3*x1").unwrap(), &unit_disc(), Some(2.0), None).unwrap()
}

#[test]
fn translation_example_mirrors_are_parallel_planes() {
    let s = translation_system();
    let p1 = &s.patches[0].height;
    let p2 = &s.patches[1].height;
    let x = Point2::new(0.3, -0.4);
    assert!((p1.value(&x).unwrap() - 0.45).abs() < 1e-14);
    let y = Point2::new(3.2, 0.5);
    let expect = 1.5 * (y.x - 3.0) + 1.25;
    assert!((p2.value(&y).unwrap() - expect).abs() < 1e-12);
    let t = trace_ray(&s, &Point2::new(0.2, 0.1), 16).unwrap();
    assert_eq!(t.status, TraceStatus::Ok);
    assert_eq!(t.bounces(), 2);
    assert!((t.exit_label - Point2::new(3.2, 0.1)).norm() < 1e-10);
    assert!((t.path_length_shift - 2.0).abs() < 1e-9);
    let edge = trace_ray(&s, &Point2::new(1.0, 0.0), 16).unwrap();
    assert_eq!(edge.status, TraceStatus::Ok);
}

#[test]
fn translation_verification_and_wrong_map() {
    let s = translation_system();
    let opts = VerifyOptions {
        spread_tolerance: Some(2e-9),
        ..Default::default()
    };
    let good = verify_system(&s, &PlaneMap::translation(Point2::new(3.0, 0.0)), &opts);
    assert!(good.passed, "{}", good.summary());
    assert!(good.max_map_error <= 1e-9);
    let bad = verify_system(&s, &PlaneMap::translation(Point2::new(3.1, 0.0)), &opts);
    assert!(!bad.passed);
    assert!((bad.max_map_error - 0.1).abs() < 1e-6);
}

#[test]
fn dilation_example_and_slope() {
    let d = Domain::disc(Point2::new(3.0, 0.0), 1.0).unwrap();
    let s = synthesize_two_mirror(&ScalarField::parse("0.5*(x1^2+x2^2)").unwrap(), &d, None, None).unwrap();
    let c = s.path_constant();
    let t = trace_ray(&s, &Point2::new(3.2, 0.3), 16).unwrap();
    assert_eq!(t.status, TraceStatus::Ok);
    let g = Point2::new(3.2, 0.3).norm();
    let slope = segment_slope(&t.vertices[0], &t.vertices[1]);
    assert!((slope - (g * g - c * c) / (2.0 * c * g)).abs() < 1e-10);
    let r = recover_gradient(&s, 200).unwrap();
    assert!(r.residual < 1e-9, "{}", r.residual);
    let spec = TwoMirrorSpec {
        potential: ScalarField::parse("0.5*(x1^2+x2^2)").unwrap(),
        d1: d,
        c,
        h: 0.0,
    };
    assert!(legendre_check(&spec, 100).unwrap().residual < 1e-9);
}

#[test]
fn perturbed_second_mirror_is_inconsistent() {
    let mut s = translation_system();
    let p = s.patches[1].clone();
    s.patches[1] = p.lifted(0.01);
    let m = measure_recovery(&s, 200).unwrap();
    println!("perturbed spread {} residual {}", m.spread, m.residual);
    assert!(matches!(
        recover_gradient(&s, 200),
        Err(Error::InconsistentSystem { .. })
    ));
}

#[test]
fn piecewise_two_translations() {
    let sq = |x0: f64, x1: f64| Domain::rectangle(Point2::new(x0, 0.0), Point2::new(x1, 1.0)).unwrap();
    let piece = |d: Domain, g: &str, ext: Domain| Piece {
        domain: d,
        potential: ScalarField::parse(g).unwrap(),
        extended_domain: ext,
        extended_potential: ScalarField::parse(g).unwrap(),
        c: None,
    };
    let spec = PiecewiseSpec {
        pieces: vec![
            piece(sq(0.0, 1.0), "5*x1", sq(0.0, 1.0)),
            piece(sq(1.0, 2.0), "5*x1 + 3*x2", sq(1.0, 2.0)),
        ],
    };
    let s = synthesize_piecewise(&spec).unwrap();
    assert_eq!(s.patches.len(), 4);
    let t = trace_ray(&s, &Point2::new(1.5, 0.5), 16).unwrap();
    assert_eq!(t.status, TraceStatus::Ok);
    assert!((t.exit_label - Point2::new(6.5, 3.5)).norm() < 1e-9);
}
