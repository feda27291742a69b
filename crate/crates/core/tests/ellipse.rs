use periscope::ellipse::*;

#[test]
fn focal_chord_solves_the_triangle() {
    let cfg = EllipseConfig::new(0.4).unwrap();
    for a in sample_angles(20) {
        let (u, v, b) = solve_triangle(&cfg, a).unwrap();
        assert!((u + v - 2.0).abs() <= 1e-12);
        assert!((v - cfg.focal_chord(a)).abs() <= 1e-12);
        assert!((b - pencil_map_angle(&cfg, a)).abs() <= 1e-10);
    }
}

#[test]
fn mobius_coefficient_matches_eccentricity() {
    for c in [0.0, 0.25, 0.75] {
        let cfg = EllipseConfig::new(c).unwrap();
        let fit = mobius_fit(&cfg, 50).unwrap();
        assert!((fit.coefficient - (1.0 - c) / (1.0 + c)).abs() <= 1e-12);
    }
    assert!(EllipseConfig::new(1.0).is_err());
}
