//! End-to-end acceptance checks, one line per criterion.
//!
//! Run with `cargo test -p periscope-cli --test acceptance`; pass criterion
//! numbers as arguments to run a subset.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix2};
use periscope::composer::{realize_orientation_preserving, realize_orientation_reversing};
use periscope::decomposition::{decompose_local, discriminant, factor_linear};
use periscope::ellipse::{pencil_map_angle, pencil_map_geometric, sample_angles, EllipseConfig};
use periscope::geometry::segment_slope;
use periscope::io::export::{obj_vertices, system_obj, DEFAULT_MESH_RESOLUTION};
use periscope::io::{SceneDocument, SchemaMode};
use periscope::poly::Polynomial;
use periscope::sampling::halton_points;
use periscope::system::MirrorSystem;
use periscope::two_mirror::{
    image_of, recover_gradient, synthesize_two_mirror, synthesize_two_mirror_with, SynthesisOptions, TwoMirrorSpec,
};
use periscope::verifier::{trace_ray, verify_system, TraceStatus, VerificationReport, VerifyOptions};
use periscope::{Domain, Error, PlaneMap, Point2, ScalarField};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// A synthesized two-mirror system together with the potential it realizes.
struct Sample {
    potential: ScalarField,
    d1: Domain,
    system: MirrorSystem,
}

const DRIFT: f64 = 2.5;
const RANDOM_RADIUS: f64 = 0.25;

fn random_potential(rng: &mut StdRng) -> ScalarField {
    let disc = Domain::disc(Point2::zeros(), RANDOM_RADIUS).unwrap();
    loop {
        let degree = rng.random_range(2..=4);
        let mut terms = vec![(1, 0, DRIFT)];
        for d in 1..=degree {
            for i in 0..=d {
                terms.push((i, d - i, rng.random_range(-0.3..=0.3)));
            }
        }
        let g: ScalarField = Polynomial::from_terms(Point2::zeros(), &terms).unwrap().into();
        // x + grad G is injective on a convex domain when I + Hess G > 0.
        let convex = disc.grid_points(24).iter().chain(&disc.boundary_points(64)).all(|p| {
            let h = Matrix2::identity() + g.hessian(p).unwrap();
            h.symmetric_eigenvalues().min() > 0.05
        });
        // The construction also needs a convex image.
        if convex && image_of(&g, &disc).is_ok() {
            return g;
        }
    }
}

fn round_trip_options() -> VerifyOptions {
    VerifyOptions {
        samples: 1000,
        map_tolerance: 1e-8,
        ..VerifyOptions::default()
    }
}

fn random_samples() -> &'static (Vec<Sample>, f64) {
    static CELL: OnceLock<(Vec<Sample>, f64)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut rng = StdRng::seed_from_u64(0x5eed_0001);
        let d1 = Domain::disc(Point2::zeros(), RANDOM_RADIUS).unwrap();
        let potentials: Vec<_> = (0..50).map(|_| random_potential(&mut rng)).collect();
        let opts = SynthesisOptions {
            verify: round_trip_options(),
        };
        let start = Instant::now();
        let samples = potentials
            .into_iter()
            .map(|g| {
                let system = synthesize_two_mirror_with(&g, &d1, None, None, &opts)
                    .unwrap_or_else(|e| panic!("synthesis failed for {g:?}: {e}"));
                Sample {
                    potential: g,
                    d1: d1.clone(),
                    system,
                }
            })
            .collect();
        (samples, start.elapsed().as_secs_f64())
    })
}

fn translation() -> Sample {
    let potential = ScalarField::parse("3*x1").unwrap();
    let d1 = Domain::disc(Point2::zeros(), 1.0).unwrap();
    let system = synthesize_two_mirror(&potential, &d1, Some(2.0), None).unwrap();
    Sample { potential, d1, system }
}

fn dilation() -> Sample {
    let potential = ScalarField::parse("0.5*(x1^2 + x2^2)").unwrap();
    let d1 = Domain::disc(Point2::new(3.0, 0.0), 1.0).unwrap();
    let system = synthesize_two_mirror(&potential, &d1, None, None).unwrap();
    Sample { potential, d1, system }
}

fn round_trip_check(name: &str, s: &Sample, report: &VerificationReport) -> Result<(), String> {
    let c = s.system.path_constant();
    ensure(report.passed, || format!("{name}: {}", report.summary()))?;
    ensure(report.max_map_error <= 1e-8, || {
        format!("{name}: map error {:e}", report.max_map_error)
    })?;
    ensure(report.path_constant_spread <= 1e-9 * c, || {
        format!("{name}: spread {:e} for c = {c}", report.path_constant_spread)
    })?;
    ensure(report.reflection_histogram.keys().all(|&k| k == 2), || {
        format!("{name}: histogram {:?}", report.reflection_histogram)
    })?;
    ensure(report.superfluous_count == 0, || {
        format!("{name}: {} superfluous", report.superfluous_count)
    })
}

fn criterion_1() -> Outcome {
    let (samples, synth_time) = random_samples();
    let opts = round_trip_options();
    let start = Instant::now();
    let mut worst_map: f64 = 0.0;
    let mut worst_spread: f64 = 0.0;
    for (k, s) in samples.iter().enumerate() {
        let expected = PlaneMap::displacement(s.potential.clone());
        let r = verify_system(&s.system, &expected, &opts);
        round_trip_check(&format!("potential {k}"), s, &r)?;
        ensure(r.sample_count >= 1000, || format!("only {} rays", r.sample_count))?;
        worst_map = worst_map.max(r.max_map_error);
        worst_spread = worst_spread.max(r.path_constant_spread / s.system.path_constant());
    }
    let total = synth_time + start.elapsed().as_secs_f64();
    if !cfg!(debug_assertions) {
        ensure(total <= 5.0, || format!("runtime {total:.2} s exceeds 5 s"))?;
    }
    let timing = if cfg!(debug_assertions) {
        "unoptimized build, bound not enforced"
    } else {
        "bound 5 s"
    };
    Ok(format!(
        "50 systems, max map error {worst_map:.2e}, max spread/c {worst_spread:.2e}, {total:.2} s ({timing})"
    ))
}

/// Max residual of a least-squares fit of `z` by `basis(x, y)`.
fn fit_residual(vertices: &[[f64; 3]], basis: impl Fn(f64, f64) -> Vec<f64>) -> (f64, DVector<f64>) {
    let n = vertices.len();
    let cx = vertices.iter().map(|v| v[0]).sum::<f64>() / n as f64;
    let cy = vertices.iter().map(|v| v[1]).sum::<f64>() / n as f64;
    let rows: Vec<Vec<f64>> = vertices.iter().map(|v| basis(v[0] - cx, v[1] - cy)).collect();
    let a = DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]);
    let b = DVector::from_iterator(n, vertices.iter().map(|v| v[2]));
    let coef = a.clone().svd(true, true).solve(&b, 1e-14).unwrap();
    ((a * &coef - b).amax(), coef)
}

fn plane(x: f64, y: f64) -> Vec<f64> {
    vec![1.0, x, y]
}

fn quadric(x: f64, y: f64) -> Vec<f64> {
    vec![1.0, x, y, x * x, x * y, y * y]
}

fn criterion_2() -> Outcome {
    let t = translation();
    let d = dilation();
    let opts = round_trip_options();
    round_trip_check(
        "translation",
        &t,
        &verify_system(&t.system, &PlaneMap::translation(Point2::new(3.0, 0.0)), &opts),
    )?;
    let scale = PlaneMap::linear(&(2.0 * Matrix2::identity()), Point2::zeros());
    round_trip_check("dilation", &d, &verify_system(&d.system, &scale, &opts))?;

    let mut worst: f64 = 0.0;
    for (_, obj) in system_obj(&t.system, DEFAULT_MESH_RESOLUTION).map_err(fail)? {
        let (r, _) = fit_residual(&obj_vertices(&obj), plane);
        worst = worst.max(r);
    }
    let c = d.system.path_constant();
    for (i, (_, obj)) in system_obj(&d.system, DEFAULT_MESH_RESOLUTION)
        .map_err(fail)?
        .into_iter()
        .enumerate()
    {
        let (r, coef) = fit_residual(&obj_vertices(&obj), quadric);
        worst = worst.max(r);
        if i == 0 {
            // z = (|x|^2 - c^2) / (2c) up to a vertical offset.
            let iso = (coef[3] - 0.5 / c)
                .abs()
                .max((coef[5] - 0.5 / c).abs())
                .max(coef[4].abs());
            ensure(iso <= 1e-10, || {
                format!("first dilation mirror is not |x|^2/(2c): {coef:?}")
            })?;
        }
    }
    ensure(worst <= 1e-10, || format!("mesh fit residual {worst:e}"))?;
    Ok(format!(
        "both examples pass the round trip, mesh fit residual {worst:.2e}"
    ))
}

fn criterion_3() -> Outcome {
    let (samples, _) = random_samples();
    let t = translation();
    let d = dilation();
    let mut worst: f64 = 0.0;
    for s in samples.iter().chain([&t, &d]) {
        let r = recover_gradient(&s.system, 1000).map_err(fail)?;
        let c = s.system.path_constant();
        ensure((r.c - c).abs() <= 1e-9 * c, || format!("recovered c {} vs {c}", r.c))?;
        for x in halton_points(&s.d1, 50) {
            let g = s.potential.gradient(&x).map_err(fail)?;
            let rg = r.potential.gradient(&x).map_err(fail)?;
            worst = worst.max((g - rg).norm());
        }
        worst = worst.max(r.residual);
    }
    ensure(worst <= 1e-8, || format!("recovery residual {worst:e}"))?;
    let mut spreads = Vec::new();
    for s in [&t, &samples[0]] {
        let mut sys = s.system.clone();
        sys.patches[1] = sys.patches[1].lifted(1e-2);
        match recover_gradient(&sys, 1000) {
            Err(Error::InconsistentSystem { spread, .. }) => {
                ensure(spread >= 5e-3, || format!("perturbed spread {spread:e}"))?;
                spreads.push(spread);
            }
            other => return Err(format!("perturbed system accepted: {other:?}")),
        }
    }
    Ok(format!(
        "52 systems, residual {worst:.2e}; perturbed spreads {spreads:?}"
    ))
}

fn criterion_4() -> Outcome {
    let (samples, _) = random_samples();
    let d = dilation();
    let mut rays = 0;
    let (mut slope_err, mut side_err, mut length_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in [&d, &samples[0], &samples[1], &samples[2]] {
        let c = s.system.path_constant();
        for x in halton_points(&s.d1, 1000) {
            let t = trace_ray(&s.system, &x, 8).map_err(fail)?;
            if t.status == TraceStatus::EdgeContact {
                continue;
            }
            ensure(t.status == TraceStatus::Ok && t.bounces() == 2, || {
                format!("ray {x:?}: {:?}", t.status)
            })?;
            rays += 1;
            let g = s.potential.gradient(&x).map_err(fail)?;
            let p = g.norm() / c;
            let (a1, a2) = (t.vertices[0], t.vertices[1]);
            let a0 = periscope::geometry::Point3::new(x.x + g.x, x.y + g.y, a1.z);
            let slope = (g.norm_squared() - c * c) / (2.0 * c * g.norm());
            slope_err = slope_err.max((segment_slope(&a1, &a2) - slope).abs());
            let sides = [
                ((a1 - a0).norm(), c * p),
                ((a2 - a1).norm(), c * (1.0 + p * p) / 2.0),
                ((a2 - a0).norm(), c * (1.0 - p * p).abs() / 2.0),
            ];
            for (got, want) in sides {
                side_err = side_err.max((got - want).abs() / want);
            }
            length_err = length_err.max(((a2 - a1).norm() - (a2.z - a0.z) - c).abs() / c);
        }
    }
    ensure(rays >= 4000 * 9 / 10, || format!("only {rays} usable rays"))?;
    ensure(slope_err <= 1e-10, || format!("slope error {slope_err:e}"))?;
    ensure(side_err <= 1e-9, || format!("relative side error {side_err:e}"))?;
    ensure(length_err <= 1e-9, || format!("path length error {length_err:e} c"))?;
    Ok(format!(
        "{rays} rays, slope {slope_err:.2e}, sides {side_err:.2e} rel, length {length_err:.2e} c"
    ))
}

fn criterion_5() -> Outcome {
    let (samples, _) = random_samples();
    let t = translation();
    let d = dilation();
    let mut worst: f64 = 0.0;
    for s in [&t, &d].into_iter().chain(samples.iter().take(20)) {
        let spec = TwoMirrorSpec {
            potential: s.potential.clone(),
            d1: s.d1.clone(),
            c: s.system.path_constant(),
            h: 0.0,
        };
        let r = periscope::two_mirror::legendre_check(&spec, 100).map_err(fail)?;
        ensure(r.evaluated >= 90, || format!("only {} samples evaluated", r.evaluated))?;
        worst = worst.max(r.residual);
    }
    ensure(worst <= 1e-9, || format!("Legendre residual {worst:e}"))?;
    Ok(format!("22 specs, residual {worst:.2e}"))
}

fn random_matrix(rng: &mut StdRng, entry: f64, det: (f64, f64)) -> Matrix2<f64> {
    loop {
        let m = Matrix2::from_fn(|_, _| rng.random_range(-entry..=entry));
        let d = m.determinant();
        if d >= det.0 && d <= det.1 {
            return m;
        }
    }
}

fn is_symmetric(m: &Matrix2<f64>) -> bool {
    m[(0, 1)] == m[(1, 0)]
}

fn criterion_6() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let (mut reassembly, mut agreement): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let f = random_matrix(&mut rng, 3.0, (-10.0, -1e-3));
        let (s1, s2) = factor_linear(&f).map_err(fail)?;
        ensure(is_symmetric(&s1) && is_symmetric(&s2), || {
            format!("asymmetric factors of {f}")
        })?;
        reassembly = reassembly.max((s2 * s1 - f).amax() / f.amax().max(1.0));

        let x0 = Point2::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
        let map = PlaneMap::linear(&f, Point2::zeros());
        let r = decompose_local(&map, &x0, 1e-8).map_err(|e| format!("{f}: {e}"))?;
        ensure(r.radius > 0.0, || "zero radius".into())?;
        let y0 = f * x0;
        for x in halton_points(&r.neighbourhood().map_err(fail)?, 16) {
            let hp = r.phi.hessian(&x).map_err(fail)?;
            let hu = r.u.hessian(&(f * x)).map_err(fail)?;
            agreement = agreement
                .max((hp - s1).amax())
                .max((hu * s2 - Matrix2::identity()).amax());
            let gp = r.phi.gradient(&x).map_err(fail)? - r.phi.gradient(&x0).map_err(fail)?;
            let gu = r.u.gradient(&(f * x)).map_err(fail)? - r.u.gradient(&y0).map_err(fail)?;
            agreement = agreement
                .max((gp - s1 * (x - x0)).norm())
                .max((gu - s1 * (x - x0)).norm());
        }
    }
    ensure(reassembly <= 1e-12, || format!("reassembly error {reassembly:e}"))?;
    ensure(agreement <= 1e-8, || {
        format!("decomposition disagrees with the factors by {agreement:e}")
    })?;
    Ok(format!(
        "1000 matrices, reassembly {reassembly:.2e}, factor agreement {agreement:.2e}"
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0007);
    let mut worst: f64 = 0.0;
    let mut min_radius = f64::INFINITY;
    for _ in 0..20 {
        let f = random_matrix(&mut rng, 2.0, (-4.0, -0.5));
        let mut e = || rng.random_range(-0.1..=0.1);
        let f1 = format!(
            "{}*x1 + {}*x2 + {}*x1^2 + {}*x1*x2 + {}*x2^3",
            f[(0, 0)],
            f[(0, 1)],
            e(),
            e(),
            e()
        );
        let f2 = format!(
            "{}*x1 + {}*x2 + {}*x2^2 + {}*x1^2*x2 + {}*x1^3",
            f[(1, 0)],
            f[(1, 1)],
            e(),
            e(),
            e()
        );
        let map = PlaneMap::expression(&f1, &f2).map_err(fail)?;
        let r = decompose_local(&map, &Point2::zeros(), 1e-6).map_err(|e| format!("({f1}; {f2}): {e}"))?;
        ensure(r.radius > 0.0 && r.residual <= 1e-6, || {
            format!("({f1}; {f2}): radius {} residual {:e}", r.radius, r.residual)
        })?;
        worst = worst.max(r.residual);
        min_radius = min_radius.min(r.radius);
    }
    let g = PlaneMap::glutsyuk();
    let disc = discriminant(&g.jacobian(&Point2::zeros()).map_err(fail)?);
    ensure(disc.abs() <= 1e-10, || format!("Glutsyuk discriminant {disc:e}"))?;
    match decompose_local(&g, &Point2::zeros(), 1e-6) {
        Err(Error::NotHyperbolic { .. }) => {}
        other => return Err(format!("Glutsyuk map not rejected: {other:?}")),
    }
    Ok(format!(
        "20 maps, residual {worst:.2e}, min radius {min_radius:.3e}; Glutsyuk rejected (discriminant {disc:.1e})"
    ))
}

fn pipeline_check(name: &str, s: &MirrorSystem, f: &PlaneMap, reflections: usize, tol: f64) -> Result<f64, String> {
    ensure(s.expected_reflections == reflections, || {
        format!("{name}: {} reflections expected", s.expected_reflections)
    })?;
    let r = verify_system(
        s,
        f,
        &VerifyOptions {
            samples: 500,
            map_tolerance: tol,
            ..VerifyOptions::default()
        },
    );
    ensure(r.passed, || format!("{name}: {}", r.summary()))?;
    ensure(r.reflection_histogram.keys().all(|&k| k == reflections), || {
        format!("{name}: histogram {:?}", r.reflection_histogram)
    })?;
    ensure(r.superfluous_count == 0, || format!("{name}: superfluous hits"))?;
    Ok(r.max_map_error)
}

fn criterion_8() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0008);
    let disc = Domain::disc(Point2::zeros(), 1.0).unwrap();
    let inner = Domain::disc(Point2::zeros(), 0.9).unwrap();
    let mut maps = vec![("sigma".to_string(), Matrix2::new(-1.0, 0.0, 0.0, 1.0))];
    for k in 0..2 {
        maps.push((format!("linear {k}"), random_matrix(&mut rng, 1.5, (-3.0, -0.3))));
    }
    let (mut four, mut partition): (f64, f64) = (0.0, 0.0);
    for (name, m) in &maps {
        let f = PlaneMap::linear(m, Point2::zeros());
        let one = realize_orientation_reversing(&f, &disc, 1).map_err(|e| format!("{name}: {e}"))?;
        let two = realize_orientation_reversing(&f, &disc, 2).map_err(|e| format!("{name}: {e}"))?;
        four = four.max(pipeline_check(name, &one, &f, 4, 1e-6)?);
        four = four.max(pipeline_check(name, &two, &f, 4, 1e-6)?);
        for x in halton_points(&inner, 200) {
            let a = trace_ray(&one, &x, 16).map_err(fail)?;
            let b = trace_ray(&two, &x, 16).map_err(fail)?;
            if a.status == TraceStatus::Ok && b.status == TraceStatus::Ok {
                partition = partition.max((a.exit_label - b.exit_label).norm());
            }
        }
    }
    ensure(partition <= 1e-6, || format!("partition dependence {partition:e}"))?;
    let d1 = Domain::disc(Point2::new(-3.0, 0.0), 1.0).unwrap();
    let t: f64 = 0.3;
    let mut six: f64 = 0.0;
    for (name, m) in [
        ("identity", Matrix2::identity()),
        ("rotation", Matrix2::new(t.cos(), -t.sin(), t.sin(), t.cos())),
    ] {
        let f = PlaneMap::linear(&m, Point2::zeros());
        let s = realize_orientation_preserving(&f, &d1, None).map_err(|e| format!("{name}: {e}"))?;
        six = six.max(pipeline_check(name, &s, &f, 6, 1e-5)?);
    }
    Ok(format!(
        "4 reflections error {four:.2e}, 6 reflections error {six:.2e}, partition dependence {partition:.2e}"
    ))
}

fn criterion_9() -> Outcome {
    let (mut beta_err, mut tan_err): (f64, f64) = (0.0, 0.0);
    for k in 0..10 {
        let c = k as f64 / 10.0;
        let cfg = EllipseConfig::new(c).map_err(fail)?;
        let want = (1.0 - c) / (1.0 + c);
        for a in sample_angles(100) {
            let b = pencil_map_angle(&cfg, a);
            let g = pencil_map_geometric(&cfg, a).map_err(fail)?;
            beta_err = beta_err.max((g - b).abs());
            tan_err = tan_err.max(((0.5 * a).tan() * (0.5 * b).tan() - want).abs());
        }
    }
    ensure(beta_err <= 1e-10, || {
        format!("geometric and closed-form angles differ by {beta_err:e}")
    })?;
    ensure(tan_err <= 1e-12, || format!("tangent product deviation {tan_err:e}"))?;
    Ok(format!(
        "1000 angles, beta {beta_err:.2e}, tangent product {tan_err:.2e}"
    ))
}

fn cli(args: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_periscope"))
        .args(args)
        .output()
        .map_err(fail)?;
    Ok((out.status.code().unwrap_or(-1), out.stdout))
}

fn cli_ok(args: &[&str]) -> Result<Vec<u8>, String> {
    let (code, stdout) = cli(args)?;
    ensure(code == 0, || {
        format!("`periscope {}` exited with {code}", args.join(" "))
    })?;
    Ok(stdout)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(fail)?
        .map(|e| {
            let e = e.map_err(fail)?;
            Ok((
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).map_err(fail)?,
            ))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(fail)?;
    let path = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();
    let fixtures: [(&str, Vec<&str>); 5] = [
        (
            "translation",
            vec![
                "synthesize",
                "--potential",
                "3*x1",
                "--domain",
                "disc:0,0,1",
                "--c",
                "2",
            ],
        ),
        (
            "dilation",
            vec!["synthesize", "--potential", "0.5*(x1^2+x2^2)", "--domain", "disc:3,0,1"],
        ),
        (
            "line",
            vec!["synthesize", "--potential", "0.5*x^2", "--domain", "interval:2,3"],
        ),
        (
            "four",
            vec!["realize", "--map", "linear:0,1,2,0", "--domain", "disc:0,0,1"],
        ),
        (
            "six",
            vec!["realize", "--map", "linear:1,0,0,1", "--domain", "disc:-3,0,1"],
        ),
    ];
    for (name, args) in &fixtures {
        for run in ["a", "b"] {
            let out = path(&format!("{name}_{run}.json"));
            let mut full = args.clone();
            if args[0] == "synthesize" {
                full.extend(["--samples", "200"]);
            }
            full.extend(["--out", out.as_str()]);
            cli_ok(&full)?;
        }
        let a = std::fs::read_to_string(path(&format!("{name}_a.json"))).map_err(fail)?;
        let b = std::fs::read_to_string(path(&format!("{name}_b.json"))).map_err(fail)?;
        ensure(a == b, || format!("{name}: scene differs between runs"))?;
        let doc = SceneDocument::parse(&a, SchemaMode::Strict).map_err(|e| format!("{name}: {e}"))?;
        let text = doc.to_json().map_err(fail)?;
        ensure(text == a, || format!("{name}: serialization is not a fixed point"))?;
        ensure(
            SceneDocument::parse(&text, SchemaMode::Strict).map_err(fail)? == doc,
            || format!("{name}: parse after serialize differs"),
        )?;

        let scene = path(&format!("{name}_a.json"));
        let (ea, eb) = (path(&format!("{name}_obj_a")), path(&format!("{name}_obj_b")));
        cli_ok(&["export", "--scene", &scene, "--out", &ea])?;
        cli_ok(&["export", "--scene", &scene, "--out", &eb])?;
        ensure(
            read_dir_sorted(Path::new(&ea))? == read_dir_sorted(Path::new(&eb))?,
            || format!("{name}: OBJ exports differ"),
        )?;
        let ta = cli_ok(&["trace", "--scene", &scene, "--samples", "50"])?;
        let tb = cli_ok(&["trace", "--scene", &scene, "--samples", "50"])?;
        ensure(ta == tb && !ta.is_empty(), || format!("{name}: trace CSV differs"))?;
    }
    let ea = cli_ok(&["ellipse", "--c", "0.5", "--samples", "100"])?;
    ensure(ea == cli_ok(&["ellipse", "--c", "0.5", "--samples", "100"])?, || {
        "ellipse CSV differs".into()
    })?;

    let scene = path("translation_a.json");
    let codes = [
        (0, cli(&["verify", "--scene", &scene, "--samples", "200"])?.0),
        (
            1,
            cli(&[
                "verify",
                "--scene",
                &scene,
                "--map",
                "translation:3.1,0",
                "--samples",
                "200",
            ])?
            .0,
        ),
        (2, cli(&["synthesize", "--potential", "3*x1"])?.0),
        (
            3,
            cli(&["realize", "--map", "glutsyuk", "--domain", "disc:0,0,0.5", "--force-4"])?.0,
        ),
    ];
    for (want, got) in codes {
        ensure(want == got, || format!("expected exit code {want}, got {got}"))?;
    }
    Ok(format!(
        "{} fixtures round-trip, exports deterministic, exit codes 0/1/2/3",
        fixtures.len()
    ))
}

fn main() {
    let criteria: [fn() -> Outcome; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (i, run) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({detail}) [{secs:.1} s]"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n}: FAIL ({detail}) [{secs:.1} s]");
            }
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
