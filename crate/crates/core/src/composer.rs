//! Four- and six-reflection systems assembled from two-mirror stages.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::decomposition::{decompose_local_with, DecomposeOptions};
use crate::domain::{Domain, Point2};
use crate::error::{Error, Result};
use crate::field::{ExprField, ScalarField};
use crate::map::{image_domain, orientation_check, Orientation, OrientationCheck, PlaneMap, ORIENTATION_GRID};
use crate::poly::Polynomial;
use crate::system::MirrorSystem;
use crate::two_mirror::{
    synthesize_piecewise_with, synthesize_two_mirror_with, union_hull, Piece, PiecewiseSpec, SynthesisOptions,
};
use crate::verifier::{verify_system, VerificationReport, VerifyOptions};

/// Vertical clearance between consecutive stages.
pub const STAGE_GAP: f64 = 1.0;
pub const MAX_REFINEMENTS: usize = 3;
/// The shift search gives up beyond this many scene diameters.
pub const SHIFT_SEARCH_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposeOptions {
    pub synthesis: SynthesisOptions,
    /// End-to-end check of the assembled system.
    pub verify: VerifyOptions,
    /// Use this shift of the intermediate domain instead of searching.
    pub force_shift: Option<Point2>,
    /// Neighbourhood tolerance for local decompositions.
    pub decomposition_tolerance: f64,
    /// Refuse maps of the wrong orientation before decomposing.
    pub check_orientation: bool,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            synthesis: SynthesisOptions::default(),
            verify: VerifyOptions {
                samples: 500,
                map_tolerance: 1e-6,
                spread_tolerance: None,
                max_bounces: 16,
            },
            force_shift: None,
            decomposition_tolerance: 1e-8,
            check_orientation: true,
        }
    }
}

/// Layout record of a composite construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositePlan {
    /// Stage names in beam order with the vertical offset applied to each.
    pub stages: Vec<(String, f64)>,
    pub intermediate_domains: Vec<Domain>,
    pub shift_vectors: Vec<Point2>,
}

#[derive(Debug, Clone)]
pub struct Composite {
    pub system: MirrorSystem,
    pub plan: CompositePlan,
    pub report: VerificationReport,
}

/// `G = phi - |x|^2 / 2`, so that `x + grad G = grad phi`.
pub fn displacement_potential(phi: &ScalarField) -> ScalarField {
    match phi.as_polynomial() {
        Some(p) => p.add(&half_square(p.center()).scaled(-1.0)).into(),
        None => phi.clone().plus(half_square(Point2::zeros()).scaled(-1.0).into()),
    }
}

/// `|x|^2 / 2` expanded at `c`.
fn half_square(c: Point2) -> Polynomial {
    Polynomial::quadratic(c, &Matrix2::identity(), &c, 0.5 * c.norm_squared())
}

/// `phi + b . x`
pub fn add_linear(phi: &ScalarField, b: &Point2) -> ScalarField {
    match phi.as_polynomial() {
        Some(p) => {
            let c = p.center();
            let lin =
                Polynomial::from_terms(c, &[(0, 0, b.dot(&c)), (1, 0, b.x), (0, 1, b.y)]).expect("linear polynomial");
            p.add(&lin).into()
        }
        None => phi.clone().affine(1.0, *b, 0.0),
    }
}

/// `y -> psi(y - b)`
pub fn translate_argument(psi: &ScalarField, b: &Point2) -> Result<ScalarField> {
    Ok(match psi {
        ScalarField::Polynomial(p) => {
            let p = p.polynomial();
            let terms: Vec<_> = p.terms().collect();
            Polynomial::from_terms(p.center() + b, &terms)?.into()
        }
        ScalarField::Affine {
            inner,
            scale,
            linear,
            constant,
        } => translate_argument(inner, b)?.affine(*scale, *linear, constant - linear.dot(b)),
        ScalarField::Sum { terms } => ScalarField::Sum {
            terms: terms.iter().map(|t| translate_argument(t, b)).collect::<Result<_>>()?,
        },
        ScalarField::Expression(e) => ScalarField::Expression(ExprField::parse(&substitute_shift(e.source(), b))?),
        _ => {
            return Err(Error::NoTaylorExpansion(
                "cannot translate the argument of this field kind".into(),
            ))
        }
    })
}

fn substitute_shift(src: &str, b: &Point2) -> String {
    let mut out = String::with_capacity(src.len() + 32);
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let ident: String = chars[start..i].iter().collect();
            match ident.as_str() {
                "x1" | "x" => out.push_str(&format!("(x1-({:?}))", b.x)),
                "x2" | "y" => out.push_str(&format!("(x2-({:?}))", b.y)),
                _ => out.push_str(&ident),
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

/// Lifts `s` so that its top sits at `-gap/2` (below) or its bottom at
/// `gap/2` (above). Returns the applied offset.
fn place(s: &MirrorSystem, above: bool) -> (MirrorSystem, f64) {
    let (lo, hi) = s.z_range();
    let dz = if above {
        0.5 * STAGE_GAP - lo
    } else {
        -0.5 * STAGE_GAP - hi
    };
    (s.lifted(dz), dz)
}

/// Smallest shift on a spiral grid moving `mid` clear of every domain in
/// `avoid`.
fn find_shift(mid: &Domain, avoid: &[&Domain], scene: f64) -> Result<Point2> {
    let tol = 1e-9 * scene;
    let clear = |b: &Point2| {
        let moved = mid.translated(b);
        avoid.iter().all(|d| moved.interiors_disjoint(d, tol))
    };
    if clear(&Point2::zeros()) {
        return Ok(Point2::zeros());
    }
    let step = 0.25 * scene;
    let mut ring = 1;
    while ring as f64 * step <= SHIFT_SEARCH_RADIUS * scene {
        let r = ring as f64 * step;
        let count = 8 * ring;
        for k in 0..count {
            let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            let b = Point2::new(r * a.cos(), r * a.sin());
            if clear(&b) {
                return Ok(b);
            }
        }
        ring += 1;
    }
    Err(Error::NoValidShift)
}

/// Four mirrors realizing `grad psi o grad phi` on `d1`.
pub fn compose_four_mirror(phi: &ScalarField, psi: &ScalarField, d1: &Domain) -> Result<MirrorSystem> {
    Ok(compose_four_mirror_with(phi, psi, d1, &ComposeOptions::default())?.system)
}

pub fn compose_four_mirror_with(
    phi: &ScalarField,
    psi: &ScalarField,
    d1: &Domain,
    opts: &ComposeOptions,
) -> Result<Composite> {
    let grad_phi = PlaneMap::gradient(phi.clone());
    let grad_psi = PlaneMap::gradient(psi.clone());
    let mid = image_domain(&grad_phi, d1, 256)?;
    let d2 = image_domain(&grad_psi, &mid, 256)?;
    let scene = d1.bbox().union(&mid.bbox()).union(&d2.bbox()).diagonal();
    let b = match opts.force_shift {
        Some(b) => b,
        None => find_shift(&mid, &[d1, &d2], scene)?,
    };
    let phi_b = add_linear(phi, &b);
    let psi_b = translate_argument(psi, &b)?;
    let mid_b = mid.translated(&b);

    let first =
        synthesize_two_mirror_with(&displacement_potential(&phi_b), d1, None, None, &opts.synthesis)?.prefixed("phi.");
    let second = synthesize_two_mirror_with(&displacement_potential(&psi_b), &mid_b, None, None, &opts.synthesis)?
        .prefixed("psi.");
    let (first, dz1) = place(&first, false);
    let (second, dz2) = place(&second, true);
    let mut system = first.then(&second);
    let expected = PlaneMap::compose(grad_psi, grad_phi);
    system.expected_map = Some(expected.clone());
    let report = verify_system(&system, &expected, &opts.verify);
    if !report.passed {
        return Err(Error::VerificationFailed(report.summary()));
    }
    Ok(Composite {
        system,
        plan: CompositePlan {
            stages: vec![("phi".into(), dz1), ("psi".into(), dz2)],
            intermediate_domains: vec![mid_b],
            shift_vectors: vec![b],
        },
        report,
    })
}

fn require_orientation(f: &PlaneMap, d1: &Domain, expected: Orientation) -> Result<()> {
    if d1.dimension() != 2 {
        return Err(Error::InvalidDomain(
            "composite systems need a planar cross-section".into(),
        ));
    }
    let check = orientation_check(f, d1, ORIENTATION_GRID)?;
    let found = check.orientation;
    if found != expected {
        let detail = match found {
            Orientation::Mixed => mixed_detail(&check),
            Orientation::Preserving => "use the orientation-preserving pipeline".into(),
            Orientation::Reversing => "use the orientation-reversing pipeline".into(),
        };
        return Err(Error::WrongOrientation {
            expected: format!("{expected:?}").to_lowercase(),
            found: format!("{found:?}").to_lowercase(),
            detail,
        });
    }
    Ok(())
}

/// Names a sample point of each Jacobian sign.
pub fn mixed_detail(check: &OrientationCheck) -> String {
    let show = |p: Option<Point2>| p.map_or("none".to_string(), |p| format!("({}, {})", p.x, p.y));
    format!(
        "det J > 0 at {}, det J < 0 at {}, det J = 0 at {}",
        show(check.positive),
        show(check.negative),
        show(check.degenerate)
    )
}

/// Cells of a `partition x partition` grid over the bounding box of `d1`.
fn cells(d1: &Domain, partition: usize) -> Vec<Domain> {
    if partition <= 1 {
        return vec![d1.clone()];
    }
    let bb = d1.bbox();
    let size = (bb.max - bb.min) / partition as f64;
    let mut out = Vec::new();
    for j in 0..partition {
        for i in 0..partition {
            let lo = bb.min + Point2::new(size.x * i as f64, size.y * j as f64);
            let hi = lo + size;
            if let Some(c) = d1.clip_to_box(lo, hi) {
                if c.diameter() > 1e-9 * bb.diagonal() {
                    out.push(c);
                }
            }
        }
    }
    out
}

fn circumradius(d: &Domain) -> f64 {
    let c = d.center();
    let mut pts = d.boundary_points(64);
    pts.extend(d.corners_and_midpoints());
    pts.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
}

struct CellData {
    cell: Domain,
    phi: ScalarField,
    u: ScalarField,
    image: Domain,
    mid: Domain,
}

fn decompose_cells(f: &PlaneMap, d1: &Domain, partition: usize, tol: f64) -> Result<Option<Vec<CellData>>> {
    let mut out = Vec::new();
    for (k, cell) in cells(d1, partition).into_iter().enumerate() {
        let center = cell.center();
        let need = circumradius(&cell) * (1.0 + 1e-9);
        let opts = DecomposeOptions {
            tolerance: tol,
            initial_radius: Some(need),
            ..DecomposeOptions::default()
        };
        let r = match decompose_local_with(f, &center, &opts) {
            Ok(r) => r,
            Err(Error::RadiusUnderflow { .. }) => return Ok(None),
            Err(e) => {
                return Err(Error::CellDecomposition {
                    cell: k,
                    source: Box::new(e),
                })
            }
        };
        if r.radius < need {
            return Ok(None);
        }
        let mid = image_domain(&PlaneMap::gradient(r.phi.clone()), &cell, 256)?;
        let image = image_domain(f, &cell, 256)?;
        out.push(CellData {
            cell,
            phi: r.phi,
            u: r.u,
            image,
            mid,
        });
    }
    Ok(Some(out))
}

/// Four reflections realizing an orientation-reversing `f` on `d1`,
/// from one local decomposition per cell.
pub fn realize_orientation_reversing(f: &PlaneMap, d1: &Domain, partition: usize) -> Result<MirrorSystem> {
    Ok(realize_orientation_reversing_with(f, d1, partition, &ComposeOptions::default())?.system)
}

pub fn realize_orientation_reversing_with(
    f: &PlaneMap,
    d1: &Domain,
    partition: usize,
    opts: &ComposeOptions,
) -> Result<Composite> {
    if opts.check_orientation {
        require_orientation(f, d1, Orientation::Reversing)?;
    }
    let mut n = partition.max(1);
    let mut data = None;
    for _ in 0..=MAX_REFINEMENTS {
        if let Some(d) = decompose_cells(f, d1, n, opts.decomposition_tolerance)? {
            data = Some(d);
            break;
        }
        n *= 2;
    }
    let data = data.ok_or_else(|| Error::PartitionTooCoarse {
        refinements: MAX_REFINEMENTS,
        detail: format!("cells of a {n}x{n} grid exceed the decomposition radii"),
    })?;

    // mid domains on a column far above the scene, one slot each
    let image = image_domain(f, d1, 256)?;
    let mut span = d1.bbox().union(&image.bbox()).diagonal();
    for c in &data {
        span = span.max(c.mid.bbox().diagonal());
    }
    let s = 2.0 * span;
    let base = d1.bbox().union(&image.bbox()).center();
    let mut phi_pieces = Vec::with_capacity(data.len());
    let mut u_pieces = Vec::with_capacity(data.len());
    let mut shifts = Vec::with_capacity(data.len());
    let mut mids = Vec::with_capacity(data.len());
    for (k, c) in data.iter().enumerate() {
        let target = base + Point2::new(0.0, (2 + k) as f64 * s);
        let b = target - c.mid.bbox().center();
        let phi_g = displacement_potential(&add_linear(&c.phi, &b));
        let u_g = displacement_potential(&add_linear(&c.u, &b));
        phi_pieces.push(Piece {
            domain: c.cell.clone(),
            potential: phi_g.clone(),
            extended_domain: c.cell.clone(),
            extended_potential: phi_g,
            c: None,
        });
        u_pieces.push(Piece {
            domain: c.image.clone(),
            potential: u_g.clone(),
            extended_domain: c.image.clone(),
            extended_potential: u_g,
            c: None,
        });
        shifts.push(b);
        mids.push(c.mid.translated(&b));
    }
    let c_phi = synthesize_piecewise_with(&PiecewiseSpec { pieces: phi_pieces }, &opts.synthesis)?.prefixed("phi.");
    let c_u = synthesize_piecewise_with(&PiecewiseSpec { pieces: u_pieces }, &opts.synthesis)?;
    let (c_phi, dz1) = place(&c_phi, false);
    let (c_u, dz_u) = place(&c_u, false);
    let c_psi = c_u.inverted().prefixed("psi.");
    let mut system = c_phi.then(&c_psi);
    system.entry_domain = d1.clone();
    system.exit_domain = union_hull(data.iter().map(|c| &c.image))?;
    system.expected_map = Some(f.clone());
    let report = verify_system(&system, f, &opts.verify);
    if !report.passed {
        return Err(Error::VerificationFailed(report.summary()));
    }
    Ok(Composite {
        system,
        plan: CompositePlan {
            stages: vec![("phi".into(), dz1), ("psi".into(), -dz_u)],
            intermediate_domains: mids,
            shift_vectors: shifts,
        },
        report,
    })
}

/// Six reflections realizing an orientation-preserving `f` on `d1`: a
/// flip in a line beside `d1` by two parabolic cylinders, then the
/// reversing construction for `f` composed with that flip.
pub fn realize_orientation_preserving(f: &PlaneMap, d1: &Domain, flip_c: Option<f64>) -> Result<MirrorSystem> {
    Ok(realize_orientation_preserving_with(f, d1, flip_c, 1, &ComposeOptions::default())?.system)
}

/// Abscissa of the flip axis: a quarter diameter right of `d1`.
pub fn flip_axis(d1: &Domain) -> f64 {
    d1.bbox().max.x + 0.25 * d1.diameter().max(1e-6)
}

/// The two-mirror flip stage `(x1, x2) -> (2a - x1, x2)` on `d1`.
pub fn flip_stage(d1: &Domain, a: f64, c: Option<f64>, opts: &SynthesisOptions) -> Result<MirrorSystem> {
    let g = Polynomial::from_terms(Point2::new(a, 0.0), &[(2, 0, -1.0)])?.into();
    synthesize_two_mirror_with(&g, d1, c, None, opts)
}

pub fn realize_orientation_preserving_with(
    f: &PlaneMap,
    d1: &Domain,
    flip_c: Option<f64>,
    partition: usize,
    opts: &ComposeOptions,
) -> Result<Composite> {
    require_orientation(f, d1, Orientation::Preserving)?;
    let a = flip_axis(d1);
    let flip = PlaneMap::flip(a);
    let sigma = flip_stage(d1, a, flip_c, &opts.synthesis)?.prefixed("sigma.");
    let flipped = sigma.exit_domain.clone();
    let f_star = PlaneMap::compose(f.clone(), flip.clone());
    let rest = realize_orientation_reversing_with(&f_star, &flipped, partition, opts)?;
    let (lo, _) = rest.system.z_range();
    let (_, hi) = sigma.z_range();
    let dz = lo - STAGE_GAP - hi;
    let sigma = sigma.lifted(dz);
    let mut system = sigma.then(&rest.system);
    system.expected_map = Some(f.clone());
    let report = verify_system(&system, f, &opts.verify);
    if !report.passed {
        return Err(Error::VerificationFailed(report.summary()));
    }
    let mut plan = rest.plan;
    plan.stages.insert(0, ("sigma".into(), dz));
    plan.intermediate_domains.insert(0, flipped);
    Ok(Composite { system, plan, report })
}

/// The mirror image in `z = 0`, realizing the inverse map.
pub fn invert_system(system: &MirrorSystem) -> MirrorSystem {
    system.inverted()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_helpers_are_exact_for_polynomials() {
        let phi: ScalarField = ScalarField::parse("x1^2 + 3*x1*x2").unwrap();
        let g = displacement_potential(&phi);
        let x = Point2::new(0.3, -0.7);
        let want = phi.gradient(&x).unwrap() - x;
        assert!((g.gradient(&x).unwrap() - want).norm() < 1e-15);
        let b = Point2::new(2.0, -1.0);
        let l = add_linear(&phi, &b);
        assert!((l.gradient(&x).unwrap() - phi.gradient(&x).unwrap() - b).norm() < 1e-15);
        let t = translate_argument(&phi, &b).unwrap();
        assert!((t.value(&(x + b)).unwrap() - phi.value(&x).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn translate_expression_argument() {
        let psi = ScalarField::parse("exp(x) + sin(y)").unwrap();
        let b = Point2::new(0.5, -0.25);
        let t = translate_argument(&psi, &b).unwrap();
        let x = Point2::new(0.1, 0.2);
        assert!((t.value(&(x + b)).unwrap() - psi.value(&x).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn shift_search_clears_obstacles() {
        let d1 = Domain::disc(Point2::zeros(), 1.0).unwrap();
        let mid = Domain::disc(Point2::new(0.5, 0.0), 1.0).unwrap();
        let b = find_shift(&mid, &[&d1], 4.0).unwrap();
        assert!(b.norm() > 0.0);
        assert!(mid.translated(&b).interiors_disjoint(&d1, 1e-9));
    }

    #[test]
    fn wrong_orientation_is_reported() {
        let d1 = Domain::disc(Point2::zeros(), 1.0).unwrap();
        let e = realize_orientation_reversing(&PlaneMap::identity(), &d1, 1).unwrap_err();
        assert!(matches!(e, Error::WrongOrientation { .. }));
    }
}
