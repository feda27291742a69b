//! Two-mirror periscopes for gradient maps `x -> x + grad G(x)`.
//!
//! The first mirror is `Phi1 = G/c + h` over `D1`. The second mirror sits
//! over `D2 = (id + grad G)(D1)` at height
//! `Phi2(x + g) = Phi1(x) + (|g|^2 - c^2) / (2c)` with `g = grad G(x)`.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Point2};
use crate::error::{Error, Result};
use crate::field::{ScalarField, SecondMirrorField};
use crate::map::{image_domain, orientation_check, Orientation, PlaneMap};
use crate::sampling::halton_points;
use crate::system::{MirrorPatch, MirrorSystem, PatchGroup};
use crate::verifier::{trace_all, verify_system, TraceStatus, VerificationReport, VerifyOptions};

/// Headroom applied to the sampled supremum of `|g|`.
pub const SUP_SAFETY: f64 = 1.05;
pub const MAX_ESCALATIONS: usize = 4;
const IMAGE_SAMPLES: usize = 256;

/// `2 sqrt(3) M`: the default path constant for a displacement bound `M`.
pub fn path_constant_for_bound(m: f64) -> f64 {
    2.0 * 3f64.sqrt() * m
}

fn sup_norm(g: &PlaneMap, d1: &Domain) -> Result<f64> {
    let mut pts = d1.grid_points(64);
    pts.extend(d1.boundary_points(256));
    pts.extend(d1.corners_and_midpoints());
    let mut m: f64 = 0.0;
    for p in &pts {
        m = m.max(g.apply(p)?.norm());
    }
    Ok(m)
}

/// Path constant for the displacement field `g` on `d1`:
/// `2 sqrt(3) * 1.05 * sup |g|`.
pub fn choose_path_constant(g: &PlaneMap, d1: &Domain) -> Result<f64> {
    let m = sup_norm(g, d1)?;
    if m == 0.0 {
        return Err(Error::ZeroDisplacement);
    }
    Ok(path_constant_for_bound(SUP_SAFETY * m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub verify: VerifyOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            verify: VerifyOptions {
                samples: 200,
                ..VerifyOptions::default()
            },
        }
    }
}

/// The two mirrors for one gradient piece, unverified.
fn build_pair(
    g: &ScalarField,
    d1: &Domain,
    d2: &Domain,
    c: f64,
    h: f64,
    ids: (&str, &str),
) -> Result<[MirrorPatch; 2]> {
    let phi1 = g.clone().scaled(1.0 / c).shifted(h);
    let phi2 = ScalarField::SecondMirror(Box::new(SecondMirrorField {
        potential: g.clone(),
        c,
        h,
        source: d1.clone(),
    }));
    Ok([
        MirrorPatch::new(ids.0, d1.clone(), phi1)?,
        MirrorPatch::new(ids.1, d2.clone(), phi2)?,
    ])
}

/// Image of `d1` under `id + grad G`, checked to be a diffeomorphic,
/// convex image with interior disjoint from `d1`.
pub fn image_of(g: &ScalarField, d1: &Domain) -> Result<Domain> {
    let f = PlaneMap::displacement(g.clone());
    let check = orientation_check(&f, d1, 32)?;
    if check.orientation == Orientation::Mixed {
        let p = check.degenerate.or(check.negative).unwrap_or(d1.center());
        return Err(Error::SingularJacobian { point: p });
    }
    let d2 = image_domain(&f, d1, IMAGE_SAMPLES)?;
    let tol = 1e-9 * (d1.diameter() + d2.diameter());
    if !d1.interiors_disjoint(&d2, tol) {
        return Err(Error::DomainsNotDisjoint);
    }
    Ok(d2)
}

fn escalation_needed(report: &VerificationReport) -> bool {
    report.failures.iter().any(|t| {
        matches!(
            t.status,
            TraceStatus::Superfluous | TraceStatus::Escaped | TraceStatus::MaxBounces
        )
    })
}

/// Two-mirror system realizing `x -> x + grad G(x)` on `d1`.
///
/// Without an explicit `c` the default constant is used and doubled (up
/// to four times) while verification observes stray contacts.
pub fn synthesize_two_mirror(g: &ScalarField, d1: &Domain, c: Option<f64>, h: Option<f64>) -> Result<MirrorSystem> {
    synthesize_two_mirror_with(g, d1, c, h, &SynthesisOptions::default())
}

pub fn synthesize_two_mirror_with(
    g: &ScalarField,
    d1: &Domain,
    c: Option<f64>,
    h: Option<f64>,
    opts: &SynthesisOptions,
) -> Result<MirrorSystem> {
    let d2 = image_of(g, d1)?;
    let f = PlaneMap::displacement(g.clone());
    let h = h.unwrap_or(0.0);
    let auto = c.is_none();
    let mut c = match c {
        Some(c) if c > 0.0 => c,
        Some(c) => {
            return Err(Error::PathConstantTooSmall {
                c,
                detail: "path constant must be positive".into(),
            })
        }
        None => choose_path_constant(&f, d1)?,
    };
    let mut attempt = 0;
    loop {
        let [p1, p2] = build_pair(g, d1, &d2, c, h, ("phi1", "phi2"))?;
        let system = MirrorSystem {
            patches: vec![p1, p2],
            groups: vec![PatchGroup {
                name: "pair".into(),
                patches: vec![0, 1],
                path_constant: c,
            }],
            expected_reflections: 2,
            entry_domain: d1.clone(),
            exit_domain: d2.clone(),
            expected_map: Some(f.clone()),
        };
        let mut vopts = opts.verify.clone();
        vopts.spread_tolerance = Some(1e-9 * c.max(1.0));
        let report = verify_system(&system, &f, &vopts);
        if report.passed {
            return Ok(system);
        }
        if auto && attempt < MAX_ESCALATIONS && escalation_needed(&report) {
            attempt += 1;
            c *= 2.0;
            continue;
        }
        if escalation_needed(&report) {
            return Err(Error::PathConstantTooSmall {
                c,
                detail: report.summary(),
            });
        }
        return Err(Error::VerificationFailed(report.summary()));
    }
}

/// Data of a two-mirror construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoMirrorSpec {
    pub potential: ScalarField,
    pub d1: Domain,
    pub c: f64,
    pub h: f64,
}

impl TwoMirrorSpec {
    pub fn phi1(&self) -> ScalarField {
        self.potential.clone().scaled(1.0 / self.c).shifted(self.h)
    }

    pub fn phi2(&self) -> ScalarField {
        ScalarField::SecondMirror(Box::new(SecondMirrorField {
            potential: self.potential.clone(),
            c: self.c,
            h: self.h,
            source: self.d1.clone(),
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientRecovery {
    pub c: f64,
    pub potential: ScalarField,
    /// `max |g - c grad Phi1|` over the traced sample.
    pub residual: f64,
    /// Spread of the traced path-length shifts and the declared constant.
    pub spread: f64,
    /// Sampled rays that did not make exactly two reflections.
    pub lost_rays: usize,
    /// Two-reflection rays that left the system off vertical.
    #[serde(default)]
    pub oblique_rays: usize,
}

/// Reads a gradient map back from a two-mirror system by tracing:
/// `g(x)` is the exit label minus `x`, `c` the mean path-length shift.
pub fn recover_gradient(system: &MirrorSystem, samples: usize) -> Result<GradientRecovery> {
    let r = measure_recovery(system, samples)?;
    let c = r.c;
    if r.residual > 1e-6 * (1.0 + c) || r.spread > 1e-6 * (1.0 + c) || r.lost_rays > 0 || r.oblique_rays > 0 {
        return Err(Error::InconsistentSystem {
            residual: r.residual,
            spread: r.spread,
        });
    }
    Ok(r)
}

/// [`recover_gradient`] without the consistency gate.
pub fn measure_recovery(system: &MirrorSystem, samples: usize) -> Result<GradientRecovery> {
    if system.patches.len() != 2 {
        return Err(Error::InvalidDomain(format!(
            "gradient recovery needs 2 patches, found {}",
            system.patches.len()
        )));
    }
    let phi1 = &system.patches[0].height;
    let labels = halton_points(&system.entry_domain, samples);
    let mut taus = Vec::with_capacity(labels.len());
    let mut residual: f64 = 0.0;
    let mut data = Vec::with_capacity(labels.len());
    let mut lost_rays = 0;
    let mut oblique_rays = 0;
    for t in trace_all(system, &labels, 4) {
        let t = t?;
        let upward = t.exit_direction.z > 0.0;
        if t.bounces() != 2 || !upward || !matches!(t.status, TraceStatus::Ok | TraceStatus::Escaped) {
            lost_rays += 1;
            continue;
        }
        if t.status == TraceStatus::Escaped {
            oblique_rays += 1;
        }
        taus.push(t.path_length_shift);
        data.push((t.entry_label, t.exit_label - t.entry_label));
    }
    if taus.is_empty() {
        return Err(Error::TraceFailure {
            label: system.entry_domain.center(),
            detail: "no sampled ray made two reflections".into(),
        });
    }
    let c = taus.iter().sum::<f64>() / taus.len() as f64;
    for (x, g) in &data {
        let mut grad = phi1.gradient(x)?;
        if system.dimension() == 1 {
            grad.y = 0.0;
        }
        residual = residual.max((g - grad * c).norm());
    }
    let declared = system.path_constant();
    let mut lo = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hi = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if declared > 0.0 {
        lo = lo.min(declared);
        hi = hi.max(declared);
    }
    let center = system.entry_domain.center();
    let potential = phi1.clone().shifted(-phi1.value(&center)?).scaled(c);
    Ok(GradientRecovery {
        c,
        potential,
        residual,
        spread: hi - lo,
        lost_rays,
        oblique_rays,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendreReport {
    pub residual: f64,
    pub evaluated: usize,
    /// Samples whose reflected point fell outside the second mirror.
    pub skipped: Vec<Point2>,
}

/// Checks that `Psi1(x) = -|x|^2/2 + c^2/4 - c Phi1(x)` and
/// `Psi2(y) = -|y|^2/2 + c^2/4 + c Phi2(-y)` are Legendre dual with
/// `y = -x - g(x)`.
pub fn legendre_check(spec: &TwoMirrorSpec, samples: usize) -> Result<LegendreReport> {
    let d2 = image_of(&spec.potential, &spec.d1)?;
    legendre_residual(
        &spec.potential,
        &spec.phi1(),
        &spec.phi2(),
        &d2,
        spec.c,
        &spec.d1,
        samples,
    )
}

/// Legendre residual for explicit mirror heights.
pub fn legendre_residual(
    potential: &ScalarField,
    phi1: &ScalarField,
    phi2: &ScalarField,
    d2: &Domain,
    c: f64,
    d1: &Domain,
    samples: usize,
) -> Result<LegendreReport> {
    let mut residual: f64 = 0.0;
    let mut skipped = Vec::new();
    let mut evaluated = 0;
    let scale = d2.diameter();
    for x in halton_points(d1, samples) {
        let g = potential.gradient(&x)?;
        let y = -x - g;
        if !d2.contains(&-y, 1e-9 * scale) {
            skipped.push(x);
            continue;
        }
        let psi1 = -0.5 * x.norm_squared() + 0.25 * c * c - c * phi1.value(&x)?;
        let dpsi1: Vector2<f64> = -x - phi1.gradient(&x)? * c;
        let psi2 = -0.5 * y.norm_squared() + 0.25 * c * c + c * phi2.value(&-y)?;
        let r = (y - dpsi1).norm() + (psi2 - (x.dot(&y) - psi1)).abs();
        residual = residual.max(r);
        evaluated += 1;
    }
    Ok(LegendreReport {
        residual,
        evaluated,
        skipped,
    })
}

/// One gradient piece of a piecewise construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    /// `N_i`
    pub domain: Domain,
    /// `G_i`
    pub potential: ScalarField,
    /// Convex `N~_i` containing `N_i`.
    pub extended_domain: Domain,
    /// `G~_i`, equal to `G_i` on `N_i`.
    pub extended_potential: ScalarField,
    #[serde(default)]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    pub pieces: Vec<Piece>,
}

fn check_extension(i: usize, p: &Piece) -> Result<()> {
    let scale = p.extended_domain.diameter();
    let mut probe = p.domain.boundary_points(64);
    probe.extend(p.domain.corners_and_midpoints());
    if let Some(q) = probe.iter().find(|q| !p.extended_domain.contains(q, 1e-9 * scale)) {
        return Err(Error::ExtensionViolation {
            piece: i,
            detail: format!("{q:?} lies in N but not in the extended domain"),
        });
    }
    probe.extend(halton_points(&p.domain, 64));
    let v0 = p.potential.value(&p.domain.center())? - p.extended_potential.value(&p.domain.center())?;
    for q in &probe {
        let dv = p.potential.value(q)? - p.extended_potential.value(q)? - v0;
        let dg = (p.potential.gradient(q)? - p.extended_potential.gradient(q)?).norm();
        if dv.abs() > 1e-9 * (1.0 + scale) || dg > 1e-9 {
            return Err(Error::ExtensionViolation {
                piece: i,
                detail: format!("extension differs from the potential at {q:?}"),
            });
        }
    }
    image_of(&p.extended_potential, &p.extended_domain).map_err(|e| Error::ExtensionViolation {
        piece: i,
        detail: format!("extended image: {e}"),
    })?;
    Ok(())
}

/// Pairs of mirrors, one pair per piece, each pair below the previous.
pub fn synthesize_piecewise(spec: &PiecewiseSpec) -> Result<MirrorSystem> {
    synthesize_piecewise_with(spec, &SynthesisOptions::default())
}

pub fn synthesize_piecewise_with(spec: &PiecewiseSpec, opts: &SynthesisOptions) -> Result<MirrorSystem> {
    let n = spec.pieces.len();
    if n == 0 {
        return Err(Error::InvalidDomain("piecewise spec without pieces".into()));
    }
    let scale: f64 = spec.pieces.iter().map(|p| p.domain.diameter()).fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    for i in 0..n {
        for k in (i + 1)..n {
            if !spec.pieces[i].domain.interiors_disjoint(&spec.pieces[k].domain, tol) {
                return Err(Error::PieceOverlap {
                    first: i,
                    second: k,
                    detail: "pieces overlap".into(),
                });
            }
        }
    }
    for (i, p) in spec.pieces.iter().enumerate() {
        check_extension(i, p)?;
    }
    let mut images = Vec::with_capacity(n);
    for p in &spec.pieces {
        images.push(image_of(&p.extended_potential, &p.domain)?);
    }
    for i in 0..n {
        for k in 0..n {
            if k > i && !images[i].interiors_disjoint(&images[k], tol) {
                return Err(Error::PieceOverlap {
                    first: i,
                    second: k,
                    detail: "images overlap".into(),
                });
            }
            if !images[i].interiors_disjoint(&spec.pieces[k].domain, tol) {
                return Err(Error::PieceOverlap {
                    first: i,
                    second: k,
                    detail: format!("image of piece {i} meets piece {k}"),
                });
            }
        }
    }
    if n == 1 {
        let p = &spec.pieces[0];
        return synthesize_two_mirror_with(&p.extended_potential, &p.domain, p.c, None, opts);
    }

    let mut cs = Vec::with_capacity(n);
    for p in &spec.pieces {
        cs.push(match p.c {
            Some(c) => c,
            None => choose_path_constant(&PlaneMap::displacement(p.extended_potential.clone()), &p.domain)?,
        });
    }
    let expected = PlaneMap::Piecewise {
        pieces: spec
            .pieces
            .iter()
            .map(|p| crate::map::MapPiece {
                domain: p.domain.clone(),
                map: PlaneMap::displacement(p.extended_potential.clone()),
            })
            .collect(),
    };
    let entry = union_hull(spec.pieces.iter().map(|p| &p.domain))?;
    let exit = union_hull(images.iter())?;
    let mut attempt = 0;
    loop {
        let mut patches: Vec<MirrorPatch> = Vec::with_capacity(2 * n);
        let mut groups = Vec::with_capacity(n);
        let mut floor = 0.0;
        for (i, p) in spec.pieces.iter().enumerate() {
            let pair = build_pair(
                &p.extended_potential,
                &p.domain,
                &images[i],
                cs[i],
                0.0,
                (&format!("phi1.{i}"), &format!("phi2.{i}")),
            )?;
            let top = pair[0].bounds().z_max.max(pair[1].bounds().z_max);
            let bottom = pair[0].bounds().z_min.min(pair[1].bounds().z_min);
            // exact stacking: this pair's top sits one unit below the floor
            // of the pairs already placed
            let dz = if i == 0 { 0.0 } else { floor - 1.0 - top };
            floor = bottom + dz;
            groups.push(PatchGroup {
                name: format!("pair.{i}"),
                patches: vec![2 * i, 2 * i + 1],
                path_constant: cs[i],
            });
            patches.extend(pair.iter().map(|q| q.lifted(dz)));
        }
        let system = MirrorSystem {
            patches,
            groups,
            expected_reflections: 2,
            entry_domain: entry.clone(),
            exit_domain: exit.clone(),
            expected_map: Some(expected.clone()),
        };
        let report = verify_pieces(&system, spec, &expected, opts);
        if report.passed {
            return Ok(system);
        }
        if attempt < MAX_ESCALATIONS && escalation_needed(&report) {
            let mut changed = false;
            for (c, p) in cs.iter_mut().zip(&spec.pieces) {
                if p.c.is_none() {
                    *c *= 2.0;
                    changed = true;
                }
            }
            if changed {
                attempt += 1;
                continue;
            }
        }
        return Err(Error::VerificationFailed(report.summary()));
    }
}

/// Verification restricted to labels inside the pieces (the entry domain
/// of a piecewise system is only their convex hull).
fn verify_pieces(
    system: &MirrorSystem,
    spec: &PiecewiseSpec,
    expected: &PlaneMap,
    opts: &SynthesisOptions,
) -> VerificationReport {
    let per = (opts.verify.samples / spec.pieces.len()).max(16);
    let mut reports = Vec::new();
    for p in &spec.pieces {
        let mut sub = system.clone();
        sub.entry_domain = p.domain.clone();
        let mut vopts = opts.verify.clone();
        vopts.samples = per;
        reports.push(verify_system(&sub, expected, &vopts));
    }
    merge_reports(reports)
}

pub(crate) fn merge_reports(reports: Vec<VerificationReport>) -> VerificationReport {
    let mut it = reports.into_iter();
    let mut acc = it.next().expect("at least one report");
    let mut lo = acc.mean_path_shift - acc.path_constant_spread;
    let mut hi = acc.mean_path_shift + acc.path_constant_spread;
    for r in it {
        acc.sample_count += r.sample_count;
        acc.max_map_error = acc.max_map_error.max(r.max_map_error);
        for (k, v) in r.reflection_histogram {
            *acc.reflection_histogram.entry(k).or_insert(0) += v;
        }
        acc.superfluous_count += r.superfluous_count;
        acc.boundary_ambiguous += r.boundary_ambiguous;
        acc.edge_contacts.extend(r.edge_contacts);
        acc.failure_count += r.failure_count;
        acc.failures.extend(r.failures);
        acc.passed &= r.passed;
        lo = lo.min(r.mean_path_shift - r.path_constant_spread);
        hi = hi.max(r.mean_path_shift + r.path_constant_spread);
    }
    acc.path_constant_spread = acc.path_constant_spread.max(hi - lo);
    acc
}

pub(crate) fn union_hull<'a>(domains: impl Iterator<Item = &'a Domain>) -> Result<Domain> {
    let mut pts = Vec::new();
    let mut all: Vec<&Domain> = Vec::new();
    for d in domains {
        all.push(d);
        match d {
            Domain::Polygon { vertices } => pts.extend(vertices.iter().cloned()),
            Domain::Disc { .. } => {
                if let Domain::Polygon { vertices } = d.to_polygon(128)? {
                    pts.extend(vertices);
                }
            }
            Domain::Interval { .. } => {}
        }
    }
    if all.len() == 1 {
        return Ok(all[0].clone());
    }
    if all.iter().all(|d| d.dimension() == 1) {
        let lo = all.iter().map(|d| d.bbox().min.x).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(|d| d.bbox().max.x).fold(f64::NEG_INFINITY, f64::max);
        return Domain::interval(lo, hi);
    }
    Domain::polygon(crate::domain::convex_hull(&pts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_constant_formula() {
        assert!((path_constant_for_bound(1.0) - 2.0 * 3f64.sqrt()).abs() < 1e-15);
        let d = Domain::disc(Point2::zeros(), 1.0).unwrap();
        let g = PlaneMap::linear(&nalgebra::Matrix2::zeros(), Point2::new(3.0, 0.0));
        let c = choose_path_constant(&g, &d).unwrap();
        assert!((c - 10.911920087683925).abs() < 1e-9);
        let zero = PlaneMap::linear(&nalgebra::Matrix2::zeros(), Point2::zeros());
        assert!(matches!(choose_path_constant(&zero, &d), Err(Error::ZeroDisplacement)));
    }

    #[test]
    fn zero_potential_rejected() {
        let d = Domain::disc(Point2::zeros(), 1.0).unwrap();
        let r = synthesize_two_mirror(&ScalarField::constant(0.0), &d, None, None);
        assert!(matches!(r, Err(Error::DomainsNotDisjoint)));
    }
}
