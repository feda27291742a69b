//! Billiard tracing through mirror systems and the verification report.
//!
//! Every segment of a trajectory is tested against every patch, so any
//! contact beyond the scripted reflections is observed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::Point2;
use crate::error::{Error, Result};
use crate::geometry::{intersect_ray_patch, reflect3, Hit, Point3, Ray};
use crate::map::PlaneMap;
use crate::parallel::map_collect;
use crate::sampling::halton_points;
use crate::system::MirrorSystem;

pub const DEFAULT_MAX_BOUNCES: usize = 16;
/// Endpoint exclusion after a reflection, relative to the system diameter.
pub const ENDPOINT_EXCLUSION: f64 = 1e-9;
const VERTICAL_TOLERANCE: f64 = 1e-10;
/// Contacts this close to a mirror rim (relative to the system diameter)
/// are edge contacts.
pub const EDGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceStatus {
    Ok,
    Escaped,
    Superfluous,
    MaxBounces,
    NumericalFailure,
    /// Not ok, with a reflection point on the rim of a mirror.
    EdgeContact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperfluousHit {
    pub patch: String,
    pub point: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub entry_label: Point2,
    /// Reflection points in order.
    pub vertices: Vec<Point3>,
    /// Index of the patch hit at each vertex.
    pub patch_indices: Vec<usize>,
    pub exit_label: Point2,
    pub exit_direction: Point3,
    /// Optical path between the entry and exit planes minus their distance.
    pub path_length_shift: f64,
    pub superfluous_hits: Vec<SuperfluousHit>,
    pub status: TraceStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TraceResult {
    pub fn bounces(&self) -> usize {
        self.vertices.len()
    }

    /// The full polyline: entry point, reflections, exit point.
    pub fn polyline(&self, z_floor: f64, z_ceil: f64) -> Vec<Point3> {
        let mut out = Vec::with_capacity(self.vertices.len() + 2);
        out.push(Point3::new(self.entry_label.x, self.entry_label.y, z_floor));
        out.extend(self.vertices.iter().cloned());
        out.push(Point3::new(self.exit_label.x, self.exit_label.y, z_ceil));
        out
    }
}

fn nearest_hit(system: &MirrorSystem, ray: &Ray, t_min: f64) -> Result<Option<(usize, Hit)>> {
    let mut best: Option<(usize, Hit)> = None;
    for (i, p) in system.patches.iter().enumerate() {
        let hit = intersect_ray_patch(ray, p, t_min).map_err(|e| match e {
            Error::NumericalFailure(m) => {
                Error::NumericalFailure(format!("patch {} on segment from {:?}: {m}", p.id, ray.origin))
            }
            other => other,
        })?;
        if let Some(h) = hit {
            if best.as_ref().is_none_or(|(_, b)| h.t < b.t) {
                best = Some((i, h));
            }
        }
    }
    Ok(best)
}

/// Traces the vertical ray entering at `x` until it leaves upward, runs
/// out of bounces, or escapes.
pub fn trace_ray(system: &MirrorSystem, x: &Point2, max_bounces: usize) -> Result<TraceResult> {
    let scale = system.diameter();
    if !system.entry_domain.contains(x, 1e-9 * scale) {
        return Err(Error::TraceFailure {
            label: *x,
            detail: "entry label outside the entry domain".into(),
        });
    }
    let x = if system.dimension() == 1 {
        Point2::new(x.x, 0.0)
    } else {
        *x
    };
    let (z_floor, z_ceil) = system.planes();
    let eps = ENDPOINT_EXCLUSION * scale;
    let mut ray = Ray::vertical(&x, z_floor);
    let mut t_min = 0.0;
    let mut vertices = Vec::new();
    let mut patch_indices = Vec::new();
    let mut length = 0.0;
    while let Some((i, hit)) = nearest_hit(system, &ray, t_min)? {
        length += hit.t;
        vertices.push(hit.point);
        patch_indices.push(i);
        let dir = reflect3(&ray.direction, &hit.normal)?;
        ray = Ray {
            origin: hit.point,
            direction: dir,
        };
        t_min = eps;
        if vertices.len() > max_bounces {
            break;
        }
    }
    let d = ray.direction;
    let (exit_label, shift) = if d.z > 0.0 {
        let t = (z_ceil - ray.origin.z) / d.z;
        let p = ray.at(t);
        length += t;
        (Point2::new(p.x, p.y), length - (z_ceil - z_floor))
    } else {
        (Point2::new(ray.origin.x, ray.origin.y), f64::NAN)
    };
    let expected = system.expected_reflections;
    let superfluous_hits: Vec<SuperfluousHit> = vertices
        .iter()
        .zip(&patch_indices)
        .skip(expected)
        .map(|(p, &i)| SuperfluousHit {
            patch: system.patches[i].id.clone(),
            point: *p,
        })
        .collect();
    let vertical = (d - Point3::new(0.0, 0.0, 1.0)).norm() <= VERTICAL_TOLERANCE;
    let edge = vertices.iter().zip(&patch_indices).any(|(p, &i)| {
        !system.patches[i]
            .domain
            .contains(&Point2::new(p.x, p.y), -EDGE_TOLERANCE * scale)
    });
    let status = if vertices.len() > max_bounces {
        TraceStatus::MaxBounces
    } else if !superfluous_hits.is_empty() {
        TraceStatus::Superfluous
    } else if !vertical || vertices.len() < expected {
        TraceStatus::Escaped
    } else {
        TraceStatus::Ok
    };
    let status = if status != TraceStatus::Ok && edge {
        TraceStatus::EdgeContact
    } else {
        status
    };
    Ok(TraceResult {
        entry_label: x,
        vertices,
        patch_indices,
        exit_label,
        exit_direction: d,
        path_length_shift: shift,
        superfluous_hits,
        status,
        detail: None,
    })
}

/// Traces all labels, in parallel when enabled; output order matches input.
pub fn trace_all(system: &MirrorSystem, labels: &[Point2], max_bounces: usize) -> Vec<Result<TraceResult>> {
    map_collect(labels, |x| trace_ray(system, x, max_bounces))
}

/// Low-discrepancy interior samples followed by boundary corners and
/// midpoints.
pub fn sample_labels(system: &MirrorSystem, samples: usize) -> Vec<Point2> {
    let mut pts = halton_points(&system.entry_domain, samples);
    pts.extend(system.entry_domain.corners_and_midpoints());
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub samples: usize,
    pub map_tolerance: f64,
    /// Bound on `max tau - min tau`; `None` skips the check (piecewise
    /// systems carry one constant per piece).
    pub spread_tolerance: Option<f64>,
    pub max_bounces: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 1000,
            map_tolerance: 1e-8,
            spread_tolerance: None,
            max_bounces: DEFAULT_MAX_BOUNCES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub sample_count: usize,
    pub expected_reflections: usize,
    pub max_map_error: f64,
    pub mean_path_shift: f64,
    pub path_constant_spread: f64,
    pub reflection_histogram: BTreeMap<usize, usize>,
    pub superfluous_count: usize,
    pub boundary_ambiguous: usize,
    /// Rays that touched a mirror rim; excluded from the other statistics.
    pub edge_contacts: Vec<Point2>,
    pub failure_count: usize,
    /// The first few failing traces.
    pub failures: Vec<TraceResult>,
    pub options: VerifyOptions,
    pub passed: bool,
}

const STORED_FAILURES: usize = 20;

impl VerificationReport {
    pub fn summary(&self) -> String {
        let s = format!(
            "{} rays, max map error {:.3e}, tau spread {:.3e}, histogram {:?}, {} failures, {} superfluous, {} edge contacts",
            self.sample_count,
            self.max_map_error,
            self.path_constant_spread,
            self.reflection_histogram,
            self.failure_count,
            self.superfluous_count,
            self.edge_contacts.len()
        );
        match self.failures.first() {
            Some(t) => format!(
                "{s}; first failure at ({}, {}): {:?} {}",
                t.entry_label.x,
                t.entry_label.y,
                t.status,
                t.detail.as_deref().unwrap_or("")
            ),
            None => s,
        }
    }
}

/// Traces the sample and checks the realized map, reflection count and
/// path-length constancy. Trace failures are recorded, never raised.
pub fn verify_system(system: &MirrorSystem, expected: &PlaneMap, opts: &VerifyOptions) -> VerificationReport {
    let labels = sample_labels(system, opts.samples.max(1));
    let traces = trace_all(system, &labels, opts.max_bounces);
    let scale = system.diameter();
    let ambiguity = 1e-7 * scale;

    let errors: Vec<(f64, bool)> = map_collect(&traces, |t| match t {
        Ok(t) if t.status == TraceStatus::Ok => {
            let cands = expected.candidates(&t.entry_label, ambiguity);
            let ambiguous = cands.len() > 1;
            let err = cands
                .iter()
                .filter_map(|m| m.apply(&t.entry_label).ok())
                .map(|y| (y - t.exit_label).norm())
                .fold(f64::INFINITY, f64::min);
            (err, ambiguous)
        }
        _ => (f64::INFINITY, false),
    });

    let mut hist = BTreeMap::new();
    let mut max_err: f64 = 0.0;
    let (mut tau_min, mut tau_max, mut tau_sum, mut tau_n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    let mut failures = Vec::new();
    let mut failure_count = 0;
    let mut superfluous = 0;
    let mut ambiguous = 0;
    let mut edge_contacts = Vec::new();
    for ((t, (err, amb)), label) in traces.into_iter().zip(errors).zip(&labels) {
        let t = match t {
            Ok(t) => t,
            Err(e) => TraceResult {
                entry_label: *label,
                vertices: vec![],
                patch_indices: vec![],
                exit_label: Point2::zeros(),
                exit_direction: Point3::zeros(),
                path_length_shift: f64::NAN,
                superfluous_hits: vec![],
                status: TraceStatus::NumericalFailure,
                detail: Some(e.to_string()),
            },
        };
        if t.status == TraceStatus::EdgeContact {
            edge_contacts.push(t.entry_label);
            continue;
        }
        *hist.entry(t.bounces()).or_insert(0) += 1;
        superfluous += t.superfluous_hits.len();
        if amb {
            ambiguous += 1;
        }
        if t.status == TraceStatus::Ok {
            max_err = max_err.max(err);
            let tau = t.path_length_shift;
            tau_min = tau_min.min(tau);
            tau_max = tau_max.max(tau);
            tau_sum += tau;
            tau_n += 1;
        } else {
            max_err = f64::INFINITY;
        }
        if t.status != TraceStatus::Ok || !(err <= opts.map_tolerance) {
            failure_count += 1;
            if failures.len() < STORED_FAILURES {
                failures.push(t);
            }
        }
    }
    let spread = if tau_n > 0 { tau_max - tau_min } else { f64::NAN };
    let spread_ok = opts.spread_tolerance.is_none_or(|tol| spread <= tol);
    let passed = failure_count == 0
        && max_err <= opts.map_tolerance
        && spread_ok
        && hist.keys().all(|&k| k == system.expected_reflections);
    VerificationReport {
        sample_count: labels.len(),
        expected_reflections: system.expected_reflections,
        max_map_error: max_err,
        mean_path_shift: if tau_n > 0 { tau_sum / tau_n as f64 } else { f64::NAN },
        path_constant_spread: spread,
        reflection_histogram: hist,
        superfluous_count: superfluous,
        boundary_ambiguous: ambiguous,
        edge_contacts,
        failure_count,
        failures,
        options: opts.clone(),
        passed,
    }
}

/// Mean and spread of the path-length shift over the sample.
pub fn measure_time_shift(system: &MirrorSystem, samples: usize) -> Result<(f64, f64)> {
    if system.patches.is_empty() {
        return Ok((0.0, 0.0));
    }
    let labels = sample_labels(system, samples);
    let mut taus = Vec::with_capacity(labels.len());
    for t in trace_all(system, &labels, DEFAULT_MAX_BOUNCES) {
        let t = t?;
        if t.status != TraceStatus::Ok {
            return Err(Error::TraceFailure {
                label: t.entry_label,
                detail: format!("status {:?}", t.status),
            });
        }
        taus.push(t.path_length_shift);
    }
    let mean = taus.iter().sum::<f64>() / taus.len() as f64;
    let lo = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = taus.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean, hi - lo))
}
