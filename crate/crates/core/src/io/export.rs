//! Plain-data exports: OBJ meshes of mirrors and CSV tables of rays.

use std::fmt::Write as _;

use crate::domain::{Domain, Point2};
use crate::ellipse::{pencil_table, EllipseConfig};
use crate::error::{Error, Result};
use crate::system::{MirrorPatch, MirrorSystem};
use crate::verifier::TraceResult;

pub const DEFAULT_MESH_RESOLUTION: usize = 65;

/// Wavefront OBJ of the patch sampled on an `m x m` grid over its
/// bounding box, with grid points pulled onto the domain. Interval
/// domains give a polyline in the plane `y = 0`.
pub fn patch_obj(patch: &MirrorPatch, m: usize) -> Result<String> {
    let m = m.max(2);
    let mut out = String::new();
    writeln!(out, "o {}", patch.id).unwrap();
    let bb = patch.domain.bbox();
    let step = |k: usize, lo: f64, hi: f64| lo + (hi - lo) * k as f64 / (m - 1) as f64;
    if let Domain::Interval { lo, hi } = patch.domain {
        for i in 0..m {
            let p = Point2::new(step(i, lo, hi), 0.0);
            write_vertex(&mut out, &p, patch.height.value(&p)?);
        }
        for i in 1..m {
            writeln!(out, "l {} {}", i, i + 1).unwrap();
        }
        return Ok(out);
    }
    for j in 0..m {
        for i in 0..m {
            let q = Point2::new(step(i, bb.min.x, bb.max.x), step(j, bb.min.y, bb.max.y));
            let p = patch.domain.closest_point(&q);
            write_vertex(&mut out, &p, patch.height.value(&p)?);
        }
    }
    for j in 0..m - 1 {
        for i in 0..m - 1 {
            let a = j * m + i + 1;
            writeln!(out, "f {} {} {} {}", a, a + 1, a + m + 1, a + m).unwrap();
        }
    }
    Ok(out)
}

fn write_vertex(out: &mut String, p: &Point2, z: f64) {
    writeln!(out, "v {:?} {:?} {:?}", p.x, p.y, z).unwrap();
}

/// One mesh per patch, keyed by patch id.
pub fn system_obj(system: &MirrorSystem, m: usize) -> Result<Vec<(String, String)>> {
    system
        .patches
        .iter()
        .map(|p| Ok((p.id.clone(), patch_obj(p, m)?)))
        .collect()
}

/// Parses the vertices of an OBJ string back out.
pub fn obj_vertices(obj: &str) -> Vec<[f64; 3]> {
    obj.lines()
        .filter_map(|l| l.strip_prefix("v "))
        .filter_map(|l| {
            let v: Vec<f64> = l.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            (v.len() == 3).then(|| [v[0], v[1], v[2]])
        })
        .collect()
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// `ray_id,bounce_index,x,y,z`: per ray the entry point, every
/// reflection and the exit point.
pub fn traces_csv(system: &MirrorSystem, traces: &[TraceResult]) -> Result<String> {
    let (z_floor, z_ceil) = system.planes();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["ray_id", "bounce_index", "x", "y", "z"])
        .map_err(csv_error)?;
    for (id, t) in traces.iter().enumerate() {
        for (k, p) in t.polyline(z_floor, z_ceil).iter().enumerate() {
            w.write_record([
                id.to_string(),
                k.to_string(),
                format!("{:?}", p.x),
                format!("{:?}", p.y),
                format!("{:?}", p.z),
            ])
            .map_err(csv_error)?;
        }
    }
    String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)
}

/// `alpha,beta,tan_product` for `samples` angles.
pub fn ellipse_csv(cfg: &EllipseConfig, samples: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "beta", "tan_product"]).map_err(csv_error)?;
    for (a, b, k) in pencil_table(cfg, samples) {
        w.write_record([format!("{a:?}"), format!("{b:?}"), format!("{k:?}")])
            .map_err(csv_error)?;
    }
    String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::two_mirror::synthesize_two_mirror;
    use crate::verifier::trace_ray;

    fn translation() -> MirrorSystem {
        let d = Domain::disc(Point2::zeros(), 1.0).unwrap();
        synthesize_two_mirror(&ScalarField::parse("3*x1").unwrap(), &d, Some(2.0), None).unwrap()
    }

    #[test]
    fn plane_meshes_are_planar() {
        let s = translation();
        let meshes = system_obj(&s, DEFAULT_MESH_RESOLUTION).unwrap();
        assert_eq!(meshes.len(), 2);
        for ((_, obj), p) in meshes.iter().zip(&s.patches) {
            let v = obj_vertices(obj);
            assert_eq!(v.len(), 65 * 65);
            assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 64 * 64);
            let c = Point2::zeros();
            let (z0, g) = p.height.value_gradient(&c).unwrap();
            for [x, y, z] in v {
                let plane = z0 + g.dot(&(Point2::new(x, y) - c));
                assert!((z - plane).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn trace_rows_and_ellipse_column() {
        let s = translation();
        let ts: Vec<_> = [Point2::new(0.1, 0.0), Point2::new(0.0, 0.5)]
            .iter()
            .map(|x| trace_ray(&s, x, 8).unwrap())
            .collect();
        let csv = traces_csv(&s, &ts).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
        let e = ellipse_csv(&EllipseConfig::new(0.5).unwrap(), 100).unwrap();
        for l in e.lines().skip(1) {
            let k: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
            assert!((k - 1.0 / 3.0).abs() <= 1e-12);
        }
    }
}
