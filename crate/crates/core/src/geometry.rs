//! Rays, the reflection law and ray-mirror intersection.

use nalgebra::Vector3;

use crate::domain::Point2;
use crate::error::{Error, Result};
use crate::system::MirrorPatch;

pub type Point3 = Vector3<f64>;

/// An oriented line with a unit direction. Rays of the one-dimensional
/// problem live in the plane `y = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3,
    pub direction: Point3,
}

impl Ray {
    pub fn new(origin: Point3, direction: Point3) -> Result<Self> {
        let n = direction.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::NonUnitDirection(n));
        }
        Ok(Ray { origin, direction })
    }

    /// Ray in the `(x, z)` plane.
    pub fn planar(x: f64, z: f64, dx: f64, dz: f64) -> Result<Self> {
        Ray::new(Point3::new(x, 0.0, z), Point3::new(dx, 0.0, dz))
    }

    /// Vertical ray going up through `x` from height `z`.
    pub fn vertical(x: &Point2, z: f64) -> Self {
        Ray {
            origin: Point3::new(x.x, x.y, z),
            direction: Point3::new(0.0, 0.0, 1.0),
        }
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.origin + self.direction * t
    }
}

/// `v - 2 <v, n> n / |n|^2`, renormalized against rounding.
pub fn reflect<const N: usize>(v: &[f64; N], n: &[f64; N]) -> Result<[f64; N]> {
    let nn: f64 = n.iter().map(|a| a * a).sum();
    if nn == 0.0 || !nn.is_finite() {
        return Err(Error::DegenerateNormal);
    }
    let vn: f64 = v.iter().zip(n).map(|(a, b)| a * b).sum();
    let k = 2.0 * vn / nn;
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = v[i] - k * n[i];
    }
    let len = out.iter().map(|a| a * a).sum::<f64>().sqrt();
    for o in &mut out {
        *o /= len;
    }
    Ok(out)
}

pub fn reflect3(v: &Point3, n: &Point3) -> Result<Point3> {
    let r = reflect(&[v.x, v.y, v.z], &[n.x, n.y, n.z])?;
    Ok(Point3::new(r[0], r[1], r[2]))
}

/// Rise over horizontal run from `a` to `b`; infinite for vertical segments.
pub fn segment_slope(a: &Point3, b: &Point3) -> f64 {
    let run = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
    let rise = b.z - a.z;
    if run == 0.0 {
        return if rise >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    rise / run
}

/// A ray-mirror contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Point3,
    /// Upward unit normal `(-grad h, 1) / |(-grad h, 1)|`.
    pub normal: Point3,
}

const MAX_MARCH_STEPS: usize = 200_000;
const MAX_BISECTIONS: usize = 200;

/// First intersection with `t > t_min` of the ray with the graph of the
/// patch height over its domain.
///
/// The ray is marched with steps no longer than the vertical gap divided
/// by a bound on its rate of change, so a crossing cannot be stepped over;
/// the bracket is then bisected and polished with one Newton step.
pub fn intersect_ray_patch(ray: &Ray, patch: &MirrorPatch, t_min: f64) -> Result<Option<Hit>> {
    let o = ray.origin;
    let d = ray.direction;
    let one_d = patch.domain.dimension() == 1;
    let b = patch.bounds();
    let scale = 1.0 + o.norm() + b.z_max.abs().max(b.z_min.abs());

    let o2 = Point2::new(o.x, o.y);
    let d2 = Point2::new(d.x, d.y);
    let Some((mut ta, mut tb)) = patch.domain.clip_line(&o2, &d2, 1e-12 * scale) else {
        return Ok(None);
    };
    if d.z != 0.0 {
        let s0 = (b.z_min - o.z) / d.z;
        let s1 = (b.z_max - o.z) / d.z;
        ta = ta.max(s0.min(s1));
        tb = tb.min(s0.max(s1));
    } else if o.z < b.z_min || o.z > b.z_max {
        return Ok(None);
    }
    ta = ta.max(t_min);
    if !(ta <= tb) || !tb.is_finite() {
        return Ok(None);
    }

    let gap = |t: f64| -> Result<f64> {
        let p = ray.at(t);
        Ok(p.z - patch.height.value(&Point2::new(p.x, p.y))?)
    };
    let k = d.z.abs() + b.lipschitz * d2.norm() + 1e-300;
    let span = tb - ta;
    // Grazing rays would otherwise crawl; half the step budget covers the span.
    let min_step = span.max(1e-12 * scale) / (MAX_MARCH_STEPS / 2) as f64;

    let mut t0 = ta;
    let mut h0 = gap(t0)?;
    if h0 == 0.0 && ta > t_min {
        return finish(ray, patch, t0, one_d).map(Some);
    }
    let mut steps = 0;
    while t0 < tb {
        steps += 1;
        if steps > MAX_MARCH_STEPS {
            return Err(Error::NumericalFailure(format!(
                "intersection march with patch {} did not terminate",
                patch.id
            )));
        }
        let t1 = (t0 + (h0.abs() / k).max(min_step)).min(tb);
        let h1 = gap(t1)?;
        if h1 == 0.0 {
            return finish(ray, patch, t1, one_d).map(Some);
        }
        if h1.signum() != h0.signum() {
            let t = refine(&gap, ray, patch, t0, h0, t1, one_d)?;
            return finish(ray, patch, t, one_d).map(Some);
        }
        t0 = t1;
        h0 = h1;
    }
    Ok(None)
}

fn refine(
    gap: &dyn Fn(f64) -> Result<f64>,
    ray: &Ray,
    patch: &MirrorPatch,
    mut lo: f64,
    h_lo: f64,
    mut hi: f64,
    one_d: bool,
) -> Result<f64> {
    let s_lo = h_lo.signum();
    let mut iters = 0;
    while hi - lo > 1e-12 * (1.0 + lo.abs()) {
        iters += 1;
        if iters > MAX_BISECTIONS {
            return Err(Error::NumericalFailure(format!(
                "bisection on patch {} did not converge",
                patch.id
            )));
        }
        let mid = 0.5 * (lo + hi);
        let h = gap(mid)?;
        if h == 0.0 {
            return Ok(mid);
        }
        if h.signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let p = ray.at(t);
    let (v, mut g) = patch.height.value_gradient(&Point2::new(p.x, p.y))?;
    if one_d {
        g.y = 0.0;
    }
    let dh = ray.direction.z - g.x * ray.direction.x - g.y * ray.direction.y;
    if dh != 0.0 && dh.is_finite() {
        let tn = t - (p.z - v) / dh;
        if tn >= lo && tn <= hi {
            return Ok(tn);
        }
    }
    Ok(t)
}

fn finish(ray: &Ray, patch: &MirrorPatch, t: f64, one_d: bool) -> Result<Hit> {
    let p = ray.at(t);
    let mut g = patch.height.gradient(&Point2::new(p.x, p.y))?;
    if one_d {
        g.y = 0.0;
    }
    let normal = Point3::new(-g.x, -g.y, 1.0).normalize();
    Ok(Hit { t, point: p, normal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::field::ScalarField;
    use proptest::prelude::*;

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0]).unwrap(), [0.0, 0.0, -1.0]);
        let r = reflect(&[0.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && r[1] == 0.0 && r[2].abs() < 1e-15);
        assert_eq!(reflect(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), [0.0, -1.0]);
        assert!(matches!(
            reflect(&[0.0, 1.0], &[0.0, 0.0]),
            Err(Error::DegenerateNormal)
        ));
    }

    #[test]
    fn reflect_matches_closed_form_for_gradient_normal() {
        // v' = (2 grad, -1 + |grad|^2) / (1 + |grad|^2)
        let g = [0.3, -0.7];
        let q = g[0] * g[0] + g[1] * g[1];
        let r = reflect(&[0.0, 0.0, 1.0], &[-g[0], -g[1], 1.0]).unwrap();
        let e = [2.0 * g[0] / (1.0 + q), 2.0 * g[1] / (1.0 + q), (q - 1.0) / (1.0 + q)];
        for i in 0..3 {
            assert!((r[i] - e[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn slopes() {
        let s = segment_slope(&Point3::new(0.0, 0.0, 0.0), &Point3::new(1.0, 0.0, -1.0));
        assert_eq!(s, -1.0);
        assert_eq!(
            segment_slope(&Point3::new(0.0, 0.0, 1.0), &Point3::new(3.0, 4.0, 1.0)),
            0.0
        );
        assert!(segment_slope(&Point3::zeros(), &Point3::new(0.0, 0.0, 2.0)).is_infinite());
    }

    fn patch(expr: &str, d: Domain) -> MirrorPatch {
        MirrorPatch::new("t", d, ScalarField::parse(expr).unwrap()).unwrap()
    }

    #[test]
    fn intersection_examples() {
        let flat = patch("0", Domain::interval(-1.0, 1.0).unwrap());
        let h = intersect_ray_patch(&Ray::planar(0.2, -1.0, 0.0, 1.0).unwrap(), &flat, 0.0)
            .unwrap()
            .unwrap();
        assert!((h.t - 1.0).abs() < 1e-12);
        assert!((h.point - Point3::new(0.2, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(h.normal, Point3::new(0.0, 0.0, 1.0));

        let disc = Domain::disc(Point2::zeros(), 1.0).unwrap();
        let para = patch("0.5*(x1^2 + x2^2)", disc);
        let h = intersect_ray_patch(&Ray::vertical(&Point2::zeros(), -1.0), &para, 0.0)
            .unwrap()
            .unwrap();
        assert!((h.t - 1.0).abs() < 1e-12);
        let h = intersect_ray_patch(&Ray::vertical(&Point2::new(0.5, 0.0), -1.0), &para, 0.0)
            .unwrap()
            .unwrap();
        assert!((h.t - 1.125).abs() < 1e-12);
        assert!((h.point - Point3::new(0.5, 0.0, 0.125)).norm() < 1e-12);
        // outside the domain
        assert!(
            intersect_ray_patch(&Ray::vertical(&Point2::new(1.5, 0.0), -1.0), &para, 0.0)
                .unwrap()
                .is_none()
        );
        // going away
        let down = Ray::new(Point3::new(0.0, 0.0, -1.0), Point3::new(0.0, 0.0, -1.0)).unwrap();
        assert!(intersect_ray_patch(&down, &para, 0.0).unwrap().is_none());
    }

    #[test]
    fn steep_oscillating_surface_first_root_found() {
        let d = Domain::rectangle(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)).unwrap();
        let p = patch("0.3*sin(20*x1)", d);
        let dir = Point3::new(1.0, 0.0, 0.05).normalize();
        let ray = Ray::new(Point3::new(-1.0, 0.0, -0.05), dir).unwrap();
        let h = intersect_ray_patch(&ray, &p, 0.0).unwrap().unwrap();
        // brute-force first sign change
        let mut t = 0.0;
        let f = |t: f64| {
            let q = ray.at(t);
            q.z - 0.3 * (20.0 * q.x).sin()
        };
        let s0 = f(0.0).signum();
        while f(t).signum() == s0 {
            t += 1e-5;
        }
        assert!((h.t - t).abs() < 2e-5);
        assert!((h.point.z - 0.3 * (20.0 * h.point.x).sin()).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn reflection_invariants(
            v in prop::array::uniform3(-1.0f64..1.0),
            n in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let vl = (v[0]*v[0] + v[1]*v[1] + v[2]*v[2]).sqrt();
            let nl = (n[0]*n[0] + n[1]*n[1] + n[2]*n[2]).sqrt();
            prop_assume!(vl > 1e-3 && nl > 1e-3);
            let v = Point3::from(v) / vl;
            let n = Point3::from(n);
            let r = reflect3(&v, &n).unwrap();
            prop_assert!((r.norm() - 1.0).abs() <= 1e-12);
            let back = reflect3(&r, &n).unwrap();
            prop_assert!((back - v).norm() <= 1e-12);
            let nu = n / nl;
            prop_assert!((v.dot(&nu) - (-r).dot(&nu)).abs() <= 1e-12);
            prop_assert!((r - v).cross(&nu).norm() <= 1e-12);
        }

        #[test]
        fn intersection_lies_on_surface(x in -0.9f64..0.9, y in -0.9f64..0.9, dx in -0.5f64..0.5) {
            let d = Domain::disc(Point2::zeros(), 1.0).unwrap();
            let p = patch("x1^3 - 2*x1*x2 + 0.5*x2^2", d);
            let dir = Point3::new(dx, 0.0, 1.0).normalize();
            let ray = Ray::new(Point3::new(x, y, -5.0), dir).unwrap();
            if let Some(h) = intersect_ray_patch(&ray, &p, 0.0).unwrap() {
                let z = p.height.value(&Point2::new(h.point.x, h.point.y)).unwrap();
                prop_assert!((z - h.point.z).abs() <= 1e-10);
            }
        }
    }
}
