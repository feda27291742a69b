//! Convex planar regions: beam cross-sections, partition cells and images.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = Vector2<f64>;

/// A closed convex region of the beam cross-section plane.
///
/// `Interval` is the one-dimensional cross-section used for rays in the
/// plane; only the first coordinate of a point is consulted for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Domain {
    Interval {
        lo: f64,
        hi: f64,
    },
    Disc {
        center: Point2,
        radius: f64,
    },
    /// Counterclockwise vertex list.
    Polygon {
        vertices: Vec<Point2>,
    },
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point2,
    pub max: Point2,
}

impl BBox {
    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }
    pub fn center(&self) -> Point2 {
        (self.min + self.max) * 0.5
    }
}

fn cross(a: &Point2, b: &Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

impl Domain {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidDomain(format!("interval [{lo}, {hi}]")));
        }
        Ok(Domain::Interval { lo, hi })
    }

    pub fn disc(center: Point2, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDomain(format!("disc radius {radius}")));
        }
        Ok(Domain::Disc { center, radius })
    }

    /// Builds a convex polygon; clockwise input is reversed, collinear
    /// vertices are dropped.
    pub fn polygon(vertices: Vec<Point2>) -> Result<Self> {
        let mut v = vertices;
        if v.len() >= 2 && (v[0] - v[v.len() - 1]).norm() == 0.0 {
            v.pop();
        }
        if v.len() < 3 {
            return Err(Error::InvalidDomain("polygon needs 3 vertices".into()));
        }
        if signed_area(&v) < 0.0 {
            v.reverse();
        }
        let scale = bbox_of(&v).diagonal();
        if !(scale > 0.0) {
            return Err(Error::InvalidDomain("degenerate polygon".into()));
        }
        let tol = 1e-12 * scale * scale;
        let mut cleaned: Vec<Point2> = Vec::with_capacity(v.len());
        let n = v.len();
        for i in 0..n {
            let prev = v[(i + n - 1) % n];
            let next = v[(i + 1) % n];
            let c = cross(&(v[i] - prev), &(next - v[i]));
            if c < -tol {
                return Err(Error::InvalidDomain("polygon is not convex".into()));
            }
            if c > tol {
                cleaned.push(v[i]);
            }
        }
        if cleaned.len() < 3 {
            return Err(Error::InvalidDomain("polygon vertices are collinear".into()));
        }
        Ok(Domain::Polygon { vertices: cleaned })
    }

    pub fn rectangle(min: Point2, max: Point2) -> Result<Self> {
        Domain::polygon(vec![min, Point2::new(max.x, min.y), max, Point2::new(min.x, max.y)])
    }

    pub fn dimension(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn bbox(&self) -> BBox {
        match self {
            Domain::Interval { lo, hi } => BBox {
                min: Point2::new(*lo, 0.0),
                max: Point2::new(*hi, 0.0),
            },
            Domain::Disc { center, radius } => BBox {
                min: center - Point2::repeat(*radius),
                max: center + Point2::repeat(*radius),
            },
            Domain::Polygon { vertices } => bbox_of(vertices),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Interval { lo, hi } => hi - lo,
            Domain::Disc { radius, .. } => 2.0 * radius,
            Domain::Polygon { vertices } => {
                let mut d: f64 = 0.0;
                for a in vertices {
                    for b in vertices {
                        d = d.max((a - b).norm());
                    }
                }
                d
            }
        }
    }

    /// Centroid.
    pub fn center(&self) -> Point2 {
        match self {
            Domain::Interval { lo, hi } => Point2::new(0.5 * (lo + hi), 0.0),
            Domain::Disc { center, .. } => *center,
            Domain::Polygon { vertices } => {
                let a = signed_area(vertices);
                let n = vertices.len();
                let mut c = Point2::zeros();
                for i in 0..n {
                    let p = vertices[i];
                    let q = vertices[(i + 1) % n];
                    c += (p + q) * cross(&p, &q);
                }
                c / (6.0 * a)
            }
        }
    }

    /// Closed membership with absolute slack `tol`.
    pub fn contains(&self, p: &Point2, tol: f64) -> bool {
        match self {
            Domain::Interval { lo, hi } => p.x >= lo - tol && p.x <= hi + tol,
            Domain::Disc { center, radius } => (p - center).norm() <= radius + tol,
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                (0..n).all(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = b - a;
                    cross(&e, &(p - a)) >= -tol * e.norm()
                })
            }
        }
    }

    /// Parameter interval `[t0, t1]` on which the horizontal projection
    /// `o + t d` stays in the domain. Unbounded when `d` has no component
    /// along the domain and `o` lies inside.
    pub fn clip_line(&self, o: &Point2, d: &Point2, tol: f64) -> Option<(f64, f64)> {
        match self {
            Domain::Interval { lo, hi } => clip_slab(o.x, d.x, lo - tol, hi + tol),
            Domain::Disc { center, radius } => {
                let r = radius + tol;
                let oc = o - center;
                let a = d.norm_squared();
                if a == 0.0 {
                    return (oc.norm() <= r).then_some((f64::NEG_INFINITY, f64::INFINITY));
                }
                let b = oc.dot(d);
                let c = oc.norm_squared() - r * r;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                // stable quadratic roots
                let q = if b >= 0.0 { -(b + sq) } else { -b + sq };
                let (mut t0, mut t1) = if q != 0.0 { (q / a, c / q) } else { (0.0, 0.0) };
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                Some((t0, t1))
            }
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let e = b - a;
                    let len = e.norm();
                    // inside: cross(e, p - a) >= -tol*len
                    let num = cross(&e, &(o - a)) + tol * len;
                    let den = cross(&e, d);
                    if den == 0.0 {
                        if num < 0.0 {
                            return None;
                        }
                    } else {
                        let t = -num / den;
                        if den > 0.0 {
                            t0 = t0.max(t);
                        } else {
                            t1 = t1.min(t);
                        }
                    }
                }
                (t0 <= t1).then_some((t0, t1))
            }
        }
    }

    /// `n` points on the boundary, counterclockwise.
    pub fn boundary_points(&self, n: usize) -> Vec<Point2> {
        match self {
            Domain::Interval { lo, hi } => vec![Point2::new(*lo, 0.0), Point2::new(*hi, 0.0)],
            Domain::Disc { center, radius } => (0..n)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / n as f64;
                    center + Point2::new(th.cos(), th.sin()) * *radius
                })
                .collect(),
            Domain::Polygon { vertices } => {
                let m = vertices.len();
                let per = (n / m).max(1);
                let mut out = Vec::with_capacity(per * m);
                for i in 0..m {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % m];
                    for k in 0..per {
                        out.push(a + (b - a) * (k as f64 / per as f64));
                    }
                }
                out
            }
        }
    }

    /// Vertices and edge midpoints for polygons, eight compass points for
    /// discs, endpoints and midpoint for intervals.
    pub fn corners_and_midpoints(&self) -> Vec<Point2> {
        match self {
            Domain::Interval { lo, hi } => vec![
                Point2::new(*lo, 0.0),
                Point2::new(0.5 * (lo + hi), 0.0),
                Point2::new(*hi, 0.0),
            ],
            Domain::Disc { .. } => self.boundary_points(8),
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    out.push(vertices[i]);
                    out.push((vertices[i] + vertices[(i + 1) % n]) * 0.5);
                }
                out
            }
        }
    }

    /// Regular `n x n` grid over the bounding box, keeping interior points.
    pub fn grid_points(&self, n: usize) -> Vec<Point2> {
        let bb = self.bbox();
        if let Domain::Interval { lo, hi } = self {
            return (0..n)
                .map(|i| Point2::new(lo + (hi - lo) * (i as f64 + 0.5) / n as f64, 0.0))
                .collect();
        }
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let p = Point2::new(
                    bb.min.x + (bb.max.x - bb.min.x) * (i as f64 + 0.5) / n as f64,
                    bb.min.y + (bb.max.y - bb.min.y) * (j as f64 + 0.5) / n as f64,
                );
                if self.contains(&p, 0.0) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Polygon with `n` vertices; circumscribed around a disc so that the
    /// disc is contained in the result.
    pub fn to_polygon(&self, n: usize) -> Result<Domain> {
        match self {
            Domain::Interval { .. } => Err(Error::InvalidDomain("an interval has no polygonal form".into())),
            Domain::Disc { center, radius } => {
                let r = radius / (PI / n as f64).cos();
                Domain::polygon(
                    (0..n)
                        .map(|k| {
                            let th = 2.0 * PI * (k as f64 + 0.5) / n as f64;
                            center + Point2::new(th.cos(), th.sin()) * r
                        })
                        .collect(),
                )
            }
            Domain::Polygon { .. } => Ok(self.clone()),
        }
    }

    pub fn translated(&self, b: &Point2) -> Domain {
        match self {
            Domain::Interval { lo, hi } => Domain::Interval {
                lo: lo + b.x,
                hi: hi + b.x,
            },
            Domain::Disc { center, radius } => Domain::Disc {
                center: center + b,
                radius: *radius,
            },
            Domain::Polygon { vertices } => Domain::Polygon {
                vertices: vertices.iter().map(|v| v + b).collect(),
            },
        }
    }

    /// Exact image under `x -> m x + b`.
    pub fn affine_image(&self, m: &Matrix2<f64>, b: &Point2) -> Result<Domain> {
        let det = m.determinant();
        if det.abs() < 1e-300 {
            return Err(Error::SingularMatrix);
        }
        match self {
            Domain::Interval { lo, hi } => {
                let a = m[(0, 0)] * lo + b.x;
                let c = m[(0, 0)] * hi + b.x;
                Domain::interval(a.min(c), a.max(c))
            }
            Domain::Disc { center, radius } => {
                // conformal linear part keeps discs round
                let mtm = m.transpose() * m;
                let k2 = 0.5 * (mtm[(0, 0)] + mtm[(1, 1)]);
                let off = (mtm[(0, 1)].abs() + (mtm[(0, 0)] - mtm[(1, 1)]).abs()) / k2.max(1e-300);
                if off < 1e-14 {
                    Domain::disc(m * center + b, radius * k2.sqrt())
                } else {
                    self.to_polygon(256)?.affine_image(m, b)
                }
            }
            Domain::Polygon { vertices } => {
                let mut v: Vec<Point2> = vertices.iter().map(|p| m * p + b).collect();
                if det < 0.0 {
                    v.reverse();
                }
                Domain::polygon(v)
            }
        }
    }

    /// Intersection with an axis-aligned box (Sutherland-Hodgman). Discs are
    /// replaced by their circumscribed 128-gon first.
    pub fn clip_to_box(&self, min: Point2, max: Point2) -> Option<Domain> {
        let poly = match self {
            Domain::Interval { lo, hi } => {
                let a = lo.max(min.x);
                let b = hi.min(max.x);
                return Domain::interval(a, b).ok();
            }
            Domain::Disc { .. } => self.to_polygon(128).ok()?,
            Domain::Polygon { .. } => self.clone(),
        };
        let Domain::Polygon { vertices } = poly else {
            return None;
        };
        let planes: [(Point2, f64); 4] = [
            (Point2::new(1.0, 0.0), min.x),
            (Point2::new(-1.0, 0.0), -max.x),
            (Point2::new(0.0, 1.0), min.y),
            (Point2::new(0.0, -1.0), -max.y),
        ];
        let mut pts = vertices;
        for (nrm, off) in planes {
            if pts.is_empty() {
                break;
            }
            let mut out = Vec::with_capacity(pts.len() + 1);
            let n = pts.len();
            for i in 0..n {
                let p = pts[i];
                let q = pts[(i + 1) % n];
                let dp = nrm.dot(&p) - off;
                let dq = nrm.dot(&q) - off;
                if dp >= 0.0 {
                    out.push(p);
                }
                if (dp >= 0.0) != (dq >= 0.0) {
                    let t = dp / (dp - dq);
                    out.push(p + (q - p) * t);
                }
            }
            pts = out;
        }
        Domain::polygon(pts).ok()
    }

    /// Whether the two regions have disjoint interiors, allowing contact up
    /// to `tol`.
    pub fn interiors_disjoint(&self, other: &Domain, tol: f64) -> bool {
        use Domain::*;
        match (self, other) {
            (Interval { lo: a, hi: b }, Interval { lo: c, hi: d }) => b <= &(c + tol) || d <= &(a + tol),
            (Interval { .. }, _) | (_, Interval { .. }) => false,
            (Disc { center: c1, radius: r1 }, Disc { center: c2, radius: r2 }) => (c1 - c2).norm() >= r1 + r2 - tol,
            (Disc { center, radius }, Polygon { vertices }) | (Polygon { vertices }, Disc { center, radius }) => {
                let poly = Polygon {
                    vertices: vertices.clone(),
                };
                if poly.contains(center, 0.0) {
                    return false;
                }
                polygon_distance(vertices, center) >= radius - tol
            }
            (Polygon { vertices: a }, Polygon { vertices: b }) => {
                separated_by_edge(a, b, tol) || separated_by_edge(b, a, tol)
            }
        }
    }

    /// Nearest point of the closed domain.
    pub fn closest_point(&self, p: &Point2) -> Point2 {
        if self.contains(p, 0.0) {
            return *p;
        }
        match self {
            Domain::Interval { lo, hi } => Point2::new(p.x.clamp(*lo, *hi), p.y),
            Domain::Disc { center, radius } => center + (p - center).normalize() * *radius,
            Domain::Polygon { vertices } => {
                let n = vertices.len();
                let mut best = vertices[0];
                let mut bd = f64::INFINITY;
                for i in 0..n {
                    let q = closest_on_segment(&vertices[i], &vertices[(i + 1) % n], p);
                    let d = (q - p).norm();
                    if d < bd {
                        bd = d;
                        best = q;
                    }
                }
                best
            }
        }
    }
}

fn clip_slab(o: f64, d: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    if d == 0.0 {
        return (o >= lo && o <= hi).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let a = (lo - o) / d;
    let b = (hi - o) / d;
    Some((a.min(b), a.max(b)))
}

pub(crate) fn signed_area(v: &[Point2]) -> f64 {
    let n = v.len();
    (0..n).map(|i| cross(&v[i], &v[(i + 1) % n])).sum::<f64>() * 0.5
}

pub(crate) fn bbox_of(v: &[Point2]) -> BBox {
    let mut min = Point2::repeat(f64::INFINITY);
    let mut max = Point2::repeat(f64::NEG_INFINITY);
    for p in v {
        min = min.inf(p);
        max = max.sup(p);
    }
    BBox { min, max }
}

fn closest_on_segment(a: &Point2, b: &Point2, p: &Point2) -> Point2 {
    let e = b - a;
    let l2 = e.norm_squared();
    if l2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&e) / l2).clamp(0.0, 1.0);
    a + e * t
}

fn polygon_distance(v: &[Point2], p: &Point2) -> f64 {
    let n = v.len();
    (0..n)
        .map(|i| (closest_on_segment(&v[i], &v[(i + 1) % n], p) - p).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Some edge of `a` has all of `b` on its outer side.
fn separated_by_edge(a: &[Point2], b: &[Point2], tol: f64) -> bool {
    let n = a.len();
    (0..n).any(|i| {
        let p = a[i];
        let e = a[(i + 1) % n] - p;
        let len = e.norm();
        b.iter().all(|q| cross(&e, &(q - p)) <= tol * len)
    })
}

/// Convex hull (Andrew's monotone chain), counterclockwise.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(
                &(lower[lower.len() - 1] - lower[lower.len() - 2]),
                &(p - lower[lower.len() - 2]),
            ) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(
                &(upper[upper.len() - 1] - upper[upper.len() - 2]),
                &(p - upper[upper.len() - 2]),
            ) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
