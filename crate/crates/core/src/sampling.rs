//! Deterministic low-discrepancy sampling of domains.

use std::f64::consts::PI;

use crate::domain::{Domain, Point2};

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// `count` Halton (2, 3) points inside `domain`.
///
/// Discs use an area-preserving polar map, polygons rejection from the
/// bounding box, intervals the base-2 sequence.
pub fn halton_points(domain: &Domain, count: usize) -> Vec<Point2> {
    match domain {
        Domain::Interval { lo, hi } => (1..=count)
            .map(|i| Point2::new(lo + (hi - lo) * radical_inverse(i, 2), 0.0))
            .collect(),
        Domain::Disc { center, radius } => (1..=count)
            .map(|i| {
                let r = radius * radical_inverse(i, 2).sqrt();
                let th = 2.0 * PI * radical_inverse(i, 3);
                center + Point2::new(th.cos(), th.sin()) * r
            })
            .collect(),
        Domain::Polygon { .. } => {
            let bb = domain.bbox();
            let mut out = Vec::with_capacity(count);
            let mut i = 1;
            while out.len() < count {
                let p = Point2::new(
                    bb.min.x + (bb.max.x - bb.min.x) * radical_inverse(i, 2),
                    bb.min.y + (bb.max.y - bb.min.y) * radical_inverse(i, 3),
                );
                if domain.contains(&p, 0.0) {
                    out.push(p);
                }
                i += 1;
            }
            out
        }
    }
}
