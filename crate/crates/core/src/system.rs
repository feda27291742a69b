//! Mirror patches (graphs of height fields) and ordered mirror systems.

use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Point2};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::map::PlaneMap;

/// Grid used to bound the slope and height range of a patch.
pub const LIPSCHITZ_GRID: usize = 64;
pub const LIPSCHITZ_SAFETY: f64 = 1.5;

/// The mirror `z = height(x)` over `domain`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PatchRepr", into = "PatchRepr")]
pub struct MirrorPatch {
    pub id: String,
    pub domain: Domain,
    pub height: ScalarField,
    bounds: PatchBounds,
}

/// Sampled slope bound and padded height range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchBounds {
    pub lipschitz: f64,
    pub z_min: f64,
    pub z_max: f64,
}

#[derive(Serialize, Deserialize)]
struct PatchRepr {
    id: String,
    domain: Domain,
    height: ScalarField,
}

impl TryFrom<PatchRepr> for MirrorPatch {
    type Error = Error;
    fn try_from(r: PatchRepr) -> Result<Self> {
        MirrorPatch::new(r.id, r.domain, r.height)
    }
}

impl From<MirrorPatch> for PatchRepr {
    fn from(p: MirrorPatch) -> Self {
        PatchRepr {
            id: p.id,
            domain: p.domain,
            height: p.height,
        }
    }
}

impl PartialEq for MirrorPatch {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.domain == other.domain && self.height == other.height
    }
}

impl MirrorPatch {
    pub fn new(id: impl Into<String>, domain: Domain, height: ScalarField) -> Result<Self> {
        let bounds = sample_bounds(&domain, &height)?;
        Ok(MirrorPatch {
            id: id.into(),
            domain,
            height,
            bounds,
        })
    }

    pub fn bounds(&self) -> PatchBounds {
        self.bounds
    }

    /// Same mirror moved by `dz` along the beam axis.
    pub fn lifted(&self, dz: f64) -> MirrorPatch {
        let mut bounds = self.bounds;
        bounds.z_min += dz;
        bounds.z_max += dz;
        MirrorPatch {
            id: self.id.clone(),
            domain: self.domain.clone(),
            height: self.height.clone().shifted(dz),
            bounds,
        }
    }

    /// Mirror image in the plane `z = 0`.
    pub fn negated(&self) -> MirrorPatch {
        MirrorPatch {
            id: self.id.clone(),
            domain: self.domain.clone(),
            height: self.height.clone().scaled(-1.0),
            bounds: PatchBounds {
                lipschitz: self.bounds.lipschitz,
                z_min: -self.bounds.z_max,
                z_max: -self.bounds.z_min,
            },
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> MirrorPatch {
        self.id = id.into();
        self
    }

    /// Domain samples at which the height is evaluated for the bounds.
    fn sample_points(domain: &Domain) -> Vec<Point2> {
        let mut pts = domain.grid_points(LIPSCHITZ_GRID);
        pts.extend(domain.boundary_points(4 * LIPSCHITZ_GRID));
        pts.extend(domain.corners_and_midpoints());
        pts.push(domain.center());
        pts
    }
}

fn sample_bounds(domain: &Domain, height: &ScalarField) -> Result<PatchBounds> {
    let pts = MirrorPatch::sample_points(domain);
    let one_d = domain.dimension() == 1;
    let mut slope: f64 = 0.0;
    let mut z_min = f64::INFINITY;
    let mut z_max = f64::NEG_INFINITY;
    for p in &pts {
        let (v, mut g) = height.value_gradient(p)?;
        if one_d {
            g.y = 0.0;
        }
        if !v.is_finite() || !g.x.is_finite() || !g.y.is_finite() {
            return Err(Error::NumericalFailure(format!("height field not finite at {p:?}")));
        }
        slope = slope.max(g.norm());
        z_min = z_min.min(v);
        z_max = z_max.max(v);
    }
    let lipschitz = LIPSCHITZ_SAFETY * slope;
    let bb = domain.bbox();
    let n = LIPSCHITZ_GRID as f64;
    let cell = ((bb.max - bb.min) / n).norm();
    let pad = lipschitz * cell + 1e-9 * (1.0 + z_max.abs().max(z_min.abs()));
    Ok(PatchBounds {
        lipschitz,
        z_min: z_min - pad,
        z_max: z_max + pad,
    })
}

/// A named stage of a composite system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGroup {
    pub name: String,
    /// Indices into [`MirrorSystem::patches`].
    pub patches: Vec<usize>,
    pub path_constant: f64,
}

/// An ordered collection of mirrors carrying a vertical beam over the
/// entry domain onto a vertical beam over the exit domain. Both beams
/// travel in the `+z` direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorSystem {
    pub patches: Vec<MirrorPatch>,
    pub groups: Vec<PatchGroup>,
    pub expected_reflections: usize,
    pub entry_domain: Domain,
    pub exit_domain: Domain,
    /// The map the system is meant to realize.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_map: Option<PlaneMap>,
}

impl MirrorSystem {
    pub fn dimension(&self) -> usize {
        self.entry_domain.dimension()
    }

    /// Total path constant: the sum over stages.
    pub fn path_constant(&self) -> f64 {
        self.groups.iter().map(|g| g.path_constant).sum()
    }

    pub fn path_constants(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.path_constant).collect()
    }

    /// `(min z, max z)` over all patches.
    pub fn z_range(&self) -> (f64, f64) {
        self.patches
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                (a.min(p.bounds.z_min), b.max(p.bounds.z_max))
            })
    }

    /// Diameter of the bounding box of all mirrors and both beams.
    pub fn diameter(&self) -> f64 {
        let mut bb = self.entry_domain.bbox().union(&self.exit_domain.bbox());
        for p in &self.patches {
            bb = bb.union(&p.domain.bbox());
        }
        let (z0, z1) = self.z_range();
        let dz = if z1 >= z0 { z1 - z0 } else { 0.0 };
        (bb.diagonal().powi(2) + dz * dz).sqrt().max(1e-300)
    }

    /// Entry plane `z_floor = min z - 1` and exit plane `z_ceil = max z + 1`.
    pub fn planes(&self) -> (f64, f64) {
        if self.patches.is_empty() {
            return (-1.0, 1.0);
        }
        let (z0, z1) = self.z_range();
        (z0 - 1.0, z1 + 1.0)
    }

    /// The whole system moved by `dz` along the beam axis.
    pub fn lifted(&self, dz: f64) -> MirrorSystem {
        let mut out = self.clone();
        out.patches = self.patches.iter().map(|p| p.lifted(dz)).collect();
        out
    }

    /// Concatenation in beam order: rays pass `self` first, then `next`.
    pub fn then(&self, next: &MirrorSystem) -> MirrorSystem {
        let offset = self.patches.len();
        let mut patches = self.patches.clone();
        patches.extend(next.patches.iter().cloned());
        let mut groups = self.groups.clone();
        groups.extend(next.groups.iter().map(|g| PatchGroup {
            name: g.name.clone(),
            patches: g.patches.iter().map(|i| i + offset).collect(),
            path_constant: g.path_constant,
        }));
        let expected_map = match (&self.expected_map, &next.expected_map) {
            (Some(a), Some(b)) => Some(PlaneMap::compose(b.clone(), a.clone())),
            _ => None,
        };
        MirrorSystem {
            patches,
            groups,
            expected_reflections: self.expected_reflections + next.expected_reflections,
            entry_domain: self.entry_domain.clone(),
            exit_domain: next.exit_domain.clone(),
            expected_map,
        }
    }

    /// Mirror image in `z = 0`: realizes the inverse map, from the exit
    /// domain back to the entry domain.
    pub fn inverted(&self) -> MirrorSystem {
        let n = self.patches.len();
        let patches: Vec<MirrorPatch> = self.patches.iter().rev().map(|p| p.negated()).collect();
        let groups = self
            .groups
            .iter()
            .rev()
            .map(|g| PatchGroup {
                name: g.name.clone(),
                patches: g.patches.iter().rev().map(|i| n - 1 - i).collect(),
                path_constant: g.path_constant,
            })
            .collect();
        MirrorSystem {
            patches,
            groups,
            expected_reflections: self.expected_reflections,
            entry_domain: self.exit_domain.clone(),
            exit_domain: self.entry_domain.clone(),
            expected_map: None,
        }
    }

    /// Renames patch ids with a common prefix.
    pub fn prefixed(mut self, prefix: &str) -> MirrorSystem {
        for p in &mut self.patches {
            p.id = format!("{prefix}{}", p.id);
        }
        for g in &mut self.groups {
            g.name = format!("{prefix}{}", g.name);
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_patch() -> MirrorPatch {
        let d = Domain::disc(Point2::zeros(), 1.0).unwrap();
        MirrorPatch::new("p", d, ScalarField::parse("2*x1 + 1").unwrap()).unwrap()
    }

    #[test]
    fn bounds_cover_plane() {
        let p = plane_patch();
        let b = p.bounds();
        assert!((b.lipschitz - 3.0).abs() < 1e-12);
        assert!(b.z_min <= -1.0 && b.z_max >= 3.0);
        assert!(b.z_min > -1.2 && b.z_max < 3.2);
    }

    #[test]
    fn lift_and_negate_track_bounds() {
        let p = plane_patch();
        let q = p.lifted(5.0).negated();
        let x = Point2::new(0.5, 0.0);
        assert_eq!(q.height.value(&x).unwrap(), -(2.0 + 5.0));
        assert_eq!(q.bounds().z_max, -(p.bounds().z_min + 5.0));
    }

    #[test]
    fn patch_serde_recomputes_bounds() {
        let p = plane_patch();
        let s = serde_json::to_string(&p).unwrap();
        let q: MirrorPatch = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.bounds(), q.bounds());
    }
}
