//! Differentiable maps between planar domains.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::domain::{convex_hull, Domain, Point2};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::{LineIntegralField, ScalarField};
use crate::jet::Real;
use crate::poly::Polynomial;

/// A map given by two component expressions with a symbolic Jacobian.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ExprMapRepr", into = "ExprMapRepr")]
pub struct ExprMap {
    sources: [String; 2],
    components: [Expr; 2],
    /// Row-major `[d f1/dx1, d f1/dx2, d f2/dx1, d f2/dx2]`.
    jacobian: [Expr; 4],
}

#[derive(Serialize, Deserialize)]
struct ExprMapRepr {
    components: [String; 2],
}

impl TryFrom<ExprMapRepr> for ExprMap {
    type Error = Error;
    fn try_from(r: ExprMapRepr) -> Result<Self> {
        ExprMap::parse(&r.components[0], &r.components[1])
    }
}

impl From<ExprMap> for ExprMapRepr {
    fn from(m: ExprMap) -> Self {
        ExprMapRepr { components: m.sources }
    }
}

impl PartialEq for ExprMap {
    fn eq(&self, other: &Self) -> bool {
        self.sources == other.sources
    }
}

impl ExprMap {
    pub fn parse(f1: &str, f2: &str) -> Result<Self> {
        let a = Expr::parse(f1)?;
        let b = Expr::parse(f2)?;
        let jacobian = [a.derivative(0), a.derivative(1), b.derivative(0), b.derivative(1)];
        Ok(ExprMap {
            sources: [f1.to_string(), f2.to_string()],
            components: [a, b],
            jacobian,
        })
    }

    pub fn sources(&self) -> &[String; 2] {
        &self.sources
    }
}

/// One piece of a piecewise map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPiece {
    pub domain: Domain,
    pub map: PlaneMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlaneMap {
    /// `x -> matrix x + offset`, matrix row-major.
    Linear {
        matrix: [[f64; 2]; 2],
        offset: Point2,
    },
    Expression(ExprMap),
    /// `x -> grad G(x)`, or `x -> x + grad G(x)` with `add_identity`.
    GradientOf {
        potential: ScalarField,
        add_identity: bool,
    },
    /// `x -> outer(inner(x))`
    Compose {
        outer: Box<PlaneMap>,
        inner: Box<PlaneMap>,
    },
    /// First piece whose domain contains the point.
    Piecewise {
        pieces: Vec<MapPiece>,
    },
}

fn mat(m: &[[f64; 2]; 2]) -> Matrix2<f64> {
    Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

impl PlaneMap {
    pub fn linear(m: &Matrix2<f64>, offset: Point2) -> Self {
        PlaneMap::Linear {
            matrix: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
            offset,
        }
    }

    pub fn identity() -> Self {
        Self::linear(&Matrix2::identity(), Point2::zeros())
    }

    pub fn translation(a: Point2) -> Self {
        Self::linear(&Matrix2::identity(), a)
    }

    /// `(x1, x2) -> (2a - x1, x2)`, the mirror image in the line `x1 = a`.
    pub fn flip(a: f64) -> Self {
        Self::linear(&Matrix2::new(-1.0, 0.0, 0.0, 1.0), Point2::new(2.0 * a, 0.0))
    }

    pub fn expression(f1: &str, f2: &str) -> Result<Self> {
        Ok(PlaneMap::Expression(ExprMap::parse(f1, f2)?))
    }

    /// `x -> e^{x2} (x1, x2)`, which admits no local decomposition at the origin.
    pub fn glutsyuk() -> Self {
        Self::expression("exp(x2)*x1", "exp(x2)*x2").expect("static expression")
    }

    pub fn gradient(potential: ScalarField) -> Self {
        PlaneMap::GradientOf {
            potential,
            add_identity: false,
        }
    }

    pub fn displacement(potential: ScalarField) -> Self {
        PlaneMap::GradientOf {
            potential,
            add_identity: true,
        }
    }

    pub fn compose(outer: PlaneMap, inner: PlaneMap) -> Self {
        PlaneMap::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        }
    }

    fn piece_at<'a>(pieces: &'a [MapPiece], p: &Point2) -> Result<&'a PlaneMap> {
        let scale = 1.0 + p.norm();
        pieces
            .iter()
            .find(|q| q.domain.contains(p, 1e-12 * scale))
            .or_else(|| pieces.iter().find(|q| q.domain.contains(p, 1e-7 * scale)))
            .map(|q| &q.map)
            .ok_or(Error::OutsideDomain { point: *p })
    }

    /// All maps that could apply at `p` when it lies within `tol` of a
    /// piece boundary.
    pub fn candidates(&self, p: &Point2, tol: f64) -> Vec<&PlaneMap> {
        match self {
            PlaneMap::Piecewise { pieces } => pieces
                .iter()
                .filter(|q| q.domain.contains(p, tol))
                .map(|q| &q.map)
                .collect(),
            _ => vec![self],
        }
    }

    pub fn apply(&self, p: &Point2) -> Result<Point2> {
        Ok(match self {
            PlaneMap::Linear { matrix, offset } => mat(matrix) * p + offset,
            PlaneMap::Expression(e) => Point2::new(e.components[0].eval_f64(p), e.components[1].eval_f64(p)),
            PlaneMap::GradientOf {
                potential,
                add_identity,
            } => {
                let g = potential.gradient(p)?;
                if *add_identity {
                    p + g
                } else {
                    g
                }
            }
            PlaneMap::Compose { outer, inner } => outer.apply(&inner.apply(p)?)?,
            PlaneMap::Piecewise { pieces } => Self::piece_at(pieces, p)?.apply(p)?,
        })
    }

    pub fn jacobian(&self, p: &Point2) -> Result<Matrix2<f64>> {
        Ok(match self {
            PlaneMap::Linear { matrix, .. } => mat(matrix),
            PlaneMap::Expression(e) => {
                let j = &e.jacobian;
                Matrix2::new(j[0].eval_f64(p), j[1].eval_f64(p), j[2].eval_f64(p), j[3].eval_f64(p))
            }
            PlaneMap::GradientOf {
                potential,
                add_identity,
            } => {
                let h = potential.hessian(p)?;
                if *add_identity {
                    h + Matrix2::identity()
                } else {
                    h
                }
            }
            PlaneMap::Compose { outer, inner } => outer.jacobian(&inner.apply(p)?)? * inner.jacobian(p)?,
            PlaneMap::Piecewise { pieces } => Self::piece_at(pieces, p)?.jacobian(p)?,
        })
    }

    /// Evaluation on jets (or any [`Real`]).
    pub fn apply_generic<R: Real>(&self, x: &R, y: &R) -> Result<[R; 2]> {
        Ok(match self {
            PlaneMap::Linear { matrix, offset } => [
                x.scale(matrix[0][0]) + y.scale(matrix[0][1]) + x.constant(offset.x),
                x.scale(matrix[1][0]) + y.scale(matrix[1][1]) + x.constant(offset.y),
            ],
            PlaneMap::Expression(e) => {
                let v = [x.clone(), y.clone()];
                [e.components[0].eval(&v), e.components[1].eval(&v)]
            }
            PlaneMap::GradientOf {
                potential,
                add_identity,
            } => {
                let [gx, gy] = potential.gradient_generic(x, y)?;
                if *add_identity {
                    [gx + x.clone(), gy + y.clone()]
                } else {
                    [gx, gy]
                }
            }
            PlaneMap::Compose { outer, inner } => {
                let [u, v] = inner.apply_generic(x, y)?;
                outer.apply_generic(&u, &v)?
            }
            PlaneMap::Piecewise { pieces } => {
                let p = Point2::new(x.value(), y.value());
                Self::piece_at(pieces, &p)?.apply_generic(x, y)?
            }
        })
    }

    /// `(M, b)` with `map(x) = M x + b` when the map is affine.
    pub fn as_affine(&self) -> Option<(Matrix2<f64>, Vector2<f64>)> {
        match self {
            PlaneMap::Linear { matrix, offset } => Some((mat(matrix), *offset)),
            PlaneMap::GradientOf {
                potential,
                add_identity,
            } => {
                let (s, b, _) = potential.as_quadratic()?;
                let m = if *add_identity { s + Matrix2::identity() } else { s };
                Some((m, b))
            }
            PlaneMap::Compose { outer, inner } => {
                let (mo, bo) = outer.as_affine()?;
                let (mi, bi) = inner.as_affine()?;
                Some((mo * mi, mo * bi + bo))
            }
            PlaneMap::Expression(e) => {
                let p0 = e.components[0].to_polynomial()?;
                let p1 = e.components[1].to_polynomial()?;
                if p0.effective_degree() > 1 || p1.effective_degree() > 1 {
                    return None;
                }
                let z = Point2::zeros();
                let m = Matrix2::new(
                    p0.derivative(0).eval(&z),
                    p0.derivative(1).eval(&z),
                    p1.derivative(0).eval(&z),
                    p1.derivative(1).eval(&z),
                );
                Some((m, Point2::new(p0.eval(&z), p1.eval(&z))))
            }
            PlaneMap::Piecewise { .. } => None,
        }
    }

    /// Whether jets can be pushed through this map.
    pub fn has_jets(&self) -> bool {
        match self {
            PlaneMap::Linear { .. } | PlaneMap::Expression(_) => true,
            PlaneMap::GradientOf { potential, .. } => field_has_jets(potential),
            PlaneMap::Compose { outer, inner } => outer.has_jets() && inner.has_jets(),
            PlaneMap::Piecewise { pieces } => pieces.iter().all(|p| p.map.has_jets()),
        }
    }
}

fn field_has_jets(f: &ScalarField) -> bool {
    match f {
        ScalarField::SecondMirror(_) | ScalarField::LineIntegral(_) => false,
        ScalarField::Affine { inner, .. } => field_has_jets(inner),
        ScalarField::Sum { terms } => terms.iter().all(field_has_jets),
        _ => true,
    }
}

/// Max over an `n x n` grid on `region` of `|d g1/dx2 - d g2/dx1|`, where
/// `g = m - id` (equivalently the antisymmetric part of the Jacobian of `m`).
pub fn curl_deficit(m: &PlaneMap, region: &Domain, n: usize) -> Result<f64> {
    let mut pts = region.grid_points(n);
    pts.push(region.center());
    let mut worst: f64 = 0.0;
    for p in &pts {
        let j = m.jacobian(p)?;
        worst = worst.max((j[(0, 1)] - j[(1, 0)]).abs());
    }
    Ok(worst)
}

pub const DEFAULT_CURL_TOLERANCE: f64 = 1e-8;

/// A potential `G` with `G(base) = 0` and `grad G = m` on `region`.
///
/// Gradient maps and symmetric affine maps get a closed-form potential;
/// anything else is integrated numerically along axis-aligned paths.
pub fn potential_from_gradient(m: &PlaneMap, base: &Point2, region: &Domain, tolerance: f64) -> Result<ScalarField> {
    let deficit = curl_deficit(m, region, 32)?;
    let scale = 1.0 + m.jacobian(&region.center())?.norm();
    if deficit > tolerance * scale {
        return Err(Error::NotAGradient { deficit, tolerance });
    }
    if let PlaneMap::GradientOf {
        potential,
        add_identity: false,
    } = m
    {
        let v0 = potential.value(base)?;
        return Ok(potential.clone().shifted(-v0));
    }
    if let Some((a, b)) = m.as_affine() {
        let s = (a + a.transpose()) * 0.5;
        let g0 = a * base + b;
        return Ok(Polynomial::quadratic(*base, &s, &g0, 0.0).into());
    }
    Ok(ScalarField::LineIntegral(Box::new(LineIntegralField {
        gradient: m.clone(),
        base: *base,
        tolerance: 1e-13,
    })))
}

pub const MAX_NEWTON_ITERATIONS: usize = 50;

/// Solves `m(x) = y` by damped Newton from `guess`.
pub fn invert_map(m: &PlaneMap, y: &Point2, guess: &Point2) -> Result<Point2> {
    let tol = 1e-11 * (1.0 + y.norm());
    let mut x = *guess;
    let mut r = m.apply(&x)? - y;
    let mut rn = r.norm();
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if rn <= tol {
            return Ok(x);
        }
        let j = m.jacobian(&x)?;
        let step = j
            .lu()
            .solve(&r)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or(Error::SingularJacobian { point: x })?;
        let mut lambda = 1.0;
        loop {
            let cand = x - step * lambda;
            if let Ok(v) = m.apply(&cand) {
                let rc = v - y;
                if rc.norm() < rn || lambda < 1e-4 {
                    x = cand;
                    r = rc;
                    rn = rc.norm();
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return Err(Error::InversionFailure {
                    iterations: MAX_NEWTON_ITERATIONS,
                    residual: rn,
                });
            }
        }
    }
    if rn <= tol {
        return Ok(x);
    }
    Err(Error::InversionFailure {
        iterations: MAX_NEWTON_ITERATIONS,
        residual: rn,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Preserving,
    Reversing,
    Mixed,
}

/// Sampled sign classification of `det J`, with a witness of each kind.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationCheck {
    pub orientation: Orientation,
    pub positive: Option<Point2>,
    pub negative: Option<Point2>,
    pub degenerate: Option<Point2>,
}

pub const ORIENTATION_GRID: usize = 64;

pub fn orientation_check(m: &PlaneMap, region: &Domain, n: usize) -> Result<OrientationCheck> {
    let mut pts = region.grid_points(n);
    pts.push(region.center());
    let (mut pos, mut neg, mut deg) = (None, None, None);
    for p in pts {
        let d = m.jacobian(&p)?.determinant();
        if d.abs() < 1e-12 {
            deg.get_or_insert(p);
        } else if d > 0.0 {
            pos.get_or_insert(p);
        } else {
            neg.get_or_insert(p);
        }
    }
    let orientation = match (pos, neg, deg) {
        (Some(_), None, None) => Orientation::Preserving,
        (None, Some(_), None) => Orientation::Reversing,
        _ => Orientation::Mixed,
    };
    Ok(OrientationCheck {
        orientation,
        positive: pos,
        negative: neg,
        degenerate: deg,
    })
}

pub fn orientation(m: &PlaneMap, region: &Domain) -> Result<Orientation> {
    Ok(orientation_check(m, region, ORIENTATION_GRID)?.orientation)
}

/// Pairwise check on an `n x n` grid that distinct samples have distinct
/// images: the image separation of every pair must exceed `1e-3` times
/// the smallest singular value of the Jacobian seen times their distance.
pub fn sampled_injective(m: &PlaneMap, region: &Domain, n: usize) -> Result<bool> {
    let pts = region.grid_points(n);
    let mut imgs = Vec::with_capacity(pts.len());
    let mut smin = f64::INFINITY;
    for p in &pts {
        imgs.push(m.apply(p)?);
        let sv = m.jacobian(p)?.singular_values();
        smin = smin.min(sv.min());
    }
    if smin <= 0.0 {
        return Ok(false);
    }
    for i in 0..pts.len() {
        for k in (i + 1)..pts.len() {
            let d = (pts[i] - pts[k]).norm();
            if (imgs[i] - imgs[k]).norm() < 1e-3 * smin * d {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Image of a convex domain: exact for affine maps, otherwise a polygon
/// through sampled boundary images pushed outward by the chord sagitta.
pub fn image_domain(m: &PlaneMap, d: &Domain, samples: usize) -> Result<Domain> {
    if let Some((a, b)) = m.as_affine() {
        return d.affine_image(&a, &b);
    }
    if let Domain::Interval { lo, hi } = d {
        let mut xs = Vec::new();
        for k in 0..=samples {
            let x = lo + (hi - lo) * k as f64 / samples as f64;
            xs.push(m.apply(&Point2::new(x, 0.0))?.x);
        }
        let a = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let b = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        return Domain::interval(a, b);
    }
    let fine = d.boundary_points(2 * samples);
    let mut img = Vec::with_capacity(fine.len());
    for p in &fine {
        img.push(m.apply(p)?);
    }
    if !curve_is_convex(&img) {
        return Err(Error::ImageNotConvex);
    }
    let coarse: Vec<Point2> = img.iter().step_by(2).cloned().collect();
    let hull = convex_hull(&coarse);
    let poly = Domain::polygon(hull)?;
    let Domain::Polygon { vertices } = &poly else {
        unreachable!()
    };
    let mut margin: f64 = 0.0;
    for p in img.iter().skip(1).step_by(2) {
        margin = margin.max(outside_distance(vertices, p));
    }
    let scale = poly.diameter();
    Domain::polygon(offset_polygon(vertices, 1.5 * margin + 1e-9 * scale))
}

/// Closed curve turns one way only (either orientation).
fn curve_is_convex(pts: &[Point2]) -> bool {
    let n = pts.len();
    let scale = pts.iter().map(|p| (p - pts[0]).norm_squared()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let (mut pos, mut neg) = (false, false);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        let e1 = b - a;
        let e2 = c - b;
        let cr = e1.x * e2.y - e1.y * e2.x;
        if cr > tol {
            pos = true;
        } else if cr < -tol {
            neg = true;
        }
    }
    !(pos && neg)
}

fn outside_distance(ccw: &[Point2], p: &Point2) -> f64 {
    let n = ccw.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let a = ccw[i];
        let e = ccw[(i + 1) % n] - a;
        let out = Point2::new(e.y, -e.x).normalize();
        worst = worst.max((p - a).dot(&out));
    }
    worst
}

/// Moves every edge of a CCW convex polygon outward by `d`.
pub(crate) fn offset_polygon(ccw: &[Point2], d: f64) -> Vec<Point2> {
    let n = ccw.len();
    let lines: Vec<(Point2, Point2)> = (0..n)
        .map(|i| {
            let a = ccw[i];
            let e = ccw[(i + 1) % n] - a;
            let out = Point2::new(e.y, -e.x).normalize();
            (a + out * d, e)
        })
        .collect();
    (0..n)
        .map(|i| {
            let (p, u) = lines[(i + n - 1) % n];
            let (q, v) = lines[i];
            let den = u.x * v.y - u.y * v.x;
            if den.abs() < 1e-300 {
                q
            } else {
                let w = q - p;
                let t = (w.x * v.y - w.y * v.x) / den;
                p + u * t
            }
        })
        .collect()
}
