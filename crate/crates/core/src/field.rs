//! Scalar fields on planar domains: the mirror heights and potentials.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Point2};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::GridField;
use crate::jet::Real;
use crate::map::{invert_map, PlaneMap};
use crate::poly::{PolyDerivs, Polynomial};

/// Value, gradient and Hessian at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub value: f64,
    pub gradient: Vector2<f64>,
    pub hessian: Matrix2<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "Polynomial", into = "Polynomial")]
pub struct PolyField {
    poly: Polynomial,
    derivs: PolyDerivs,
}

impl PartialEq for PolyField {
    fn eq(&self, other: &Self) -> bool {
        self.poly == other.poly
    }
}

impl From<Polynomial> for PolyField {
    fn from(poly: Polynomial) -> Self {
        let derivs = PolyDerivs::of(&poly);
        PolyField { poly, derivs }
    }
}

impl From<PolyField> for Polynomial {
    fn from(p: PolyField) -> Self {
        p.poly
    }
}

impl PolyField {
    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }
}

/// A field given by an expression string; derivatives are symbolic.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ExprRepr", into = "ExprRepr")]
pub struct ExprField {
    source: String,
    expr: Expr,
    d1: [Expr; 2],
    d2: [Expr; 3],
}

#[derive(Serialize, Deserialize)]
struct ExprRepr {
    expression: String,
}

impl TryFrom<ExprRepr> for ExprField {
    type Error = Error;
    fn try_from(r: ExprRepr) -> Result<Self> {
        ExprField::parse(&r.expression)
    }
}

impl From<ExprField> for ExprRepr {
    fn from(e: ExprField) -> Self {
        ExprRepr { expression: e.source }
    }
}

impl PartialEq for ExprField {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl ExprField {
    pub fn parse(source: &str) -> Result<Self> {
        let expr = Expr::parse(source)?;
        Ok(Self::from_expr(source.to_string(), expr))
    }

    fn from_expr(source: String, expr: Expr) -> Self {
        let dx = expr.derivative(0);
        let dy = expr.derivative(1);
        let d2 = [dx.derivative(0), dx.derivative(1), dy.derivative(1)];
        ExprField {
            source,
            expr,
            d1: [dx, dy],
            d2,
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn derivative(&self, k: usize) -> &Expr {
        &self.d1[k]
    }
}

/// The second mirror of a two-mirror periscope, evaluated lazily.
///
/// For `y = x + grad G(x)` the height is
/// `G(x)/c + h + (|grad G(x)|^2 - c^2) / (2c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMirrorField {
    pub potential: ScalarField,
    pub c: f64,
    pub h: f64,
    /// Domain of the first mirror; its center seeds the inversion.
    pub source: Domain,
}

/// Potential recovered from a gradient map by path integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineIntegralField {
    pub gradient: PlaneMap,
    pub base: Point2,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Polynomial(PolyField),
    Expression(ExprField),
    Grid(GridField),
    /// `scale * inner(x) + linear . x + constant`
    Affine {
        inner: Box<ScalarField>,
        scale: f64,
        linear: Point2,
        constant: f64,
    },
    Sum {
        terms: Vec<ScalarField>,
    },
    SecondMirror(Box<SecondMirrorField>),
    LineIntegral(Box<LineIntegralField>),
}

impl From<Polynomial> for ScalarField {
    fn from(p: Polynomial) -> Self {
        ScalarField::Polynomial(p.into())
    }
}

impl ScalarField {
    /// Parses an expression, keeping an exact coefficient table whenever
    /// the expression is a polynomial.
    pub fn parse(source: &str) -> Result<Self> {
        let expr = Expr::parse(source)?;
        Ok(match expr.to_polynomial() {
            Some(p) => p.into(),
            None => ScalarField::Expression(ExprField::from_expr(source.to_string(), expr)),
        })
    }

    pub fn constant(v: f64) -> Self {
        Polynomial::from_terms(Point2::zeros(), &[(0, 0, v)])
            .expect("constant polynomial")
            .into()
    }

    /// `scale * self + linear . x + constant`, collapsing nested affine layers.
    pub fn affine(self, scale: f64, linear: Point2, constant: f64) -> Self {
        match self {
            ScalarField::Affine {
                inner,
                scale: s0,
                linear: l0,
                constant: c0,
            } => ScalarField::Affine {
                inner,
                scale: scale * s0,
                linear: l0 * scale + linear,
                constant: c0 * scale + constant,
            },
            other => ScalarField::Affine {
                inner: Box::new(other),
                scale,
                linear,
                constant,
            },
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        self.affine(k, Point2::zeros(), 0.0)
    }

    pub fn shifted(self, dz: f64) -> Self {
        self.affine(1.0, Point2::zeros(), dz)
    }

    pub fn plus(self, other: ScalarField) -> Self {
        match self {
            ScalarField::Sum { mut terms } => {
                terms.push(other);
                ScalarField::Sum { terms }
            }
            s => ScalarField::Sum { terms: vec![s, other] },
        }
    }

    pub fn value(&self, p: &Point2) -> Result<f64> {
        Ok(match self {
            ScalarField::Polynomial(f) => f.poly.eval(p),
            ScalarField::Expression(e) => e.expr.eval_f64(p),
            ScalarField::Grid(g) => g.eval_all(p).0,
            ScalarField::Affine {
                inner,
                scale,
                linear,
                constant,
            } => scale * inner.value(p)? + linear.dot(p) + constant,
            ScalarField::Sum { terms } => {
                let mut acc = 0.0;
                for t in terms {
                    acc += t.value(p)?;
                }
                acc
            }
            ScalarField::SecondMirror(m) => m.evaluate(p, false)?.value,
            ScalarField::LineIntegral(l) => l.value(p)?,
        })
    }

    pub fn gradient(&self, p: &Point2) -> Result<Vector2<f64>> {
        Ok(match self {
            ScalarField::Polynomial(f) => Vector2::new(f.derivs.d1[0].eval(p), f.derivs.d1[1].eval(p)),
            ScalarField::Expression(e) => Vector2::new(e.d1[0].eval_f64(p), e.d1[1].eval_f64(p)),
            ScalarField::Grid(g) => {
                let (_, d, _) = g.eval_all(p);
                Vector2::new(d[0], d[1])
            }
            ScalarField::Affine {
                inner, scale, linear, ..
            } => inner.gradient(p)? * *scale + linear,
            ScalarField::Sum { terms } => {
                let mut acc = Vector2::zeros();
                for t in terms {
                    acc += t.gradient(p)?;
                }
                acc
            }
            ScalarField::SecondMirror(m) => m.evaluate(p, false)?.gradient,
            ScalarField::LineIntegral(l) => l.gradient.apply(p)?,
        })
    }

    pub fn value_gradient(&self, p: &Point2) -> Result<(f64, Vector2<f64>)> {
        match self {
            ScalarField::SecondMirror(m) => {
                let v = m.evaluate(p, false)?;
                Ok((v.value, v.gradient))
            }
            _ => Ok((self.value(p)?, self.gradient(p)?)),
        }
    }

    pub fn hessian(&self, p: &Point2) -> Result<Matrix2<f64>> {
        Ok(match self {
            ScalarField::Polynomial(f) => {
                let d = &f.derivs.d2;
                let xy = d[1].eval(p);
                Matrix2::new(d[0].eval(p), xy, xy, d[2].eval(p))
            }
            ScalarField::Expression(e) => {
                let xy = e.d2[1].eval_f64(p);
                Matrix2::new(e.d2[0].eval_f64(p), xy, xy, e.d2[2].eval_f64(p))
            }
            ScalarField::Grid(g) => {
                let (_, _, h) = g.eval_all(p);
                Matrix2::new(h[0], h[1], h[1], h[2])
            }
            ScalarField::Affine { inner, scale, .. } => inner.hessian(p)? * *scale,
            ScalarField::Sum { terms } => {
                let mut acc = Matrix2::zeros();
                for t in terms {
                    acc += t.hessian(p)?;
                }
                acc
            }
            ScalarField::SecondMirror(m) => m.evaluate(p, true)?.hessian,
            ScalarField::LineIntegral(l) => {
                let j = l.gradient.jacobian(p)?;
                (j + j.transpose()) * 0.5
            }
        })
    }

    pub fn evaluate(&self, p: &Point2) -> Result<FieldValue> {
        if let ScalarField::SecondMirror(m) = self {
            return m.evaluate(p, true);
        }
        Ok(FieldValue {
            value: self.value(p)?,
            gradient: self.gradient(p)?,
            hessian: self.hessian(p)?,
        })
    }

    /// Evaluation on jets (or any [`Real`]); only for explicitly
    /// represented kinds.
    pub fn eval_generic<R: Real>(&self, x: &R, y: &R) -> Result<R> {
        Ok(match self {
            ScalarField::Polynomial(f) => f.poly.eval_generic(x, y),
            ScalarField::Expression(e) => e.expr.eval(&[x.clone(), y.clone()]),
            ScalarField::Grid(g) => g.eval_generic(x, y),
            ScalarField::Affine {
                inner,
                scale,
                linear,
                constant,
            } => {
                inner.eval_generic(x, y)?.scale(*scale) + x.scale(linear.x) + y.scale(linear.y) + x.constant(*constant)
            }
            ScalarField::Sum { terms } => {
                let mut acc = x.constant(0.0);
                for t in terms {
                    acc = acc + t.eval_generic(x, y)?;
                }
                acc
            }
            ScalarField::SecondMirror(_) | ScalarField::LineIntegral(_) => {
                return Err(Error::NoTaylorExpansion("implicitly defined field".into()))
            }
        })
    }

    /// Gradient on jets.
    pub fn gradient_generic<R: Real>(&self, x: &R, y: &R) -> Result<[R; 2]> {
        Ok(match self {
            ScalarField::Polynomial(f) => [f.derivs.d1[0].eval_generic(x, y), f.derivs.d1[1].eval_generic(x, y)],
            ScalarField::Expression(e) => {
                let v = [x.clone(), y.clone()];
                [e.d1[0].eval(&v), e.d1[1].eval(&v)]
            }
            ScalarField::Grid(g) => g.gradient_generic(x, y),
            ScalarField::Affine {
                inner, scale, linear, ..
            } => {
                let [gx, gy] = inner.gradient_generic(x, y)?;
                [
                    gx.scale(*scale) + x.constant(linear.x),
                    gy.scale(*scale) + x.constant(linear.y),
                ]
            }
            ScalarField::Sum { terms } => {
                let mut acc = [x.constant(0.0), x.constant(0.0)];
                for t in terms {
                    let [gx, gy] = t.gradient_generic(x, y)?;
                    acc = [acc[0].clone() + gx, acc[1].clone() + gy];
                }
                acc
            }
            ScalarField::SecondMirror(_) | ScalarField::LineIntegral(_) => {
                return Err(Error::NoTaylorExpansion("implicitly defined field".into()))
            }
        })
    }

    /// The polynomial, if this field is one.
    pub fn as_polynomial(&self) -> Option<&Polynomial> {
        match self {
            ScalarField::Polynomial(p) => Some(&p.poly),
            _ => None,
        }
    }

    /// `(S, b, k)` with `F(x) = 0.5 x^T S x + b.x + k` when the field is
    /// quadratic or lower.
    pub fn as_quadratic(&self) -> Option<(Matrix2<f64>, Vector2<f64>, f64)> {
        match self {
            ScalarField::Polynomial(f) => {
                let p = &f.poly;
                if p.effective_degree() > 2 {
                    return None;
                }
                let c = p.center();
                let s = Matrix2::new(2.0 * p.coeff(2, 0), p.coeff(1, 1), p.coeff(1, 1), 2.0 * p.coeff(0, 2));
                // re-center at the origin
                let b_c = Vector2::new(p.coeff(1, 0), p.coeff(0, 1));
                let b = b_c - s * c;
                let k = p.coeff(0, 0) - b_c.dot(&c) + 0.5 * c.dot(&(s * c));
                Some((s, b, k))
            }
            ScalarField::Affine {
                inner,
                scale,
                linear,
                constant,
            } => {
                let (s, b, k) = inner.as_quadratic()?;
                Some((s * *scale, b * *scale + linear, k * scale + constant))
            }
            ScalarField::Sum { terms } => {
                let mut acc = (Matrix2::zeros(), Vector2::zeros(), 0.0);
                for t in terms {
                    let (s, b, k) = t.as_quadratic()?;
                    acc = (acc.0 + s, acc.1 + b, acc.2 + k);
                }
                Some(acc)
            }
            _ => None,
        }
    }
}

impl SecondMirrorField {
    fn displacement_map(&self) -> PlaneMap {
        PlaneMap::GradientOf {
            potential: self.potential.clone(),
            add_identity: true,
        }
    }

    /// Preimage `x` of `y` under `x -> x + grad G(x)`.
    pub fn preimage(&self, y: &Point2) -> Result<Point2> {
        let seed = self.source.center();
        let guess = y - self.potential.gradient(&seed)?;
        invert_map(&self.displacement_map(), y, &guess)
    }

    fn evaluate(&self, y: &Point2, with_hessian: bool) -> Result<FieldValue> {
        let x = self.preimage(y)?;
        let g = self.potential.gradient(&x)?;
        let c = self.c;
        let value = self.potential.value(&x)? / c + self.h + (g.norm_squared() - c * c) / (2.0 * c);
        let hessian = if with_hessian {
            let h = self.potential.hessian(&x)?;
            let inv = (Matrix2::identity() + h)
                .try_inverse()
                .ok_or(Error::SingularJacobian { point: x })?;
            h * inv / c
        } else {
            Matrix2::zeros()
        };
        Ok(FieldValue {
            value,
            gradient: g / c,
            hessian,
        })
    }
}

// 10-point Gauss-Legendre on [-1, 1]
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_1,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss10(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let m = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut acc = 0.0;
    for k in 0..5 {
        acc += GL_WEIGHTS[k] * (f(m + r * GL_NODES[k])? + f(m - r * GL_NODES[k])?);
    }
    Ok(acc * r)
}

pub(crate) fn adaptive_quad(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
    let whole = gauss10(f, a, b)?;
    let m = 0.5 * (a + b);
    let halves = gauss10(f, a, m)? + gauss10(f, m, b)?;
    if (whole - halves).abs() <= tol * (1.0 + halves.abs()) || depth == 0 {
        return Ok(halves);
    }
    Ok(adaptive_quad(f, a, m, 0.5 * tol, depth - 1)? + adaptive_quad(f, m, b, 0.5 * tol, depth - 1)?)
}

impl LineIntegralField {
    /// Mean of the integrals along the two axis-aligned paths from `base`.
    pub fn value(&self, p: &Point2) -> Result<f64> {
        let b = self.base;
        let tol = self.tolerance;
        let g = &self.gradient;
        let gx_at_by = |s: f64| Ok(g.apply(&Point2::new(s, b.y))?.x);
        let gy_at_px = |t: f64| Ok(g.apply(&Point2::new(p.x, t))?.y);
        let gy_at_bx = |t: f64| Ok(g.apply(&Point2::new(b.x, t))?.y);
        let gx_at_py = |s: f64| Ok(g.apply(&Point2::new(s, p.y))?.x);
        let first = adaptive_quad(&gx_at_by, b.x, p.x, tol, 20)? + adaptive_quad(&gy_at_px, b.y, p.y, tol, 20)?;
        let second = adaptive_quad(&gy_at_bx, b.y, p.y, tol, 20)? + adaptive_quad(&gx_at_py, b.x, p.x, tol, 20)?;
        Ok(0.5 * (first + second))
    }
}
