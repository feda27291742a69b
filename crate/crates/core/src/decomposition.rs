//! Splitting a plane map into two gradient maps.
//!
//! A map `f` is written as `grad psi o grad phi` with `grad psi` the
//! inverse of `grad u`, so that `grad u o f = grad phi`. Symmetry of the
//! Jacobian of `grad u o f` is the linear second order equation
//! `A u_11 + B u_12 + C u_22 = 0` in the image variables, with
//! `A = J12`, `B = J22 - J11`, `C = -J21` evaluated at the preimage.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::domain::{Domain, Point2};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::jet::{Jet, Real};
use crate::map::{invert_map, PlaneMap};
use crate::poly::Polynomial;
use crate::sampling::halton_points;

pub const CLASSIFICATION_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_DEGREE: usize = 8;
pub const MAX_HALVINGS: usize = 20;
/// Relative floor on `|det H| / |H|^2` for a Hessian to count as nonsingular.
pub const HESSIAN_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperbolicity {
    Hyperbolic,
    Degenerate,
    Elliptic,
}

impl std::fmt::Display for Hyperbolicity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Hyperbolicity::Hyperbolic => "hyperbolic",
            Hyperbolicity::Degenerate => "degenerate",
            Hyperbolicity::Elliptic => "elliptic",
        })
    }
}

/// `(tr J)^2 - 4 det J`
pub fn discriminant(j: &Matrix2<f64>) -> f64 {
    let tr = j.trace();
    tr * tr - 4.0 * j.determinant()
}

pub fn classify(disc: f64) -> Hyperbolicity {
    if disc > CLASSIFICATION_TOLERANCE {
        Hyperbolicity::Hyperbolic
    } else if disc >= -CLASSIFICATION_TOLERANCE {
        Hyperbolicity::Degenerate
    } else {
        Hyperbolicity::Elliptic
    }
}

pub fn hyperbolicity(f: &PlaneMap, x0: &Point2) -> Result<Hyperbolicity> {
    Ok(classify(discriminant(&f.jacobian(x0)?)))
}

/// `[A, B, C]` from a Jacobian of `f`.
pub fn coefficients_from_jacobian(j: &Matrix2<f64>) -> [f64; 3] {
    [j[(0, 1)], j[(1, 1)] - j[(0, 0)], -j[(1, 0)]]
}

/// The coefficients `A, B, C` as fields on the image side.
#[derive(Debug, Clone, PartialEq)]
pub enum PdeCoefficients {
    Constant {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Coefficients of the map, evaluated at `f^{-1}(xi)`; `seed` starts
    /// the inversion.
    Map {
        map: Box<PlaneMap>,
        seed: Point2,
    },
}

impl PdeCoefficients {
    pub fn of_map(map: PlaneMap, seed: Point2) -> Self {
        PdeCoefficients::Map {
            map: Box::new(map),
            seed,
        }
    }

    pub fn at(&self, xi: &Point2) -> Result<[f64; 3]> {
        match self {
            PdeCoefficients::Constant { a, b, c } => Ok([*a, *b, *c]),
            PdeCoefficients::Map { map, seed } => {
                let x = invert_map(map, xi, seed)?;
                Ok(coefficients_from_jacobian(&map.jacobian(&x)?))
            }
        }
    }
}

/// Characteristic data at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristics {
    /// Unit conormals `p` with `A p1^2 + B p1 p2 + C p2^2 = 0`.
    pub covectors: [Vector2<f64>; 2],
    /// Unit tangents of the characteristic curves.
    pub directions: [Vector2<f64>; 2],
    /// `dy/dx` along each family; infinite for vertical curves.
    pub slopes: [f64; 2],
}

/// Characteristic directions of `A u_11 + B u_12 + C u_22` for constant
/// coefficients.
pub fn characteristics_of(abc: [f64; 3], at: &Point2) -> Result<Characteristics> {
    let [a, b, c] = abc;
    let disc = b * b - 4.0 * a * c;
    let class = classify(disc);
    if class != Hyperbolicity::Hyperbolic {
        return Err(Error::NotHyperbolic {
            point: *at,
            discriminant: disc,
            class: class.to_string(),
        });
    }
    let eig = SymmetricEigen::new(Matrix2::new(a, 0.5 * b, 0.5 * b, c));
    let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let e1: Vector2<f64> = eig.eigenvectors.column(hi).into();
    let e2: Vector2<f64> = eig.eigenvectors.column(lo).into();
    let (l1, l2) = (eig.eigenvalues[hi], eig.eigenvalues[lo]);
    let u = (-l2).sqrt();
    let v = l1.sqrt();
    let covectors = [(e1 * u + e2 * v).normalize(), (e1 * u - e2 * v).normalize()];
    let directions = covectors.map(|p| Vector2::new(-p.y, p.x));
    let slopes = directions.map(|d| if d.x == 0.0 { f64::INFINITY } else { d.y / d.x });
    Ok(Characteristics {
        covectors,
        directions,
        slopes,
    })
}

pub fn characteristics(coeffs: &PdeCoefficients, xi0: &Point2) -> Result<Characteristics> {
    characteristics_of(coeffs.at(xi0)?, xi0)
}

/// Integrates the characteristic curve of family `family` (0 or 1)
/// through `xi0` over arc length `length` (negative runs backwards) by
/// RK4 with step doubling.
pub fn trace_characteristic(
    coeffs: &PdeCoefficients,
    xi0: &Point2,
    family: usize,
    length: f64,
    tolerance: f64,
) -> Result<Vec<Point2>> {
    let family = family.min(1);
    let sign = length.signum();
    let mut heading = characteristics(coeffs, xi0)?.directions[family] * sign;
    let field = |p: &Point2, heading: &Vector2<f64>| -> Result<Vector2<f64>> {
        let ch = characteristics(coeffs, p)?;
        let d = ch
            .directions
            .iter()
            .max_by(|a, b| a.dot(heading).abs().total_cmp(&b.dot(heading).abs()))
            .copied()
            .unwrap_or(*heading);
        Ok(if d.dot(heading) < 0.0 { -d } else { d })
    };
    let rk4 = |p: &Point2, heading: &Vector2<f64>, h: f64| -> Result<(Point2, Vector2<f64>)> {
        let k1 = field(p, heading)?;
        let k2 = field(&(p + k1 * (0.5 * h)), &k1)?;
        let k3 = field(&(p + k2 * (0.5 * h)), &k2)?;
        let k4 = field(&(p + k3 * h), &k3)?;
        let next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        Ok((next, k4))
    };
    let total = length.abs();
    let mut h = (total / 16.0).max(f64::MIN_POSITIVE);
    let mut s = 0.0;
    let mut p = *xi0;
    let mut out = vec![p];
    let mut steps = 0;
    while s < total {
        steps += 1;
        if steps > 100_000 {
            return Err(Error::NumericalFailure("characteristic integration stalled".into()));
        }
        h = h.min(total - s);
        let (full, _) = rk4(&p, &heading, h)?;
        let (half, mid) = rk4(&p, &heading, 0.5 * h)?;
        let (two, end) = rk4(&half, &mid, 0.5 * h)?;
        let err = (full - two).norm();
        if err <= tolerance.max(1e-15) || h < 1e-12 * (1.0 + total) {
            s += h;
            p = two;
            heading = end;
            out.push(p);
            if err < 0.1 * tolerance {
                h *= 2.0;
            }
        } else {
            h *= 0.5;
        }
    }
    Ok(out)
}

/// `T = p1 p1^T + p2 p2^T` built from the characteristic conormals of `F`.
fn characteristic_metric(f: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    let ch = characteristics_of(coefficients_from_jacobian(f), &Point2::zeros())?;
    let [p, q] = ch.covectors;
    Ok(p * p.transpose() + q * q.transpose())
}

/// Symmetric `T` with `T F` symmetric, chosen to maximize `|det T|` on the
/// unit sphere of the solution plane.
fn widest_metric(f: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    // T = [[p, q], [q, r]] must satisfy p F12 + q (F22 - F11) - r F21 = 0.
    let w = nalgebra::Vector3::new(f[(0, 1)], f[(1, 1)] - f[(0, 0)], -f[(1, 0)]);
    let wn = w.normalize();
    let seed = if wn.x.abs() < 0.9 {
        nalgebra::Vector3::x()
    } else {
        nalgebra::Vector3::y()
    };
    let n1 = (seed - wn * wn.dot(&seed)).normalize();
    let n2 = wn.cross(&n1);
    // det(p, q, r) = p r - q^2 as a quadratic form
    let d = nalgebra::Matrix3::new(0.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.5, 0.0, 0.0);
    let nmat = nalgebra::Matrix3x2::from_columns(&[n1, n2]);
    let k = nmat.transpose() * d * nmat;
    let eig = SymmetricEigen::new(k);
    let i = if eig.eigenvalues[0].abs() >= eig.eigenvalues[1].abs() {
        0
    } else {
        1
    };
    if eig.eigenvalues[i].abs() < 1e-14 {
        return Err(Error::SingularMatrix);
    }
    let c = eig.eigenvectors.column(i);
    let v = nmat * c;
    Ok(Matrix2::new(v.x, v.y, v.y, v.z))
}

/// Symmetric `S1, S2` with `S2 S1 = F`. A symmetric `F` gives `(F, I)`.
pub fn factor_linear(f: &Matrix2<f64>) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    let det = f.determinant();
    if !det.is_finite() || det.abs() <= 1e-14 * f.norm_squared() || det == 0.0 {
        return Err(Error::SingularMatrix);
    }
    if f[(0, 1)] == f[(1, 0)] {
        return Ok((*f, Matrix2::identity()));
    }
    let t = if classify(discriminant(f)) == Hyperbolicity::Hyperbolic {
        characteristic_metric(f)?
    } else {
        widest_metric(f)?
    };
    let dt = t.determinant();
    if dt.abs() < 1e-14 {
        return Err(Error::SingularMatrix);
    }
    let tf = t * f;
    let off = 0.5 * (tf[(0, 1)] + tf[(1, 0)]);
    let s1 = Matrix2::new(tf[(0, 0)], off, off, tf[(1, 1)]);
    let s2 = Matrix2::new(t[(1, 1)], -t[(0, 1)], -t[(0, 1)], t[(0, 0)]) / dt;
    Ok((s1, s2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    /// Degree of the Taylor polynomial `u`.
    pub degree: usize,
    pub tolerance: f64,
    /// Starting radius; `None` uses `0.1 / (1 + |D^3 f|)`.
    pub initial_radius: Option<f64>,
    pub max_halvings: usize,
    /// Interior sample count for the neighbourhood checks.
    pub samples: usize,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            degree: DEFAULT_DEGREE,
            tolerance: 1e-8,
            initial_radius: None,
            max_halvings: MAX_HALVINGS,
            samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub phi: ScalarField,
    pub u: ScalarField,
    pub center: Point2,
    pub image_center: Point2,
    pub radius: f64,
    /// Max curl deficit of `grad u o f` on the neighbourhood.
    pub residual: f64,
    /// Max of `|grad u(f(x)) - grad phi(x)|` on the neighbourhood.
    pub gradient_mismatch: f64,
    pub hessian_condition: f64,
}

impl DecompositionResult {
    pub fn neighbourhood(&self) -> Result<Domain> {
        Domain::disc(self.center, self.radius)
    }
}

pub fn decompose_local(f: &PlaneMap, x0: &Point2, tol: f64) -> Result<DecompositionResult> {
    decompose_local_with(
        f,
        x0,
        &DecomposeOptions {
            tolerance: tol,
            ..DecomposeOptions::default()
        },
    )
}

pub fn decompose_local_with(f: &PlaneMap, x0: &Point2, opts: &DecomposeOptions) -> Result<DecompositionResult> {
    let j0 = f.jacobian(x0)?;
    let disc = discriminant(&j0);
    let class = classify(disc);
    if class != Hyperbolicity::Hyperbolic {
        return Err(Error::NotHyperbolic {
            point: *x0,
            discriminant: disc,
            class: class.to_string(),
        });
    }
    if !f.has_jets() {
        return Err(Error::NoTaylorExpansion(
            "map involves fields without Taylor expansions".into(),
        ));
    }
    let n = opts.degree.max(3);
    let jets = Jets::expand(f, x0, n)?;
    let u_jet = solve_u(&jets, &j0, n)?;
    let phi_jet = pull_back_gradient(&u_jet, &jets, n);
    let xi0 = jets.image_center;
    let u: ScalarField = Polynomial::from_jet(xi0, &u_jet)?.into();
    let phi: ScalarField = Polynomial::from_jet(*x0, &phi_jet)?.into();

    let hu0 = u.hessian(&xi0)?;
    if !nonsingular(&hu0) || !nonsingular(&(hu0 * j0)) {
        return Err(Error::HessianDegenerate { point: *x0 });
    }
    let eig = SymmetricEigen::new(hu0).eigenvalues;
    let hessian_condition = eig.abs().max() / eig.abs().min();

    let scale = x0.norm().max(1.0);
    let mut r = opts
        .initial_radius
        .unwrap_or_else(|| 0.1 / (1.0 + jets.third_derivative_norm()));
    let mut last = f64::INFINITY;
    for _ in 0..=opts.max_halvings {
        if r < 1e-6 * scale {
            break;
        }
        let ball = Domain::disc(*x0, r)?;
        match check_neighbourhood(f, &u, &phi, &ball, opts.samples)? {
            Some((residual, mismatch)) if residual <= opts.tolerance && mismatch <= opts.tolerance => {
                return Ok(DecompositionResult {
                    phi,
                    u,
                    center: *x0,
                    image_center: xi0,
                    radius: r,
                    residual,
                    gradient_mismatch: mismatch,
                    hessian_condition,
                });
            }
            Some((residual, mismatch)) => last = residual.max(mismatch),
            None => {}
        }
        r *= 0.5;
    }
    Err(Error::RadiusUnderflow {
        min_radius: r,
        residual: last,
    })
}

fn nonsingular(h: &Matrix2<f64>) -> bool {
    h.determinant().abs() >= HESSIAN_FLOOR * h.norm_squared() && h.iter().all(|v| v.is_finite())
}

/// Returns `(curl deficit, gradient mismatch)`, or `None` if a Hessian
/// degenerates or `grad u` stops being monotone somewhere on the ball.
fn check_neighbourhood(
    f: &PlaneMap,
    u: &ScalarField,
    phi: &ScalarField,
    ball: &Domain,
    samples: usize,
) -> Result<Option<(f64, f64)>> {
    let mut pts = halton_points(ball, samples);
    pts.extend(ball.boundary_points(64));
    pts.push(ball.center());
    let mut residual: f64 = 0.0;
    let mut mismatch: f64 = 0.0;
    for x in &pts {
        let xi = f.apply(x)?;
        let j = f.jacobian(x)?;
        let hu = u.hessian(&xi)?;
        let eig = SymmetricEigen::new(hu).eigenvalues;
        if eig.min() <= 0.0 || !nonsingular(&hu) {
            return Ok(None);
        }
        let m = hu * j;
        if !nonsingular(&phi.hessian(x)?) {
            return Ok(None);
        }
        residual = residual.max((m[(0, 1)] - m[(1, 0)]).abs());
        mismatch = mismatch.max((u.gradient(&xi)? - phi.gradient(x)?).norm());
    }
    Ok(Some((residual, mismatch)))
}

/// Taylor data of `f` at `x0` and of its inverse at `f(x0)`.
struct Jets {
    image_center: Point2,
    /// `f - f(x0)` in the variables `x - x0`.
    forward: [Jet; 2],
    /// `f^{-1} - x0` in the variables `xi - f(x0)`.
    inverse: [Jet; 2],
}

impl Jets {
    fn expand(f: &PlaneMap, x0: &Point2, n: usize) -> Result<Jets> {
        let k = n - 1;
        let [mut f1, mut f2] = f.apply_generic(&Jet::var_s(k, x0.x), &Jet::var_t(k, x0.y))?;
        let image_center = Point2::new(f1.coeff(0, 0), f2.coeff(0, 0));
        f1.set_coeff(0, 0, 0.0);
        f2.set_coeff(0, 0, 0.0);
        let jinv = Matrix2::new(f1.coeff(1, 0), f1.coeff(0, 1), f2.coeff(1, 0), f2.coeff(0, 1))
            .try_inverse()
            .ok_or(Error::SingularJacobian { point: *x0 })?;
        let eta = [Jet::var_s(k, 0.0), Jet::var_t(k, 0.0)];
        let mut x = [
            eta[0].scale(jinv[(0, 0)]) + eta[1].scale(jinv[(0, 1)]),
            eta[0].scale(jinv[(1, 0)]) + eta[1].scale(jinv[(1, 1)]),
        ];
        // each pass fixes one more order
        for _ in 0..k {
            let r1 = f1.compose(&x[0], &x[1]) - eta[0].clone();
            let r2 = f2.compose(&x[0], &x[1]) - eta[1].clone();
            x = [
                x[0].clone() - r1.scale(jinv[(0, 0)]) - r2.scale(jinv[(0, 1)]),
                x[1].clone() - r1.scale(jinv[(1, 0)]) - r2.scale(jinv[(1, 1)]),
            ];
        }
        Ok(Jets {
            image_center,
            forward: [f1, f2],
            inverse: x,
        })
    }

    /// Max over components of `sum_{i+j=3} |d^3 f / dx^i dy^j|`.
    fn third_derivative_norm(&self) -> f64 {
        const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
        self.forward
            .iter()
            .map(|c| {
                (0..=3)
                    .map(|j| c.coeff(3 - j, j).abs() * FACT[3 - j] * FACT[j])
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `A, B, C` as jets in `xi - f(x0)` of degree `n - 2`.
    fn coefficients(&self, n: usize) -> [Jet; 3] {
        let d = n - 2;
        let g = [self.inverse[0].with_degree(d), self.inverse[1].with_degree(d)];
        let at = |jet: Jet| jet.compose(&g[0], &g[1]);
        let j11 = at(self.forward[0].ds());
        let j12 = at(self.forward[0].dt());
        let j21 = at(self.forward[1].ds());
        let j22 = at(self.forward[1].dt());
        [j12, j22 - j11, -j21]
    }
}

/// Degree-`n` jet of `u` at `f(x0)`: no linear part, Hessian from the
/// characteristic conormals, and higher terms solving the equation
/// order by order with minimal norm.
fn solve_u(jets: &Jets, j0: &Matrix2<f64>, n: usize) -> Result<Jet> {
    let h = characteristic_metric(j0)?;
    let mut u = Jet::zero(n);
    u.set_coeff(2, 0, 0.5 * h[(0, 0)]);
    u.set_coeff(1, 1, h[(0, 1)]);
    u.set_coeff(0, 2, 0.5 * h[(1, 1)]);
    let [a, b, c] = jets.coefficients(n);
    let (a0, b0, c0) = (a.coeff(0, 0), b.coeff(0, 0), c.coeff(0, 0));
    for m in 1..=n - 2 {
        let r = pde_residual(&u, &a, &b, &c);
        let rhs = DVector::from_iterator(m + 1, (0..=m).map(|k| -r.coeff(m - k, k)));
        let mut l = DMatrix::<f64>::zeros(m + 1, m + 3);
        for j in 0..=m + 2 {
            let i = m + 2 - j;
            let (fi, fj) = (i as f64, j as f64);
            if i >= 2 {
                l[(j, j)] += a0 * fi * (fi - 1.0);
            }
            if i >= 1 && j >= 1 {
                l[(j - 1, j)] += b0 * fi * fj;
            }
            if j >= 2 {
                l[(j - 2, j)] += c0 * fj * (fj - 1.0);
            }
        }
        let sol = l
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::NumericalFailure(format!("order {m} solve: {e}")))?;
        for j in 0..=m + 2 {
            u.set_coeff(m + 2 - j, j, sol[j]);
        }
    }
    Ok(u)
}

fn pde_residual(u: &Jet, a: &Jet, b: &Jet, c: &Jet) -> Jet {
    let us = u.ds();
    let ut = u.dt();
    a.clone() * us.ds() + b.clone() * us.dt() + c.clone() * ut.dt()
}

/// Degree-`n` jet at `x0` of a potential of `grad u o f`, averaging the
/// two axis-aligned integration paths.
fn pull_back_gradient(u: &Jet, jets: &Jets, n: usize) -> Jet {
    let d = n - 1;
    let fs = [jets.forward[0].with_degree(d), jets.forward[1].with_degree(d)];
    let g1 = u.ds().compose(&fs[0], &fs[1]);
    let g2 = u.dt().compose(&fs[0], &fs[1]);
    let mut out = Jet::zero(n);
    for (i, j, a) in g1.terms() {
        // int_0^s g1(., t): full weight off the axis, half on it
        let w = if j == 0 { 1.0 } else { 0.5 };
        out.set_coeff(i + 1, j, out.coeff(i + 1, j) + w * a / (i + 1) as f64);
    }
    for (i, j, a) in g2.terms() {
        let w = if i == 0 { 1.0 } else { 0.5 };
        out.set_coeff(i, j + 1, out.coeff(i, j + 1) + w * a / (j + 1) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(a: f64, b: f64, c: f64, d: f64) -> Matrix2<f64> {
        Matrix2::new(a, b, c, d)
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            classify(discriminant(&m(-1.0, 0.0, 0.0, 1.0))),
            Hyperbolicity::Hyperbolic
        );
        assert_eq!(discriminant(&m(-1.0, 0.0, 0.0, 1.0)), 4.0);
        assert_eq!(classify(discriminant(&m(0.0, -1.0, 1.0, 0.0))), Hyperbolicity::Elliptic);
        let g = PlaneMap::glutsyuk();
        assert_eq!(hyperbolicity(&g, &Point2::zeros()).unwrap(), Hyperbolicity::Degenerate);
    }

    #[test]
    fn wave_and_flip_characteristics() {
        let w = characteristics_of([1.0, 0.0, -1.0], &Point2::zeros()).unwrap();
        let mut s: Vec<f64> = w.slopes.to_vec();
        s.sort_by(f64::total_cmp);
        assert!((s[0] + 1.0).abs() < 1e-14 && (s[1] - 1.0).abs() < 1e-14);
        let sigma = characteristics_of([0.0, 2.0, 0.0], &Point2::zeros()).unwrap();
        for d in sigma.directions {
            assert!(d.x.abs() < 1e-14 || d.y.abs() < 1e-14);
        }
        assert!(matches!(
            characteristics_of([1.0, 0.0, 1.0], &Point2::zeros()),
            Err(Error::NotHyperbolic { .. })
        ));
    }

    #[test]
    fn tangent_slopes_solve_the_characteristic_quadratic() {
        let (a, b, c) = (1.0, 3.0, 0.5);
        let ch = characteristics_of([a, b, c], &Point2::zeros()).unwrap();
        for l in ch.slopes {
            assert!((a * l * l - b * l + c).abs() < 1e-12);
        }
    }

    #[test]
    fn traced_characteristic_is_a_line_for_constant_coefficients() {
        let co = PdeCoefficients::Constant {
            a: 1.0,
            b: 0.0,
            c: -1.0,
        };
        let path = trace_characteristic(&co, &Point2::zeros(), 0, 2.0, 1e-12).unwrap();
        let end = path.last().unwrap();
        assert!((end.norm() - 2.0).abs() < 1e-12);
        assert!((end.x.abs() - end.y.abs()).abs() < 1e-12);
    }

    #[test]
    fn traced_characteristic_follows_a_map() {
        // f = (x^2 + y, x): Jacobian [[2x, 1], [1, 0]], symmetric
        let f = PlaneMap::expression("x1^2 + x2", "x1").unwrap();
        let x0 = Point2::new(0.3, 0.2);
        let xi0 = f.apply(&x0).unwrap();
        let co = PdeCoefficients::of_map(f.clone(), x0);
        let path = trace_characteristic(&co, &xi0, 1, 0.2, 1e-12).unwrap();
        for w in path.windows(2) {
            let d = (w[1] - w[0]).normalize();
            let ch = characteristics(&co, &(0.5 * (w[0] + w[1]))).unwrap();
            let best = ch.directions.iter().map(|v| v.dot(&d).abs()).fold(0.0, f64::max);
            assert!(best > 1.0 - 1e-6);
        }
    }

    #[test]
    fn factor_linear_examples() {
        for f in [m(1.0, 0.0, 0.0, -1.0), m(0.0, 1.0, 1.0, 0.0)] {
            let (s1, s2) = factor_linear(&f).unwrap();
            assert_eq!(s1, f);
            assert_eq!(s2, Matrix2::identity());
        }
        let shear = m(1.0, 1.0, 0.0, 1.0);
        let (s1, s2) = factor_linear(&shear).unwrap();
        assert_eq!(s1, s1.transpose());
        assert_eq!(s2, s2.transpose());
        assert!((s2 * s1 - shear).norm() <= 1e-12);
        assert!(factor_linear(&m(1.0, 2.0, 2.0, 4.0)).is_err());
    }

    #[test]
    fn decompose_symmetric_map_gives_identity_potential() {
        let f = PlaneMap::linear(&m(1.0, 0.0, 0.0, -1.0), Point2::zeros());
        let r = decompose_local(&f, &Point2::new(0.2, -0.1), 1e-10).unwrap();
        let hu = r.u.hessian(&Point2::new(0.5, 0.5)).unwrap();
        assert!((hu - Matrix2::identity()).norm() < 1e-14);
        let x = Point2::new(0.21, -0.08);
        let g = r.phi.gradient(&x).unwrap() - r.phi.gradient(&r.center).unwrap();
        assert!((g - Vector2::new(0.01, -0.02)).norm() < 1e-14);
    }

    #[test]
    fn decompose_linear_matches_oracle() {
        let f_mat = m(0.0, 1.0, 2.0, 0.0);
        let f = PlaneMap::linear(&f_mat, Point2::zeros());
        let r = decompose_local(&f, &Point2::new(0.1, 0.3), 1e-10).unwrap();
        let (s1, s2) = factor_linear(&f_mat).unwrap();
        let hphi = r.phi.hessian(&r.center).unwrap();
        let hu = r.u.hessian(&r.image_center).unwrap();
        assert!((hphi - s1).norm() < 1e-8);
        assert!((hu * s2 - Matrix2::identity()).norm() < 1e-8);
    }

    #[test]
    fn glutsyuk_is_rejected() {
        let e = decompose_local(&PlaneMap::glutsyuk(), &Point2::zeros(), 1e-8).unwrap_err();
        assert!(matches!(e, Error::NotHyperbolic { ref class, .. } if class == "degenerate"));
    }

    #[test]
    fn decompose_nonlinear_meets_tolerance() {
        let f = PlaneMap::expression("-x1 + 0.1*x2^2", "x2 + 0.05*x1*x2").unwrap();
        let x0 = Point2::new(0.2, 0.1);
        let tol = 1e-6;
        let r = decompose_local(&f, &x0, tol).unwrap();
        assert!(r.residual <= tol);
        let ball = r.neighbourhood().unwrap();
        for x in halton_points(&ball, 500) {
            let lhs = r.u.gradient(&f.apply(&x).unwrap()).unwrap();
            let rhs = r.phi.gradient(&x).unwrap();
            assert!((lhs - rhs).norm() <= 10.0 * tol);
        }
    }

    proptest! {
        #[test]
        fn factor_linear_reassembles(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0
        ) {
            let f = m(a, b, c, d);
            prop_assume!(f.determinant().abs() >= 1e-3);
            let (s1, s2) = factor_linear(&f).unwrap();
            prop_assert_eq!(s1, s1.transpose());
            prop_assert_eq!(s2, s2.transpose());
            prop_assert!((s2 * s1 - f).norm() <= 1e-12 * (1.0 + f.norm()));
        }

        #[test]
        fn reversing_maps_are_hyperbolic(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0
        ) {
            let f = m(a, b, c, d);
            prop_assume!(f.determinant() < -1e-6);
            prop_assert_eq!(classify(discriminant(&f)), Hyperbolicity::Hyperbolic);
        }
    }
}
