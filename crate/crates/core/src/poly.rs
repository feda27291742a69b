//! Bivariate polynomials stored as coefficient tables about a center point.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::domain::Point2;
use crate::error::{Error, Result};
use crate::jet::{jet_index, jet_len, Jet, Real};

pub const MAX_DEGREE: usize = 8;

/// `p(x) = sum a_ij (x1 - c1)^i (x2 - c2)^j` over `i + j <= degree`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialRepr", into = "PolynomialRepr")]
pub struct Polynomial {
    center: Point2,
    degree: usize,
    coeffs: Vec<f64>,
}

/// Serialized layout: coefficients as exact decimal strings.
#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    center: [f64; 2],
    degree: usize,
    /// `[i, j, "a_ij"]` for every nonzero coefficient.
    terms: Vec<(usize, usize, String)>,
}

impl TryFrom<PolynomialRepr> for Polynomial {
    type Error = Error;
    fn try_from(r: PolynomialRepr) -> Result<Self> {
        if r.degree > MAX_DEGREE {
            return Err(Error::Schema(format!("polynomial degree {} > {MAX_DEGREE}", r.degree)));
        }
        let mut coeffs = vec![0.0; jet_len(r.degree)];
        for (i, j, s) in r.terms {
            if i + j > r.degree {
                return Err(Error::Schema(format!("term ({i},{j}) exceeds degree {}", r.degree)));
            }
            coeffs[jet_index(i, j)] = s
                .parse::<f64>()
                .map_err(|e| Error::Schema(format!("coefficient {s:?}: {e}")))?;
        }
        Ok(Polynomial {
            center: Point2::new(r.center[0], r.center[1]),
            degree: r.degree,
            coeffs,
        })
    }
}

impl From<Polynomial> for PolynomialRepr {
    fn from(p: Polynomial) -> Self {
        let terms = p
            .terms()
            .filter(|&(_, _, a)| a != 0.0)
            .map(|(i, j, a)| (i, j, format!("{a:?}")))
            .collect();
        PolynomialRepr {
            center: [p.center.x, p.center.y],
            degree: p.degree,
            terms,
        }
    }
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial {
            center: Point2::zeros(),
            degree: 0,
            coeffs: vec![0.0],
        }
    }

    /// From `(i, j, a_ij)` triples about `center`.
    pub fn from_terms(center: Point2, terms: &[(usize, usize, f64)]) -> Result<Self> {
        let degree = terms.iter().map(|&(i, j, _)| i + j).max().unwrap_or(0);
        let mut p = Polynomial::unchecked(center, degree);
        for &(i, j, a) in terms {
            p.coeffs[jet_index(i, j)] += a;
        }
        p.check_degree()?;
        Ok(p)
    }

    /// Taylor polynomial represented by a jet expanded at `center`.
    pub fn from_jet(center: Point2, jet: &Jet) -> Result<Self> {
        let p = Polynomial {
            center,
            degree: jet.degree(),
            coeffs: jet.coeffs().to_vec(),
        };
        p.check_degree()?;
        Ok(p.trimmed())
    }

    /// `0.5 (x-c)^T S (x-c) + b.(x-c) + k`.
    pub fn quadratic(center: Point2, s: &Matrix2<f64>, b: &Point2, k: f64) -> Self {
        let mut p = Polynomial::unchecked(center, 2);
        p.coeffs[jet_index(0, 0)] = k;
        p.coeffs[jet_index(1, 0)] = b.x;
        p.coeffs[jet_index(0, 1)] = b.y;
        p.coeffs[jet_index(2, 0)] = 0.5 * s[(0, 0)];
        p.coeffs[jet_index(1, 1)] = 0.5 * (s[(0, 1)] + s[(1, 0)]);
        p.coeffs[jet_index(0, 2)] = 0.5 * s[(1, 1)];
        p
    }

    fn unchecked(center: Point2, degree: usize) -> Self {
        Polynomial {
            center,
            degree,
            coeffs: vec![0.0; jet_len(degree)],
        }
    }

    fn check_degree(&self) -> Result<()> {
        if self.effective_degree() > MAX_DEGREE {
            return Err(Error::InvalidDomain(format!(
                "polynomial degree {} exceeds {MAX_DEGREE}",
                self.effective_degree()
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Point2 {
        self.center
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Highest total degree with a nonzero coefficient.
    pub fn effective_degree(&self) -> usize {
        self.terms()
            .filter(|&(_, _, a)| a != 0.0)
            .map(|(i, j, _)| i + j)
            .max()
            .unwrap_or(0)
    }

    fn trimmed(mut self) -> Self {
        let d = self.effective_degree();
        self.coeffs.truncate(jet_len(d));
        self.degree = d;
        self
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.degree {
            0.0
        } else {
            self.coeffs[jet_index(i, j)]
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.degree).flat_map(move |d| (0..=d).map(move |j| (d - j, j, self.coeffs[jet_index(d - j, j)])))
    }

    pub fn eval_generic<R: Real>(&self, x: &R, y: &R) -> R {
        let u = x.clone() - x.constant(self.center.x);
        let v = y.clone() - y.constant(self.center.y);
        let mut up = vec![x.constant(1.0)];
        let mut vp = vec![x.constant(1.0)];
        for k in 1..=self.degree {
            up.push(up[k - 1].clone() * u.clone());
            vp.push(vp[k - 1].clone() * v.clone());
        }
        let mut acc = x.constant(0.0);
        for (i, j, a) in self.terms() {
            if a != 0.0 {
                acc = acc + (up[i].clone() * vp[j].clone()).scale(a);
            }
        }
        acc
    }

    pub fn eval(&self, p: &Point2) -> f64 {
        let u = p.x - self.center.x;
        let v = p.y - self.center.y;
        // Horner in v for each power of u
        let mut acc = 0.0;
        for i in (0..=self.degree).rev() {
            let mut inner = 0.0;
            for j in (0..=(self.degree - i)).rev() {
                inner = inner * v + self.coeffs[jet_index(i, j)];
            }
            acc = acc * u + inner;
        }
        acc
    }

    /// Partial derivative along axis `k` (0 or 1).
    pub fn derivative(&self, k: usize) -> Polynomial {
        let deg = self.degree.saturating_sub(1);
        let mut out = Polynomial::unchecked(self.center, deg);
        for (i, j, a) in self.terms() {
            if k == 0 && i >= 1 {
                out.coeffs[jet_index(i - 1, j)] += a * i as f64;
            } else if k == 1 && j >= 1 {
                out.coeffs[jet_index(i, j - 1)] += a * j as f64;
            }
        }
        out
    }

    pub fn scaled(&self, k: f64) -> Polynomial {
        let mut out = self.clone();
        for a in &mut out.coeffs {
            *a *= k;
        }
        out
    }

    /// Sum of two polynomials with equal centers.
    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.center, other.center, "polynomial centers differ");
        let deg = self.degree.max(other.degree);
        let mut out = Polynomial::unchecked(self.center, deg);
        for (i, j, a) in self.terms().chain(other.terms()) {
            out.coeffs[jet_index(i, j)] += a;
        }
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.center, other.center, "polynomial centers differ");
        let deg = self.degree + other.degree;
        let mut out = Polynomial::unchecked(self.center, deg);
        for (i1, j1, a) in self.terms() {
            if a == 0.0 {
                continue;
            }
            for (i2, j2, b) in other.terms() {
                out.coeffs[jet_index(i1 + i2, j1 + j2)] += a * b;
            }
        }
        out
    }

    pub fn is_centered_at_origin(&self) -> bool {
        self.center == Point2::zeros()
    }
}

/// A polynomial with its first and second partial derivatives cached.
#[derive(Debug, Clone)]
pub(crate) struct PolyDerivs {
    pub d1: [Polynomial; 2],
    pub d2: [Polynomial; 3],
}

impl PolyDerivs {
    pub fn of(p: &Polynomial) -> Self {
        let dx = p.derivative(0);
        let dy = p.derivative(1);
        let dxx = dx.derivative(0);
        let dxy = dx.derivative(1);
        let dyy = dy.derivative(1);
        PolyDerivs {
            d1: [dx, dy],
            d2: [dxx, dxy, dyy],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eval_and_derivatives_of_shifted_quadratic() {
        let s = Matrix2::new(2.0, 1.0, 1.0, -4.0);
        let p = Polynomial::quadratic(Point2::new(1.0, 2.0), &s, &Point2::new(3.0, -1.0), 5.0);
        let x = Point2::new(2.0, 1.0);
        let d = x - Point2::new(1.0, 2.0);
        let expect = 0.5 * d.dot(&(s * d)) + 3.0 * d.x - d.y + 5.0;
        assert!((p.eval(&x) - expect).abs() < 1e-14);
        let g = s * d + Point2::new(3.0, -1.0);
        assert!((p.derivative(0).eval(&x) - g.x).abs() < 1e-14);
        assert!((p.derivative(1).eval(&x) - g.y).abs() < 1e-14);
        assert_eq!(p.derivative(0).derivative(1).eval(&x), 1.0);
    }

    #[test]
    fn serialization_is_exact() {
        let p = Polynomial::from_terms(
            Point2::new(0.1, -0.3),
            &[
                (0, 0, 0.1),
                (3, 1, -1.0 / 3.0),
                (0, 8, 1e-300),
                (2, 2, std::f64::consts::PI),
            ],
        )
        .unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn degree_limit_enforced() {
        assert!(Polynomial::from_terms(Point2::zeros(), &[(5, 4, 1.0)]).is_err());
        let s = r#"{"center":[0,0],"degree":9,"terms":[]}"#;
        assert!(serde_json::from_str::<Polynomial>(s).is_err());
    }

    proptest! {
        #[test]
        fn finite_differences_match_analytic_gradient(
            coeffs in prop::collection::vec(-1.0f64..1.0, 15),
            x in -1.0f64..1.0, y in -1.0f64..1.0,
        ) {
            let mut terms = Vec::new();
            let mut k = 0;
            for d in 0..=4usize {
                for j in 0..=d {
                    terms.push((d - j, j, coeffs[k]));
                    k += 1;
                }
            }
            let p = Polynomial::from_terms(Point2::new(0.2, -0.1), &terms).unwrap();
            let h = f64::EPSILON.cbrt();
            let at = Point2::new(x, y);
            for axis in 0..2 {
                let mut e = Point2::zeros();
                e[axis] = h;
                let fd = (p.eval(&(at + e)) - p.eval(&(at - e))) / (2.0 * h);
                prop_assert!((fd - p.derivative(axis).eval(&at)).abs() < 1e-6);
            }
            let jx = Jet::var_s(3, x);
            let jy = Jet::var_t(3, y);
            let jet = p.eval_generic(&jx, &jy);
            prop_assert!((jet.value() - p.eval(&at)).abs() < 1e-12);
            prop_assert!((jet.coeff(1, 0) - p.derivative(0).eval(&at)).abs() < 1e-12);
        }
    }
}
