//! Truncated bivariate Taylor polynomials ("jets") and the scalar trait that
//! lets field and map evaluation run on either `f64` or `Jet`.
//!
//! A jet of degree `N` stores the coefficients of `sum a_ij s^i t^j` for
//! `i + j <= N`, ordered by total degree and then by the power of `t`.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar arithmetic shared by `f64` and [`Jet`].
pub trait Real:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    /// A constant of the same shape as `self`.
    fn constant(&self, v: f64) -> Self;
    /// The constant term (the value at the expansion point).
    fn value(&self) -> f64;
    fn scale(&self, k: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn powf(&self, p: f64) -> Self;
}

impl Real for f64 {
    fn constant(&self, v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn scale(&self, k: f64) -> Self {
        self * k
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn powf(&self, p: f64) -> Self {
        f64::powf(*self, p)
    }
}

#[inline]
pub fn jet_len(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Position of the `s^i t^j` coefficient.
#[inline]
pub fn jet_index(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    degree: usize,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zero(degree: usize) -> Self {
        Jet {
            degree,
            coeffs: vec![0.0; jet_len(degree)],
        }
    }

    pub fn constant_of(degree: usize, v: f64) -> Self {
        let mut j = Jet::zero(degree);
        j.coeffs[0] = v;
        j
    }

    /// `a + s` where `s` is the first expansion variable.
    pub fn var_s(degree: usize, a: f64) -> Self {
        let mut j = Jet::constant_of(degree, a);
        if degree >= 1 {
            j.coeffs[jet_index(1, 0)] = 1.0;
        }
        j
    }

    /// `a + t` where `t` is the second expansion variable.
    pub fn var_t(degree: usize, a: f64) -> Self {
        let mut j = Jet::constant_of(degree, a);
        if degree >= 1 {
            j.coeffs[jet_index(0, 1)] = 1.0;
        }
        j
    }

    pub fn from_coeffs(degree: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), jet_len(degree));
        Jet { degree, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > self.degree {
            0.0
        } else {
            self.coeffs[jet_index(i, j)]
        }
    }

    pub fn set_coeff(&mut self, i: usize, j: usize, v: f64) {
        self.coeffs[jet_index(i, j)] = v;
    }

    /// Iterate `(i, j, a_ij)` over all stored coefficients.
    pub fn terms(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.degree).flat_map(move |d| (0..=d).map(move |j| (d - j, j, self.coeffs[jet_index(d - j, j)])))
    }

    /// Same polynomial at a different truncation order.
    pub fn with_degree(&self, degree: usize) -> Jet {
        let mut out = Jet::zero(degree);
        for (i, j, a) in self.terms() {
            if i + j <= degree {
                out.set_coeff(i, j, a);
            }
        }
        out
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        // Horner in t for each power of s would be faster; degrees here are small.
        let mut sp = vec![1.0; self.degree + 1];
        let mut tp = vec![1.0; self.degree + 1];
        for k in 1..=self.degree {
            sp[k] = sp[k - 1] * s;
            tp[k] = tp[k - 1] * t;
        }
        self.terms().map(|(i, j, a)| a * sp[i] * tp[j]).sum()
    }

    /// Partial derivative in `s`; the result has degree one lower.
    pub fn ds(&self) -> Jet {
        let deg = self.degree.saturating_sub(1);
        let mut out = Jet::zero(deg);
        for (i, j, a) in self.terms() {
            if i >= 1 && i - 1 + j <= deg {
                out.set_coeff(i - 1, j, a * i as f64);
            }
        }
        out
    }

    /// Partial derivative in `t`; the result has degree one lower.
    pub fn dt(&self) -> Jet {
        let deg = self.degree.saturating_sub(1);
        let mut out = Jet::zero(deg);
        for (i, j, a) in self.terms() {
            if j >= 1 && i + j - 1 <= deg {
                out.set_coeff(i, j - 1, a * j as f64);
            }
        }
        out
    }

    /// Substitute jets (with the target truncation) for `s` and `t`.
    pub fn compose(&self, s: &Jet, t: &Jet) -> Jet {
        let deg = s.degree;
        let mut spow = vec![Jet::constant_of(deg, 1.0)];
        let mut tpow = vec![Jet::constant_of(deg, 1.0)];
        for k in 1..=self.degree {
            spow.push(spow[k - 1].clone() * s.clone());
            tpow.push(tpow[k - 1].clone() * t.clone());
        }
        let mut out = Jet::zero(deg);
        for (i, j, a) in self.terms() {
            if a != 0.0 {
                let term = (spow[i].clone() * tpow[j].clone()).scale(a);
                out = out + term;
            }
        }
        out
    }

    /// Evaluate a power series `sum c_k h^k` where `h = self - value`.
    fn series(&self, c: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Jet::constant_of(self.degree, c[0]);
        let mut hp = Jet::constant_of(self.degree, 1.0);
        for ck in c.iter().skip(1) {
            hp = hp * h.clone();
            if *ck != 0.0 {
                out = out + hp.scale(*ck);
            }
        }
        out
    }

    fn recip(&self) -> Jet {
        let a = self.coeffs[0];
        let mut c = Vec::with_capacity(self.degree + 1);
        let mut term = 1.0 / a;
        for _ in 0..=self.degree {
            c.push(term);
            term *= -1.0 / a;
        }
        self.series(&c)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.degree, rhs.degree);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.degree, rhs.degree);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for a in &mut self.coeffs {
            *a = -*a;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        debug_assert_eq!(self.degree, rhs.degree);
        let deg = self.degree;
        let mut out = Jet::zero(deg);
        for (i1, j1, a) in self.terms() {
            if a == 0.0 {
                continue;
            }
            for d2 in 0..=(deg - i1 - j1) {
                for j2 in 0..=d2 {
                    let i2 = d2 - j2;
                    let b = rhs.coeffs[jet_index(i2, j2)];
                    if b != 0.0 {
                        out.coeffs[jet_index(i1 + i2, j1 + j2)] += a * b;
                    }
                }
            }
        }
        out
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Real for Jet {
    fn constant(&self, v: f64) -> Self {
        Jet::constant_of(self.degree, v)
    }
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn scale(&self, k: f64) -> Self {
        let mut out = self.clone();
        for a in &mut out.coeffs {
            *a *= k;
        }
        out
    }
    fn exp(&self) -> Self {
        let e = self.coeffs[0].exp();
        let mut c = Vec::with_capacity(self.degree + 1);
        let mut fact = 1.0;
        for k in 0..=self.degree {
            if k > 0 {
                fact *= k as f64;
            }
            c.push(e / fact);
        }
        self.series(&c)
    }
    fn ln(&self) -> Self {
        let a = self.coeffs[0];
        let mut c = vec![a.ln()];
        for k in 1..=self.degree {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            c.push(sign / (k as f64 * a.powi(k as i32)));
        }
        self.series(&c)
    }
    fn sin(&self) -> Self {
        let (s, co) = self.coeffs[0].sin_cos();
        // derivatives of sin cycle through sin, cos, -sin, -cos
        let cycle = [s, co, -s, -co];
        let mut c = Vec::with_capacity(self.degree + 1);
        let mut fact = 1.0;
        for k in 0..=self.degree {
            if k > 0 {
                fact *= k as f64;
            }
            c.push(cycle[k % 4] / fact);
        }
        self.series(&c)
    }
    fn cos(&self) -> Self {
        let (s, co) = self.coeffs[0].sin_cos();
        let cycle = [co, -s, -co, s];
        let mut c = Vec::with_capacity(self.degree + 1);
        let mut fact = 1.0;
        for k in 0..=self.degree {
            if k > 0 {
                fact *= k as f64;
            }
            c.push(cycle[k % 4] / fact);
        }
        self.series(&c)
    }
    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
    fn powi(&self, n: i32) -> Self {
        if n >= 0 {
            let mut out = self.constant(1.0);
            for _ in 0..n {
                out = out * self.clone();
            }
            out
        } else {
            self.powi(-n).recip()
        }
    }
    fn powf(&self, p: f64) -> Self {
        let a = self.coeffs[0];
        // (a + h)^p = a^p * sum binom(p, k) (h/a)^k
        let mut c = Vec::with_capacity(self.degree + 1);
        let mut binom = 1.0;
        for k in 0..=self.degree {
            if k > 0 {
                binom *= (p - (k as f64 - 1.0)) / k as f64;
            }
            c.push(a.powf(p) * binom / a.powi(k as i32));
        }
        self.series(&c)
    }
}
