//! Regular-grid scalar fields with C2 tensor cubic B-spline interpolation.

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::domain::{BBox, Point2};
use crate::error::{Error, Result};
use crate::jet::Real;

pub const DEFAULT_RESOLUTION: usize = 129;

/// Samples `values[j * nx + i]` at `min + (i dx, j dy)`, interpolated by the
/// natural cubic B-spline through them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct GridField {
    min: Point2,
    max: Point2,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
    /// Spline coefficients on the `(nx + 2) x (ny + 2)` padded lattice.
    coeffs: Vec<f64>,
}

impl PartialEq for GridField {
    fn eq(&self, other: &Self) -> bool {
        self.min == other.min
            && self.max == other.max
            && self.nx == other.nx
            && self.ny == other.ny
            && self.values == other.values
    }
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    min: [f64; 2],
    max: [f64; 2],
    nx: usize,
    ny: usize,
    /// Little-endian f64 values, row-major in x, base64 encoded.
    values: String,
}

impl TryFrom<GridRepr> for GridField {
    type Error = Error;
    fn try_from(r: GridRepr) -> Result<Self> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(r.values.as_bytes())
            .map_err(|e| Error::Schema(format!("grid values: {e}")))?;
        if bytes.len() != 8 * r.nx * r.ny {
            return Err(Error::Schema(format!(
                "grid expects {} values, found {} bytes",
                r.nx * r.ny,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        GridField::new(
            Point2::new(r.min[0], r.min[1]),
            Point2::new(r.max[0], r.max[1]),
            r.nx,
            r.ny,
            values,
        )
    }
}

impl From<GridField> for GridRepr {
    fn from(g: GridField) -> Self {
        let mut bytes = Vec::with_capacity(8 * g.values.len());
        for v in &g.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        GridRepr {
            min: [g.min.x, g.min.y],
            max: [g.max.x, g.max.y],
            nx: g.nx,
            ny: g.ny,
            values: base64::engine::general_purpose::STANDARD.encode(bytes),
        }
    }
}

/// Natural cubic B-spline coefficients `c[-1..=n]` (stored shifted by one)
/// interpolating `v` at the integer nodes.
fn spline_coeffs_1d(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut c = vec![0.0; n + 2];
    c[1] = v[0];
    c[n] = v[n - 1];
    if n > 2 {
        // (c[i-1] + 4 c[i] + c[i+1]) / 6 = v[i] for interior nodes, Thomas sweep
        let m = n - 2;
        let mut diag = vec![4.0; m];
        let mut rhs: Vec<f64> = (1..n - 1).map(|i| 6.0 * v[i]).collect();
        rhs[0] -= v[0];
        rhs[m - 1] -= v[n - 1];
        for k in 1..m {
            let w = 1.0 / diag[k - 1];
            diag[k] -= w;
            rhs[k] -= w * rhs[k - 1];
        }
        let mut x = vec![0.0; m];
        x[m - 1] = rhs[m - 1] / diag[m - 1];
        for k in (0..m - 1).rev() {
            x[k] = (rhs[k] - x[k + 1]) / diag[k];
        }
        c[2..(m + 2)].copy_from_slice(&x);
    }
    c[0] = 2.0 * c[1] - c[2];
    c[n + 1] = 2.0 * c[n] - c[n - 1];
    c
}

/// Uniform cubic B-spline weights for local parameter `t` in [0, 1].
fn weights<R: Real>(t: &R) -> [R; 4] {
    let one = t.constant(1.0);
    let u = one.clone() - t.clone();
    let t2 = t.clone() * t.clone();
    let t3 = t2.clone() * t.clone();
    [
        (u.clone() * u.clone() * u).scale(1.0 / 6.0),
        (t3.scale(3.0) - t2.scale(6.0) + t.constant(4.0)).scale(1.0 / 6.0),
        (-t3.scale(3.0) + t2.scale(3.0) + t.scale(3.0) + one).scale(1.0 / 6.0),
        t3.scale(1.0 / 6.0),
    ]
}

/// Derivatives of [`weights`] with respect to `t`.
fn dweights<R: Real>(t: &R) -> [R; 4] {
    let u = t.constant(1.0) - t.clone();
    let t2 = t.clone() * t.clone();
    [
        (u.clone() * u).scale(-0.5),
        t2.scale(1.5) - t.scale(2.0),
        -t2.scale(1.5) + t.clone() + t.constant(0.5),
        t2.scale(0.5),
    ]
}

fn weights_f64(t: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let u = 1.0 - t;
    let w = [
        u * u * u / 6.0,
        (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
        (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
        t * t * t / 6.0,
    ];
    let d = [-0.5 * u * u, 1.5 * t * t - 2.0 * t, -1.5 * t * t + t + 0.5, 0.5 * t * t];
    let dd = [u, 3.0 * t - 2.0, -3.0 * t + 1.0, t];
    (w, d, dd)
}

impl GridField {
    pub fn new(min: Point2, max: Point2, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 || values.len() != nx * ny {
            return Err(Error::InvalidDomain(format!(
                "grid {nx}x{ny} with {} values",
                values.len()
            )));
        }
        if !(max.x > min.x && max.y > min.y) {
            return Err(Error::InvalidDomain("empty grid extent".into()));
        }
        // separable prefilter: rows then columns
        let (px, py) = (nx + 2, ny + 2);
        let mut rows = vec![0.0; px * ny];
        for j in 0..ny {
            let c = spline_coeffs_1d(&values[j * nx..(j + 1) * nx]);
            rows[j * px..(j + 1) * px].copy_from_slice(&c);
        }
        let mut coeffs = vec![0.0; px * py];
        for i in 0..px {
            let col: Vec<f64> = (0..ny).map(|j| rows[j * px + i]).collect();
            let c = spline_coeffs_1d(&col);
            for (j, v) in c.into_iter().enumerate() {
                coeffs[j * px + i] = v;
            }
        }
        Ok(GridField {
            min,
            max,
            nx,
            ny,
            values,
            coeffs,
        })
    }

    /// Samples `f` on an `n x n` lattice over `bbox`.
    pub fn sample(bbox: &BBox, n: usize, f: impl Fn(&Point2) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let p = Point2::new(
                    bbox.min.x + (bbox.max.x - bbox.min.x) * i as f64 / (n - 1) as f64,
                    bbox.min.y + (bbox.max.y - bbox.min.y) * j as f64 / (n - 1) as f64,
                );
                values.push(f(&p));
            }
        }
        GridField::new(bbox.min, bbox.max, n, n, values)
    }

    pub fn bbox(&self) -> BBox {
        BBox {
            min: self.min,
            max: self.max,
        }
    }

    fn spacing(&self) -> (f64, f64) {
        (
            (self.max.x - self.min.x) / (self.nx - 1) as f64,
            (self.max.y - self.min.y) / (self.ny - 1) as f64,
        )
    }

    /// Cell index and local parameter, clamped to the lattice.
    fn locate(&self, p: &Point2) -> (usize, usize, f64, f64) {
        let (dx, dy) = self.spacing();
        let u = ((p.x - self.min.x) / dx).clamp(0.0, (self.nx - 1) as f64);
        let v = ((p.y - self.min.y) / dy).clamp(0.0, (self.ny - 1) as f64);
        let i = (u.floor() as usize).min(self.nx - 2);
        let j = (v.floor() as usize).min(self.ny - 2);
        (i, j, u - i as f64, v - j as f64)
    }

    fn coeff(&self, i: usize, j: usize) -> f64 {
        // padded lattice: node k sits at padded index k + 1
        self.coeffs[j * (self.nx + 2) + i]
    }

    /// Value, gradient and Hessian `[fxx, fxy, fyy]`.
    pub fn eval_all(&self, p: &Point2) -> (f64, [f64; 2], [f64; 3]) {
        let (dx, dy) = self.spacing();
        let (i, j, s, t) = self.locate(p);
        let (ws, dws, ddws) = weights_f64(s);
        let (wt, dwt, ddwt) = weights_f64(t);
        let (mut v, mut gx, mut gy, mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for b in 0..4 {
            for a in 0..4 {
                let c = self.coeff(i + a, j + b);
                v += c * ws[a] * wt[b];
                gx += c * dws[a] * wt[b];
                gy += c * ws[a] * dwt[b];
                hxx += c * ddws[a] * wt[b];
                hxy += c * dws[a] * dwt[b];
                hyy += c * ws[a] * ddwt[b];
            }
        }
        (
            v,
            [gx / dx, gy / dy],
            [hxx / (dx * dx), hxy / (dx * dy), hyy / (dy * dy)],
        )
    }

    /// Evaluation on generic scalars; the cell is chosen from the values.
    pub fn eval_generic<R: Real>(&self, x: &R, y: &R) -> R {
        let (dx, dy) = self.spacing();
        let (i, j, _, _) = self.locate(&Point2::new(x.value(), y.value()));
        let s = (x.clone() - x.constant(self.min.x + i as f64 * dx)).scale(1.0 / dx);
        let t = (y.clone() - y.constant(self.min.y + j as f64 * dy)).scale(1.0 / dy);
        let ws = weights(&s);
        let wt = weights(&t);
        let mut acc = x.constant(0.0);
        for (b, wb) in wt.iter().enumerate() {
            for (a, wa) in ws.iter().enumerate() {
                acc = acc + (wa.clone() * wb.clone()).scale(self.coeff(i + a, j + b));
            }
        }
        acc
    }

    /// Gradient on generic scalars.
    pub fn gradient_generic<R: Real>(&self, x: &R, y: &R) -> [R; 2] {
        let (dx, dy) = self.spacing();
        let (i, j, _, _) = self.locate(&Point2::new(x.value(), y.value()));
        let s = (x.clone() - x.constant(self.min.x + i as f64 * dx)).scale(1.0 / dx);
        let t = (y.clone() - y.constant(self.min.y + j as f64 * dy)).scale(1.0 / dy);
        let (ws, dws) = (weights(&s), dweights(&s));
        let (wt, dwt) = (weights(&t), dweights(&t));
        let mut gx = x.constant(0.0);
        let mut gy = x.constant(0.0);
        for b in 0..4 {
            for a in 0..4 {
                let c = self.coeff(i + a, j + b);
                gx = gx + (dws[a].clone() * wt[b].clone()).scale(c / dx);
                gy = gy + (ws[a].clone() * dwt[b].clone()).scale(c / dy);
            }
        }
        [gx, gy]
    }
}
