//! Reflection in an ellipse as a map between the pencils of lines
//! through its foci.
//!
//! The ellipse is normalized so that `|AC| + |CB| = 2` for every point `C`
//! on it, with foci `A = (-c, 0)` and `B = (c, 0)`. A ray leaving `A` at
//! angle `alpha` above the focal axis returns through `B` at angle `beta`,
//! both measured inside the triangle `ABC`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::reflect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseConfig {
    c: f64,
}

impl EllipseConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&c) {
            return Err(Error::InvalidDomain(format!("focal half-distance {c} outside [0, 1)")));
        }
        Ok(EllipseConfig { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `(1 - c) / (1 + c)`
    pub fn coefficient(&self) -> f64 {
        (1.0 - self.c) / (1.0 + self.c)
    }

    /// `sin(alpha + beta) - c (sin alpha + sin beta)`
    pub fn sines_residual(&self, alpha: f64, beta: f64) -> f64 {
        (alpha + beta).sin() - self.c * (alpha.sin() + beta.sin())
    }

    /// Distance `|AC|` to the ellipse along the ray at angle `alpha`.
    pub fn focal_chord(&self, alpha: f64) -> f64 {
        let c = self.c;
        (1.0 - c * c) / (1.0 - c * alpha.cos())
    }
}

/// Closed form `tan(beta/2) = k / tan(alpha/2)`, `k = (1-c)/(1+c)`.
/// The endpoints map to each other: `0 -> pi` and `pi -> 0`. Rays below
/// the focal axis follow by the symmetry `alpha -> -alpha`, `beta -> -beta`.
pub fn pencil_map_angle(cfg: &EllipseConfig, alpha: f64) -> f64 {
    let h = 0.5 * alpha;
    2.0 * (cfg.coefficient() * h.cos()).atan2(h.sin())
}

/// The same map by construction: find `C`, reflect the incident ray in
/// the ellipse normal, and measure the angle at `B`.
pub fn pencil_map_geometric(cfg: &EllipseConfig, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < PI) {
        return Err(Error::InvalidDomain(format!("alpha = {alpha} outside (0, pi)")));
    }
    let c = cfg.c;
    let v = cfg.focal_chord(alpha);
    let dir = [alpha.cos(), alpha.sin()];
    let p = [-c + v * dir[0], v * dir[1]];
    let normal = [p[0], p[1] / (1.0 - c * c)];
    let r = reflect(&dir, &normal)?;
    // the reflected ray p + s r must pass through B = (c, 0)
    let to_b = [c - p[0], -p[1]];
    let miss = (to_b[0] * r[1] - to_b[1] * r[0]).abs();
    let along = to_b[0] * r[0] + to_b[1] * r[1];
    if miss > 1e-10 || along <= 0.0 {
        return Err(Error::GeometricInconsistency(format!(
            "reflected ray misses the focus by {miss:e} at alpha = {alpha}"
        )));
    }
    // angle at B between BA = (-1, 0) and BC = -r
    let w = [-r[0], -r[1]];
    Ok(w[1].atan2(-w[0]))
}

/// Solves the triangle relations `v sin a = u sin b`, `u + v = 2`,
/// `v cos a + u cos b = 2c` for `(u, v, b)` by Newton's method.
pub fn solve_triangle(cfg: &EllipseConfig, alpha: f64) -> Result<(f64, f64, f64)> {
    let c = cfg.c;
    let (sa, ca) = alpha.sin_cos();
    let mut x = [1.0, 1.0, PI - alpha];
    for _ in 0..100 {
        let (u, v, b) = (x[0], x[1], x[2]);
        let (sb, cb) = b.sin_cos();
        let f = [v * sa - u * sb, u + v - 2.0, v * ca + u * cb - 2.0 * c];
        if f.iter().map(|a| a.abs()).fold(0.0, f64::max) < 1e-15 {
            return Ok((u, v, b.rem_euclid(2.0 * PI)));
        }
        let j = nalgebra::Matrix3::new(-sb, sa, -u * cb, 1.0, 1.0, 0.0, cb, ca, -u * sb);
        let step = j
            .lu()
            .solve(&nalgebra::Vector3::new(f[0], f[1], f[2]))
            .ok_or(Error::SingularMatrix)?;
        for i in 0..3 {
            x[i] -= step[i];
        }
    }
    let (u, v, b) = (x[0], x[1], x[2]);
    let res = (v * sa - u * b.sin()).abs() + (u + v - 2.0).abs() + (v * ca + u * b.cos() - 2.0 * c).abs();
    if res < 1e-12 {
        Ok((u, v, b.rem_euclid(2.0 * PI)))
    } else {
        Err(Error::NumericalFailure(format!("triangle solve residual {res:e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobiusFit {
    /// Mean of `tan(alpha/2) tan(beta/2)`.
    pub coefficient: f64,
    /// Max deviation of the products from `(1-c)/(1+c)`.
    pub max_deviation: f64,
}

/// `alpha_k = k pi / (n + 1)` for `k = 1..=n`.
pub fn sample_angles(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 * PI / (n + 1) as f64).collect()
}

/// One table row: `(alpha, beta, tan(alpha/2) tan(beta/2))`.
pub fn pencil_table(cfg: &EllipseConfig, samples: usize) -> Vec<(f64, f64, f64)> {
    sample_angles(samples)
        .into_iter()
        .map(|a| {
            let b = pencil_map_angle(cfg, a);
            (a, b, (0.5 * a).tan() * (0.5 * b).tan())
        })
        .collect()
}

pub fn mobius_fit(cfg: &EllipseConfig, samples: usize) -> Result<MobiusFit> {
    if samples < 3 {
        return Err(Error::InvalidDomain("mobius fit needs at least 3 samples".into()));
    }
    let table = pencil_table(cfg, samples);
    let k = cfg.coefficient();
    let mean = table.iter().map(|r| r.2).sum::<f64>() / table.len() as f64;
    let dev = table.iter().map(|r| (r.2 - k).abs()).fold(0.0, f64::max);
    Ok(MobiusFit {
        coefficient: mean,
        max_deviation: dev,
    })
}
