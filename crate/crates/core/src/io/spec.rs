//! Compact command-line specs for domains, maps and points.
//!
//! Domains: `disc:cx,cy,r`, `interval:a,b`, `rect:x0,y0,x1,y1`,
//! `poly:x,y;x,y;...`. Maps: `linear:a,b,c,d[,e,f]` (row-major matrix
//! and offset), `expr:f1;f2`, `translation:a,b`, `flip:a`, `glutsyuk`.

use nalgebra::Matrix2;

use crate::domain::{Domain, Point2};
use crate::error::{Error, Result};
use crate::map::PlaneMap;

fn bad(what: &str, src: &str, why: impl std::fmt::Display) -> Error {
    Error::Parse {
        line: 1,
        column: 1,
        message: format!("{what} spec {src:?}: {why}"),
    }
}

fn numbers(what: &str, src: &str, body: &str) -> Result<Vec<f64>> {
    body.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| bad(what, src, format!("{t:?}: {e}")))
        })
        .collect()
}

fn split_kind<'a>(what: &str, src: &'a str) -> Result<(&'a str, &'a str)> {
    match src.split_once(':') {
        Some((k, b)) => Ok((k.trim(), b)),
        None => Ok((src.trim(), "")),
    }
    .and_then(|(k, b)| {
        if k.is_empty() {
            Err(bad(what, src, "missing kind"))
        } else {
            Ok((k, b))
        }
    })
}

pub fn parse_point(src: &str) -> Result<Point2> {
    let v = numbers("point", src, src)?;
    match v.as_slice() {
        [x, y] => Ok(Point2::new(*x, *y)),
        [x] => Ok(Point2::new(*x, 0.0)),
        _ => Err(bad("point", src, "expected x,y")),
    }
}

pub fn parse_domain(src: &str) -> Result<Domain> {
    let (kind, body) = split_kind("domain", src)?;
    match kind {
        "disc" => match numbers("domain", src, body)?.as_slice() {
            [x, y, r] => Domain::disc(Point2::new(*x, *y), *r),
            _ => Err(bad("domain", src, "expected disc:cx,cy,r")),
        },
        "interval" => match numbers("domain", src, body)?.as_slice() {
            [a, b] => Domain::interval(*a, *b),
            _ => Err(bad("domain", src, "expected interval:a,b")),
        },
        "rect" => match numbers("domain", src, body)?.as_slice() {
            [x0, y0, x1, y1] => Domain::rectangle(Point2::new(*x0, *y0), Point2::new(*x1, *y1)),
            _ => Err(bad("domain", src, "expected rect:x0,y0,x1,y1")),
        },
        "poly" => {
            let pts = body.split(';').map(parse_point).collect::<Result<Vec<_>>>()?;
            Domain::polygon(pts)
        }
        other => Err(bad("domain", src, format!("unknown kind {other:?}"))),
    }
}

pub fn parse_map(src: &str) -> Result<PlaneMap> {
    let (kind, body) = split_kind("map", src)?;
    match kind {
        "linear" => {
            let v = numbers("map", src, body)?;
            if v.len() != 4 && v.len() != 6 {
                return Err(bad("map", src, "expected linear:a,b,c,d[,e,f]"));
            }
            let offset = if v.len() == 6 {
                Point2::new(v[4], v[5])
            } else {
                Point2::zeros()
            };
            Ok(PlaneMap::linear(&Matrix2::new(v[0], v[1], v[2], v[3]), offset))
        }
        "translation" => Ok(PlaneMap::translation(parse_point(body)?)),
        "flip" => match numbers("map", src, body)?.as_slice() {
            [a] => Ok(PlaneMap::flip(*a)),
            _ => Err(bad("map", src, "expected flip:a")),
        },
        "expr" => {
            let (f1, f2) = body
                .split_once(';')
                .ok_or_else(|| bad("map", src, "expected expr:f1;f2"))?;
            PlaneMap::expression(f1.trim(), f2.trim())
        }
        "glutsyuk" => Ok(PlaneMap::glutsyuk()),
        other => Err(bad("map", src, format!("unknown kind {other:?}"))),
    }
}
