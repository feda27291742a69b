//! Mirror systems that carry one parallel light beam onto another.
//!
//! The crate synthesizes two-, four- and six-reflection mirror systems
//! realizing prescribed plane maps and checks every construction by
//! billiard ray tracing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod composer;
pub mod decomposition;
pub mod domain;
pub mod ellipse;
pub mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod jet;
pub mod map;
pub mod parallel;
pub mod poly;
pub mod sampling;
pub mod system;
pub mod two_mirror;
pub mod verifier;

pub use domain::{BBox, Domain, Point2};
pub use error::{Error, Result};
pub use field::ScalarField;
pub use map::PlaneMap;
