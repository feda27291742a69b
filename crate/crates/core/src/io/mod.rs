//! Scene files and data exports.

pub mod export;
pub mod scene;
pub mod spec;

pub use scene::{SceneDocument, SchemaMode, SCHEMA_VERSION};
