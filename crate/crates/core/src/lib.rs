//! Arbitrary-order discrete rot-rot complex on polygonal meshes.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod par;
pub mod polybasis;
pub mod quadrature;
pub mod scheme;
pub mod spaces;
pub mod verify;

pub use error::{DdrError, Result};
