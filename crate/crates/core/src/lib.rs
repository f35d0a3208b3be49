pub mod assembly;
pub mod bernstein;
pub mod error;
pub mod geometry;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;

pub use error::{Error, Result};
