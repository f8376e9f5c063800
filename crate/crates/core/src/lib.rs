//! Numerical engine for bracket maps and fiberwise dual frames of
//! translation-generated systems on the Heisenberg group.

pub mod error;
pub mod fiber;
pub mod grid;
pub mod heisenberg;
pub mod bracket;
pub mod operator;
pub mod reduce;

pub use error::{Error, Result};
