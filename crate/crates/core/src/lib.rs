//! Exact p-adic computations around Frobenius lifts `u ↦ f(u)` on `O_F[[u]]`:
//! ϖ-Witt vectors, iterate towers, intertwiners and Kisin modules.

pub mod cli;
pub mod error;
pub mod intertwine;
pub mod json;
pub mod kisin;
pub mod matrix;
pub mod newton;
pub mod scalars;
pub mod series;
pub mod tower;
pub mod witt;

pub use error::{Error, Result};
