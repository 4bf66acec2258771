//! Joint sentence and token labeling with supervised soft attention.
pub mod autodiff;
pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod model;
pub mod objectives;
pub mod trainer;

pub use error::{Error, Result};
