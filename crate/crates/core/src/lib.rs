// `!(x > 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod contraction;
pub mod error;
pub mod generators;
pub mod pathcore;
pub mod properties;
pub mod report;
pub mod stattests;

pub use error::{Error, Result};
