pub mod diagnostics;
pub mod error;
pub mod exec;
pub mod fractal;
pub mod heis;
pub mod measure;
pub mod riesz;
pub mod selftest;
pub mod subgroups;

pub use error::{Error, Result};
pub use exec::Execution;
pub use heis::{HPoint, Tolerances};
pub use measure::DiscreteMeasure;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
