//! Monte Carlo engine, artifact formats and the `urnlab` command-line tool
//! built on `urnlab-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod montecarlo;

pub use error::{AppError, AppResult};
