//! File formats, dataset folders and the command-line front end for `morphnet-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod pnm;

pub use error::{AppError, AppResult};
