pub mod analysis;
pub mod bell;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod highdim;
pub mod montecarlo;
pub mod optimize;
pub mod quantum;

pub use error::{Error, Result};
