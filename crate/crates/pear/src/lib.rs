//! Command-line experiments for consensus-regularized training: dataset
//! files, configuration, and the runners behind each verb.

pub mod config;
pub mod error;
pub mod experiments;
pub mod io;

pub use config::TrainConfig;
pub use error::{PearError, Result};
