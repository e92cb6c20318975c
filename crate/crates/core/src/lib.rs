pub mod cli;
pub mod clustering;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod supervision;
pub mod synth;

pub use error::{Error, Result};
