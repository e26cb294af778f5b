pub mod error;
pub mod operators;

pub use error::{Error, Result};
pub mod model;
pub mod evolution;
pub mod analytic;
pub mod spectroscopy;
pub mod oracle;
pub mod systems;
pub mod io;
pub mod config;
pub mod verify;
pub mod cli;
