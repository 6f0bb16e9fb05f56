//! Command-line front end: reproduces the illustration tables, runs sweeps and maps, advises on
//! disclosure and drives the simulator. Results go out as CSV or JSON.

pub mod app;
pub mod commands;
pub mod error;
pub mod input;
pub mod output;
pub mod reproduce;

pub use app::{run, Cli};
pub use error::{CliError, CliResult};
