//! Scenario runner: parses scenario files, executes the staged cooling
//! sequence, and writes data files plus a checksummed manifest.

pub mod error;
pub mod feasibility;
pub mod manifest;
pub mod pipeline;
pub mod plotdata;
pub mod scenario;
pub mod sweep;
pub mod units;

pub use error::CliError;
pub use scenario::Scenario;
