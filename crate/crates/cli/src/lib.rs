//! Scenario-driven front end: parses a TOML scenario, runs one pipeline and
//! emits CSV tables plus a `summary.kv`.

pub mod output;
pub mod run;
pub mod scenario;

pub use output::Artifacts;
pub use run::{run, Command, Options};
pub use scenario::Scenario;
