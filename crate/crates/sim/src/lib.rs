//! Scenario configuration, closed-loop runs, sweeps and reports.

pub mod closed_loop;
pub mod config;
pub mod error;
pub mod report;
pub mod scenario;
pub mod signal;
pub mod sweep;
pub mod weather;

pub use config::ScenarioConfig;
pub use error::{Result, SimError};
pub use report::{run_closed_loop, RunReport};
pub use scenario::{Kind, Scenario};
