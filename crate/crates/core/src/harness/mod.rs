//! Command-line front end, experiment orchestration and the privacy audit.

pub mod audit;
pub mod cli;
pub mod config;
pub mod demo;
pub mod summary;

pub use audit::{audit, AuditReport, AuditSpec, Mechanism, Neighbor};
pub use config::{ParamMode, RunConfig};
pub use summary::{summarize, Summary};
