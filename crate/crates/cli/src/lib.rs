//! Workspace, batch pipeline, CLI and HTTP service.

pub mod cli;
pub mod config;
pub mod pipeline;
pub mod server;
pub mod sessions;
pub mod workspace;

pub use config::Config;
pub use workspace::{Registry, Workspace};
