//! Remittance monitoring service: event log, materialized views, HTTP API
//! and command line.

pub mod api;
pub mod cli;
pub mod config;
pub mod event;
pub mod log;
pub mod runtime;
pub mod store;

pub use config::{Overrides, ServiceConfig};
pub use runtime::{Service, ServiceError, Speed};
