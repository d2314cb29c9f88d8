//! Core of the remittance monitoring platform.
//!
//! The crate is organised along the data flow of the system:
//!
//! - [`chainsim`] generates a deterministic, labeled blockchain-style remittance stream.
//! - [`pipeline`] validates exported records and turns them into fixed-schema feature vectors.
//! - [`mlcore`] holds the from-scratch models and the evaluation metrics.
//! - [`riskengine`] scores transactions in real time and evaluates alert rules.
//! - [`analytics`] answers ad hoc queries, summaries, reports and dashboard payloads.
//!
//! Money is always carried as integer minor units next to a three-letter currency code.

pub mod analytics;
pub mod chainsim;
pub mod digest;
pub mod mlcore;
pub mod pipeline;
pub mod record;
pub mod riskengine;

pub use record::{FraudPattern, Label, Reason, TxRecord};
