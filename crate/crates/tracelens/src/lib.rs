//! Std side of tracelens: dataset files, session logs, the WebSocket
//! session service, and the offline analysis pipeline.

pub mod analyze;
mod error;
pub mod format;
pub mod protocol;
pub mod server;
pub mod service;
pub mod store;

pub use error::{Error, Result};
pub use tracelens_core as core;
