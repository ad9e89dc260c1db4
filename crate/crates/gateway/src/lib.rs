//! HTTP boundary for the meronym service.
//!
//! [`Gateway::open`] loads the corpus, restores persisted state and builds the
//! router; [`serve`] binds it and runs until a shutdown signal arrives. Every
//! successful mutation is written back to the store before the response is
//! returned.

mod error;
mod routes;
mod server;
pub mod store;

pub use error::{ApiError, GatewayError};
pub use server::{serve, shutdown_signal, Gateway, GatewayConfig};
pub use store::Store;
