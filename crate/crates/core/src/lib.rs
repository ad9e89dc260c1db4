//! Domain kernel for meronymous question asking.
//!
//! A scholarly corpus backs verifiable identity signals. Posters compose a
//! meronym from those signals, optionally vouched for by an endorser, and ask
//! questions that are cross-posted to social platforms. Experts receive
//! private invitations with relational signals; answers are broadcast only
//! after the poster approves them.

pub mod clock;
pub mod contact;
pub mod corpus;
pub mod delivery;
pub mod identity;
pub mod ids;
pub mod meronym;
pub mod qa;
pub mod scenario;
pub mod service;
pub mod signals;

pub use service::{Service, ServiceConfig, ServiceError};
