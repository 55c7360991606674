//! Mixed-initiative co-creative text generation.
//!
//! A designer and a pluggable generator share a numbered story canvas. They
//! talk through typed *communications*, each tagged along three dimensions:
//! who takes the initiative, whether it elaborates future changes or reflects
//! on existing content, and whether it targets the whole story or one line.
//! An experience manager decides what the agent does next and enforces the
//! interaction budget. Every session is an append-only event log, which the
//! [`metrics`] module turns into the experiment's statistics.

pub mod comms;
pub mod context;
pub mod event;
pub mod log;
pub mod manager;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod scenario;
pub mod service;
pub mod session;

pub use comms::{builtin_registry, Communication, Registry};
pub use context::{ContextQuery, Generator, GeneratorConfig};
pub use event::{replay, SessionEvent};
pub use manager::{ManagerConfig, ManagerDecision};
pub use model::*;
pub use protocol::{ClientMessage, ServerBody, ServerMessage};
pub use service::{ServiceConfig, SessionHub};
pub use session::Session;
