//! HTTP and server-sent-event front of a running twin.
//!
//! One [`Engine`] thread owns the twin. Handlers send commands through its
//! mailbox and read the state it publishes after every change; the event
//! sequence fans out through a [`Hub`] that keeps a ring of recent events
//! for reconnecting subscribers.
pub mod api;
pub mod engine;
pub mod hub;

pub use api::{router, AppState};
pub use engine::{Engine, EngineError, EngineHandle};
pub use hub::{Hub, Published, Start, RING_CAPACITY};
