//! Real-time teleoperation backend: one simulated world per WebSocket client.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, ServerFrame, StateFrame};
pub use server::{serve, ServerSettings};
pub use session::{replay, AxisScale, Session, Transcript};
