//! Long-lived test daemon: one shared runner exposed over newline-delimited
//! JSON on a loopback TCP port, with runs executed asynchronously and their
//! events streamed to every connected session.
//!
//! The same port speaks HTTP for browsers: `GET /ws` upgrades to a
//! WebSocket carrying the same frames, anything else is served from the
//! static asset directory.

pub mod client;
mod executor;
mod http;
pub mod protocol;
mod server;
pub mod session;

pub use protocol::{TestDescriptor, PROTOCOL_VERSION};
pub use server::{Daemon, DaemonConfig, DaemonError, DaemonHandle};

/// Environment variable naming the default daemon port.
pub const PORT_ENV: &str = "FLOWTEST_PORT";
