//! Interactive debugging: a session layer shared by the REPL and the JSON
//! protocol server.

pub mod protocol;
pub mod repl;
pub mod session;

pub use protocol::{handle_line, serve_listener, serve_stdio, serve_stream, serve_tcp, Handled, Request, Response};
pub use session::{EngineSelection, Event, LoadSpec, Reply, Session, SessionError};

#[cfg(test)]
mod tests;
