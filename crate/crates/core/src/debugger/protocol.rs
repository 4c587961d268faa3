//! Newline-delimited JSON protocol. One request per line; each produces
//! zero or more event lines followed by exactly one response line.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, ToSocketAddrs};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::session::{Event, Session};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Request {
    pub id: Value,
    pub cmd: String,
    #[serde(default)]
    pub args: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Response {
    pub id: Value,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl Response {
    fn error(id: Value, code: &str, message: String) -> Self {
        Response { id, ok: false, payload: None, error: Some(ErrorBody { code: code.into(), message }) }
    }
}

/// What handling one line produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Handled {
    pub events: Vec<Event>,
    pub response: Response,
    /// The client asked the server to stop.
    pub shutdown: bool,
}

impl Handled {
    /// Output lines in wire order.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> =
            self.events.iter().map(|e| serde_json::to_string(e).expect("events serialize")).collect();
        out.push(serde_json::to_string(&self.response).expect("responses serialize"));
        out
    }
}

/// Handles one request line against `session`.
pub fn handle_line(session: &mut Session, line: &str) -> Handled {
    let done = |response| Handled { events: Vec::new(), response, shutdown: false };
    let value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return done(Response::error(Value::Null, "malformed", e.to_string())),
    };
    let request: Request = match serde_json::from_value(value.clone()) {
        Ok(r) => r,
        Err(e) => {
            let id = value.get("id").cloned().unwrap_or(Value::Null);
            return done(Response::error(id, "bad-request", e.to_string()));
        }
    };
    if request.cmd == "shutdown" {
        let response = Response { id: request.id, ok: true, payload: Some(Value::Null), error: None };
        return Handled { events: Vec::new(), response, shutdown: true };
    }
    match session.execute(&request.cmd, &request.args) {
        Ok(reply) => Handled {
            events: reply.events,
            response: Response { id: request.id, ok: true, payload: Some(reply.payload), error: None },
            shutdown: false,
        },
        Err(e) => done(Response::error(request.id, e.code(), e.to_string())),
    }
}

/// Serves one connection until EOF or shutdown. Returns true on shutdown.
pub fn serve_stream(session: &mut Session, input: impl BufRead, mut output: impl Write) -> io::Result<bool> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let handled = handle_line(session, &line);
        for out in handled.lines() {
            writeln!(output, "{out}")?;
        }
        output.flush()?;
        if handled.shutdown {
            return Ok(true);
        }
    }
    Ok(false)
}

pub fn serve_stdio(session: &mut Session) -> io::Result<()> {
    let stdin = io::stdin();
    serve_stream(session, stdin.lock(), io::stdout().lock()).map(|_| ())
}

/// Accepts connections one at a time. The session outlives each
/// connection, so a client can reattach after losing its transport.
pub fn serve_tcp(session: &mut Session, addr: impl ToSocketAddrs) -> io::Result<()> {
    serve_listener(session, TcpListener::bind(addr)?)
}

pub fn serve_listener(session: &mut Session, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(_) => continue,
        };
        let reader = BufReader::new(stream.try_clone()?);
        match serve_stream(session, reader, &stream) {
            Ok(true) => return Ok(()),
            // transport loss only ends this connection
            Ok(false) | Err(_) => continue,
        }
    }
    Ok(())
}
