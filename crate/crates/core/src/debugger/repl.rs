//! Line-oriented front end over the same session commands the protocol
//! uses.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use serde_json::{json, Value};

use super::session::{Event, LoadSpec, Session};

pub const HELP: &str = "\
commands:
  step [thread]          run one state-changing command (s)
  back [n]               undo the last n entries (b)
  continue               run to a breakpoint, block or termination (c)
  state                  all locations and thread positions
  enabled                threads that can run
  revcode [seq]          reverse code for an entry (default: last)
  mem                    memory ledgers of all engines
  path                   executed entries
  break [thread line]    add a breakpoint, or list them
  delete thread line     remove a breakpoint
  reset                  back to the initial state
  load <file|fixture>    load another program
  quit";

#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Empty,
    Help,
    Quit,
    Command { cmd: String, args: Value },
}

/// Translates one REPL line into a session command.
pub fn parse_line(line: &str) -> Result<Parsed, String> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let Some((&head, rest)) = words.split_first() else {
        return Ok(Parsed::Empty);
    };
    let number = |w: &str| w.parse::<u64>().map_err(|_| format!("expected a number, got `{w}`"));
    let command = |cmd: &str, args: Value| Ok(Parsed::Command { cmd: cmd.into(), args });
    match (head, rest) {
        ("help" | "h" | "?", _) => Ok(Parsed::Help),
        ("quit" | "q" | "exit", _) => Ok(Parsed::Quit),
        ("step" | "s", []) => command("step", Value::Null),
        ("step" | "s", [t]) => command("step", json!({ "thread": t })),
        ("back" | "b", []) => command("back", Value::Null),
        ("back" | "b", [n]) => command("back", json!({ "count": number(n)? })),
        ("continue" | "c", []) => command("continue", Value::Null),
        ("state", []) => command("state", Value::Null),
        ("enabled", []) => command("enabled", Value::Null),
        ("revcode", []) => command("revcode", Value::Null),
        ("revcode", [n]) => command("revcode", json!({ "seq": number(n)? })),
        ("mem", []) => command("mem", Value::Null),
        ("path", []) => command("path", Value::Null),
        ("break", []) => command("break", Value::Null),
        ("break", [t, l]) => command("break", json!({ "thread": t, "line": number(l)? })),
        ("delete", [t, l]) => command("break", json!({ "thread": t, "line": number(l)?, "remove": true })),
        ("reset", []) => command("reset", Value::Null),
        ("load", [target]) => {
            let spec = if std::path::Path::new(target).exists() {
                LoadSpec { path: Some(target.to_string()), ..Default::default() }
            } else {
                LoadSpec::fixture(target)
            };
            command("load", serde_json::to_value(spec).expect("load spec serializes"))
        }
        _ => Err(format!("cannot parse `{line}`; type `help`")),
    }
}

/// Renders a successful reply for humans.
pub fn render(cmd: &str, payload: &Value, events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        let _ = writeln!(out, "{}", render_event(e));
    }
    match cmd {
        "state" | "reset" => out.push_str(&render_state(payload)),
        "step" => {
            let _ = writeln!(out, "{}", render_entry(&payload["entry"]));
            out.push_str(&render_threads(&payload["state"]));
        }
        "back" => {
            for e in payload["undone"].as_array().into_iter().flatten() {
                let _ = writeln!(out, "undid {}", render_entry(e));
            }
            out.push_str(&render_threads(&payload["state"]));
        }
        "continue" => {
            let _ = writeln!(out, "stopped after {} steps: {}", payload["steps"], compact(&payload["reason"]));
            out.push_str(&render_threads(&payload["state"]));
        }
        "enabled" => {
            let names: Vec<&str> = payload.as_array().into_iter().flatten().filter_map(Value::as_str).collect();
            let _ = writeln!(out, "{}", if names.is_empty() { "(none)".to_string() } else { names.join(" ") });
        }
        "revcode" => {
            let _ = writeln!(out, "{}", render_entry(&payload["entry"]));
            match payload["code"]["text"].as_str() {
                Some(text) => out.push_str(text),
                None => out.push_str("needs state saving\n"),
            }
        }
        "mem" => {
            let _ = writeln!(out, "{:<14} {:>10} {:>8} {:>9}", "engine", "saved_ints", "aux_log", "revcode");
            for l in payload["ledgers"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    out,
                    "{:<14} {:>10} {:>8} {:>9}",
                    l["engine"].as_str().unwrap_or_default(),
                    l["saved_ints"].as_u64().unwrap_or_default(),
                    l["aux_log_ints"].as_u64().unwrap_or_default(),
                    l["retained_revcode_cmds"].as_u64().unwrap_or_default()
                );
            }
        }
        "path" => {
            for e in payload["entries"].as_array().into_iter().flatten() {
                let _ = writeln!(out, "{}", render_entry(e));
            }
        }
        "break" => {
            for b in payload.as_array().into_iter().flatten() {
                let _ = writeln!(out, "{} line {}", b["thread"].as_str().unwrap_or_default(), b["line"]);
            }
        }
        "load" => {
            let _ = writeln!(out, "loaded; threads: {}", compact(&payload["threads"]));
            out.push_str(&render_state(&payload["state"]));
        }
        _ => {
            let _ = writeln!(out, "{}", compact(payload));
        }
    }
    out
}

fn compact(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        v => v.to_string(),
    }
}

fn render_event(e: &Event) -> String {
    let d = &e.data;
    match e.event {
        "switch" => format!("-- switch to {} at entry {}", compact(&d["to"]), d["seq"]),
        "block-entry" => format!("-- {} enters block at line {}", compact(&d["thread"]), d["line"]),
        "terminated" => "-- program terminated".to_string(),
        "deadlock" => format!("-- deadlock: {} blocked", compact(&d["blocked"])),
        other => format!("-- {other} {}", compact(d)),
    }
}

fn render_entry(e: &Value) -> String {
    format!(
        "#{} {} line {}: {} := {}",
        e["seq"],
        e["thread"].as_str().unwrap_or_default(),
        e["line"],
        e["lhs"].as_str().unwrap_or_default(),
        e["rhs"].as_str().unwrap_or_default()
    )
}

fn render_threads(state: &Value) -> String {
    let mut out = String::new();
    for t in state["threads"].as_array().into_iter().flatten() {
        let line = t["line"].as_u64().map_or("-".to_string(), |l| l.to_string());
        let _ = writeln!(out, "  {:<12} {:<9} line {}", t["name"].as_str().unwrap_or_default(), compact(&t["status"]), line);
    }
    out
}

fn render_state(state: &Value) -> String {
    let mut out = format!("position {}\n", state["position"]);
    for v in state["vars"].as_array().into_iter().flatten() {
        let name = match v["scope"].as_str() {
            Some(scope) => format!("{scope}.{}", compact(&v["name"])),
            None => compact(&v["name"]),
        };
        let _ = writeln!(out, "  {name} = {}", compact(&v["value"]));
    }
    out.push_str(&render_threads(state));
    if !state["outcome"].is_null() {
        let _ = writeln!(out, "  outcome: {}", compact(&state["outcome"]));
    }
    out
}

/// Interactive loop: reads commands from `input` until EOF or `quit`.
pub fn run(session: &mut Session, input: impl BufRead, mut output: impl Write, prompt: bool) -> io::Result<()> {
    if prompt {
        write!(output, "> ")?;
        output.flush()?;
    }
    for line in input.lines() {
        let line = line?;
        match parse_line(&line) {
            Ok(Parsed::Empty) => {}
            Ok(Parsed::Help) => writeln!(output, "{HELP}")?,
            Ok(Parsed::Quit) => return Ok(()),
            Ok(Parsed::Command { cmd, args }) => match session.execute(&cmd, &args) {
                Ok(reply) => write!(output, "{}", render(&cmd, &reply.payload, &reply.events))?,
                Err(e) => writeln!(output, "error ({}): {e}", e.code())?,
            },
            Err(msg) => writeln!(output, "error: {msg}")?,
        }
        if prompt {
            write!(output, "> ")?;
        }
        output.flush()?;
    }
    Ok(())
}
