#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retrograde::debugger::{handle_line, Session};
use serde_json::{json, Value};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn script_path() -> PathBuf {
    fixture_dir().join("protocol").join("script.jsonl")
}

pub fn transcript_path() -> PathBuf {
    fixture_dir().join("protocol").join("transcript.jsonl")
}

/// Builds a request script of `len` lines by driving a live session, so
/// thread choices are mostly valid.
pub fn generate_script(seed: u64, len: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut session = Session::new();
    let mut script = Vec::with_capacity(len);
    let mut position = 0usize;
    let load = json!({"fixture": "bounded-buffer", "constants": {"M": 2, "N": 3}});
    for id in 0..len {
        let (cmd, args) = if id == 0 {
            ("load", load.clone())
        } else {
            let enabled: Vec<String> = {
                let h = handle_line(&mut session, r#"{"id":0,"cmd":"enabled"}"#);
                serde_json::from_value(h.response.payload.unwrap()).unwrap()
            };
            match rng.gen_range(0..100) {
                0..=49 if !enabled.is_empty() => {
                    let t = enabled[rng.gen_range(0..enabled.len())].clone();
                    ("step", json!({ "thread": t }))
                }
                0..=49 => ("step", Value::Null),
                50..=64 => ("back", if rng.gen_bool(0.2) { json!({"count": rng.gen_range(1..4)}) } else { Value::Null }),
                65..=69 => ("state", Value::Null),
                70..=72 => ("enabled", Value::Null),
                73..=77 => ("revcode", json!({ "seq": rng.gen_range(0..=position + 1) })),
                78..=80 => ("mem", Value::Null),
                81..=82 => ("path", Value::Null),
                83..=86 => {
                    let thread = if rng.gen_bool(0.5) { "Producer" } else { "Consumer" };
                    let line = if thread == "Producer" { rng.gen_range(14..24) } else { rng.gen_range(30..40) };
                    ("break", json!({ "thread": thread, "line": line, "remove": rng.gen_bool(0.3) }))
                }
                87..=92 => ("continue", Value::Null),
                93 => ("reset", Value::Null),
                94 => ("nope", Value::Null),
                _ => ("step", json!({ "thread": "Consumer" })),
            }
        };
        let line = if id > 0 && rng.gen_range(0..100) == 0 {
            "{\"id\":".to_string() + &id.to_string()
        } else {
            json!({ "id": id, "cmd": cmd, "args": args }).to_string()
        };
        let handled = handle_line(&mut session, &line);
        if let Some(p) = &handled.response.payload {
            if let Some(n) = p.get("position").or_else(|| p.get("state").and_then(|s| s.get("position"))) {
                position = n.as_u64().unwrap() as usize;
            }
        }
        script.push(line);
    }
    script
}

/// Runs `script` against a fresh server and returns every output line.
pub fn replay_script(script: &[String]) -> Vec<String> {
    let mut session = Session::new();
    script.iter().flat_map(|line| handle_line(&mut session, line).lines()).collect()
}

/// Drops wall-clock fields, which are the only nondeterministic output.
pub fn strip_timing(line: &str) -> String {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(map) => {
                map.retain(|k, _| !k.ends_with("_ms") && k != "wall_time");
                map.values_mut().for_each(strip);
            }
            Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: Value = serde_json::from_str(line).expect("server output is JSON");
    strip(&mut v);
    v.to_string()
}

pub fn read_lines(path: &PathBuf) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(str::to_string)
        .collect()
}
