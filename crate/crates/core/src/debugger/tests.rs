use serde_json::{json, Value};

use super::repl::{parse_line, render, Parsed};
use super::*;
use crate::bench::schedules::scenario;
use crate::interp::{trace, Schedule};
use crate::revgen::{execute_reverse, gen_reverse, Reversal, DEFAULT_BUDGET};

fn bb_session() -> Session {
    Session::with_program(LoadSpec::fixture("bounded-buffer")).unwrap()
}

fn send(s: &mut Session, line: &str) -> Value {
    let lines = handle_line(s, line).lines();
    serde_json::from_str(lines.last().unwrap()).unwrap()
}

fn ok(s: &mut Session, cmd: &str, args: Value) -> Value {
    s.execute(cmd, &args).unwrap_or_else(|e| panic!("{cmd}: {e}")).payload
}

fn var(state: &Value, name: &str) -> Value {
    state["vars"].as_array().unwrap().iter().find(|v| v["name"] == name).unwrap()["value"].clone()
}

fn thread_line(state: &Value, name: &str) -> Value {
    state["threads"].as_array().unwrap().iter().find(|t| t["name"] == name).unwrap()["line"].clone()
}

#[test]
fn only_producer_is_enabled_at_start() {
    let mut s = bb_session();
    assert_eq!(
        handle_line(&mut s, r#"{"id":1,"cmd":"enabled"}"#).lines(),
        [r#"{"id":1,"ok":true,"payload":["Producer"]}"#]
    );
}

#[test]
fn unknown_and_malformed_requests() {
    let mut s = bb_session();
    let r = send(&mut s, r#"{"id":2,"cmd":"nope"}"#);
    assert_eq!((r["id"].clone(), r["ok"].clone(), r["error"]["code"].clone()), (json!(2), json!(false), json!("unknown-command")));
    let r = send(&mut s, "{not json");
    assert_eq!(r["id"], Value::Null);
    assert_eq!(r["error"]["code"], "malformed");
    let r = send(&mut s, r#"{"id":"x"}"#);
    assert_eq!((r["id"].clone(), r["error"]["code"].clone()), (json!("x"), json!("bad-request")));
    let r = send(&mut Session::new(), r#"{"id":3,"cmd":"state"}"#);
    assert_eq!(r["error"]["code"], "not-loaded");
}

#[test]
fn first_producer_step_takes_an_empty_slot() {
    let mut s = bb_session();
    let before = ok(&mut s, "state", Value::Null);
    assert_eq!(var(&before, "empty"), 3);
    assert_eq!(thread_line(&before, "Producer"), 15);
    assert_eq!(thread_line(&before, "Consumer"), 31);
    let p = ok(&mut s, "step", json!({"thread": "Producer"}));
    assert_eq!(p["entry"]["line"], 15);
    assert_eq!(var(&p["state"], "empty"), 2);
    assert_eq!(thread_line(&p["state"], "Producer"), 16);
}

#[test]
fn back_at_origin_is_an_error() {
    let mut s = bb_session();
    let r = send(&mut s, r#"{"id":1,"cmd":"back"}"#);
    assert_eq!(r["error"]["code"], "at-origin");
    ok(&mut s, "step", Value::Null);
    let r = send(&mut s, r#"{"id":2,"cmd":"back","args":{"count":2}}"#);
    assert_eq!(r["error"]["code"], "at-origin");
    let p = ok(&mut s, "back", Value::Null);
    assert_eq!(p["state"]["position"], 0);
}

#[test]
fn step_needs_a_thread_when_several_are_enabled() {
    let mut s = bb_session();
    // wait(empty) through signal(full)
    for _ in 0..6 {
        ok(&mut s, "step", Value::Null);
    }
    assert_eq!(ok(&mut s, "enabled", Value::Null), json!(["Producer", "Consumer"]));
    let e = s.execute("step", &Value::Null).unwrap_err();
    assert_eq!(e.code(), "ambiguous-thread");
    assert_eq!(s.execute("step", &json!({"thread": "Nobody"})).unwrap_err().code(), "unknown-thread");
}

#[test]
fn scheduled_steps_rewind_with_back() {
    let spec = LoadSpec { schedule: Some(Schedule::Seeded { seed: 4 }), ..LoadSpec::fixture("bounded-buffer") };
    let mut s = Session::with_program(spec).unwrap();
    let forward: Vec<Value> = (0..30).map(|_| ok(&mut s, "step", Value::Null)["entry"].clone()).collect();
    ok(&mut s, "back", json!({"count": 30}));
    let again: Vec<Value> = (0..30).map(|_| ok(&mut s, "step", Value::Null)["entry"].clone()).collect();
    assert_eq!(forward, again);
}

#[test]
fn scenario_b_by_hand_gives_restoring_code() {
    let Schedule::Scripted { choices } = scenario("b", 1).unwrap() else { unreachable!() };
    let spec = LoadSpec { constants: [("N".to_string(), 1)].into(), ..LoadSpec::fixture("bounded-buffer") };
    let mut s = Session::with_program(spec).unwrap();
    for t in &choices {
        ok(&mut s, "step", json!({ "thread": t }));
    }
    let seq = choices.len();
    let r = ok(&mut s, "revcode", json!({ "seq": seq }));
    assert_eq!(r["entry"]["line"], 22);
    assert_eq!(r["status"], "code");
    assert_eq!(r["code"]["target"], "d");

    // oracle: the generated code maps the state after the entry to the one before it
    let program = s.program().unwrap().clone();
    let t = trace(program.clone(), &scenario("b", 1).unwrap()).unwrap();
    assert_eq!(s.timeline().unwrap().execution().path(), t.execution.path());
    let Reversal::Code(code) = gen_reverse(&program, t.execution.path(), seq, DEFAULT_BUDGET).unwrap() else {
        panic!("needs state saving")
    };
    let mut m = t.snapshots[seq].clone();
    execute_reverse(&program, &mut m, &code).unwrap();
    assert_eq!(m.values(), t.snapshots[seq - 1].values());
}

#[test]
fn revcode_range_and_state_saving_status() {
    let mut s = bb_session();
    assert_eq!(s.execute("revcode", &Value::Null).unwrap_err().code(), "out-of-range");
    for t in ["Producer"; 5] {
        ok(&mut s, "step", json!({ "thread": t }));
    }
    // line 19: rear := rear % M
    let r = ok(&mut s, "revcode", json!({ "seq": 5 }));
    assert_eq!(r["entry"]["line"], 19);
    assert_eq!(r["status"], "needs-state-saving");
    assert_eq!(s.execute("revcode", &json!({"seq": 6})).unwrap_err().code(), "out-of-range");
}

#[test]
fn breakpoints_stop_before_the_change() {
    let spec = LoadSpec { schedule: Some(Schedule::Seeded { seed: 1 }), ..LoadSpec::fixture("bounded-buffer") };
    let mut s = Session::with_program(spec).unwrap();
    assert_eq!(s.execute("break", &json!({"thread": "Consumer", "line": 30})).unwrap_err().code(), "unknown-line");
    ok(&mut s, "break", json!({"thread": "Consumer", "line": 32}));
    let r = ok(&mut s, "continue", Value::Null);
    assert_eq!(r["reason"], json!({"breakpoint": {"thread": "Consumer", "line": 32}}));
    // dst[0] not yet written
    assert_eq!(var(&r["state"], "dst")[0], 0);
    assert_eq!(thread_line(&r["state"], "Consumer"), 32);
    let r = ok(&mut s, "continue", Value::Null);
    assert!(r["steps"].as_u64().unwrap() > 0);
    assert_eq!(ok(&mut s, "break", json!({"clear": true})), json!([]));
    let r = ok(&mut s, "continue", Value::Null);
    assert_eq!(r["reason"], "terminated");
    assert_eq!(var(&r["state"], "dst"), json!([11, 21, 31, 41, 51]));
}

#[test]
fn continue_without_a_schedule_needs_choices() {
    let mut s = bb_session();
    let r = ok(&mut s, "continue", Value::Null);
    assert_eq!(r["reason"], "choice-required");
    assert_eq!(r["steps"], 6);
    assert_eq!(s.execute("continue", &Value::Null).unwrap_err().code(), "ambiguous-thread");
}

#[test]
fn events_precede_the_response() {
    let mut s = Session::with_program(LoadSpec {
        schedule: Some(Schedule::Seeded { seed: 2 }),
        ..LoadSpec::fixture("crossed-locks")
    })
    .unwrap();
    let mut kinds = Vec::new();
    for i in 0..100 {
        let h = handle_line(&mut s, &format!(r#"{{"id":{i},"cmd":"step"}}"#));
        kinds.extend(h.events.iter().map(|e| e.event));
        let lines = h.lines();
        assert!(lines.last().unwrap().starts_with(&format!(r#"{{"id":{i},"#)));
        if !h.response.ok {
            break;
        }
    }
    assert_eq!(kinds.first(), Some(&"switch"));
    assert!(kinds.contains(&"block-entry"));
    assert!(kinds.iter().any(|k| *k == "terminated" || *k == "deadlock"));
}

#[test]
fn mem_and_path_payloads() {
    let mut s = bb_session();
    for _ in 0..6 {
        ok(&mut s, "step", Value::Null);
    }
    let mem = ok(&mut s, "mem", Value::Null);
    assert_eq!(mem["ledgers"].as_array().unwrap().len(), 5);
    assert_eq!(mem["ledgers"][1]["saved_ints"], 6);
    let path = ok(&mut s, "path", Value::Null);
    assert_eq!(path["entries"].as_array().unwrap().len(), 6);
    assert_eq!(path["log"]["entries"], 6);
    assert_eq!(ok(&mut s, "reset", Value::Null)["position"], 0);
}

#[test]
fn load_options_are_validated() {
    let mut s = Session::new();
    assert_eq!(s.execute("load", &json!({})).unwrap_err().code(), "bad-args");
    assert_eq!(s.execute("load", &json!({"fixture": "nope"})).unwrap_err().code(), "load");
    assert_eq!(s.execute("load", &json!({"fixture": "accumulator", "speed": 3})).unwrap_err().code(), "bad-args");
    let p = ok(&mut s, "load", json!({"fixture": "bounded-buffer", "engines": ["basic-ss", "static-rcg"]}));
    assert_eq!(p["primary"], "basic-ss");
    let p = ok(&mut s, "load", json!({"fixture": "bounded-buffer", "engines": "all", "checkpoints": [15]}));
    assert_eq!(p["primary"], "dynamic-rcg");
    assert_eq!(s.execute("load", &json!({"fixture": "bounded-buffer", "checkpoints": [2]})).unwrap_err().code(), "unknown-line");
}

#[test]
fn repl_and_protocol_share_state_payloads() {
    let script = ["step Producer", "step", "step", "back", "step Producer", "back 2", "step"];
    let mut repl = bb_session();
    let mut proto = bb_session();
    for (i, line) in script.iter().enumerate() {
        let Parsed::Command { cmd, args } = parse_line(line).unwrap() else { panic!() };
        let reply = repl.execute(&cmd, &args).unwrap();
        assert!(!render(&cmd, &reply.payload, &reply.events).is_empty());
        let req = json!({"id": i, "cmd": cmd, "args": args}).to_string();
        let resp = send(&mut proto, &req);
        assert_eq!(resp["payload"], reply.payload);
    }
    assert_eq!(ok(&mut repl, "state", Value::Null), ok(&mut proto, "state", Value::Null));
}

#[test]
fn repl_parsing() {
    assert_eq!(parse_line("  "), Ok(Parsed::Empty));
    assert_eq!(parse_line("q"), Ok(Parsed::Quit));
    assert_eq!(
        parse_line("delete Producer 16"),
        Ok(Parsed::Command { cmd: "break".into(), args: json!({"thread": "Producer", "line": 16, "remove": true}) })
    );
    assert!(parse_line("back many").is_err());
    assert!(parse_line("fly").is_err());
}

#[test]
fn stream_server_stops_on_shutdown() {
    let mut s = bb_session();
    let input = "{\"id\":1,\"cmd\":\"enabled\"}\n\n{\"id\":2,\"cmd\":\"shutdown\"}\n{\"id\":3,\"cmd\":\"state\"}\n";
    let mut out = Vec::new();
    assert!(serve_stream(&mut s, input.as_bytes(), &mut out).unwrap());
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 2);
}
