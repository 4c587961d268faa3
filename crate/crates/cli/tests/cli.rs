use std::io::Write;
use std::process::{Command, Output, Stdio};

fn retrograde(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_retrograde"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn bench_prints_the_csv_report() {
    let text = stdout(&retrograde(&["bench"], ""));
    let saved: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert!(text.starts_with("engine,saved_ints,closed_form,match,aux_log_ints,wall_ms\n"));
    assert_eq!(saved, ["1760", "80", "65", "40", "10"]);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(3) == Some("true")));
}

#[test]
fn bench_writes_csv_and_json_files() {
    let dir = std::env::temp_dir().join(format!("retrograde-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (csv, json) = (dir.join("r.csv"), dir.join("r.json"));
    let out = retrograde(
        &["bench", "--M", "2", "--N", "3", "--engines", "basic-ss,dynamic-rcg", "--sequential", "--out", csv.to_str().unwrap(), "--json", json.to_str().unwrap()],
        "",
    );
    stdout(&out);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 3);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["m"], 2);
    assert_eq!(v["rows"][1]["engine"], "dynamic-rcg");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn serve_stdio_answers_requests_in_order() {
    let input = "{\"id\":1,\"cmd\":\"enabled\"}\n{\"id\":2,\"cmd\":\"step\"}\n{\"id\":3,\"cmd\":\"shutdown\"}\n";
    let text = stdout(&retrograde(&["serve", "--stdio", "bounded-buffer"], input));
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines[0], serde_json::json!({"id": 1, "ok": true, "payload": ["Producer"]}));
    assert_eq!(lines.last().unwrap()["id"], 3);
    assert!(lines.iter().any(|l| l["id"] == 2 && l["ok"] == true));
}

#[test]
fn run_reaches_the_expected_destination() {
    let text = stdout(&retrograde(&["run", "bounded-buffer", "-D", "N=3", "--init", "src=10,20,30", "--schedule", "s-seq"], ""));
    assert!(text.contains("outcome: terminated"), "{text}");
    assert!(text.contains("Consumer.dst = [11,21,31]"), "{text}");
}

#[test]
fn revcode_for_one_entry() {
    let text = stdout(&retrograde(&["revcode", "straight-line", "--schedule", "seed:0", "--seq", "3"], ""));
    assert!(text.contains("g := d + 1"), "{text}");
}

#[test]
fn debug_repl_steps_and_backs() {
    let text = stdout(&retrograde(&["debug", "bounded-buffer"], "step\nback\nquit\n"));
    assert!(text.contains("#1 Producer line 15: empty := empty - 1"), "{text}");
    assert!(text.contains("undid #1"), "{text}");
}

#[test]
fn bad_schedule_fails() {
    let out = retrograde(&["bench", "--schedule", "nonsense"], "");
    assert!(!out.status.success());
}
