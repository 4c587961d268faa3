use std::collections::BTreeMap;
use std::io::{self, IsTerminal};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use retrograde::bench::{run_benchmark, BenchConfig, BenchSchedule};
use retrograde::debugger::{repl, serve_stdio, serve_tcp, EngineSelection, LoadSpec, Session};
use retrograde::engines::{EngineConfig, EngineKind};
use retrograde::interp::{trace, Outcome};
use retrograde::lang::Program;
use retrograde::par::Exec;
use retrograde::revgen::{gen_reverse, Reversal, DEFAULT_BUDGET};

#[derive(Parser)]
#[command(name = "retrograde", version, about = "Reversible debugger for a small concurrent language")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Where the program comes from.
#[derive(Args, Clone)]
struct ProgramArgs {
    /// Source file, or a built-in fixture: bounded-buffer, straight-line,
    /// accumulator, mutex-counter, crossed-locks.
    file: String,
    /// Constant binding, e.g. `-D M=3`. bounded-buffer defaults to M=3, N=5.
    #[arg(short = 'D', value_name = "NAME=VALUE", value_parser = parse_binding)]
    define: Vec<(String, i64)>,
    /// Initial array contents, e.g. `--init src=1,2,3`.
    #[arg(long, value_name = "NAME=V,V,..", value_parser = parse_init)]
    init: Vec<(String, Vec<i64>)>,
}

impl ProgramArgs {
    fn spec(&self) -> LoadSpec {
        let mut spec = if Path::new(&self.file).exists() {
            LoadSpec { path: Some(self.file.clone()), ..Default::default() }
        } else {
            LoadSpec::fixture(&self.file)
        };
        spec.constants = self.define.iter().cloned().collect();
        spec.init = self.init.iter().cloned().collect();
        spec
    }

    fn constant(&self, name: &str) -> Option<i64> {
        self.define.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Loads the program through a throwaway session so files and fixtures
    /// resolve exactly as in `debug` and `serve`.
    fn program(&self) -> Result<Arc<Program>> {
        let session = Session::with_program(self.spec())?;
        Ok(session.program().expect("loaded").clone())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a program to completion and print the final state.
    Run {
        #[command(flatten)]
        program: ProgramArgs,
        /// Schedule JSON, a file holding it, `seed:<n>`, `s-seq` or `s-opt`.
        #[arg(long)]
        schedule: String,
        /// Print every executed entry.
        #[arg(long)]
        path: bool,
    },
    /// Interactive debugger on stdin/stdout.
    Debug {
        #[command(flatten)]
        program: ProgramArgs,
        /// Backtracking method; repeat to run several side by side.
        #[arg(long)]
        engine: Vec<EngineKind>,
        /// Schedule consulted when several threads could run.
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Memory-cost benchmark over one recorded run.
    Bench(BenchArgs),
    /// Newline-delimited JSON protocol server.
    Serve {
        /// Program to preload; clients can also send `load`.
        file: Option<String>,
        #[arg(long, conflicts_with = "stdio", required_unless_present = "stdio")]
        port: Option<u16>,
        #[arg(long)]
        stdio: bool,
    },
    /// Print the reverse code generated for one entry of a run.
    Revcode {
        #[command(flatten)]
        program: ProgramArgs,
        #[arg(long)]
        schedule: String,
        /// 1-based entry; defaults to every entry.
        #[arg(long)]
        seq: Option<usize>,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "bounded-buffer")]
    fixture: String,
    #[arg(long = "M", default_value_t = 3)]
    m: i64,
    #[arg(long = "N", default_value_t = 5)]
    n: i64,
    /// `s-opt`, `s-seq`, `seed:<n>` or schedule JSON.
    #[arg(long, default_value = "s-opt")]
    schedule: String,
    /// `all` or a comma-separated list.
    #[arg(long, default_value = "all")]
    engines: String,
    /// Checkpoint lines, comma-separated.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<u32>>,
    /// Reverse-code retention window of the dynamic engine.
    #[arg(long)]
    retention: Option<usize>,
    /// Observe with one engine at a time instead of in parallel.
    #[arg(long)]
    sequential: bool,
    /// CSV report; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON twin of the report.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn parse_binding(s: &str) -> Result<(String, i64), String> {
    let (name, value) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    Ok((name.to_string(), value.parse().map_err(|e| format!("{value}: {e}"))?))
}

fn parse_init(s: &str) -> Result<(String, Vec<i64>), String> {
    let (name, values) = s.split_once('=').ok_or("expected NAME=V,V,..")?;
    let values = values.split(',').map(|v| v.trim().parse().map_err(|e| format!("{v}: {e}"))).collect::<Result<_, _>>()?;
    Ok((name.to_string(), values))
}

/// Reads a schedule argument; a path is read as JSON.
fn schedule_arg(arg: &str, n: i64) -> Result<retrograde::interp::Schedule> {
    let text = if Path::new(arg).is_file() {
        std::fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?
    } else {
        arg.to_string()
    };
    let parsed = BenchSchedule::parse(text.trim()).map_err(anyhow::Error::msg)?;
    Ok(parsed.schedule(n.max(0) as usize))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { program, schedule, path } => {
            let n = program.constant("N").unwrap_or(5);
            let p = program.program()?;
            let t = trace(p.clone(), &schedule_arg(&schedule, n)?)?;
            if path {
                for e in t.execution.path() {
                    println!("#{} {} line {}: {}", e.seq, p.thread(e.thread).name, e.line, e.render(&p));
                }
            }
            let mut session = Session::with_program(program.spec())?;
            for e in t.execution.path() {
                session.execute("step", &serde_json::json!({ "thread": p.thread(e.thread).name }))?;
            }
            let state = session.execute("state", &serde_json::Value::Null)?;
            print!("{}", repl::render("state", &state.payload, &[]));
            match t.outcome {
                Some(Outcome::Terminated) => println!("terminated after {} entries", t.execution.len()),
                Some(Outcome::Deadlock { blocked }) => println!("deadlock: {} blocked", blocked.join(", ")),
                None => println!("schedule exhausted after {} entries", t.execution.len()),
            }
        }
        Command::Debug { program, engine, schedule } => {
            let mut spec = program.spec();
            if !engine.is_empty() {
                spec.engines = Some(EngineSelection::List(engine.clone()));
                spec.primary = engine.first().copied();
            }
            if let Some(s) = schedule {
                spec.schedule = Some(schedule_arg(&s, program.constant("N").unwrap_or(5))?);
            }
            let mut session = Session::new();
            let loaded = session.load(spec)?;
            let interactive = io::stdin().is_terminal();
            if interactive {
                println!("{}", repl::render("load", &loaded, &[]).trim_end());
                println!("type `help` for commands");
            }
            repl::run(&mut session, io::stdin().lock(), io::stdout().lock(), interactive)?;
        }
        Command::Bench(args) => bench(args)?,
        Command::Serve { file, port, stdio } => {
            let mut session = match file {
                Some(file) => Session::with_program(ProgramArgs { file, define: vec![], init: vec![] }.spec())?,
                None => Session::new(),
            };
            if stdio {
                serve_stdio(&mut session)?;
            } else {
                let port = port.expect("clap requires --port without --stdio");
                eprintln!("listening on 127.0.0.1:{port}");
                serve_tcp(&mut session, ("127.0.0.1", port))?;
            }
        }
        Command::Revcode { program, schedule, seq } => {
            let p = program.program()?;
            let t = trace(p.clone(), &schedule_arg(&schedule, program.constant("N").unwrap_or(5))?)?;
            let path = t.execution.path();
            let seqs: Vec<usize> = match seq {
                Some(n) => vec![n],
                None => (1..=path.len()).collect(),
            };
            for n in seqs {
                let e = path.get(n.wrapping_sub(1)).with_context(|| format!("entry {n} is out of range"))?;
                println!("#{n} {} line {}: {}", p.thread(e.thread).name, e.line, e.render(&p));
                match gen_reverse(&p, path, n, DEFAULT_BUDGET)? {
                    Reversal::Code(code) => print!("{}", code.render(&p)),
                    Reversal::NeedsStateSaving => println!("needs state saving"),
                }
            }
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    if args.fixture != "bounded-buffer" {
        bail!("the benchmark runs on the bounded-buffer fixture only, got `{}`", args.fixture);
    }
    let engines = if args.engines == "all" {
        EngineKind::ALL.to_vec()
    } else {
        args.engines.split(',').filter(|s| !s.is_empty()).map(|s| s.trim().parse()).collect::<Result<_, _>>()?
    };
    let mut config = BenchConfig::new(args.m, args.n);
    config.schedule = BenchSchedule::parse(&args.schedule).map_err(anyhow::Error::msg)?;
    config.engines = engines;
    config.exec = if args.sequential { Exec::Sequential } else { Exec::Parallel };
    // resolve checkpoint lines against the instantiated program
    let checkpoints = match &args.checkpoints {
        None => None,
        Some(lines) => {
            let spec = LoadSpec {
                constants: BTreeMap::from([("M".into(), args.m), ("N".into(), args.n)]),
                checkpoints: Some(lines.clone()),
                ..LoadSpec::fixture("bounded-buffer")
            };
            let p = Session::with_program(spec)?.program().expect("loaded").clone();
            Some(lines.iter().flat_map(|l| p.state_changing_at_line(*l)).collect())
        }
    };
    config.engine_config = EngineConfig { checkpoints, retention: args.retention, ..Default::default() };
    let report = run_benchmark(&config)?;
    let csv = report.to_csv();
    match &args.out {
        Some(path) => std::fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    }
    eprintln!(
        "M={} N={} schedule={} entries={} dst_ok={} closed forms {}",
        report.m,
        report.n,
        report.schedule,
        report.path_len,
        report.dst_ok,
        if report.all_match() { "match" } else { "MISMATCH" }
    );
    if !report.dst_ok || !report.all_match() {
        std::process::exit(1);
    }
    Ok(())
}
