use std::collections::{HashSet, VecDeque};
use std::sync::Arc;

use retrograde::bench::fixture::{auxiliary, bounded_buffer, default_src};
use retrograde::bench::schedules::{s_opt, s_seq};
use retrograde::interp::{
    replay, replay_path, step_machine, trace, EntryKind, Loc, Machine, Outcome, Schedule, ThreadStatus,
};
use retrograde::lang::Program;

fn bb(m: i64, n: i64) -> Arc<Program> {
    bounded_buffer(m, n, &default_src(n as usize)).unwrap()
}

#[test]
fn log_replays_the_path_for_a_thousand_seeds() {
    for seed in 0..1000u64 {
        let m = 1 + (seed % 3) as i64;
        let n = 1 + (seed % 6) as i64;
        let p = bb(m, n);
        let t = trace(p.clone(), &Schedule::Seeded { seed }).unwrap();
        let exec = &t.execution;
        assert_eq!(replay_path(&p, exec.log()).unwrap(), exec.path(), "seed {seed}");
        assert_eq!(&replay(&p, exec.log(), exec.len()).unwrap(), exec.machine(), "seed {seed}");
        // every prefix too, on a sample
        if seed % 50 == 0 {
            for k in 0..=exec.len() {
                assert_eq!(replay(&p, exec.log(), k).unwrap(), t.snapshots[k], "seed {seed} prefix {k}");
            }
        }
    }
}

#[test]
fn auxiliary_logs_replay() {
    for (name, p) in auxiliary() {
        for seed in 0..100u64 {
            let t = trace(p.clone(), &Schedule::Seeded { seed }).unwrap();
            assert_eq!(replay_path(&p, t.execution.log()).unwrap(), t.execution.path(), "{name} seed {seed}");
        }
    }
}

#[test]
fn identical_schedules_give_identical_runs() {
    let p = bb(2, 4);
    for schedule in [s_seq(4), s_opt(4), Schedule::Seeded { seed: 11 }] {
        let a = trace(p.clone(), &schedule).unwrap();
        let b = trace(p.clone(), &schedule).unwrap();
        assert_eq!(a.execution.path(), b.execution.path());
        assert_eq!(a.execution.log(), b.execution.log());
        assert_eq!(a.snapshots, b.snapshots);
    }
}

/// Each entry mutates exactly its own lhs slot, and a complete run has
/// 8 state changes per loop body per thread.
#[test]
fn entries_and_state_changes_correspond() {
    for seed in 0..200u64 {
        let n = 1 + (seed % 5) as i64;
        let p = bb(2, n);
        let t = trace(p.clone(), &Schedule::Seeded { seed }).unwrap();
        assert_eq!(t.outcome, Some(Outcome::Terminated));
        let path = t.execution.path();
        assert_eq!(path.len() as i64, 16 * n);
        assert_eq!(t.snapshots.len(), path.len() + 1);
        for (k, e) in path.iter().enumerate() {
            let (before, after) = (t.snapshots[k].values(), t.snapshots[k + 1].values());
            let changed: Vec<usize> = (0..before.len()).filter(|i| before[*i] != after[*i]).collect();
            let slot = e.lhs.slot(&p);
            assert!(changed.iter().all(|i| *i == slot), "seed {seed} entry {}", e.seq);
            assert_eq!(after[slot], t.snapshots[k].eval(&p, &e.rhs).unwrap());
        }
    }
}

#[test]
fn waits_decrement_atomically_from_a_positive_count() {
    for seed in 0..200u64 {
        let p = bb(1 + (seed % 2) as i64, 3);
        let t = trace(p.clone(), &Schedule::Seeded { seed }).unwrap();
        for e in t.execution.path().iter().filter(|e| e.kind == EntryKind::WaitDecrement) {
            let before = t.snapshots[e.seq - 1].get(&p, e.lhs);
            assert!(before > 0, "seed {seed}: wait at {} with count {before}", e.seq);
            assert_eq!(t.snapshots[e.seq].get(&p, e.lhs), before - 1);
        }
    }
}

/// Breadth-first search over every interleaving.
fn explore(p: &Program) -> (usize, Vec<Machine>) {
    let empty = Loc::Var(p.lookup(None, "empty").unwrap());
    let producer = p.thread_by_name("Producer").unwrap();
    let start = Machine::new(p);
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    let mut terminal = Vec::new();
    while let Some(m) = queue.pop_front() {
        if m.get(p, empty) == 0 && m.pending_line(p, producer) == Some(15) {
            assert_eq!(m.status(p, producer), ThreadStatus::Blocked);
        }
        let enabled = m.enabled_threads(p);
        if enabled.is_empty() {
            terminal.push(m);
            continue;
        }
        for t in enabled {
            let mut next = m.clone();
            step_machine(p, &mut next, t, 1).unwrap();
            if seen.insert(next.clone()) {
                queue.push_back(next);
            }
        }
    }
    (seen.len(), terminal)
}

#[test]
fn no_interleaving_deadlocks_for_small_sizes() {
    for m in 1..=2 {
        for n in 1..=3 {
            let p = bb(m, n);
            let (states, terminal) = explore(&p);
            assert!(states > 16 * n as usize);
            assert!(!terminal.is_empty());
            let dst = p.lookup(p.thread_by_name("Consumer"), "dst").unwrap();
            for t in &terminal {
                assert!(t.all_finished(&p), "M={m} N={n}: deadlock");
                for i in 0..n as usize {
                    assert_eq!(t.get(&p, Loc::Cell(dst, i)), 10 * (i as i64 + 1) + 1);
                }
            }
        }
    }
}

#[test]
fn crossed_locks_can_deadlock_and_report_it() {
    let (_, p) = auxiliary().into_iter().find(|(n, _)| *n == "crossed-locks").unwrap();
    let outcomes: HashSet<bool> = (0..200u64)
        .map(|seed| matches!(trace(p.clone(), &Schedule::Seeded { seed }).unwrap().outcome, Some(Outcome::Deadlock { .. })))
        .collect();
    assert_eq!(outcomes, HashSet::from([true, false]));
}
