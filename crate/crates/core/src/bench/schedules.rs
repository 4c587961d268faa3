//! Canonical scripted schedules for the bounded-buffer fixture.

use crate::interp::Schedule;

const PRODUCER: &str = "Producer";
const CONSUMER: &str = "Consumer";

fn script(n: usize, pattern: &[(&str, usize)]) -> Schedule {
    let mut choices = Vec::new();
    for _ in 0..n {
        for (thread, count) in pattern {
            choices.extend(std::iter::repeat(thread.to_string()).take(*count));
        }
    }
    Schedule::Scripted { choices }
}

/// Strict alternation by whole loop iterations: Producer runs lines 15-22,
/// then Consumer runs lines 31-38, `n` times.
pub fn s_seq(n: usize) -> Schedule {
    script(n, &[(PRODUCER, 8), (CONSUMER, 8)])
}

/// Per iteration: Producer 15-20, Consumer 31-37, Producer 21-22,
/// Consumer 38. Lines 21 and 38 land in the same checkpoint interval, so
/// `g` is charged once per iteration there.
pub fn s_opt(n: usize) -> Schedule {
    script(n, &[(PRODUCER, 6), (CONSUMER, 7), (PRODUCER, 2), (CONSUMER, 1)])
}

/// Looks a canonical schedule up by its CLI name.
pub fn by_name(name: &str, n: usize) -> Option<Schedule> {
    match name {
        "s-seq" => Some(s_seq(n)),
        "s-opt" => Some(s_opt(n)),
        _ => None,
    }
}

/// A one-shot script: each `(thread, count)` run in order.
pub fn runs(pattern: &[(&str, usize)]) -> Schedule {
    script(1, pattern)
}

/// Complete schedules reproducing the reverse-code scenarios around
/// `d := g×3` (line 22). Iterations before `iteration` follow S-opt; the
/// scenario's interleaving happens in iteration `iteration`, which is the
/// last one, so run it with `N = iteration` (any M ≥ 1).
pub fn scenario(name: &str, iteration: usize) -> Option<Schedule> {
    let (p, c) = (PRODUCER, CONSUMER);
    let last: &[(&str, usize)] = match name {
        // 21 -> 22
        "a" => &[(p, 6), (c, 7), (p, 2), (c, 1)],
        // 21 -> 37 -> 38 -> 22
        "b" => &[(p, 7), (c, 8), (p, 1)],
        // 21 -> 37 -> 22
        "c" => &[(p, 7), (c, 7), (p, 1), (c, 1)],
        // 21 -> 38 -> 22
        "d" => &[(p, 6), (c, 7), (p, 1), (c, 1), (p, 1)],
        _ => return None,
    };
    if iteration == 0 {
        return None;
    }
    let mut pattern = Vec::new();
    for _ in 1..iteration {
        pattern.extend_from_slice(&[(p, 6), (c, 7), (p, 2), (c, 1)]);
    }
    pattern.extend_from_slice(last);
    Some(runs(&pattern))
}

/// Complete schedule (M=2, N=3) whose third line-16 entry overwrites
/// `buf[0]` right after the Consumer's lines 32-36 read it:
/// 32 33 34 35 36 -> 15 16.
pub fn buf0_scenario() -> Schedule {
    let (p, c) = (PRODUCER, CONSUMER);
    runs(&[(p, 16), (c, 6), (p, 2), (c, 2), (p, 6), (c, 16)])
}
