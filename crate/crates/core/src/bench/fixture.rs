//! Shipped programs: the bounded buffer and a few small auxiliary ones.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::lang::{parse_program, ParseError, Program};

pub const BOUNDED_BUFFER: &str = include_str!("../../fixtures/bounded_buffer.mcl");
pub const STRAIGHT_LINE: &str = include_str!("../../fixtures/straight_line.mcl");
pub const ACCUMULATOR: &str = include_str!("../../fixtures/accumulator.mcl");
pub const MUTEX_COUNTER: &str = include_str!("../../fixtures/mutex_counter.mcl");
pub const CROSSED_LOCKS: &str = include_str!("../../fixtures/crossed_locks.mcl");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixtureError {
    #[error("buffer size M must be at least 1, got {0}")]
    BufferSize(i64),
    #[error("array length N must be at least 1, got {0}")]
    Length(i64),
    #[error("src has {got} values but N = {n}")]
    SrcLength { got: usize, n: i64 },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Default source data: 10, 20, 30, ...
pub fn default_src(n: usize) -> Vec<i64> {
    (1..=n as i64).map(|i| 10 * i).collect()
}

/// The bounded-buffer program with `M`, `N` bound and `src` filled in.
pub fn bounded_buffer(m: i64, n: i64, src: &[i64]) -> Result<Arc<Program>, FixtureError> {
    if m < 1 {
        return Err(FixtureError::BufferSize(m));
    }
    if n < 1 {
        return Err(FixtureError::Length(n));
    }
    if src.len() as i64 != n {
        return Err(FixtureError::SrcLength { got: src.len(), n });
    }
    let constants = BTreeMap::from([("M".to_string(), m), ("N".to_string(), n)]);
    let mut program = parse_program(BOUNDED_BUFFER, &constants)?;
    program.set_initial("src", src).expect("src is declared with N cells");
    Ok(Arc::new(program))
}

/// Small programs used alongside the bounded buffer in oracle suites.
pub fn auxiliary() -> Vec<(&'static str, Arc<Program>)> {
    [
        ("straight-line", STRAIGHT_LINE),
        ("accumulator", ACCUMULATOR),
        ("mutex-counter", MUTEX_COUNTER),
        ("crossed-locks", CROSSED_LOCKS),
    ]
    .into_iter()
    .map(|(name, src)| {
        let program = parse_program(src, &BTreeMap::new()).expect("shipped fixture parses");
        (name, Arc::new(program))
    })
    .collect()
}
