//! Closed-form memory costs of each method on the bounded buffer, in
//! integer units.

use serde::Serialize;

use crate::engines::EngineKind;

/// Which runs a closed form is valid for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Applies {
    /// Any complete run, whatever the interleaving.
    AnySchedule,
    /// Only the S-opt interleaving (with default checkpoints).
    SOptOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClosedForm {
    pub value: u64,
    pub applies: Applies,
}

/// Each loop body changes state 8 times per thread, and both threads run `n`
/// iterations.
/// - basic: the whole state vector (9 scalars, `buf[m]`, `src[n]`, `dst[n]`)
///   per change: `8(9+m+2n)·n·2`
/// - incremental: one int per change: `8·n·2`
/// - checkpointing: 16 distinct writes per iteration pair, minus `rear`,
///   `front` and `g` deduplicated: `(16-3)·n`
/// - static: four non-self-inverse commands per body: `4·n·2`
/// - dynamic: only `rear % M` and `front % M` save: `n·2`
pub fn closed_form(kind: EngineKind, m: u64, n: u64) -> ClosedForm {
    let (value, applies) = match kind {
        EngineKind::BasicSs => (8 * (9 + m + 2 * n) * n * 2, Applies::AnySchedule),
        EngineKind::IncrementalSs => (8 * n * 2, Applies::AnySchedule),
        EngineKind::Checkpointing => ((16 - 3) * n, Applies::SOptOnly),
        EngineKind::StaticRcg => (4 * n * 2, Applies::AnySchedule),
        EngineKind::DynamicRcg => (n * 2, Applies::SOptOnly),
    };
    ClosedForm { value, applies }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_scale_values() {
        let v: Vec<u64> = EngineKind::ALL.iter().map(|k| closed_form(*k, 3, 5).value).collect();
        assert_eq!(v, [1760, 80, 65, 40, 10]);
        assert_eq!(closed_form(EngineKind::BasicSs, 3, 1).value, 8 * 14 * 2);
        assert_eq!(closed_form(EngineKind::DynamicRcg, 7, 0).value, 0);
        assert_eq!(closed_form(EngineKind::Checkpointing, 3, 5).applies, Applies::SOptOnly);
    }
}
