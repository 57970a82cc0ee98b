//! Random structure generation shared by the property tests.

use crate::timeline::{line, Horizon, NodeKind, TemporalStructure};
use alloc::vec::Vec;
use proptest::prelude::*;

#[derive(Debug, Clone, Copy)]
pub struct Op {
    pub sticking: bool,
    pub pick: usize,
    pub frac: f64,
    pub branches: u32,
}

fn op() -> impl Strategy<Value = Op> {
    (any::<bool>(), any::<usize>(), 0.05f64..0.95, 2u32..4).prop_map(|(sticking, pick, frac, branches)| Op {
        sticking,
        pick,
        frac,
        branches,
    })
}

/// Applies `ops` to the default line, skipping any op the builder rejects.
pub fn build(ops: &[Op], allow_sticking: bool) -> TemporalStructure {
    let mut s = line(Horizon::default()).unwrap();
    for o in ops {
        let segs = s.segments();
        let seg = &segs[o.pick % segs.len()];
        if seg.is_degenerate() {
            continue;
        }
        // round to a short grid so coordinates stay exactly representable
        let t = libm::round((seg.lo + o.frac * (seg.hi - seg.lo)) * 64.0) / 64.0;
        let kind = if o.sticking && allow_sticking {
            NodeKind::Sticking
        } else {
            NodeKind::Division
        };
        if let Ok(next) = s.split(kind, seg.id, t, o.branches, 1) {
            s = next;
        }
    }
    s
}

pub fn ops(max: usize) -> impl Strategy<Value = Vec<Op>> {
    proptest::collection::vec(op(), 0..max)
}

/// Identification-free structures mixing divisions and stickings.
pub fn structure(max_ops: usize) -> impl Strategy<Value = TemporalStructure> {
    ops(max_ops).prop_map(|o| build(&o, true))
}

/// Temporal trees: divisions only.
pub fn tree(max_ops: usize) -> impl Strategy<Value = TemporalStructure> {
    ops(max_ops).prop_map(|o| build(&o, false))
}
