//! Chronological preorder, inseparable pairs and the Hausdorff quotient.
//!
//! On an identification-free structure two points compare by coordinate
//! alone, so distinct copies of one coordinate are mutually `<=` without
//! being equal: the relation is a preorder and never a partial order once a
//! segment has been split. With an identification the relation is not even a
//! preorder and every query here that depends on it refuses.
//!
//! Inseparability is read off the presentation: the only pairs of points
//! without disjoint neighbourhoods are the copies of a node coordinate owned
//! by the copied side of that node.

use crate::timeline::{SegmentId, TemporalStructure, TimePoint};
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum OrderError {
    ChronologyViolating,
    InvalidPoint(TimePoint),
}

impl fmt::Display for OrderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderError::ChronologyViolating => {
                f.write_str("chronology-violating: relation is not a preorder")
            }
            OrderError::InvalidPoint(p) => write!(f, "t={} is not a point of segment {}", p.t, p.segment),
        }
    }
}

impl core::error::Error for OrderError {}

fn require_chronological(s: &TemporalStructure) -> Result<(), OrderError> {
    if s.identifications().is_empty() {
        Ok(())
    } else {
        Err(OrderError::ChronologyViolating)
    }
}

/// `p` is not later than `q`.
pub fn chron_leq(s: &TemporalStructure, p: TimePoint, q: TimePoint) -> Result<bool, OrderError> {
    require_chronological(s)?;
    for x in [p, q] {
        if !s.is_valid_point(x) {
            return Err(OrderError::InvalidPoint(x));
        }
    }
    Ok(p.t <= q.t)
}

/// Whether `p` and `q` name the same point, taking merged nodes into
/// account.
pub fn same_point(s: &TemporalStructure, p: TimePoint, q: TimePoint) -> bool {
    if p == q {
        return true;
    }
    p.t == q.t
        && s.nodes().iter().any(|n| {
            n.merged && n.t == p.t && n.copies().contains(&p.segment) && n.copies().contains(&q.segment)
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChronRelationReport {
    pub is_preorder: bool,
    pub is_partial_order: bool,
    /// Two distinct points each `<=` the other. Present exactly when the
    /// relation is a preorder but not a partial order.
    pub witness_pair: Option<(TimePoint, TimePoint)>,
    pub chronology_violating: bool,
}

/// A coordinate where segments `a` and `b` carry distinct points, if any.
fn distinct_overlap(s: &TemporalStructure, a: SegmentId, b: SegmentId) -> Option<f64> {
    let (sa, sb) = (s.segment(a)?, s.segment(b)?);
    let lo = sa.lo.max(sb.lo);
    let hi = sa.hi.min(sb.hi);
    if sa.contains(lo) && sb.contains(lo) && !same_point(s, TimePoint::new(a, lo), TimePoint::new(b, lo)) {
        return Some(lo);
    }
    (lo < hi).then(|| lo + (hi - lo) / 2.0)
}

pub fn relation_report(s: &TemporalStructure) -> ChronRelationReport {
    if !s.identifications().is_empty() {
        return ChronRelationReport {
            is_preorder: false,
            is_partial_order: false,
            witness_pair: None,
            chronology_violating: true,
        };
    }
    let segs = s.segments();
    let witness_pair = segs.iter().enumerate().find_map(|(i, a)| {
        segs[i + 1..].iter().find_map(|b| {
            distinct_overlap(s, a.id, b.id).map(|t| (TimePoint::new(a.id, t), TimePoint::new(b.id, t)))
        })
    });
    ChronRelationReport {
        is_preorder: true,
        is_partial_order: witness_pair.is_none(),
        witness_pair,
        chronology_violating: false,
    }
}

/// Maximal coordinate interval over which the same set of segments carries
/// mutually `<=`-equivalent but distinct points.
#[derive(Debug, Clone, PartialEq)]
pub struct CopyFamily {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    /// One representative segment per distinct point, ascending.
    pub members: Vec<SegmentId>,
}

impl CopyFamily {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Nontrivial equivalence classes of the chronological preorder, grouped
/// into interval families. Singleton classes are not listed.
pub fn chron_equiv_classes(s: &TemporalStructure) -> Result<Vec<CopyFamily>, OrderError> {
    require_chronological(s)?;
    let mut cuts: Vec<f64> = s.segments().iter().flat_map(|g| [g.lo, g.hi]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    // Elementary pieces alternate point, gap, point, ..., point.
    let mut pieces: Vec<(f64, f64, Vec<SegmentId>)> = Vec::new();
    for (i, &c) in cuts.iter().enumerate() {
        let mut members: Vec<SegmentId> = Vec::new();
        for g in s.segments().iter().filter(|g| g.contains(c)) {
            if !members.iter().any(|m| same_point(s, TimePoint::new(*m, c), TimePoint::new(g.id, c))) {
                members.push(g.id);
            }
        }
        pieces.push((c, c, members));
        if let Some(&next) = cuts.get(i + 1) {
            let members = s
                .segments()
                .iter()
                .filter(|g| g.lo <= c && next <= g.hi)
                .map(|g| g.id)
                .collect();
            pieces.push((c, next, members));
        }
    }

    let mut families: Vec<CopyFamily> = Vec::new();
    let mut open: Option<CopyFamily> = None;
    for (lo, hi, members) in pieces {
        let point = lo == hi;
        match &mut open {
            Some(f) if f.members == members => {
                f.hi = hi;
                f.hi_closed = point;
            }
            _ => {
                if let Some(f) = open.take() {
                    families.push(f);
                }
                open = Some(CopyFamily {
                    lo,
                    hi,
                    lo_closed: point,
                    hi_closed: point,
                    members,
                });
            }
        }
    }
    families.extend(open);
    families.retain(|f| f.size() >= 2);
    Ok(families)
}

/// All unordered pairs of distinct inseparable points, sorted.
pub fn hausdorff_pairs(s: &TemporalStructure) -> Vec<(TimePoint, TimePoint)> {
    let mut pairs: Vec<(TimePoint, TimePoint)> = Vec::new();
    for n in s.nodes().iter().filter(|n| !n.merged) {
        let copies = n.copies();
        for (i, a) in copies.iter().enumerate() {
            for b in &copies[i + 1..] {
                let (a, b) = if a < b { (*a, *b) } else { (*b, *a) };
                pairs.push((TimePoint::new(a, n.t), TimePoint::new(b, n.t)));
            }
        }
    }
    pairs.sort_by(|x, y| {
        (x.0.segment, x.1.segment)
            .cmp(&(y.0.segment, y.1.segment))
            .then(x.0.t.total_cmp(&y.0.t))
    });
    pairs.dedup();
    pairs
}

pub fn is_hausdorff(s: &TemporalStructure) -> bool {
    hausdorff_pairs(s).is_empty()
}

/// Merges every family of boundary copies into one shared point, the
/// smallest gluing that restores separation. Segment count is unchanged.
pub fn mccabe_quotient(s: &TemporalStructure) -> Result<TemporalStructure, OrderError> {
    require_chronological(s)?;
    Ok(s.with_all_nodes_merged())
}
