//! Finite presentations of branched time lines.
//!
//! A [`TemporalStructure`] starts as a single segment covering a finite
//! [`Horizon`] and is refined by splitting segments at node events:
//!
//! * a *division* at `t` cuts a segment into one incoming piece, open at
//!   `t`, and `b` outgoing copies that each own a closed copy of `t`;
//! * a *sticking* at `t` is the time reverse: `b` incoming copies closed at
//!   `t` merge into one outgoing piece open at `t`;
//! * a *point split* replaces the single instant `t` by `b` degenerate
//!   one-point segments, encoded as a division immediately followed by a
//!   sticking at the same coordinate.
//!
//! Identifications glue a late point on an output edge (no later node) to an
//! earlier point on an input edge (no earlier node), closing a loop in time.
//!
//! # Branch paths
//!
//! Segments are addressed by branch paths, read off a breadth-first walk from
//! the root segment. Each node crossed contributes the index of the segment
//! entered there: `k` for copy `k`, `0` for the single side, negated when the
//! node sits at the earlier end of the segment being left. After one
//! division of the line at `0` the root `[]` is the incoming piece and the
//! copies are `[1]` and `[2]`; a sticking of the line at `0` instead keeps
//! the outgoing piece as root with incoming copies `[-1]` and `[-2]`. A
//! further division on the first copy of a division yields `[1]` (its
//! incoming piece), `[1,1]` and `[1,2]`.
//!
//! Every segment except the root is labelled through the node it was reached
//! by, and the root is the single side of both its nodes, so paths are
//! unique.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegmentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IdentId(pub u32);

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for IdentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "i{}", self.0)
    }
}

/// Finite simulation window standing in for the unbounded real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub t_min: f64,
    pub t_max: f64,
}

impl Horizon {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self, BuildError> {
        if t_min.is_finite() && t_max.is_finite() && t_min < t_max {
            Ok(Horizon { t_min, t_max })
        } else {
            Err(BuildError::InvalidHorizon { t_min, t_max })
        }
    }

    pub fn contains_strictly(&self, t: f64) -> bool {
        self.t_min < t && t < self.t_max
    }
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon {
            t_min: -10.0,
            t_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Division,
    Sticking,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Division => "division",
            NodeKind::Sticking => "sticking",
        }
    }
}

/// One step of a branch path: the node crossed and the signed index of the
/// segment entered there (`0` for the single side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathStep {
    pub node: NodeId,
    pub branch: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: SegmentId,
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    /// Node at `lo`, if any. `None` means the segment starts on the horizon.
    pub start: Option<NodeId>,
    /// Node at `hi`, if any. `None` means the segment runs to the horizon.
    pub end: Option<NodeId>,
    pub branch_path: Vec<PathStep>,
}

impl Segment {
    pub fn contains(&self, t: f64) -> bool {
        (self.lo < t && t < self.hi)
            || (t == self.lo && self.lo_closed)
            || (t == self.hi && self.hi_closed)
    }

    pub fn contains_strictly(&self, t: f64) -> bool {
        self.lo < t && t < self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn branch_indices(&self) -> Vec<i32> {
        self.branch_path.iter().map(|s| s.branch).collect()
    }

    /// Writes the interval with its bracket style, e.g. `[0,10]` or `[-10,0)`.
    pub fn interval(&self) -> Interval {
        Interval {
            lo: self.lo,
            hi: self.hi,
            lo_closed: self.lo_closed,
            hi_closed: self.hi_closed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{},{}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeEvent {
    pub id: NodeId,
    pub kind: NodeKind,
    pub t: f64,
    pub in_segments: Vec<SegmentId>,
    pub out_segments: Vec<SegmentId>,
    /// Set by the McCabe quotient: the boundary copies owned by this node's
    /// copied side are one shared point.
    pub merged: bool,
}

impl NodeEvent {
    pub fn branches(&self) -> usize {
        self.copies().len()
    }

    /// Segments on the copied side, in branch order.
    pub fn copies(&self) -> &[SegmentId] {
        match self.kind {
            NodeKind::Division => &self.out_segments,
            NodeKind::Sticking => &self.in_segments,
        }
    }

    /// The segment on the single side.
    pub fn single(&self) -> Option<SegmentId> {
        match self.kind {
            NodeKind::Division => self.in_segments.first().copied(),
            NodeKind::Sticking => self.out_segments.first().copied(),
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = SegmentId> + '_ {
        self.in_segments.iter().chain(self.out_segments.iter()).copied()
    }

    /// Branch index of `seg` at this node: `1..=b` on the copied side, `0`
    /// on the single side.
    pub fn branch_index(&self, seg: SegmentId) -> Option<u32> {
        if let Some(pos) = self.copies().iter().position(|s| *s == seg) {
            return Some(pos as u32 + 1);
        }
        (self.single() == Some(seg)).then_some(0)
    }
}

/// A point of the branched time line. Equal coordinates on different
/// segments are different points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePoint {
    pub segment: SegmentId,
    pub t: f64,
}

impl TimePoint {
    pub fn new(segment: SegmentId, t: f64) -> Self {
        TimePoint { segment, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Identification {
    pub id: IdentId,
    /// Late point `t_B` on an output edge.
    pub from: TimePoint,
    /// Early point `t_A` on an input edge.
    pub to: TimePoint,
    /// `t_B - t_A`, always positive.
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuildError {
    InvalidHorizon { t_min: f64, t_max: f64 },
    UnknownSegment(SegmentId),
    UnknownNode(NodeId),
    UnknownPath(Vec<i32>),
    TooFewBranches(u32),
    InvalidCarry { carry: u32, branches: u32 },
    AtExistingNode { t: f64 },
    OutsideSegment { segment: SegmentId, t: f64 },
    NonPositivePeriod { period: f64 },
    NotInputEdge(SegmentId),
    NotOutputEdge(SegmentId),
    PointReused { t: f64 },
    NoLoop,
    InvalidPermutation,
}

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildError::InvalidHorizon { t_min, t_max } => {
                write!(f, "invalid horizon ({}, {}): need finite t_min < t_max", t_min, t_max)
            }
            BuildError::UnknownSegment(s) => write!(f, "unknown segment {}", s),
            BuildError::UnknownNode(n) => write!(f, "unknown node {}", n),
            BuildError::UnknownPath(p) => write!(f, "no segment at branch path {:?}", p),
            BuildError::TooFewBranches(b) => write!(f, "need at least 2 branches, got {}", b),
            BuildError::InvalidCarry { carry, branches } => {
                write!(f, "carry branch {} outside 1..={}", carry, branches)
            }
            BuildError::AtExistingNode { t } => write!(f, "t={} is already a node coordinate", t),
            BuildError::OutsideSegment { segment, t } => {
                write!(f, "t={} is not inside segment {}", t, segment)
            }
            BuildError::NonPositivePeriod { period } => {
                write!(f, "identification period {} is not positive", period)
            }
            BuildError::NotInputEdge(s) => {
                write!(f, "segment {} has an earlier node; identification target must be an input edge", s)
            }
            BuildError::NotOutputEdge(s) => {
                write!(f, "segment {} has a later node; identification source must be an output edge", s)
            }
            BuildError::PointReused { t } => {
                write!(f, "point at t={} is already used by an identification", t)
            }
            BuildError::NoLoop => {
                write!(f, "identification target does not reach its source; no loop would form")
            }
            BuildError::InvalidPermutation => write!(f, "not a permutation of the node's branches"),
        }
    }
}

impl core::error::Error for BuildError {}

/// Finite presentation of a branched time line. Build operations return new
/// values and leave `self` untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalStructure {
    horizon: Horizon,
    segments: Vec<Segment>,
    nodes: Vec<NodeEvent>,
    identifications: Vec<Identification>,
    root: SegmentId,
}

/// The unsplit line over `horizon`.
pub fn line(horizon: Horizon) -> Result<TemporalStructure, BuildError> {
    let horizon = Horizon::new(horizon.t_min, horizon.t_max)?;
    Ok(TemporalStructure {
        horizon,
        segments: vec![Segment {
            id: SegmentId(0),
            lo: horizon.t_min,
            hi: horizon.t_max,
            lo_closed: true,
            hi_closed: true,
            start: None,
            end: None,
            branch_path: Vec::new(),
        }],
        nodes: Vec::new(),
        identifications: Vec::new(),
        root: SegmentId(0),
    })
}

impl TemporalStructure {
    /// Assembles a structure from raw parts without any checking. Intended
    /// for deserializers and for exercising [`validate`] on malformed input.
    pub fn from_parts(
        horizon: Horizon,
        segments: Vec<Segment>,
        nodes: Vec<NodeEvent>,
        identifications: Vec<Identification>,
        root: SegmentId,
    ) -> Self {
        TemporalStructure {
            horizon,
            segments,
            nodes,
            identifications,
            root,
        }
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn nodes(&self) -> &[NodeEvent] {
        &self.nodes
    }

    pub fn identifications(&self) -> &[Identification] {
        &self.identifications
    }

    pub fn root(&self) -> SegmentId {
        self.root
    }

    pub fn segment(&self, id: SegmentId) -> Option<&Segment> {
        self.segments.get(id.0 as usize).filter(|s| s.id == id)
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeEvent> {
        self.nodes.get(id.0 as usize).filter(|n| n.id == id)
    }

    fn seg_mut(&mut self, id: SegmentId) -> &mut Segment {
        &mut self.segments[id.0 as usize]
    }

    fn node_mut(&mut self, id: NodeId) -> &mut NodeEvent {
        &mut self.nodes[id.0 as usize]
    }

    pub fn segment_at_path(&self, path: &[i32]) -> Result<SegmentId, BuildError> {
        self.segments
            .iter()
            .find(|s| s.branch_path.len() == path.len() && s.branch_path.iter().zip(path).all(|(a, b)| a.branch == *b))
            .map(|s| s.id)
            .ok_or_else(|| BuildError::UnknownPath(path.to_vec()))
    }

    /// Resolves a branch path and coordinate to a point, honouring endpoint
    /// closedness.
    pub fn locate(&self, path: &[i32], t: f64) -> Result<TimePoint, BuildError> {
        let id = self.segment_at_path(path)?;
        self.point(id, t)
    }

    pub fn point(&self, segment: SegmentId, t: f64) -> Result<TimePoint, BuildError> {
        let seg = self.segment(segment).ok_or(BuildError::UnknownSegment(segment))?;
        if seg.contains(t) {
            Ok(TimePoint { segment, t })
        } else {
            Err(BuildError::OutsideSegment { segment, t })
        }
    }

    pub fn is_valid_point(&self, p: TimePoint) -> bool {
        self.segment(p.segment).is_some_and(|s| s.contains(p.t))
    }

    pub fn division_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Division).count()
    }

    pub fn sticking_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Sticking).count()
    }

    /// Segments whose `hi` end meets the `lo` end of the other through a node.
    pub fn successors(&self, id: SegmentId) -> Vec<SegmentId> {
        match self.segment(id).and_then(|s| s.end) {
            Some(n) => self.nodes[n.0 as usize].out_segments.clone(),
            None => Vec::new(),
        }
    }

    /// Segments adjacent to `id` through either of its end nodes.
    pub fn neighbours(&self, id: SegmentId) -> Vec<(NodeId, SegmentId)> {
        let mut out = Vec::new();
        if let Some(seg) = self.segment(id) {
            for n in [seg.start, seg.end].into_iter().flatten() {
                for other in self.nodes[n.0 as usize].segments() {
                    if other != id {
                        out.push((n, other));
                    }
                }
            }
        }
        out
    }

    /// Whether a directed path of segments leads from `a` to `b`
    /// (identifications not followed). Every segment reaches itself.
    pub fn reaches(&self, a: SegmentId, b: SegmentId) -> bool {
        let mut seen = vec![false; self.segments.len()];
        let mut stack = vec![a];
        while let Some(s) = stack.pop() {
            if s == b {
                return true;
            }
            if core::mem::replace(&mut seen[s.0 as usize], true) {
                continue;
            }
            stack.extend(self.successors(s));
        }
        false
    }

    /// Recomputes every segment's branch path by breadth-first search from
    /// the root.
    fn relabel(&mut self) {
        let mut paths: Vec<Option<Vec<PathStep>>> = vec![None; self.segments.len()];
        paths[self.root.0 as usize] = Some(Vec::new());
        let mut queue = VecDeque::from([self.root]);
        while let Some(id) = queue.pop_front() {
            let base = paths[id.0 as usize].clone().unwrap_or_default();
            let mut adjacent = self.neighbours(id);
            adjacent.sort_by_key(|(n, s)| (*n, self.nodes[n.0 as usize].branch_index(*s)));
            for (n, other) in adjacent {
                if paths[other.0 as usize].is_some() {
                    continue;
                }
                let index = self.nodes[n.0 as usize].branch_index(other).unwrap_or(0) as i32;
                let forward = self.segments[id.0 as usize].end == Some(n);
                let branch = if forward { index } else { -index };
                let mut p = base.clone();
                p.push(PathStep { node: n, branch });
                paths[other.0 as usize] = Some(p);
                queue.push_back(other);
            }
        }
        for (seg, p) in self.segments.iter_mut().zip(paths) {
            seg.branch_path = p.unwrap_or_default();
        }
    }

    fn check_split(&self, seg: SegmentId, t: f64, b: u32, carry: u32) -> Result<(), BuildError> {
        if b < 2 {
            return Err(BuildError::TooFewBranches(b));
        }
        if carry < 1 || carry > b {
            return Err(BuildError::InvalidCarry { carry, branches: b });
        }
        let s = self.segment(seg).ok_or(BuildError::UnknownSegment(seg))?;
        if (t == s.lo && s.start.is_some()) || (t == s.hi && s.end.is_some()) {
            return Err(BuildError::AtExistingNode { t });
        }
        if !s.contains_strictly(t) {
            return Err(BuildError::OutsideSegment { segment: seg, t });
        }
        Ok(())
    }

    fn push_segment(&mut self, mut seg: Segment) -> SegmentId {
        let id = SegmentId(self.segments.len() as u32);
        seg.id = id;
        self.segments.push(seg);
        id
    }

    fn push_node(&mut self, kind: NodeKind, t: f64) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeEvent {
            id,
            kind,
            t,
            in_segments: Vec::new(),
            out_segments: Vec::new(),
            merged: false,
        });
        id
    }

    fn replace_in_node(&mut self, node: NodeId, old: SegmentId, new: SegmentId) {
        let n = self.node_mut(node);
        for s in n.in_segments.iter_mut().chain(n.out_segments.iter_mut()) {
            if *s == old {
                *s = new;
            }
        }
    }

    /// Time-division of `seg` at `t` into `b` futures; existing structure
    /// after `seg` continues on branch 1.
    pub fn split_division(&self, seg: SegmentId, t: f64, b: u32) -> Result<Self, BuildError> {
        self.split(NodeKind::Division, seg, t, b, 1)
    }

    /// Time-sticking of `seg` at `t`: `b` pasts merging into one future;
    /// existing structure before `seg` is kept on incoming branch 1.
    pub fn split_sticking(&self, seg: SegmentId, t: f64, b: u32) -> Result<Self, BuildError> {
        self.split(NodeKind::Sticking, seg, t, b, 1)
    }

    /// General split. `carry` (1-based) names the copy that inherits the
    /// structure previously attached to the copied side of `seg`; the other
    /// copies run plain to the horizon.
    pub fn split(
        &self,
        kind: NodeKind,
        seg: SegmentId,
        t: f64,
        b: u32,
        carry: u32,
    ) -> Result<Self, BuildError> {
        self.check_split(seg, t, b, carry)?;
        let mut s = self.clone();
        let node = s.push_node(kind, t);
        let old = s.segment(seg).cloned().ok_or(BuildError::UnknownSegment(seg))?;
        let horizon = s.horizon;
        let mut copies = Vec::with_capacity(b as usize);
        match kind {
            NodeKind::Division => {
                {
                    let inc = s.seg_mut(seg);
                    inc.hi = t;
                    inc.hi_closed = false;
                    inc.end = Some(node);
                }
                for k in 1..=b {
                    let carried = k == carry;
                    let id = s.push_segment(Segment {
                        id: SegmentId(0),
                        lo: t,
                        hi: if carried { old.hi } else { horizon.t_max },
                        lo_closed: true,
                        hi_closed: if carried { old.hi_closed } else { true },
                        start: Some(node),
                        end: if carried { old.end } else { None },
                        branch_path: Vec::new(),
                    });
                    if let (true, Some(end)) = (carried, old.end) {
                        s.replace_in_node(end, seg, id);
                    }
                    copies.push(id);
                }
                let n = s.node_mut(node);
                n.in_segments = vec![seg];
                n.out_segments = copies;
            }
            NodeKind::Sticking => {
                {
                    let out = s.seg_mut(seg);
                    out.lo = t;
                    out.lo_closed = false;
                    out.start = Some(node);
                }
                for k in 1..=b {
                    let carried = k == carry;
                    let id = s.push_segment(Segment {
                        id: SegmentId(0),
                        lo: if carried { old.lo } else { horizon.t_min },
                        hi: t,
                        lo_closed: if carried { old.lo_closed } else { true },
                        hi_closed: true,
                        start: if carried { old.start } else { None },
                        end: Some(node),
                        branch_path: Vec::new(),
                    });
                    if let (true, Some(start)) = (carried, old.start) {
                        s.replace_in_node(start, seg, id);
                    }
                    copies.push(id);
                }
                let n = s.node_mut(node);
                n.in_segments = copies;
                n.out_segments = vec![seg];
            }
        }
        s.relabel();
        Ok(s)
    }

    /// Replaces the instant `t` of `seg` by `b` distinct one-point copies
    /// (the splitting through a single point). Encoded as a division and a
    /// sticking at the same coordinate joined by degenerate segments.
    pub fn split_point(&self, seg: SegmentId, t: f64, b: u32) -> Result<Self, BuildError> {
        self.check_split(seg, t, b, 1)?;
        let mut s = self.clone();
        let old = s.segment(seg).cloned().ok_or(BuildError::UnknownSegment(seg))?;
        let div = s.push_node(NodeKind::Division, t);
        let stick = s.push_node(NodeKind::Sticking, t);
        {
            let lo_piece = s.seg_mut(seg);
            lo_piece.hi = t;
            lo_piece.hi_closed = false;
            lo_piece.end = Some(div);
        }
        let hi_piece = s.push_segment(Segment {
            id: SegmentId(0),
            lo: t,
            hi: old.hi,
            lo_closed: false,
            hi_closed: old.hi_closed,
            start: Some(stick),
            end: old.end,
            branch_path: Vec::new(),
        });
        if let Some(end) = old.end {
            s.replace_in_node(end, seg, hi_piece);
        }
        let mut points = Vec::with_capacity(b as usize);
        for _ in 0..b {
            points.push(s.push_segment(Segment {
                id: SegmentId(0),
                lo: t,
                hi: t,
                lo_closed: true,
                hi_closed: true,
                start: Some(div),
                end: Some(stick),
                branch_path: Vec::new(),
            }));
        }
        {
            let n = s.node_mut(div);
            n.in_segments = vec![seg];
            n.out_segments = points.clone();
        }
        {
            let n = s.node_mut(stick);
            n.in_segments = points;
            n.out_segments = vec![hi_piece];
        }
        s.relabel();
        Ok(s)
    }

    /// Glues the late point `from` (on an output edge) to the earlier point
    /// `to` (on an input edge).
    pub fn identify(&self, from: TimePoint, to: TimePoint) -> Result<Self, BuildError> {
        let period = from.t - to.t;
        if period.is_nan() || period <= 0.0 {
            return Err(BuildError::NonPositivePeriod { period });
        }
        let from_seg = self.segment(from.segment).ok_or(BuildError::UnknownSegment(from.segment))?;
        let to_seg = self.segment(to.segment).ok_or(BuildError::UnknownSegment(to.segment))?;
        if from_seg.end.is_some() {
            return Err(BuildError::NotOutputEdge(from.segment));
        }
        if to_seg.start.is_some() {
            return Err(BuildError::NotInputEdge(to.segment));
        }
        if !from_seg.contains_strictly(from.t) {
            return Err(BuildError::OutsideSegment { segment: from.segment, t: from.t });
        }
        if !to_seg.contains_strictly(to.t) {
            return Err(BuildError::OutsideSegment { segment: to.segment, t: to.t });
        }
        for ident in &self.identifications {
            for p in [from, to] {
                if ident.from == p || ident.to == p {
                    return Err(BuildError::PointReused { t: p.t });
                }
            }
        }
        if !self.reaches(to.segment, from.segment) {
            return Err(BuildError::NoLoop);
        }
        let mut s = self.clone();
        let id = IdentId(s.identifications.len() as u32);
        s.identifications.push(Identification { id, from, to, period });
        Ok(s)
    }

    /// Reorders the copied side of `node`: new branch `k` is old branch
    /// `perm[k-1]` (1-based values).
    pub fn permute_branches(&self, node: NodeId, perm: &[u32]) -> Result<Self, BuildError> {
        let n = self.node(node).ok_or(BuildError::UnknownNode(node))?;
        let b = n.branches();
        let mut seen = vec![false; b];
        if perm.len() != b {
            return Err(BuildError::InvalidPermutation);
        }
        for &p in perm {
            let i = (p as usize).wrapping_sub(1);
            if i >= b || core::mem::replace(&mut seen[i], true) {
                return Err(BuildError::InvalidPermutation);
            }
        }
        let old = n.copies().to_vec();
        let reordered: Vec<SegmentId> = perm.iter().map(|&p| old[p as usize - 1]).collect();
        let mut s = self.clone();
        let n = s.node_mut(node);
        match n.kind {
            NodeKind::Division => n.out_segments = reordered,
            NodeKind::Sticking => n.in_segments = reordered,
        }
        s.relabel();
        Ok(s)
    }

    pub(crate) fn with_all_nodes_merged(&self) -> Self {
        let mut s = self.clone();
        for n in &mut s.nodes {
            n.merged = true;
        }
        s
    }

    /// Segment ids in topological order of the segment digraph (ties broken
    /// by id). Segments on a directed cycle are appended in id order.
    pub fn topological_order(&self) -> Vec<SegmentId> {
        let count = self.segments.len();
        let mut indegree = vec![0usize; count];
        for s in &self.segments {
            for succ in self.successors(s.id) {
                indegree[succ.0 as usize] += 1;
            }
        }
        let mut ready: alloc::collections::BTreeSet<SegmentId> = self
            .segments
            .iter()
            .filter(|s| indegree[s.id.0 as usize] == 0)
            .map(|s| s.id)
            .collect();
        let mut order = Vec::with_capacity(count);
        let mut placed = vec![false; count];
        while let Some(id) = ready.pop_first() {
            order.push(id);
            placed[id.0 as usize] = true;
            for succ in self.successors(id) {
                let d = &mut indegree[succ.0 as usize];
                *d -= 1;
                if *d == 0 {
                    ready.insert(succ);
                }
            }
        }
        order.extend(self.segments.iter().filter(|s| !placed[s.id.0 as usize]).map(|s| s.id));
        order
    }
}

/// One directed edge per segment. Endpoints are `None` where the segment
/// runs into the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub segment: SegmentId,
    pub from: Option<NodeId>,
    pub to: Option<NodeId>,
    pub interval: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphVertex {
    pub node: NodeId,
    pub t: f64,
    pub kind: NodeKind,
}

/// Record that the edge containing `from` is identified with the edge
/// containing `to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeIdentification {
    pub ident: IdentId,
    pub from_edge: SegmentId,
    pub to_edge: SegmentId,
    pub period: f64,
}

/// The oriented graph of a structure: vertices are node events, edges are
/// segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    pub vertices: Vec<GraphVertex>,
    pub edges: Vec<GraphEdge>,
    pub identifications: Vec<EdgeIdentification>,
}

impl Digraph {
    pub fn in_degree(&self, node: NodeId) -> usize {
        self.edges.iter().filter(|e| e.to == Some(node)).count()
    }

    pub fn out_degree(&self, node: NodeId) -> usize {
        self.edges.iter().filter(|e| e.from == Some(node)).count()
    }

    fn edge_successors(&self, with_identifications: bool) -> Vec<Vec<usize>> {
        let index = |seg: SegmentId| self.edges.iter().position(|e| e.segment == seg);
        let mut succ = vec![Vec::new(); self.edges.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if let Some(n) = e.to {
                for (j, f) in self.edges.iter().enumerate() {
                    if f.from == Some(n) {
                        succ[i].push(j);
                    }
                }
            }
        }
        if with_identifications {
            for ident in &self.identifications {
                if let (Some(a), Some(b)) = (index(ident.from_edge), index(ident.to_edge)) {
                    succ[a].push(b);
                }
            }
        }
        succ
    }

    fn has_cycle(&self, with_identifications: bool) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        let succ = self.edge_successors(with_identifications);
        let mut state = vec![0u8; succ.len()];
        for start in 0..succ.len() {
            if state[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            state[start] = 1;
            while let Some((v, i)) = stack.pop() {
                if i < succ[v].len() {
                    stack.push((v, i + 1));
                    let w = succ[v][i];
                    match state[w] {
                        0 => {
                            state[w] = 1;
                            stack.push((w, 0));
                        }
                        1 => return true,
                        _ => {}
                    }
                } else {
                    state[v] = 2;
                }
            }
        }
        false
    }

    /// Acyclic when identification edges are ignored.
    pub fn is_acyclic(&self) -> bool {
        !self.has_cycle(false)
    }

    /// Directed cycle once identification edges are included.
    pub fn has_chronology_violation(&self) -> bool {
        self.has_cycle(true)
    }

    /// Number of directed edge paths from `a` to `b` ignoring
    /// identifications. Only meaningful on acyclic graphs.
    pub fn count_paths(&self, a: SegmentId, b: SegmentId) -> usize {
        let succ = self.edge_successors(false);
        let idx = |s: SegmentId| self.edges.iter().position(|e| e.segment == s);
        let (Some(a), Some(b)) = (idx(a), idx(b)) else {
            return 0;
        };
        let mut memo: Vec<Option<usize>> = vec![None; succ.len()];
        fn walk(v: usize, b: usize, succ: &[Vec<usize>], memo: &mut [Option<usize>]) -> usize {
            if v == b {
                return 1;
            }
            if let Some(c) = memo[v] {
                return c;
            }
            let c = succ[v].iter().map(|&w| walk(w, b, succ, memo)).sum();
            memo[v] = Some(c);
            c
        }
        walk(a, b, &succ, &mut memo)
    }

    /// Undirected connectivity together with `edges = vertices + dangling
    /// ends - 1` style tree shape: every vertex-to-vertex connection is
    /// unique.
    pub fn is_tree(&self) -> bool {
        // Treat every dangling end as its own leaf vertex.
        let v = self.vertices.len();
        let dangling = self.edges.iter().map(|e| e.from.is_none() as usize + e.to.is_none() as usize).sum::<usize>();
        let total_vertices = v + dangling;
        if self.edges.len() + 1 != total_vertices {
            return false;
        }
        let mut parent: Vec<usize> = (0..total_vertices).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let pos = |n: NodeId| self.vertices.iter().position(|g| g.node == n).unwrap_or(0);
        let mut next_leaf = v;
        for e in &self.edges {
            let a = match e.from {
                Some(n) => pos(n),
                None => {
                    next_leaf += 1;
                    next_leaf - 1
                }
            };
            let b = match e.to {
                Some(n) => pos(n),
                None => {
                    next_leaf += 1;
                    next_leaf - 1
                }
            };
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }
}

pub fn graph_of(s: &TemporalStructure) -> Digraph {
    Digraph {
        vertices: s
            .nodes
            .iter()
            .map(|n| GraphVertex {
                node: n.id,
                t: n.t,
                kind: n.kind,
            })
            .collect(),
        edges: s
            .segments
            .iter()
            .map(|seg| GraphEdge {
                segment: seg.id,
                from: seg.start,
                to: seg.end,
                interval: seg.interval(),
            })
            .collect(),
        identifications: s
            .identifications
            .iter()
            .map(|i| EdgeIdentification {
                ident: i.id,
                from_edge: i.from.segment,
                to_edge: i.to.segment,
                period: i.period,
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub ok: bool,
    /// First offending item, empty when the check passes.
    pub detail: alloc::string::String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub chronology_violating: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.ok)
    }
}

struct Checker {
    checks: Vec<Check>,
}

impl Checker {
    fn record(&mut self, name: &'static str, failure: Option<alloc::string::String>) {
        self.checks.push(Check {
            name,
            ok: failure.is_none(),
            detail: failure.unwrap_or_default(),
        });
    }
}

/// Checks every structural invariant. Never fails; problems are reported.
pub fn validate(s: &TemporalStructure) -> ValidationReport {
    use alloc::format;
    let mut c = Checker { checks: Vec::new() };
    let h = s.horizon;

    c.record(
        "horizon",
        (!(h.t_min.is_finite() && h.t_max.is_finite() && h.t_min < h.t_max))
            .then(|| format!("({}, {})", h.t_min, h.t_max)),
    );

    let ids_ok = s.segments.iter().enumerate().all(|(i, seg)| seg.id.0 as usize == i)
        && s.nodes.iter().enumerate().all(|(i, n)| n.id.0 as usize == i)
        && s.segment(s.root).is_some();
    c.record("ids", (!ids_ok).then(|| "segment/node ids must be dense and the root must exist".into()));
    if !ids_ok {
        return ValidationReport {
            checks: c.checks,
            chronology_violating: false,
        };
    }

    let intervals = s.segments.iter().find_map(|seg| {
        let ok = seg.lo.is_finite()
            && seg.hi.is_finite()
            && (seg.lo < seg.hi || (seg.lo == seg.hi && seg.lo_closed && seg.hi_closed))
            && h.t_min <= seg.lo
            && seg.hi <= h.t_max;
        (!ok).then(|| format!("{} {}", seg.id, seg.interval()))
    });
    c.record("segment-intervals", intervals);

    let dangling = s.segments.iter().find_map(|seg| {
        let lo_ok = seg.start.is_some() || (seg.lo == h.t_min && seg.lo_closed);
        let hi_ok = seg.end.is_some() || (seg.hi == h.t_max && seg.hi_closed);
        (!(lo_ok && hi_ok)).then(|| format!("{} {}", seg.id, seg.interval()))
    });
    c.record("horizon-ends", dangling);

    let incidence = s
        .segments
        .iter()
        .find_map(|seg| {
            let start_ok = seg
                .start
                .is_none_or(|n| s.node(n).is_some_and(|n| n.out_segments.contains(&seg.id)));
            let end_ok = seg
                .end
                .is_none_or(|n| s.node(n).is_some_and(|n| n.in_segments.contains(&seg.id)));
            (!(start_ok && end_ok)).then(|| format!("{}", seg.id))
        })
        .or_else(|| {
            s.nodes.iter().find_map(|n| {
                let ins = n.in_segments.iter().all(|id| s.segment(*id).is_some_and(|g| g.end == Some(n.id)));
                let outs = n.out_segments.iter().all(|id| s.segment(*id).is_some_and(|g| g.start == Some(n.id)));
                (!(ins && outs)).then(|| format!("{}", n.id))
            })
        });
    c.record("incidence", incidence);

    let arity = s.nodes.iter().find_map(|n| {
        let ok = match n.kind {
            NodeKind::Division => n.in_segments.len() == 1 && n.out_segments.len() >= 2,
            NodeKind::Sticking => n.out_segments.len() == 1 && n.in_segments.len() >= 2,
        };
        (!ok).then(|| format!("{} ({})", n.id, n.kind.name()))
    });
    c.record("node-arity", arity);

    let node_in_horizon = s
        .nodes
        .iter()
        .find_map(|n| (!h.contains_strictly(n.t)).then(|| format!("{} at t={}", n.id, n.t)));
    c.record("nodes-inside-horizon", node_in_horizon);

    // Each node sits exactly at the end of its incoming and the start of its
    // outgoing segments; with positive segment lengths this makes
    // coordinates strictly increase along directed paths.
    let monotone = s.nodes.iter().find_map(|n| {
        let ins = n.in_segments.iter().all(|id| s.segment(*id).is_some_and(|g| g.hi == n.t));
        let outs = n.out_segments.iter().all(|id| s.segment(*id).is_some_and(|g| g.lo == n.t));
        (!(ins && outs)).then(|| format!("{} at t={}", n.id, n.t))
    });
    c.record("coordinate-monotonicity", monotone);

    let closedness = s.nodes.iter().find_map(|n| {
        let copies_closed = n.copies().iter().all(|id| {
            s.segment(*id).is_some_and(|g| match n.kind {
                NodeKind::Division => g.lo_closed,
                NodeKind::Sticking => g.hi_closed,
            })
        });
        let single_open = n.single().is_some_and(|id| {
            s.segment(id).is_some_and(|g| match n.kind {
                NodeKind::Division => !g.hi_closed,
                NodeKind::Sticking => !g.lo_closed,
            })
        });
        (!(copies_closed && single_open)).then(|| format!("{} ({})", n.id, n.kind.name()))
    });
    c.record("endpoint-closedness", closedness);

    let mut seen = vec![false; s.segments.len()];
    let mut stack = vec![s.root];
    while let Some(id) = stack.pop() {
        if core::mem::replace(&mut seen[id.0 as usize], true) {
            continue;
        }
        stack.extend(s.neighbours(id).into_iter().map(|(_, o)| o));
    }
    c.record(
        "connectivity",
        seen.iter().position(|v| !v).map(|i| format!("{} unreachable from root", SegmentId(i as u32))),
    );

    let graph = graph_of(s);
    c.record("acyclic-without-identifications", (!graph.is_acyclic()).then(|| "directed cycle".into()));

    let idents = s.identifications.iter().find_map(|i| {
        let from = s.segment(i.from.segment);
        let to = s.segment(i.to.segment);
        let ok = i.period > 0.0
            && i.period == i.from.t - i.to.t
            && from.is_some_and(|g| g.end.is_none() && g.contains_strictly(i.from.t))
            && to.is_some_and(|g| g.start.is_none() && g.contains_strictly(i.to.t));
        (!ok).then(|| format!("{}", i.id))
    });
    c.record("identifications", idents);

    ValidationReport {
        checks: c.checks,
        chronology_violating: graph.has_chronology_violation(),
    }
}
