//! Scalar evolution `x' = f(x)` on branched time structures.
//!
//! Every segment's trajectory is the restriction of one *line solution*: the
//! fixed-step RK4 flow of a single anchor `(t0, x0)` extended forward and
//! backward over the whole horizon. A condition seeds an anchor; anchors
//! spread to neighbouring segments through nodes without re-integration, so
//! sibling copies are bitwise identical and any root-to-leaf chain reproduces
//! a plain line integration sample for sample. Where two anchors meet at a
//! node their values at the node coordinate must agree under the tolerance
//! rule `|a - b| <= tol_abs + tol_rel * max(|a|, |b|)`.

use crate::expr::Expr;
use crate::timeline::{
    BuildError, IdentId, Identification, Horizon, NodeId, NodeKind, SegmentId, TemporalStructure, TimePoint,
};
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub step: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub blowup_cap: f64,
    pub max_loop_passes: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: 1e-3,
            tol_abs: 1e-6,
            tol_rel: 1e-9,
            blowup_cap: 1e12,
            max_loop_passes: 4,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<(), ProblemError> {
        let bad = |what| Err(ProblemError::InvalidConfig(what));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive and finite");
        }
        if !(self.tol_abs > 0.0 && self.tol_abs.is_finite()) {
            return bad("tol_abs must be positive and finite");
        }
        if !(self.tol_rel >= 0.0 && self.tol_rel.is_finite()) {
            return bad("tol_rel must be non-negative and finite");
        }
        if self.blowup_cap.is_nan() || self.blowup_cap <= 0.0 {
            return bad("blowup_cap must be positive");
        }
        if self.max_loop_passes == 0 {
            return bad("max_loop_passes must be at least 1");
        }
        Ok(())
    }

    pub fn threshold(&self, a: f64, b: f64) -> f64 {
        self.tol_abs + self.tol_rel * a.abs().max(b.abs())
    }

    pub fn agrees(&self, a: f64, b: f64) -> bool {
        (a - b).abs() <= self.threshold(a, b)
    }

    fn conflict(&self, a: f64, b: f64) -> Option<Conflict> {
        (!self.agrees(a, b)).then(|| Conflict {
            a,
            b,
            gap: (a - b).abs(),
            threshold: self.threshold(a, b),
        })
    }
}

/// The flow left the representable range: `|x|` exceeded the cap or a stage
/// evaluated to a non-finite value. `t`/`x` are the last good sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blowup {
    pub t: f64,
    pub x: f64,
}

impl fmt::Display for Blowup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "solution blows up after t={} (last value {})", self.t, self.x)
    }
}

impl core::error::Error for Blowup {}

fn rk4(f: &Expr, x: f64, dt: f64, cap: f64) -> Option<f64> {
    let k1 = f.eval(x).ok()?;
    let k2 = f.eval(x + dt / 2.0 * k1).ok()?;
    let k3 = f.eval(x + dt / 2.0 * k2).ok()?;
    let k4 = f.eval(x + dt * k3).ok()?;
    let next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    (next.is_finite() && next.abs() <= cap).then_some(next)
}

/// Grid of one direction of a line solution. Index 0 is the anchor.
#[derive(Debug, Clone, PartialEq)]
struct Ray {
    signed_step: f64,
    values: Vec<f64>,
    blowup: Option<Blowup>,
}

impl Ray {
    fn time(&self, t0: f64, k: usize) -> f64 {
        t0 + k as f64 * self.signed_step
    }
}

/// RK4 flow through a single anchor, on a lazily extended grid
/// `t_k = t0 ± k * step`. Off-grid values take one partial step from the
/// last grid point strictly before them.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSolution {
    t0: f64,
    x0: f64,
    step: f64,
    cap: f64,
    forward: Ray,
    backward: Ray,
}

impl LineSolution {
    pub fn new(t0: f64, x0: f64, cfg: &SolverConfig) -> Self {
        let ray = |signed_step| Ray {
            signed_step,
            values: vec![x0],
            blowup: None,
        };
        LineSolution {
            t0,
            x0,
            step: cfg.step,
            cap: cfg.blowup_cap,
            forward: ray(cfg.step),
            backward: ray(-cfg.step),
        }
    }

    pub fn anchor(&self) -> (f64, f64) {
        (self.t0, self.x0)
    }

    fn ray(&self, t: f64) -> &Ray {
        if t >= self.t0 {
            &self.forward
        } else {
            &self.backward
        }
    }

    /// Index of the last grid point strictly before `t` (toward `t0`).
    fn base_index(&self, t: f64) -> usize {
        let n = libm::ceil((t - self.t0).abs() / self.step - 1e-9);
        (n as usize).saturating_sub(1)
    }

    /// Makes `value_at(t)` available.
    pub fn extend_to(&mut self, f: &Expr, t: f64) -> Result<(), Blowup> {
        if t == self.t0 {
            return Ok(());
        }
        let k = self.base_index(t);
        let (t0, cap) = (self.t0, self.cap);
        let ray = if t > t0 { &mut self.forward } else { &mut self.backward };
        while ray.values.len() <= k {
            if let Some(b) = ray.blowup {
                return Err(b);
            }
            let j = ray.values.len() - 1;
            let x = ray.values[j];
            let (tj, tn) = (ray.time(t0, j), ray.time(t0, j + 1));
            match rk4(f, x, tn - tj, cap) {
                Some(next) => ray.values.push(next),
                None => {
                    let b = Blowup { t: tj, x };
                    ray.blowup = Some(b);
                    return Err(b);
                }
            }
        }
        let x = ray.values[k];
        let tk = ray.time(t0, k);
        rk4(f, x, t - tk, cap).map(|_| ()).ok_or(Blowup { t: tk, x })
    }

    /// Value at `t`; `None` when `t` lies beyond the extended grid.
    pub fn value_at(&self, f: &Expr, t: f64) -> Option<f64> {
        if t == self.t0 {
            return Some(self.x0);
        }
        let k = self.base_index(t);
        let ray = self.ray(t);
        let x = *ray.values.get(k)?;
        rk4(f, x, t - ray.time(self.t0, k), self.cap)
    }

    /// Samples on `[lo, hi]`: both endpoints plus every grid point strictly
    /// between them, in increasing time.
    fn samples(&self, f: &Expr, lo: f64, hi: f64) -> Option<Vec<(f64, f64)>> {
        let mut out = vec![(lo, self.value_at(f, lo)?)];
        if hi == lo {
            return Some(out);
        }
        for (k, &x) in self.backward.values.iter().enumerate().skip(1).rev() {
            let t = self.backward.time(self.t0, k);
            if lo < t && t < hi {
                out.push((t, x));
            }
        }
        for (k, &x) in self.forward.values.iter().enumerate() {
            let t = self.forward.time(self.t0, k);
            if lo < t && t < hi {
                out.push((t, x));
            }
        }
        out.push((hi, self.value_at(f, hi)?));
        Some(out)
    }
}

/// RK4 from `(t0, x0)` to `t1` in either direction with a fixed signed step,
/// the last step shortened to land on `t1`. Samples are in integration
/// order and start with `(t0, x0)`.
pub fn integrate_segment(
    f: &Expr,
    t0: f64,
    x0: f64,
    t1: f64,
    cfg: &SolverConfig,
) -> Result<Vec<(f64, f64)>, Blowup> {
    let mut line = LineSolution::new(t0, x0, cfg);
    line.extend_to(f, t1)?;
    if t1 == t0 {
        return Ok(vec![(t0, x0)]);
    }
    let ray = line.ray(t1);
    let n = line.base_index(t1) + 1;
    let mut out: Vec<(f64, f64)> = (0..n).map(|k| (ray.time(t0, k), ray.values[k])).collect();
    let end = line.value_at(f, t1).ok_or(Blowup { t: t0, x: x0 })?;
    out.push((t1, end));
    Ok(out)
}

/// Sampled path on one segment with linear interpolation between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub segment: SegmentId,
    /// Strictly increasing in `t`.
    pub samples: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn start(&self) -> (f64, f64) {
        self.samples[0]
    }

    pub fn end(&self) -> (f64, f64) {
        self.samples[self.samples.len() - 1]
    }

    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let s = &self.samples;
        if t < s[0].0 || t > s[s.len() - 1].0 {
            return None;
        }
        let i = s.partition_point(|(ti, _)| *ti < t);
        if s[i].0 == t {
            return Some(s[i].1);
        }
        let (a, b) = (s[i - 1], s[i]);
        Some(a.1 + (b.1 - a.1) * (t - a.0) / (b.0 - a.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Condition {
    pub point: TimePoint,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyProblem {
    pub f: Expr,
    pub conditions: Vec<Condition>,
}

impl CauchyProblem {
    pub fn new(f: Expr, conditions: impl IntoIterator<Item = (TimePoint, f64)>) -> Self {
        CauchyProblem {
            f,
            conditions: conditions.into_iter().map(|(point, x)| Condition { point, x }).collect(),
        }
    }

    fn check(&self, s: &TemporalStructure) -> Result<(), ProblemError> {
        if self.conditions.is_empty() {
            return Err(ProblemError::NoConditions);
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if !s.is_valid_point(c.point) {
                return Err(ProblemError::InvalidPoint(c.point));
            }
            if !c.x.is_finite() {
                return Err(ProblemError::NonFiniteValue(c.point));
            }
            if self.conditions[..i].iter().any(|d| d.point == c.point) {
                return Err(ProblemError::DuplicatePoint(c.point));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Seeded,
    Forward,
    Retrodicted,
    CopiedToSibling,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Seeded => "seeded",
            Provenance::Forward => "forward",
            Provenance::Retrodicted => "retrodicted",
            Provenance::CopiedToSibling => "copied-to-sibling",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    WellPosed,
    InconsistentInitialConditions,
    StickingMismatch,
    LoopInconsistent,
    Blowup,
    Unreached,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::WellPosed => "WellPosed",
            Status::InconsistentInitialConditions => "InconsistentInitialConditions",
            Status::StickingMismatch => "StickingMismatch",
            Status::LoopInconsistent => "LoopInconsistent",
            Status::Blowup => "Blowup",
            Status::Unreached => "Unreached",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Two values that should coincide. `gap > threshold` always.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conflict {
    pub a: f64,
    pub b: f64,
    pub gap: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detail {
    /// `a` is the single side's value, `b` the copy's.
    Node {
        node: NodeId,
        kind: NodeKind,
        t: f64,
        single: SegmentId,
        copy: SegmentId,
        conflict: Conflict,
    },
    /// Two conditions on one segment; `a` from the earlier condition's flow.
    Conditions {
        first: TimePoint,
        second: TimePoint,
        conflict: Conflict,
    },
    /// `a` at the late point, `b` at the early point.
    Identification {
        ident: IdentId,
        from: TimePoint,
        to: TimePoint,
        conflict: Conflict,
    },
    Blowup {
        segment: Option<SegmentId>,
        at: Blowup,
    },
    Unreached {
        segment: SegmentId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyReport {
    pub status: Status,
    /// Present whenever `status` is not `WellPosed`.
    pub detail: Option<Detail>,
}

impl ConsistencyReport {
    pub const WELL_POSED: ConsistencyReport = ConsistencyReport {
        status: Status::WellPosed,
        detail: None,
    };

    fn new(status: Status, detail: Detail) -> Self {
        ConsistencyReport {
            status,
            detail: Some(detail),
        }
    }

    pub fn conflict(&self) -> Option<Conflict> {
        match self.detail? {
            Detail::Node { conflict, .. }
            | Detail::Conditions { conflict, .. }
            | Detail::Identification { conflict, .. } => Some(conflict),
            Detail::Blowup { .. } | Detail::Unreached { .. } => None,
        }
    }

    pub fn gap(&self) -> Option<f64> {
        self.conflict().map(|c| c.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemError {
    NoConditions,
    InvalidPoint(TimePoint),
    DuplicatePoint(TimePoint),
    NonFiniteValue(TimePoint),
    InvalidConfig(&'static str),
}

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemError::NoConditions => f.write_str("no initial conditions"),
            ProblemError::InvalidPoint(p) => write!(f, "t={} is not a point of segment {}", p.t, p.segment),
            ProblemError::DuplicatePoint(p) => {
                write!(f, "two conditions at t={} on segment {}", p.t, p.segment)
            }
            ProblemError::NonFiniteValue(p) => {
                write!(f, "non-finite condition value at t={} on segment {}", p.t, p.segment)
            }
            ProblemError::InvalidConfig(what) => write!(f, "invalid solver config: {}", what),
        }
    }
}

impl core::error::Error for ProblemError {}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    Problem(ProblemError),
    Report(ConsistencyReport),
}

impl SolveError {
    pub fn report(&self) -> Option<&ConsistencyReport> {
        match self {
            SolveError::Report(r) => Some(r),
            SolveError::Problem(_) => None,
        }
    }

    pub fn status(&self) -> Option<Status> {
        self.report().map(|r| r.status)
    }
}

impl From<ProblemError> for SolveError {
    fn from(e: ProblemError) -> Self {
        SolveError::Problem(e)
    }
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Problem(e) => e.fmt(f),
            SolveError::Report(r) => match r.conflict() {
                Some(c) => write!(f, "{}: gap {} exceeds threshold {}", r.status, c.gap, c.threshold),
                None => write!(f, "{}", r.status),
            },
        }
    }
}

impl core::error::Error for SolveError {}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSolution {
    pub anchor: usize,
    pub provenance: Provenance,
    pub trajectory: Trajectory,
}

/// A well-posed solution: one trajectory per segment, indexed by segment id.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    f: Expr,
    conditions: Vec<Condition>,
    lines: Vec<LineSolution>,
    segments: Vec<SegmentSolution>,
}

impl Solution {
    pub fn f(&self) -> &Expr {
        &self.f
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn segments(&self) -> &[SegmentSolution] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> Option<&SegmentSolution> {
        self.segments.get(id.0 as usize)
    }

    pub fn trajectory(&self, id: SegmentId) -> Option<&Trajectory> {
        self.segment(id).map(|s| &s.trajectory)
    }

    pub fn line(&self, anchor: usize) -> Option<&LineSolution> {
        self.lines.get(anchor)
    }

    /// Exact flow value at `p`; `None` when `p` is outside its segment.
    pub fn value_at(&self, p: TimePoint) -> Option<f64> {
        let seg = self.segment(p.segment)?;
        let (lo, hi) = (seg.trajectory.start().0, seg.trajectory.end().0);
        if p.t < lo || p.t > hi {
            return None;
        }
        self.lines[seg.anchor].value_at(&self.f, p.t)
    }
}

/// Anchor assignment before any loop or value checks.
struct Assignment {
    lines: Vec<LineSolution>,
    owner: Vec<Option<(usize, Provenance)>>,
}

fn spread(s: &TemporalStructure, a: &mut Assignment, queue: &mut VecDeque<SegmentId>) {
    while let Some(id) = queue.pop_front() {
        let (anchor, _) = a.owner[id.0 as usize].expect("queued segments are owned");
        let seg = s.segment(id).expect("valid segment");
        for (n, other) in s.neighbours(id) {
            if a.owner[other.0 as usize].is_some() {
                continue;
            }
            let o = s.segment(other).expect("valid segment");
            let provenance = if seg.end == Some(n) && o.start == Some(n) {
                Provenance::Forward
            } else if seg.start == Some(n) && o.end == Some(n) {
                Provenance::Retrodicted
            } else {
                Provenance::CopiedToSibling
            };
            a.owner[other.0 as usize] = Some((anchor, provenance));
            queue.push_back(other);
        }
    }
}

fn blowup_report(segment: Option<SegmentId>, at: Blowup) -> SolveError {
    SolveError::Report(ConsistencyReport::new(Status::Blowup, Detail::Blowup { segment, at }))
}

/// Solves on the segment graph with every node checked but identifications
/// ignored. Used directly for holonomy diagnostics.
pub fn solve_open(s: &TemporalStructure, p: &CauchyProblem, cfg: &SolverConfig) -> Result<Solution, SolveError> {
    cfg.check()?;
    p.check(s)?;
    let f = &p.f;
    let n = s.segments().len();
    let mut a = Assignment {
        lines: Vec::new(),
        owner: vec![None; n],
    };
    let mut queue = VecDeque::new();
    for c in &p.conditions {
        let i = c.point.segment.0 as usize;
        match a.owner[i] {
            None => {
                a.lines.push(LineSolution::new(c.point.t, c.x, cfg));
                a.owner[i] = Some((a.lines.len() - 1, Provenance::Seeded));
                queue.push_back(c.point.segment);
            }
            Some((anchor, _)) => {
                let line = &mut a.lines[anchor];
                line.extend_to(f, c.point.t).map_err(|b| blowup_report(Some(c.point.segment), b))?;
                let v = line.value_at(f, c.point.t).expect("extended");
                if let Some(conflict) = cfg.conflict(v, c.x) {
                    let (t0, _) = line.anchor();
                    return Err(SolveError::Report(ConsistencyReport::new(
                        Status::InconsistentInitialConditions,
                        Detail::Conditions {
                            first: TimePoint::new(c.point.segment, t0),
                            second: c.point,
                            conflict,
                        },
                    )));
                }
            }
        }
    }
    spread(s, &mut a, &mut queue);

    // Segments cut off from every condition can still be reached through an
    // identification: the glued point inherits the value on the other side.
    for _ in 0..cfg.max_loop_passes {
        if a.owner.iter().all(Option::is_some) {
            break;
        }
        let mut progressed = false;
        for ident in s.identifications() {
            let (src, dst) = match (a.owner[ident.from.segment.0 as usize], a.owner[ident.to.segment.0 as usize]) {
                (Some(_), None) => (ident.from, ident.to),
                (None, Some(_)) => (ident.to, ident.from),
                _ => continue,
            };
            let (anchor, _) = a.owner[src.segment.0 as usize].expect("owned");
            a.lines[anchor].extend_to(f, src.t).map_err(|b| blowup_report(Some(src.segment), b))?;
            let v = a.lines[anchor].value_at(f, src.t).expect("extended");
            a.lines.push(LineSolution::new(dst.t, v, cfg));
            a.owner[dst.segment.0 as usize] = Some((a.lines.len() - 1, Provenance::Seeded));
            queue.push_back(dst.segment);
            progressed = true;
        }
        spread(s, &mut a, &mut queue);
        if !progressed {
            break;
        }
    }

    let mut segments = Vec::with_capacity(n);
    for seg in s.segments() {
        let Some((anchor, provenance)) = a.owner[seg.id.0 as usize] else {
            return Err(SolveError::Report(ConsistencyReport::new(
                Status::Unreached,
                Detail::Unreached { segment: seg.id },
            )));
        };
        let line = &mut a.lines[anchor];
        for t in [seg.lo, seg.hi] {
            line.extend_to(f, t).map_err(|b| blowup_report(Some(seg.id), b))?;
        }
        let samples = line.samples(f, seg.lo, seg.hi).expect("extended");
        segments.push(SegmentSolution {
            anchor,
            provenance,
            trajectory: Trajectory {
                segment: seg.id,
                samples,
            },
        });
    }

    for node in s.nodes() {
        let Some(single) = node.single() else { continue };
        let sa = &segments[single.0 as usize];
        for &copy in node.copies() {
            let sb = &segments[copy.0 as usize];
            if sa.anchor == sb.anchor {
                continue;
            }
            let va = a.lines[sa.anchor].value_at(f, node.t).expect("extended");
            let vb = a.lines[sb.anchor].value_at(f, node.t).expect("extended");
            if let Some(conflict) = cfg.conflict(va, vb) {
                let status = match node.kind {
                    NodeKind::Division => Status::InconsistentInitialConditions,
                    NodeKind::Sticking => Status::StickingMismatch,
                };
                return Err(SolveError::Report(ConsistencyReport::new(
                    status,
                    Detail::Node {
                        node: node.id,
                        kind: node.kind,
                        t: node.t,
                        single,
                        copy,
                        conflict,
                    },
                )));
            }
        }
    }

    Ok(Solution {
        f: p.f.clone(),
        conditions: p.conditions.clone(),
        lines: a.lines,
        segments,
    })
}

/// Outcome of comparing a solution across one identification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopCheck {
    pub consistent: bool,
    /// `|x(late) - x(early)|`.
    pub gap: f64,
    pub late_value: f64,
    pub early_value: f64,
    pub threshold: f64,
}

pub fn check_loop_consistency(sol: &Solution, ident: &Identification, cfg: &SolverConfig) -> Option<LoopCheck> {
    let a = sol.value_at(ident.from)?;
    let b = sol.value_at(ident.to)?;
    Some(LoopCheck {
        consistent: cfg.agrees(a, b),
        gap: (a - b).abs(),
        late_value: a,
        early_value: b,
        threshold: cfg.threshold(a, b),
    })
}

/// Solves `p` on `s`, enforcing agreement at every node and across every
/// identification.
pub fn solve(s: &TemporalStructure, p: &CauchyProblem, cfg: &SolverConfig) -> Result<Solution, SolveError> {
    let sol = solve_open(s, p, cfg)?;
    for ident in s.identifications() {
        let check = check_loop_consistency(&sol, ident, cfg).expect("identified points lie on their segments");
        if !check.consistent {
            return Err(SolveError::Report(ConsistencyReport::new(
                Status::LoopInconsistent,
                Detail::Identification {
                    ident: ident.id,
                    from: ident.from,
                    to: ident.to,
                    conflict: Conflict {
                        a: check.late_value,
                        b: check.early_value,
                        gap: check.gap,
                        threshold: check.threshold,
                    },
                },
            )));
        }
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircleSolution {
    /// One full turn from `(t_in, x_in)`, times unwrapped.
    pub trajectory: Vec<(f64, f64)>,
    pub period: f64,
    /// `|x(t_in + period) - x_in|`.
    pub holonomy: f64,
}

/// The line with `t1` glued to `t2`: the flow must return to `x_in` after
/// one period.
pub fn solve_circle(
    t1: f64,
    t2: f64,
    f: &Expr,
    t_in: f64,
    x_in: f64,
    cfg: &SolverConfig,
) -> Result<CircleSolution, SolveError> {
    cfg.check()?;
    let period = t2 - t1;
    if !(period > 0.0 && period.is_finite()) {
        return Err(ProblemError::InvalidConfig("circle needs t1 < t2").into());
    }
    if !(t_in.is_finite() && x_in.is_finite()) {
        return Err(ProblemError::InvalidConfig("circle needs a finite starting point").into());
    }
    let trajectory = integrate_segment(f, t_in, x_in, t_in + period, cfg).map_err(|b| blowup_report(None, b))?;
    let end = trajectory[trajectory.len() - 1].1;
    if let Some(conflict) = cfg.conflict(end, x_in) {
        return Err(SolveError::Report(ConsistencyReport::new(
            Status::LoopInconsistent,
            Detail::Identification {
                ident: IdentId(0),
                from: TimePoint::new(SegmentId(0), t_in + period),
                to: TimePoint::new(SegmentId(0), t_in),
                conflict,
            },
        )));
    }
    Ok(CircleSolution {
        trajectory,
        period,
        holonomy: (end - x_in).abs(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewriteError {
    Build(BuildError),
    NotInterior(TimePoint),
    NotCovered(TimePoint),
}

impl fmt::Display for RewriteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewriteError::Build(e) => e.fmt(f),
            RewriteError::NotInterior(p) => {
                write!(f, "t={} is not interior to segment {}", p.t, p.segment)
            }
            RewriteError::NotCovered(p) => write!(f, "solution has no value at t={} on segment {}", p.t, p.segment),
        }
    }
}

impl core::error::Error for RewriteError {}

#[derive(Debug, Clone, PartialEq)]
pub struct MultihistoryOutcome {
    pub structure: TemporalStructure,
    /// Value of the original solution at the rewrite point.
    pub x1: f64,
    pub x2: f64,
    /// The rewrite point on the kept history and on the new one.
    pub copies: (TimePoint, TimePoint),
    /// The original conditions moved onto the new structure.
    pub branch_one: Result<Solution, SolveError>,
    /// Only `x(copy 2) = x2`.
    pub branch_two: Result<Solution, SolveError>,
    /// All of the above at once.
    pub joint: ConsistencyReport,
}

/// Changes the past at `t1`: the timeline divides there in two, the first
/// copy keeping the old history and the second carrying `x2`.
pub fn rewrite_history(
    s: &TemporalStructure,
    sol: &Solution,
    t1: TimePoint,
    x2: f64,
    cfg: &SolverConfig,
) -> Result<MultihistoryOutcome, RewriteError> {
    let seg = s.segment(t1.segment).ok_or(RewriteError::Build(BuildError::UnknownSegment(t1.segment)))?;
    if (t1.t == seg.lo && seg.start.is_some()) || (t1.t == seg.hi && seg.end.is_some()) {
        return Err(RewriteError::Build(BuildError::AtExistingNode { t: t1.t }));
    }
    if !seg.contains_strictly(t1.t) {
        return Err(RewriteError::NotInterior(t1));
    }
    let x1 = sol.value_at(t1).ok_or(RewriteError::NotCovered(t1))?;
    let structure = s
        .split(NodeKind::Division, t1.segment, t1.t, 2, 1)
        .map_err(RewriteError::Build)?;
    let node = structure.nodes().last().expect("split adds a node");
    let (keep, fresh) = (node.copies()[0], node.copies()[1]);
    let copies = (TimePoint::new(keep, t1.t), TimePoint::new(fresh, t1.t));

    let remap = |c: &Condition| {
        let moved = c.point.segment == t1.segment && c.point.t >= t1.t;
        Condition {
            point: if moved { TimePoint::new(keep, c.point.t) } else { c.point },
            x: c.x,
        }
    };
    let kept: Vec<Condition> = sol.conditions().iter().map(remap).collect();
    let one = CauchyProblem {
        f: sol.f().clone(),
        conditions: kept.clone(),
    };
    let two = CauchyProblem::new(sol.f().clone(), [(copies.1, x2)]);
    let mut joint_conditions = kept;
    joint_conditions.push(Condition { point: copies.1, x: x2 });
    let joint = CauchyProblem {
        f: sol.f().clone(),
        conditions: joint_conditions,
    };
    let joint = match solve(&structure, &joint, cfg) {
        Ok(_) => ConsistencyReport::WELL_POSED,
        Err(SolveError::Report(r)) => r,
        Err(SolveError::Problem(p)) => {
            return Err(RewriteError::Build(match p {
                ProblemError::InvalidPoint(pt) => BuildError::OutsideSegment { segment: pt.segment, t: pt.t },
                _ => BuildError::OutsideSegment { segment: t1.segment, t: t1.t },
            }))
        }
    };
    Ok(MultihistoryOutcome {
        branch_one: solve(&structure, &one, cfg),
        branch_two: solve(&structure, &two, cfg),
        structure,
        x1,
        x2,
        copies,
        joint,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum BifurcationError {
    Grazing { split_at: f64 },
    StartsInsideCopies { x_in: f64, split_at: f64 },
    NeverReaches { split_at: f64, t_max: f64 },
    Blowup(Blowup),
    InvalidConfig(&'static str),
}

impl fmt::Display for BifurcationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BifurcationError::Grazing { split_at } => {
                write!(f, "f vanishes at the split value {}; no transversal crossing", split_at)
            }
            BifurcationError::StartsInsideCopies { x_in, split_at } => {
                write!(f, "start value {} is not below the split value {}", x_in, split_at)
            }
            BifurcationError::NeverReaches { split_at, t_max } => {
                write!(f, "trajectory does not reach {} before t={}", split_at, t_max)
            }
            BifurcationError::Blowup(b) => b.fmt(f),
            BifurcationError::InvalidConfig(what) => write!(f, "invalid solver config: {}", what),
        }
    }
}

impl core::error::Error for BifurcationError {}

/// A sample of a path in the split state space. `copy` is `None` below the
/// split value, where the two copies coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSample {
    pub t: f64,
    pub x: f64,
    pub copy: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualContinuations {
    pub t_bif: f64,
    pub continuations: [Vec<StateSample>; 2],
}

/// Paths from `(t_in, x_in)` through a state space whose values from
/// `split_at` upward exist in two copies. The flow is deterministic, so the
/// only freedom is which copy the state enters at the crossing time.
pub fn dual_continuations(
    f: &Expr,
    x_in: f64,
    t_in: f64,
    split_at: f64,
    horizon: Horizon,
    cfg: &SolverConfig,
) -> Result<DualContinuations, BifurcationError> {
    cfg.check().map_err(|e| match e {
        ProblemError::InvalidConfig(w) => BifurcationError::InvalidConfig(w),
        _ => BifurcationError::InvalidConfig("invalid configuration"),
    })?;
    if f.eval(split_at).map_or(true, |v| v == 0.0) {
        return Err(BifurcationError::Grazing { split_at });
    }
    if x_in >= split_at {
        return Err(BifurcationError::StartsInsideCopies { x_in, split_at });
    }
    let never = BifurcationError::NeverReaches {
        split_at,
        t_max: horizon.t_max,
    };
    if t_in >= horizon.t_max {
        return Err(never);
    }
    let path = integrate_segment(f, t_in, x_in, horizon.t_max, cfg).map_err(BifurcationError::Blowup)?;
    let k = path.windows(2).position(|w| w[1].1 >= split_at).ok_or(never)?;
    let (ta, xa) = path[k];
    let tb = path[k + 1].0;
    // bisection on the partial step from the last grid point below
    let (mut lo, mut hi) = (0.0, tb - ta);
    for _ in 0..200 {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        match rk4(f, xa, mid, cfg.blowup_cap) {
            Some(x) if x < split_at => lo = mid,
            _ => hi = mid,
        }
    }
    let t_bif = ta + hi;
    let shared: Vec<StateSample> = path[..=k]
        .iter()
        .map(|&(t, x)| StateSample { t, x, copy: None })
        .collect();
    let branch = |c: u8| {
        let mut v = shared.clone();
        v.push(StateSample {
            t: t_bif,
            x: split_at,
            copy: Some(c),
        });
        v.extend(path[k + 1..].iter().filter(|(t, _)| *t > t_bif).map(|&(t, x)| StateSample {
            t,
            x,
            copy: (x >= split_at).then_some(c),
        }));
        v
    };
    Ok(DualContinuations {
        t_bif,
        continuations: [branch(1), branch(2)],
    })
}
