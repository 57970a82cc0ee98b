//! JSON structure spec files.
//!
//! ```json
//! {
//!   "horizon": [-10, 10],
//!   "events": [
//!     {"kind": "division", "path": [], "t": 0, "branches": 2},
//!     {"kind": "sticking", "path": [1], "t": 5, "branches": 2, "carry": 1}
//!   ],
//!   "identifications": [
//!     {"from": {"path": [2], "t": 3.0}, "to": {"path": [], "t": -3.0}}
//!   ]
//! }
//! ```
//!
//! Events apply in order; each `path` is resolved against the structure as
//! built so far. `kind` may also be `"point"`, which replaces the instant `t`
//! by `branches` one-point copies.

use crate::CliError;
use branchtime_core::timeline::{line, Horizon, NodeKind, TemporalStructure};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Division,
    Sticking,
    Point,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub kind: EventKind,
    #[serde(default)]
    pub path: Vec<i32>,
    pub t: f64,
    pub branches: i64,
    pub carry: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    #[serde(default)]
    pub path: Vec<i32>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentificationSpec {
    pub from: PointSpec,
    pub to: PointSpec,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub horizon: Option<(f64, f64)>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub identifications: Vec<IdentificationSpec>,
}

impl StructureSpec {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| CliError::SpecSyntax {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Builds the structure; `horizon` overrides the file's horizon.
    pub fn build(&self, horizon: Option<Horizon>) -> Result<TemporalStructure, CliError> {
        let horizon = match (horizon, self.horizon) {
            (Some(h), _) => h,
            (None, Some((lo, hi))) => Horizon::new(lo, hi).map_err(CliError::Horizon)?,
            (None, None) => Horizon::default(),
        };
        let mut s = line(horizon).map_err(CliError::Horizon)?;
        for (index, e) in self.events.iter().enumerate() {
            let fail = |source| CliError::Event { index, source };
            let count = |v: i64| u32::try_from(v).unwrap_or(0);
            let seg = s.segment_at_path(&e.path).map_err(fail)?;
            let b = count(e.branches);
            s = match e.kind {
                EventKind::Division => s.split(NodeKind::Division, seg, e.t, b, count(e.carry.unwrap_or(1))),
                EventKind::Sticking => s.split(NodeKind::Sticking, seg, e.t, b, count(e.carry.unwrap_or(1))),
                EventKind::Point => s.split_point(seg, e.t, b),
            }
            .map_err(fail)?;
        }
        for (index, i) in self.identifications.iter().enumerate() {
            let fail = |source| CliError::Identification { index, source };
            let from = s.locate(&i.from.path, i.from.t).map_err(fail)?;
            let to = s.locate(&i.to.path, i.to.t).map_err(fail)?;
            s = s.identify(from, to).map_err(fail)?;
        }
        Ok(s)
    }
}
