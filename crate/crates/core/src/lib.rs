//! Branched time lines and scalar evolution equations on them.
//!
//! * [`expr`] parses and evaluates the right-hand side `f(x)`.
//! * [`timeline`] builds and validates branched time structures.
//! * [`order`] diagnoses the chronological preorder and separation.
//! * [`cauchy`] integrates `x' = f(x)` across a structure and reports
//!   where consistency fails.
#![no_std]

extern crate alloc;

pub mod cauchy;
pub mod expr;
pub mod order;
pub mod timeline;

#[cfg(test)]
mod testgen;

pub use expr::{parse, Expr};
pub use timeline::{
    graph_of, line, validate, Horizon, NodeId, NodeKind, SegmentId, TemporalStructure, TimePoint,
};
