//! Text, CSV and DOT renderings. Every number goes through [`g17`].

use branchtime_core::cauchy::{ConsistencyReport, Detail, Solution, SolverConfig};
use branchtime_core::order::{self, ChronRelationReport};
use branchtime_core::timeline::{graph_of, validate, Segment, SegmentId, TemporalStructure, TimePoint};
use std::fmt::Write as _;
use std::io::Write;

/// `%.17g`: 17 significant digits, trailing zeros dropped, exponent form
/// outside `1e-4 <= |v| < 1e17`.
pub fn g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };
    if !(-4..17).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        let tail = tail.trim_end_matches('0');
        let dot = if tail.is_empty() { "" } else { "." };
        let esign = if exp < 0 { '-' } else { '+' };
        return format!("{sign}{head}{dot}{tail}e{esign}{:02}", exp.abs());
    }
    let (int, frac) = if exp >= 0 {
        let split = exp as usize + 1;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        ("0".to_string(), "0".repeat((-exp - 1) as usize) + &digits)
    };
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

pub fn path_text(path: &[i32]) -> String {
    let parts: Vec<String> = path.iter().map(i32::to_string).collect();
    format!("[{}]", parts.join(","))
}

fn segment_path(s: &TemporalStructure, id: SegmentId) -> String {
    s.segment(id).map_or_else(|| "?".into(), |g| path_text(&g.branch_indices()))
}

/// `path@t`, the same shape accepted by `--ic`.
pub fn point_text(s: &TemporalStructure, p: TimePoint) -> String {
    format!("{}@{}", segment_path(s, p.segment), g17(p.t))
}

pub fn interval_text(g: &Segment) -> String {
    format!(
        "{}{},{}{}",
        if g.lo_closed { '[' } else { '(' },
        g17(g.lo),
        g17(g.hi),
        if g.hi_closed { ']' } else { ')' }
    )
}

pub fn build_summary(s: &TemporalStructure) -> String {
    let report = validate(s);
    let mut out = String::new();
    let _ = writeln!(out, "segments: {}", s.segments().len());
    let _ = writeln!(out, "nodes: {}", s.nodes().len());
    let _ = writeln!(out, "divisions: {}", s.division_count());
    let _ = writeln!(out, "stickings: {}", s.sticking_count());
    let _ = writeln!(out, "identifications: {}", s.identifications().len());
    let _ = writeln!(out, "chronology-violating: {}", report.chronology_violating);
    let _ = writeln!(out, "valid: {}", report.is_valid());
    for c in report.failures() {
        let _ = writeln!(out, "failed-check: {} {}", c.name, c.detail);
    }
    out
}

/// Trajectory CSV: segments in topological order, then samples by time.
pub fn write_csv<W: Write>(s: &TemporalStructure, sol: &Solution, w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["segment", "branch_path", "t", "x"])?;
    for id in s.topological_order() {
        let path = segment_path(s, id);
        let seg = id.0.to_string();
        if let Some(tr) = sol.trajectory(id) {
            for &(t, x) in &tr.samples {
                out.write_record([seg.as_str(), path.as_str(), &g17(t), &g17(x)])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn report_text(s: &TemporalStructure, r: &ConsistencyReport, cfg: &SolverConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}: {v}");
    };
    kv("status", r.status.name().into());
    match r.detail {
        None => {}
        Some(Detail::Node {
            node,
            kind,
            t,
            single,
            copy,
            ..
        }) => {
            kv("where", "node".into());
            kv("node", node.0.to_string());
            kv("node_kind", kind.name().into());
            kv("t", g17(t));
            kv("single_side", point_text(s, TimePoint::new(single, t)));
            kv("copy", point_text(s, TimePoint::new(copy, t)));
        }
        Some(Detail::Conditions { first, second, .. }) => {
            kv("where", "conditions".into());
            kv("first", point_text(s, first));
            kv("second", point_text(s, second));
        }
        Some(Detail::Identification { ident, from, to, .. }) => {
            kv("where", "identification".into());
            kv("identification", ident.0.to_string());
            kv("from", point_text(s, from));
            kv("to", point_text(s, to));
        }
        Some(Detail::Blowup { segment, at }) => {
            kv("where", "blowup".into());
            if let Some(seg) = segment {
                kv("segment", seg.0.to_string());
                kv("branch_path", segment_path(s, seg));
            }
            kv("last_t", g17(at.t));
            kv("last_x", g17(at.x));
        }
        Some(Detail::Unreached { segment }) => {
            kv("where", "unreached".into());
            kv("segment", segment.0.to_string());
            kv("branch_path", segment_path(s, segment));
        }
    }
    if let Some(c) = r.conflict() {
        kv("a", g17(c.a));
        kv("b", g17(c.b));
        kv("gap", g17(c.gap));
        kv("threshold", g17(c.threshold));
    }
    kv("tol_abs", g17(cfg.tol_abs));
    kv("tol_rel", g17(cfg.tol_rel));
    out
}

pub fn dot(s: &TemporalStructure) -> String {
    let g = graph_of(s);
    let mut out = String::from("digraph temporal_structure {\n  rankdir=LR;\n");
    for v in &g.vertices {
        let _ = writeln!(out, "  n{} [label=\"t={} ({})\"];", v.node.0, g17(v.t), v.kind.name());
    }
    for e in &g.edges {
        let k = e.segment.0;
        if e.from.is_none() {
            let _ = writeln!(out, "  start_s{k} [shape=point];");
        }
        if e.to.is_none() {
            let _ = writeln!(out, "  end_s{k} [shape=point];");
        }
    }
    for (e, seg) in g.edges.iter().zip(s.segments()) {
        let k = e.segment.0;
        let from = e.from.map_or(format!("start_s{k}"), |n| format!("n{}", n.0));
        let to = e.to.map_or(format!("end_s{k}"), |n| format!("n{}", n.0));
        let _ = writeln!(out, "  {from} -> {to} [label=\"{}\"];", interval_text(seg));
    }
    for i in &g.identifications {
        let _ = writeln!(
            out,
            "  end_s{} -> start_s{} [style=dashed, label=\"period={}\"];",
            i.from_edge.0,
            i.to_edge.0,
            g17(i.period)
        );
    }
    out.push_str("}\n");
    out
}

pub fn check_text(s: &TemporalStructure, mccabe: Option<bool>) -> String {
    let ChronRelationReport {
        is_preorder,
        is_partial_order,
        witness_pair,
        chronology_violating,
    } = order::relation_report(s);
    let pairs = order::hausdorff_pairs(s);
    let mut out = String::new();
    let _ = writeln!(out, "is_preorder: {is_preorder}");
    let _ = writeln!(out, "is_partial_order: {is_partial_order}");
    let witness = witness_pair.map_or("none".into(), |(p, q)| format!("{} {}", point_text(s, p), point_text(s, q)));
    let _ = writeln!(out, "witness_pair: {witness}");
    let _ = writeln!(out, "chronology_violating: {chronology_violating}");
    if let Ok(families) = order::chron_equiv_classes(s) {
        let _ = writeln!(out, "copy_families: {}", families.len());
    }
    let _ = writeln!(out, "hausdorff_pairs: {}", pairs.len());
    for (p, q) in &pairs {
        let _ = writeln!(out, "pair: {} {}", point_text(s, *p), point_text(s, *q));
    }
    let _ = writeln!(out, "is_hausdorff: {}", pairs.is_empty());
    let verdict = mccabe.map_or("unsupported".into(), |b| b.to_string());
    let _ = writeln!(out, "mccabe_is_hausdorff: {verdict}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use branchtime_core::timeline::{line, Horizon};

    #[test]
    fn g17_matches_printf() {
        // reference strings from C's printf("%.17g")
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-10.0, "-10"),
            (0.5, "0.5"),
            (0.1, "0.10000000000000001"),
            (std::f64::consts::E, "2.7182818284590451"),
            (2.0 * std::f64::consts::PI, "6.2831853071795862"),
            (1e-3, "0.001"),
            (1e-5, "1.0000000000000001e-05"),
            (1.5e-7, "1.4999999999999999e-07"),
            (123456.0, "123456"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (-2.5e-300, "-2.5e-300"),
            (1e-4, "0.0001"),
        ];
        for (v, want) in cases {
            assert_eq!(g17(v), want, "{v:e}");
        }
    }

    #[test]
    fn g17_round_trips() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e300, -7.25e-12, 5e-324] {
            assert_eq!(g17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn line_dot() {
        let s = line(Horizon::default()).unwrap();
        let d = dot(&s);
        assert_eq!(d.matches("->").count(), 1);
        assert!(d.contains("start_s0 -> end_s0 [label=\"[-10,10]\"];"));
    }

    #[test]
    fn paths_render_compactly() {
        assert_eq!(path_text(&[]), "[]");
        assert_eq!(path_text(&[1, -2, 0]), "[1,-2,0]");
    }
}
