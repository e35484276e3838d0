//! Phase-portrait rendering: SVG, plus CSV and JSON dumps of the same bundle.

use std::fmt::Write as _;

use pendulum_core::connection::ShootKind;
use pendulum_core::sweep::{wrap_segment, Portrait};
use pendulum_core::{FixedPointKind, PhaseState, TerminalEvent, TrajectorySegment};
use serde_json::{json, Value};

use crate::format::{json_float, Cell, Table};

pub fn kind_name(kind: FixedPointKind) -> &'static str {
    match kind {
        FixedPointKind::Saddle => "saddle",
        FixedPointKind::Sink => "sink",
        FixedPointKind::Center => "center",
        FixedPointKind::SaddleNode => "saddle-node",
    }
}

pub fn terminal_json(event: &TerminalEvent) -> Value {
    match event {
        TerminalEvent::SpanExhausted => json!({ "kind": "span_exhausted" }),
        TerminalEvent::AxisCrossing { phi } => json!({ "kind": "axis_crossing", "phi": json_float(*phi) }),
        TerminalEvent::VerticalLineCrossing { z } => json!({ "kind": "vertical_line_crossing", "z": json_float(*z) }),
        TerminalEvent::EquilibriumCapture(p) => {
            json!({ "kind": "equilibrium_capture", "phi": json_float(p.phi), "equilibrium": kind_name(p.kind) })
        }
        TerminalEvent::ConeEntry { phi, z } => {
            json!({ "kind": "cone_entry", "phi": json_float(*phi), "z": json_float(*z) })
        }
        TerminalEvent::BlowUp => json!({ "kind": "blow_up" }),
    }
}

pub fn shot_json(kind: &ShootKind) -> Value {
    match kind {
        ShootKind::HitAxis { phi_c } => json!({ "kind": "hit_axis", "phi_c": json_float(*phi_c) }),
        ShootKind::HitLineK1 { z_c } => json!({ "kind": "hit_line_k1", "z_c": json_float(*z_c) }),
        ShootKind::HitSaddle => json!({ "kind": "hit_saddle" }),
    }
}

fn pieces(seg: &TrajectorySegment, a: f64) -> Vec<Vec<PhaseState>> {
    wrap_segment(seg.samples.iter().map(|s| s.state), a)
}

fn points_json(points: &[PhaseState]) -> Value {
    Value::Array(points.iter().map(|p| json!([json_float(p.phi), json_float(p.z)])).collect())
}

pub fn portrait_json(portrait: &Portrait) -> Value {
    let a = portrait.interval.0;
    let trajectories: Vec<Value> = portrait
        .trajectories
        .iter()
        .map(|t| match t {
            Ok(seg) => json!({
                "terminal_event": terminal_json(&seg.terminal_event),
                "pieces": pieces(seg, a).iter().map(|p| points_json(p)).collect::<Vec<_>>(),
            }),
            Err(e) => json!({ "error": e.to_string() }),
        })
        .collect();
    let shot = match &portrait.shot {
        None => Value::Null,
        Some(Ok(s)) => json!({
            "outcome": shot_json(&s.kind),
            "pieces": pieces(&s.trajectory, a).iter().map(|p| points_json(p)).collect::<Vec<_>>(),
        }),
        Some(Err(e)) => json!({ "error": e.to_string() }),
    };
    json!({
        "interval": [json_float(portrait.interval.0), json_float(portrait.interval.1)],
        "z_extent": json_float(portrait.z_extent),
        "trajectories": trajectories,
        "g": portrait.g_curve.as_ref().map_or(Value::Null, |g| points_json(g)),
        "equilibria": portrait.equilibria.iter().map(|p| json!({
            "phi": json_float(p.phi),
            "kind": kind_name(p.kind),
        })).collect::<Vec<_>>(),
        "shot": shot,
    })
}

/// Long format: one row per plotted point.
pub fn portrait_table(portrait: &Portrait) -> Table {
    let mut t = Table::new(vec!["layer", "curve", "piece", "kind", "phi", "z"]);
    let a = portrait.interval.0;
    let push_pieces = |t: &mut Table, layer: &str, curve: i64, kind: &str, pcs: &[Vec<PhaseState>]| {
        for (j, piece) in pcs.iter().enumerate() {
            for p in piece {
                t.push(vec![
                    Cell::Text(layer.into()),
                    Cell::Int(curve),
                    Cell::Int(j as i64),
                    Cell::Text(kind.into()),
                    Cell::Num(p.phi),
                    Cell::Num(p.z),
                ]);
            }
        }
    };
    for (i, tr) in portrait.trajectories.iter().enumerate() {
        if let Ok(seg) = tr {
            push_pieces(&mut t, "trajectory", i as i64, "", &pieces(seg, a));
        }
    }
    if let Some(g) = &portrait.g_curve {
        push_pieces(&mut t, "g", 0, "", std::slice::from_ref(g));
    }
    if let Some(Ok(s)) = &portrait.shot {
        push_pieces(&mut t, "shot", 0, "", &pieces(&s.trajectory, a));
    }
    for (i, p) in portrait.equilibria.iter().enumerate() {
        push_pieces(&mut t, "equilibrium", i as i64, kind_name(p.kind), &[vec![p.state()]]);
    }
    t
}

fn polyline(out: &mut String, class: &str, points: &[PhaseState]) {
    if points.len() < 2 {
        return;
    }
    let _ = write!(out, "    <polyline class=\"{class}\" points=\"");
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        // z is negated: SVG y grows downward.
        let _ = write!(out, "{:.6},{:.6}", p.phi, -p.z);
    }
    out.push_str("\"/>\n");
}

/// Standalone SVG. The viewBox spans the main interval in φ and
/// `[−z_extent, z_extent]` in z.
pub fn portrait_svg(portrait: &Portrait) -> String {
    let (a, b) = portrait.interval;
    let h = portrait.z_extent;
    let (w, t) = (b - a, 2.0 * h);
    let mut s = String::new();
    let _ = writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"600\" viewBox=\"{a:.6} {:.6} {w:.6} {t:.6}\" preserveAspectRatio=\"none\">",
        -h
    );
    let _ = writeln!(
        s,
        "  <title>beta = {}, gamma = {}</title>",
        portrait.params.beta, portrait.params.gamma
    );
    s.push_str(concat!(
        "  <style>\n",
        "    polyline, line { fill: none; vector-effect: non-scaling-stroke; }\n",
        "    .axis { stroke: #888; stroke-width: 1; }\n",
        "    .trajectory { stroke: #4a6fa5; stroke-width: 1; }\n",
        "    .overlay-g { stroke: #2a9d4a; stroke-width: 1.5; stroke-dasharray: 4 3; }\n",
        "    .shot { stroke: #c0392b; stroke-width: 2; }\n",
        "    .saddle { fill: #fff; stroke: #000; vector-effect: non-scaling-stroke; }\n",
        "    .sink, .center { fill: #000; }\n",
        "    .saddle-node { fill: #888; stroke: #000; vector-effect: non-scaling-stroke; }\n",
        "  </style>\n",
    ));
    let _ = writeln!(s, "  <line class=\"axis\" x1=\"{a:.6}\" y1=\"0\" x2=\"{b:.6}\" y2=\"0\"/>");
    s.push_str("  <g class=\"trajectories\">\n");
    for seg in portrait.trajectories.iter().flatten() {
        for piece in pieces(seg, a) {
            polyline(&mut s, "trajectory", &piece);
        }
    }
    s.push_str("  </g>\n");
    if let Some(g) = &portrait.g_curve {
        s.push_str("  <g class=\"overlay\">\n");
        polyline(&mut s, "overlay-g", g);
        s.push_str("  </g>\n");
    }
    if let Some(Ok(shot)) = &portrait.shot {
        s.push_str("  <g class=\"overlay\">\n");
        for piece in pieces(&shot.trajectory, a) {
            polyline(&mut s, "shot", &piece);
        }
        s.push_str("  </g>\n");
    }
    if !portrait.equilibria.is_empty() {
        let (rx, ry) = (0.012 * w, 0.012 * t);
        s.push_str("  <g class=\"overlay\">\n");
        for p in &portrait.equilibria {
            let _ = writeln!(
                s,
                "    <ellipse class=\"equilibrium {}\" cx=\"{:.6}\" cy=\"0\" rx=\"{rx:.6}\" ry=\"{ry:.6}\"/>",
                kind_name(p.kind),
                p.phi
            );
        }
        s.push_str("  </g>\n");
    }
    s.push_str("</svg>\n");
    s
}
