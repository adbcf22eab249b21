//! Graphviz output. Vertices sit on a circle; each edge half takes the color
//! of its mode number; negative real weights carry a diamond marker.

use std::f64::consts::TAU;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, VertexRole};

pub const PALETTE: [&str; 10] =
    ["blue", "red", "green", "orange", "purple", "cyan", "magenta", "brown", "gold", "gray"];

#[derive(Clone, Debug, PartialEq)]
pub struct RenderStyle {
    pub palette: Vec<&'static str>,
    pub radius: f64,
    pub negative_marker: &'static str,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self { palette: PALETTE.to_vec(), radius: 2.0, negative_marker: "diamond" }
    }
}

fn shape(role: VertexRole) -> &'static str {
    match role {
        VertexRole::Detector => "circle",
        VertexRole::Input => "triangle",
        VertexRole::Ancilla => "square",
        VertexRole::Environment => "star",
    }
}

/// Undirected DOT text for `graph`.
pub fn render_dot(graph: &ColoredGraph, style: &RenderStyle) -> Result<String> {
    let max_dim = graph.vertices().iter().map(|v| v.local_dim).max().unwrap_or(0);
    if max_dim > style.palette.len() {
        return Err(Error::Argument(format!(
            "cannot draw {max_dim} modes with a palette of {} colors",
            style.palette.len()
        )));
    }
    let mut out = String::new();
    let n = graph.num_vertices();
    writeln!(out, "graph G {{").unwrap();
    writeln!(out, "  layout=neato;").unwrap();
    writeln!(out, "  node [fontname=\"Helvetica\", style=filled, fillcolor=white];").unwrap();
    writeln!(out, "  edge [penwidth=2];").unwrap();
    for v in graph.vertices() {
        let angle = TAU * v.id as f64 / n.max(1) as f64;
        let (x, y) = (style.radius * angle.sin(), style.radius * angle.cos());
        writeln!(
            out,
            "  {} [label=\"{}\", shape={}, pos=\"{:.3},{:.3}!\"];",
            v.id,
            v.id,
            shape(v.role),
            x,
            y
        )
        .unwrap();
    }
    for e in graph.edges() {
        let k = e.key;
        let color = if k.cu == k.cv {
            style.palette[k.cu].to_string()
        } else {
            format!("{};0.5:{}", style.palette[k.cu], style.palette[k.cv])
        };
        let w = e.weight;
        let label = if w.im == 0.0 { format!("{:.3}", w.re) } else { format!("{:.3}{:+.3}i", w.re, w.im) };
        let mut attrs = format!("color=\"{color}\", label=\"{label}\"");
        if w.im == 0.0 && w.re < 0.0 {
            write!(attrs, ", dir=forward, arrowhead={}", style.negative_marker).unwrap();
        }
        writeln!(out, "  {} -- {} [{attrs}];", k.u, k.v).unwrap();
    }
    writeln!(out, "}}").unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, EdgeKey, Mode, WeightDomain};
    use num_complex::Complex64 as C64;

    fn edge(a: usize, b: usize, ca: usize, cb: usize, w: f64) -> Edge {
        Edge::new(EdgeKey::new(a, b, ca, cb), C64::new(w, 0.0))
    }

    #[test]
    fn two_matchings_colors() {
        let g = ColoredGraph::from_roles(
            Mode::Postselect,
            WeightDomain::Real,
            &[(VertexRole::Detector, 2); 4],
            [edge(0, 1, 0, 0, 1.0), edge(2, 3, 0, 0, 1.0), edge(0, 2, 1, 1, 1.0), edge(1, 3, 1, 1, 1.0)],
        );
        let dot = render_dot(&g, &RenderStyle::default()).unwrap();
        assert_eq!(dot.matches("shape=circle").count(), 4);
        assert_eq!(dot.matches(" -- ").count(), 4);
        assert_eq!(dot.matches("color=\"blue\"").count(), 2);
        assert_eq!(dot.matches("color=\"red\"").count(), 2);
        assert!(!dot.contains("diamond"));
    }

    #[test]
    fn negative_and_bicolored_edges() {
        let g = ColoredGraph::from_roles(
            Mode::Postselect,
            WeightDomain::Real,
            &[(VertexRole::Input, 2), (VertexRole::Ancilla, 2)],
            [edge(0, 1, 0, 1, -1.0)],
        );
        let dot = render_dot(&g, &RenderStyle::default()).unwrap();
        assert!(dot.contains("arrowhead=diamond"));
        assert!(dot.contains("color=\"blue;0.5:red\""));
        assert!(dot.contains("shape=triangle") && dot.contains("shape=square"));
    }

    #[test]
    fn empty_graph() {
        let g = ColoredGraph::new(Mode::Postselect, WeightDomain::Real, vec![], vec![]);
        let dot = render_dot(&g, &RenderStyle::default()).unwrap();
        assert!(dot.starts_with("graph G {") && dot.trim_end().ends_with('}'));
    }

    #[test]
    fn palette_exhausted() {
        let g = ColoredGraph::from_roles(Mode::Postselect, WeightDomain::Real, &[(VertexRole::Detector, 11)], []);
        assert!(render_dot(&g, &RenderStyle::default()).is_err());
    }
}
