//! Colored weighted graphs: the experiment representation.
//!
//! Vertices are photon paths (or detectors) with a number of internal mode
//! colors; an edge is a correlated photon pair with a color at each endpoint
//! and a complex amplitude. Edges are kept in canonical form and sorted, so
//! two graphs with the same content serialize to the same bytes.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What a vertex stands for in the experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VertexRole {
    Detector,
    Ancilla,
    Input,
    Environment,
}

impl fmt::Display for VertexRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Detector => "detector",
            Self::Ancilla => "ancilla",
            Self::Input => "input",
            Self::Environment => "environment",
        };
        f.write_str(s)
    }
}

/// Conditioning rule family a graph is evaluated under.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Postselect,
    Heralded,
    Fock,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Postselect => "postselect",
            Self::Heralded => "heralded",
            Self::Fock => "fock",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightDomain {
    #[default]
    Real,
    Complex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VertexSpec {
    pub id: usize,
    pub role: VertexRole,
    pub local_dim: usize,
}

impl VertexSpec {
    pub fn new(id: usize, role: VertexRole, local_dim: usize) -> Self {
        Self { id, role, local_dim }
    }
}

/// Identity of an edge: endpoints and the color at each endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey {
    pub u: usize,
    pub v: usize,
    pub cu: usize,
    pub cv: usize,
}

impl EdgeKey {
    /// Canonical key: `u < v`, or `u == v` with `cu <= cv`.
    pub fn new(a: usize, b: usize, ca: usize, cb: usize) -> Self {
        if a < b || (a == b && ca <= cb) {
            Self { u: a, v: b, cu: ca, cv: cb }
        } else {
            Self { u: b, v: a, cu: cb, cv: ca }
        }
    }

    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    pub fn touches(&self, vertex: usize) -> bool {
        self.u == vertex || self.v == vertex
    }

    pub fn as_array(&self) -> [usize; 4] {
        [self.u, self.v, self.cu, self.cv]
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{}:{}{})", self.u, self.v, self.cu, self.cv)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub key: EdgeKey,
    pub weight: C64,
}

impl Edge {
    pub fn new(key: EdgeKey, weight: C64) -> Self {
        Self { key, weight }
    }
}

/// Bring a raw `(a, b, color at a, color at b, weight)` tuple into canonical form.
///
/// Negative ids or colors are rejected; everything else is accepted as is.
pub fn canonicalize(a: i64, b: i64, ca: i64, cb: i64, weight: C64) -> Result<Edge, GraphError> {
    for (what, x) in [("vertex id", a), ("vertex id", b), ("color", ca), ("color", cb)] {
        if x < 0 {
            return Err(GraphError::Negative { what, value: x });
        }
    }
    let key = EdgeKey::new(a as usize, b as usize, ca as usize, cb as usize);
    Ok(Edge { key, weight })
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("negative {what}: {value}")]
    Negative { what: &'static str, value: i64 },

    #[error("malformed graph document at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid graph document: {0}")]
    Structure(String),
}

/// A colored weighted graph. Immutable once built; edges are canonical, sorted
/// and unique by key.
#[derive(Clone, Debug, PartialEq)]
pub struct ColoredGraph {
    pub mode: Mode,
    pub weight_domain: WeightDomain,
    vertices: Vec<VertexSpec>,
    edges: Vec<Edge>,
}

impl ColoredGraph {
    /// Build a graph from vertices and edges. Edges are canonicalized and
    /// sorted; edges sharing a key are merged by adding their weights. Returns
    /// the graph together with the keys that were merged.
    pub fn with_merges(
        mode: Mode,
        weight_domain: WeightDomain,
        vertices: Vec<VertexSpec>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> (Self, Vec<EdgeKey>) {
        let mut merged: BTreeMap<EdgeKey, C64> = BTreeMap::new();
        let mut dups = Vec::new();
        for e in edges {
            let key = EdgeKey::new(e.key.u, e.key.v, e.key.cu, e.key.cv);
            match merged.get_mut(&key) {
                Some(w) => {
                    *w += e.weight;
                    dups.push(key);
                }
                None => {
                    merged.insert(key, e.weight);
                }
            }
        }
        let edges = merged.into_iter().map(|(key, weight)| Edge { key, weight }).collect();
        (Self { mode, weight_domain, vertices, edges }, dups)
    }

    pub fn new(
        mode: Mode,
        weight_domain: WeightDomain,
        vertices: Vec<VertexSpec>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Self {
        Self::with_merges(mode, weight_domain, vertices, edges).0
    }

    /// Vertices with the given roles and dimensions, ids assigned in order.
    pub fn from_roles(
        mode: Mode,
        weight_domain: WeightDomain,
        roles: &[(VertexRole, usize)],
        edges: impl IntoIterator<Item = Edge>,
    ) -> Self {
        let vertices = roles
            .iter()
            .enumerate()
            .map(|(id, &(role, dim))| VertexSpec::new(id, role, dim))
            .collect();
        Self::new(mode, weight_domain, vertices, edges)
    }

    pub fn vertices(&self) -> &[VertexSpec] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_index(&self, key: &EdgeKey) -> Option<usize> {
        self.edges.binary_search_by(|e| e.key.cmp(key)).ok()
    }

    pub fn weights(&self) -> Vec<C64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    pub fn environment(&self) -> Option<usize> {
        self.vertices.iter().position(|v| v.role == VertexRole::Environment)
    }

    pub fn vertices_with_role(&self, role: VertexRole) -> Vec<usize> {
        self.vertices.iter().filter(|v| v.role == role).map(|v| v.id).collect()
    }

    pub fn local_dims(&self) -> Vec<usize> {
        self.vertices.iter().map(|v| v.local_dim).collect()
    }

    pub fn has_self_loops(&self) -> bool {
        self.edges.iter().any(|e| e.key.is_loop())
    }

    /// Same topology and vertices, new weights (one per edge, in edge order).
    pub fn with_weights(&self, weights: &[C64]) -> Self {
        assert_eq!(weights.len(), self.edges.len(), "weight vector length mismatch");
        let edges = self
            .edges
            .iter()
            .zip(weights)
            .map(|(e, &w)| Edge { key: e.key, weight: w })
            .collect();
        Self { edges, ..self.clone() }
    }

    /// Keep only the edges for which `keep` returns true.
    pub fn retain_edges(&self, mut keep: impl FnMut(usize, &Edge) -> bool) -> Self {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, e)| keep(*i, e))
            .map(|(_, e)| *e)
            .collect();
        Self { edges, ..self.clone() }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self, self.mode)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&GraphDoc::from(self)).expect("graph documents always serialize")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&GraphDoc::from(self)).expect("graph documents always serialize")
    }

    /// Parse a graph document. Duplicate edge keys are merged by weight
    /// addition and logged as warnings.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let (graph, warnings) = Self::from_json_with_warnings(text)?;
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(graph)
    }

    pub fn from_json_with_warnings(text: &str) -> Result<(Self, Vec<String>), GraphError> {
        let doc: GraphDoc = serde_json::from_str(text).map_err(|e| parse_error(text, &e))?;
        doc.into_graph()
    }
}

pub(crate) fn parse_error(text: &str, e: &serde_json::Error) -> GraphError {
    let (line, column) = (e.line(), e.column());
    let offset = if e.is_eof() { text.len() } else { byte_offset(text, line, column) };
    GraphError::Parse {
        offset,
        line,
        column,
        message: e.to_string(),
    }
}

/// Byte offset of a 1-based (line, column) position as reported by serde_json.
pub fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Wire form of a graph.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GraphDoc {
    mode: Mode,
    weight_domain: WeightDomain,
    vertices: Vec<VertexDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexDoc {
    id: usize,
    role: VertexRole,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    u: i64,
    v: i64,
    cu: i64,
    cv: i64,
    w: [f64; 2],
}

impl From<&ColoredGraph> for GraphDoc {
    fn from(g: &ColoredGraph) -> Self {
        Self {
            mode: g.mode,
            weight_domain: g.weight_domain,
            vertices: g
                .vertices
                .iter()
                .map(|v| VertexDoc { id: v.id, role: v.role, dim: v.local_dim })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    u: e.key.u as i64,
                    v: e.key.v as i64,
                    cu: e.key.cu as i64,
                    cv: e.key.cv as i64,
                    w: [e.weight.re, e.weight.im],
                })
                .collect(),
        }
    }
}

impl GraphDoc {
    fn into_graph(self) -> Result<(ColoredGraph, Vec<String>), GraphError> {
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.into_iter().enumerate() {
            if v.id != i {
                return Err(GraphError::Structure(format!(
                    "vertex ids must be 0..V-1 in order; position {i} has id {}",
                    v.id
                )));
            }
            vertices.push(VertexSpec::new(v.id, v.role, v.dim));
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, e) in self.edges.into_iter().enumerate() {
            let edge = canonicalize(e.u, e.v, e.cu, e.cv, C64::new(e.w[0], e.w[1]))
                .map_err(|err| GraphError::Structure(format!("edges[{i}]: {err}")))?;
            for (x, c) in [(edge.key.u, edge.key.cu), (edge.key.v, edge.key.cv)] {
                let Some(vs) = vertices.get(x) else {
                    return Err(GraphError::Structure(format!("edges[{i}]: vertex {x} does not exist")));
                };
                if c >= vs.local_dim {
                    return Err(GraphError::Structure(format!(
                        "edges[{i}]: color {c} out of range for vertex {x} (dim {})",
                        vs.local_dim
                    )));
                }
            }
            if !e.w[0].is_finite() || !e.w[1].is_finite() {
                return Err(GraphError::Structure(format!("edges[{i}]: weight is not finite")));
            }
            edges.push(edge);
        }
        let (graph, dups) = ColoredGraph::with_merges(self.mode, self.weight_domain, vertices, edges);
        let warnings = dups
            .into_iter()
            .map(|k| format!("duplicate edge {k}: weights summed into a single edge"))
            .collect();
        Ok((graph, warnings))
    }
}

impl Serialize for ColoredGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ColoredGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = GraphDoc::deserialize(d)?;
        doc.into_graph().map(|(g, _)| g).map_err(serde::de::Error::custom)
    }
}

/// One broken structural rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.rule, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: &'static str, detail: String) {
        self.violations.push(Violation { rule, detail });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Check every structural rule of a graph as used under `mode`.
/// Self-loops are only legal in the photon-number basis.
pub fn validate(graph: &ColoredGraph, mode: Mode) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = graph.vertices.len();

    for (i, v) in graph.vertices.iter().enumerate() {
        if v.id != i {
            report.push("vertex ids", format!("position {i} has id {}", v.id));
        }
        if v.local_dim == 0 {
            report.push("local dimension", format!("vertex {i} has dim 0"));
        }
    }
    let envs = graph.vertices_with_role(VertexRole::Environment);
    if envs.len() > 1 {
        report.push("single environment", format!("environment vertices {envs:?}"));
    }

    for w in graph.edges.windows(2) {
        if w[0].key >= w[1].key {
            report.push("edge order", format!("{} not before {}", w[0].key, w[1].key));
        }
    }

    for e in &graph.edges {
        let k = e.key;
        if k != EdgeKey::new(k.u, k.v, k.cu, k.cv) {
            report.push("canonical edge", format!("{k}"));
        }
        let mut in_range = true;
        for (x, c) in [(k.u, k.cu), (k.v, k.cv)] {
            if x >= n {
                report.push("edge endpoint", format!("{k}: vertex {x} does not exist"));
                in_range = false;
            } else if c >= graph.vertices[x].local_dim {
                report.push("edge color", format!("{k}: color {c} exceeds dim of vertex {x}"));
            }
        }
        if !e.weight.re.is_finite() || !e.weight.im.is_finite() {
            report.push("finite weight", format!("{k}"));
        }
        if graph.weight_domain == WeightDomain::Real && e.weight.im != 0.0 {
            report.push("real weights", format!("{k} has imaginary part {}", e.weight.im));
        }
        if !in_range {
            continue;
        }
        let (ru, rv) = (graph.vertices[k.u].role, graph.vertices[k.v].role);
        if ru == VertexRole::Input && rv == VertexRole::Input {
            report.push("input-input edge", format!("{k}"));
        }
        if k.is_loop() {
            if ru == VertexRole::Environment {
                report.push("environment self-loop", format!("{k}"));
            }
            if mode != Mode::Fock {
                report.push("self-loop outside fock mode", format!("{k}"));
            }
        }
    }
    if mode == Mode::Fock && !envs.is_empty() {
        report.push(
            "environment in fock mode",
            "number-basis states with an environment vertex are not supported".into(),
        );
    }
    report
}
