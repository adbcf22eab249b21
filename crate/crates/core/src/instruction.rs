//! Experiment configs: resources, detection rule, target, constraints and
//! optimizer settings for one discovery run.
//!
//! Measurement and communication tasks need no code of their own. A Bell
//! analyzer is a state target over input vertices; a network task is a list
//! of forbidden edges plus party labels that only appear in reports.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::enumeration::ConditioningRule;
use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, Edge, EdgeKey, Mode, VertexRole, VertexSpec};
use crate::objectives::{resolve_ket, GateRowDoc, KetEntry, PartitionSize, TargetDoc, TargetSpec};
use crate::optimizer::{discover_graph, DiscoveryResult, OptimizerConfig};
use crate::state::Ket;

// ---------------------------------------------------------------- wire format

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexGroupDoc {
    pub role: VertexRole,
    pub dim: usize,
    /// Repeat this vertex `count` times.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: usize,
}

fn one() -> usize {
    1
}

fn is_one(n: &usize) -> bool {
    *n == 1
}

/// `[u, v]` forbids every color pair between two vertices; `[u, v, cu, cv]`
/// forbids one edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ForbiddenDoc {
    Pair([usize; 2]),
    Edge([usize; 4]),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitOptions {
    /// Write the Graphviz diagram next to the result.
    #[serde(default = "yes")]
    pub dot: bool,
    /// Write the state listing next to the result.
    #[serde(default = "yes")]
    pub state: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    pub vertices: Vec<VertexGroupDoc>,
    /// Vertices detected with exactly one photon; defaults to ancillas,
    /// inputs and the environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heralded: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_photons: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_count: Option<usize>,
    pub target: TargetDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forbidden_edges: Vec<ForbiddenDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parties: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emit: Option<EmitOptions>,
}

// ------------------------------------------------------------------- errors

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl ConfigErrors {
    pub fn mentions(&self, path: &str) -> bool {
        self.0.iter().any(|e| e.path.starts_with(path))
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

impl From<ConfigErrors> for Error {
    fn from(e: ConfigErrors) -> Self {
        Error::Config(e.to_string())
    }
}

// ------------------------------------------------------------ instruction set

#[derive(Clone, Debug, PartialEq)]
pub struct InstructionSet {
    pub doc: ConfigDoc,
    pub vertices: Vec<VertexSpec>,
    pub rule: ConditioningRule,
    pub target: TargetSpec,
    /// Forbidden edges as `(u, v, Some((cu, cv)))`, or `None` for all colors.
    pub forbidden: Vec<(usize, usize, Option<(usize, usize)>)>,
    pub optimizer: OptimizerConfig,
    pub emit: EmitOptions,
}

impl InstructionSet {
    pub fn mode(&self) -> Mode {
        self.doc.mode
    }

    pub fn vertices_with_role(&self, role: VertexRole) -> Vec<usize> {
        self.vertices.iter().filter(|v| v.role == role).map(|v| v.id).collect()
    }

    pub fn is_forbidden(&self, key: &EdgeKey) -> bool {
        self.forbidden.iter().any(|&(u, v, colors)| {
            (u, v) == (key.u, key.v)
                && colors.map_or(true, |(cu, cv)| EdgeKey::new(u, v, cu, cv) == *key)
        })
    }
}

/// Strict parse: unknown fields, out-of-range references and dimension
/// mismatches are all reported with their JSON paths.
pub fn parse(text: &str) -> Result<InstructionSet, ConfigErrors> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigErrors(vec![ConfigError { path: if path == "." { String::new() } else { path }, message: e.inner().to_string() }])
    })?;
    from_doc(doc)
}

pub fn from_doc(doc: ConfigDoc) -> Result<InstructionSet, ConfigErrors> {
    let mut errs = Vec::new();
    let mut err = |path: String, message: String| errs.push(ConfigError { path, message });

    let mut vertices = Vec::new();
    for (i, g) in doc.vertices.iter().enumerate() {
        if g.dim == 0 {
            err(format!("vertices[{i}].dim"), "local dimension must be at least 1".into());
        }
        if g.dim > 255 {
            err(format!("vertices[{i}].dim"), "local dimension above 255 is not supported".into());
        }
        if g.count == 0 {
            err(format!("vertices[{i}].count"), "count must be at least 1".into());
        }
        for _ in 0..g.count {
            vertices.push(VertexSpec::new(vertices.len(), g.role, g.dim));
        }
    }
    let nv = vertices.len();
    if nv == 0 {
        err("vertices".into(), "at least one vertex is required".into());
    }
    let envs = vertices.iter().filter(|v| v.role == VertexRole::Environment).count();
    if envs > 1 {
        err("vertices".into(), format!("at most one environment vertex is allowed, found {envs}"));
    }
    if envs > 0 && doc.mode == Mode::Fock {
        err("vertices".into(), "an environment vertex cannot be used in fock mode".into());
    }

    let heralds: Vec<usize> = match &doc.heralded {
        Some(h) => {
            for (i, &v) in h.iter().enumerate() {
                if v >= nv {
                    err(format!("heralded[{i}]"), format!("vertex {v} does not exist ({nv} vertices)"));
                }
            }
            h.clone()
        }
        None => vertices
            .iter()
            .filter(|v| matches!(v.role, VertexRole::Ancilla | VertexRole::Input | VertexRole::Environment))
            .map(|v| v.id)
            .collect(),
    };
    let rule = match doc.mode {
        Mode::Postselect => {
            if doc.total_photons.is_some() || doc.pair_count.is_some() {
                err("mode".into(), "total_photons and pair_count only apply to fock and heralded modes".into());
            }
            if nv % 2 == 1 {
                err("vertices".into(), format!("postselection needs an even number of vertices, found {nv}"));
            }
            ConditioningRule::postselect()
        }
        Mode::Heralded => {
            if doc.total_photons.is_some() {
                err("total_photons".into(), "heralded mode counts pairs; use pair_count".into());
            }
            let m = match doc.pair_count {
                Some(m) => m,
                None if nv % 2 == 0 => nv / 2,
                None => {
                    err("pair_count".into(), format!("required with an odd number of vertices ({nv})"));
                    0
                }
            };
            ConditioningRule::heralded(heralds, m)
        }
        Mode::Fock => {
            if doc.pair_count.is_some() {
                err("pair_count".into(), "fock mode counts photons; use total_photons".into());
            }
            let n = match doc.total_photons {
                Some(n) => n,
                None => {
                    err("total_photons".into(), "required in fock mode".into());
                    0
                }
            };
            ConditioningRule::fock(heralds, n)
        }
    };

    let mut forbidden = Vec::new();
    for (i, f) in doc.forbidden_edges.iter().enumerate() {
        let (u, v, colors) = match *f {
            ForbiddenDoc::Pair([u, v]) => (u, v, None),
            ForbiddenDoc::Edge([u, v, cu, cv]) => (u, v, Some((cu, cv))),
        };
        let path = format!("forbidden_edges[{i}]");
        if u >= nv || v >= nv {
            err(path, format!("edge ({u},{v}) references a vertex outside 0..{nv}"));
            continue;
        }
        if let Some((cu, cv)) = colors {
            if cu >= vertices[u].local_dim || cv >= vertices[v].local_dim {
                err(path, format!("colors ({cu},{cv}) out of range for vertices {u} and {v}"));
                continue;
            }
        }
        let key = match colors {
            Some((cu, cv)) => EdgeKey::new(u, v, cu, cv),
            None => EdgeKey::new(u, v, 0, 0),
        };
        forbidden.push((key.u, key.v, colors.map(|_| (key.cu, key.cv))));
    }
    for (party, members) in &doc.parties {
        for (i, &v) in members.iter().enumerate() {
            if v >= nv {
                err(format!("parties.{party}[{i}]"), format!("vertex {v} does not exist"));
            }
        }
    }

    let optimizer = doc.optimizer.clone().unwrap_or_default();
    if let Err(e) = optimizer.check() {
        err("optimizer".into(), e.to_string());
    }

    let target = check_target(&doc.target, &vertices, doc.mode, &mut err);
    if !errs.is_empty() {
        return Err(ConfigErrors(errs));
    }
    let emit = doc.emit.clone().unwrap_or(EmitOptions { dot: true, state: true });
    Ok(InstructionSet { target: target.unwrap(), doc, vertices, rule, forbidden, optimizer, emit })
}

fn check_target(
    doc: &TargetDoc,
    vertices: &[VertexSpec],
    mode: Mode,
    err: &mut impl FnMut(String, String),
) -> Option<TargetSpec> {
    let logical: Vec<&VertexSpec> =
        vertices.iter().filter(|v| matches!(v.role, VertexRole::Detector | VertexRole::Input)).collect();
    let system: Vec<&VertexSpec> = vertices.iter().filter(|v| v.role != VertexRole::Environment).collect();
    match doc {
        TargetDoc::PureState { terms, .. } => {
            if terms.is_empty() {
                err("target.terms".into(), "a pure target needs at least one term".into());
            }
            for (i, t) in terms.iter().enumerate() {
                check_ket(&t.ket, format!("target.terms[{i}].ket"), &logical, &system, mode, err);
            }
        }
        TargetDoc::DensityMatrix { basis, .. } => {
            for (i, b) in basis.iter().enumerate() {
                check_ket(b, format!("target.basis[{i}]"), &logical, &system, mode, err);
            }
        }
        TargetDoc::Entanglement { k } => {
            if let PartitionSize::Size(k) = k {
                if *k > logical.len() / 2 {
                    err("target.k".into(), format!("k = {k} exceeds half of the {} logical vertices", logical.len()));
                }
            }
        }
        TargetDoc::Gate { rows, .. } => {
            let inputs: Vec<&VertexSpec> = vertices.iter().filter(|v| v.role == VertexRole::Input).collect();
            let outputs: Vec<&VertexSpec> = vertices.iter().filter(|v| v.role == VertexRole::Detector).collect();
            if rows.is_empty() {
                err("target.rows".into(), "a gate needs at least one row".into());
            }
            for (i, r) in rows.iter().enumerate() {
                for (side, kets, verts) in [("in", &r.input, &inputs), ("out", &r.out, &outputs)] {
                    let path = format!("target.rows[{i}].{side}");
                    if kets.len() != verts.len() {
                        err(path, format!("{} entries for {} {side}put vertices", kets.len(), verts.len()));
                        continue;
                    }
                    for (j, (&c, v)) in kets.iter().zip(verts.iter()).enumerate() {
                        if c >= v.local_dim {
                            err(format!("{path}[{j}]"), format!("color {c} exceeds local dimension {}", v.local_dim));
                        }
                    }
                }
            }
        }
    }
    let resolved = match doc {
        TargetDoc::Gate { rows, loss } => encode_gate_rows(rows, vertices).map(|mut t| {
            t.loss = loss.unwrap_or_default();
            t
        }),
        other => TargetSpec::from_doc(other, mode),
    };
    match resolved {
        Ok(t) => Some(t),
        Err(e) => {
            err("target".into(), e.to_string());
            None
        }
    }
}

fn check_ket(
    entries: &[KetEntry],
    path: String,
    logical: &[&VertexSpec],
    system: &[&VertexSpec],
    mode: Mode,
    err: &mut impl FnMut(String, String),
) {
    let positions = match entries.len() {
        n if n == logical.len() => logical,
        n if n == system.len() => system,
        n => {
            err(path, format!("ket has {n} positions; expected {} (detectors and inputs) or {}", logical.len(), system.len()));
            return;
        }
    };
    let ket = resolve_ket(entries, mode);
    for (j, (colors, v)) in ket.0.iter().zip(positions).enumerate() {
        if let Some(c) = colors.iter().find(|&&c| c as usize >= v.local_dim) {
            err(format!("{path}[{j}]"), format!("color {c} exceeds local dimension {} of vertex {}", v.local_dim, v.id));
        }
    }
}

/// `sum_rows |in>|out>` over the logical vertices (inputs and detectors in
/// vertex order), normalized. In-kets must be distinct basis states.
pub fn encode_gate_target(rows: &[(Vec<usize>, Vec<usize>)], iset: &InstructionSet) -> Result<TargetSpec> {
    let docs: Vec<GateRowDoc> = rows.iter().map(|(i, o)| GateRowDoc { input: i.clone(), out: o.clone() }).collect();
    encode_gate_rows(&docs, &iset.vertices)
}

fn encode_gate_rows(rows: &[GateRowDoc], vertices: &[VertexSpec]) -> Result<TargetSpec> {
    let mut seen = std::collections::BTreeSet::new();
    for r in rows {
        if !seen.insert(&r.input) {
            return Err(Error::Config(format!("gate in-ket {:?} appears twice; in-kets must be orthonormal", r.input)));
        }
    }
    let terms = rows
        .iter()
        .map(|r| {
            let (mut ins, mut outs) = (r.input.iter(), r.out.iter());
            let mut colors = Vec::new();
            for v in vertices {
                let next = match v.role {
                    VertexRole::Input => ins.next(),
                    VertexRole::Detector => outs.next(),
                    _ => continue,
                };
                colors.push(*next.ok_or_else(|| Error::Dimension("gate row shorter than the vertex list".into()))?);
            }
            Ok((Ket::qudits(&colors), C64::new(1.0, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    TargetSpec::pure(terms)
}

/// Re-serialize a parsed config.
pub fn emit(iset: &InstructionSet) -> String {
    serde_json::to_string_pretty(&iset.doc).expect("configs always serialize")
}

/// Every allowed edge: all color pairs between vertex pairs, minus
/// input-input pairs, forbidden edges, and self-loops outside fock mode.
/// Loops are also left off environment and heralded vertices, where they
/// could never contribute. Weights are placeholders of 1.
pub fn build_initial_graph(iset: &InstructionSet) -> ColoredGraph {
    let vs = &iset.vertices;
    let mode = iset.mode();
    let mut edges = Vec::new();
    for u in 0..vs.len() {
        for v in u..vs.len() {
            if u == v {
                let loopable = mode == Mode::Fock
                    && vs[u].role != VertexRole::Environment
                    && !iset.rule.heralded_vertices.contains(&u);
                if !loopable {
                    continue;
                }
            } else if vs[u].role == VertexRole::Input && vs[v].role == VertexRole::Input {
                continue;
            }
            for cu in 0..vs[u].local_dim {
                for cv in 0..vs[v].local_dim {
                    if u == v && cv < cu {
                        continue;
                    }
                    let key = EdgeKey::new(u, v, cu, cv);
                    if !iset.is_forbidden(&key) {
                        edges.push(Edge::new(key, C64::new(1.0, 0.0)));
                    }
                }
            }
        }
    }
    ColoredGraph::new(mode, iset.optimizer.weight_domain, vs.clone(), edges)
}

/// Build the initial graph and run the restart/prune search.
pub fn discover(iset: &InstructionSet, seed: u64, threads: usize) -> Result<DiscoveryResult> {
    let graph = build_initial_graph(iset);
    discover_graph(&graph, &iset.rule, &iset.target, &iset.optimizer, seed, threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate;
    use crate::objectives::TargetKind;
    use proptest::prelude::*;

    const GHZ62: &str = r#"{
        "name": "ghz_6_2",
        "mode": "postselect",
        "vertices": [{"role": "detector", "dim": 2, "count": 6}],
        "target": {"kind": "pure_state", "terms": [
            {"ket": [0,0,0,0,0,0], "amp": 1},
            {"ket": [1,1,1,1,1,1], "amp": 1}
        ]},
        "forbidden_edges": [[3,0], [3,1], [3,5]]
    }"#;

    #[test]
    fn ghz62_workflow_config() {
        let iset = parse(GHZ62).unwrap();
        assert_eq!(iset.vertices.len(), 6);
        let g = build_initial_graph(&iset);
        // 15 pairs minus 3 forbidden, 4 color pairs each.
        assert_eq!(g.num_edges(), 12 * 4);
        assert!(g.edges().iter().all(|e| !(e.key.touches(3) && [0, 1, 5].iter().any(|&x| e.key.touches(x)))));
        assert!(validate(&g, Mode::Postselect).is_ok());
    }

    #[test]
    fn color_out_of_range_is_reported_with_path() {
        let text = GHZ62.replace("[1,1,1,1,1,1]", "[1,1,2,1,1,1]");
        let e = parse(&text).unwrap_err();
        assert!(e.mentions("target.terms[1].ket[2]"), "{e}");
    }

    #[test]
    fn forbidden_edge_out_of_range() {
        let text = GHZ62.replace("[3,5]]", "[3,5], [7,9]]");
        let e = parse(&text).unwrap_err();
        assert!(e.mentions("forbidden_edges[3]"), "{e}");
    }

    #[test]
    fn unknown_fields_are_errors() {
        let text = GHZ62.replace("\"name\"", "\"nmae\"");
        let e = parse(&text).unwrap_err();
        assert!(e.to_string().contains("nmae"), "{e}");
        let text = GHZ62.replace("\"count\": 6", "\"count\": 6, \"colour\": 1");
        let e = parse(&text).unwrap_err();
        assert!(e.mentions("vertices[0]"), "{e}");
    }

    #[test]
    fn dense_bicolored_k4() {
        let text = r#"{"vertices":[{"role":"detector","dim":2,"count":4}],
            "target":{"kind":"entanglement","k":1}}"#;
        let g = build_initial_graph(&parse(text).unwrap());
        assert_eq!(g.num_edges(), 24);
    }

    #[test]
    fn bell_analyzer_has_no_input_pairs() {
        let text = r#"{"vertices":[{"role":"input","dim":2,"count":2},{"role":"detector","dim":1,"count":2}],
            "target":{"kind":"pure_state","terms":[{"ket":[0,1,0,0],"amp":1},{"ket":[1,0,0,0],"amp":-1}]}}"#;
        let iset = parse(text).unwrap();
        let g = build_initial_graph(&iset);
        assert!(g.edges().iter().all(|e| !(e.key.u < 2 && e.key.v < 2)));
        // in-det: 2*2 pairs * 2 colors, det-det: 1.
        assert_eq!(g.num_edges(), 9);
        assert!(validate(&g, Mode::Postselect).is_ok());
    }

    #[test]
    fn swapping_setup_omits_forbidden_pair() {
        let text = r#"{"vertices":[{"role":"detector","dim":2},{"role":"ancilla","dim":1,"count":2},{"role":"detector","dim":2}],
            "target":{"kind":"pure_state","terms":[{"ket":[0,0],"amp":1},{"ket":[1,1],"amp":1}]},
            "forbidden_edges":[[0,3]], "parties":{"alice":[0],"bob":[3]}}"#;
        let g = build_initial_graph(&parse(text).unwrap());
        assert!(g.edges().iter().all(|e| (e.key.u, e.key.v) != (0, 3)));
    }

    #[test]
    fn fock_graph_has_loops_off_heralds() {
        let text = r#"{"mode":"fock","total_photons":4,"vertices":[{"role":"detector","dim":1,"count":2},{"role":"ancilla","dim":1}],
            "target":{"kind":"pure_state","terms":[{"ket":[3,0],"amp":1},{"ket":[0,3],"amp":-1}]}}"#;
        let iset = parse(text).unwrap();
        assert_eq!(iset.rule, ConditioningRule::fock(vec![2], 4));
        let g = build_initial_graph(&iset);
        assert_eq!(g.num_edges(), 3 + 2);
        assert!(validate(&g, Mode::Fock).is_ok());
    }

    #[test]
    fn mode_requirements() {
        let base = r#"{"mode":"fock","vertices":[{"role":"detector","dim":1,"count":2}],
            "target":{"kind":"pure_state","terms":[{"ket":[2,0],"amp":1}]}}"#;
        assert!(parse(base).unwrap_err().mentions("total_photons"));
        let odd = r#"{"vertices":[{"role":"detector","dim":2,"count":3}],
            "target":{"kind":"pure_state","terms":[{"ket":[0,0,0],"amp":1}]}}"#;
        assert!(parse(odd).unwrap_err().mentions("vertices"));
    }

    #[test]
    fn cnot_truth_table() {
        let text = r#"{"vertices":[{"role":"input","dim":2,"count":2},{"role":"detector","dim":2,"count":2}],
            "target":{"kind":"gate","rows":[
                {"in":[0,0],"out":[0,0]},{"in":[0,1],"out":[0,1]},{"in":[1,0],"out":[1,1]},{"in":[1,1],"out":[1,0]}]}}"#;
        let iset = parse(text).unwrap();
        let TargetKind::Pure(terms) = &iset.target.kind else { panic!() };
        let kets: Vec<&Ket> = terms.iter().map(|(k, _)| k).collect();
        assert_eq!(
            kets,
            [[0, 0, 0, 0], [0, 1, 0, 1], [1, 0, 1, 1], [1, 1, 1, 0]].iter().map(|k| Ket::qudits(k)).collect::<Vec<_>>().iter().collect::<Vec<_>>()
        );
        assert!(terms.iter().all(|(_, a)| (a.re - 0.5).abs() < 1e-15));
    }

    #[test]
    fn identity_and_reduced_gates() {
        let one_qubit = r#"{"vertices":[{"role":"input","dim":2},{"role":"detector","dim":2}],
            "target":{"kind":"pure_state","terms":[{"ket":[0,0],"amp":1}]}}"#;
        let iset = parse(one_qubit).unwrap();
        let t = encode_gate_target(&[(vec![0], vec![0]), (vec![1], vec![1])], &iset).unwrap();
        assert_eq!(t, TargetSpec::pure(vec![(Ket::qudits(&[0, 0]), C64::new(1.0, 0.0)), (Ket::qudits(&[1, 1]), C64::new(1.0, 0.0))]).unwrap());
        assert!(encode_gate_target(&[(vec![0], vec![0]), (vec![0], vec![1])], &iset).is_err());

        let control_only = r#"{"vertices":[{"role":"input","dim":2},{"role":"detector","dim":2,"count":2},{"role":"ancilla","dim":1,"count":1}],
            "pair_count": 2, "mode": "heralded",
            "target":{"kind":"gate","rows":[{"in":[0],"out":[0,0]},{"in":[1],"out":[1,1]}]}}"#;
        let iset = parse(control_only).unwrap();
        let TargetKind::Pure(terms) = &iset.target.kind else { panic!() };
        assert_eq!(terms[0].0, Ket::qudits(&[0, 0, 0]));
        assert_eq!(terms[1].0, Ket::qudits(&[1, 1, 1]));
    }

    #[test]
    fn emit_round_trip() {
        let iset = parse(GHZ62).unwrap();
        let again = parse(&emit(&iset)).unwrap();
        assert_eq!(iset, again);
        let a: serde_json::Value = serde_json::from_str(GHZ62).unwrap();
        let b: serde_json::Value = serde_json::from_str(&emit(&iset)).unwrap();
        assert_eq!(numbers_as_floats(a), numbers_as_floats(b));
    }

    fn numbers_as_floats(v: serde_json::Value) -> serde_json::Value {
        use serde_json::Value;
        match v {
            Value::Number(n) => serde_json::json!(n.as_f64().unwrap()),
            Value::Array(a) => Value::Array(a.into_iter().map(numbers_as_floats).collect()),
            Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, numbers_as_floats(v))).collect()),
            other => other,
        }
    }

    fn closed_form_count(roles: &[(VertexRole, usize)], fock: bool, forbidden: &[(usize, usize)]) -> usize {
        let mut n = 0;
        for u in 0..roles.len() {
            for v in u + 1..roles.len() {
                let both_inputs = roles[u].0 == VertexRole::Input && roles[v].0 == VertexRole::Input;
                if !both_inputs && !forbidden.contains(&(u, v)) {
                    n += roles[u].1 * roles[v].1;
                }
            }
            // Loops only on detectors in fock mode (everything else is heralded).
            if fock && roles[u].0 == VertexRole::Detector && !forbidden.contains(&(u, u)) {
                n += roles[u].1 * (roles[u].1 + 1) / 2;
            }
        }
        n
    }

    proptest! {
        #[test]
        fn initial_graph_counts(
            roles in prop::collection::vec((0usize..3, 1usize..4), 2..7),
            fock in any::<bool>(),
            forb in prop::collection::vec((0usize..7, 0usize..7), 0..4),
        ) {
            let names = ["detector", "ancilla", "input"];
            let roles_spec: Vec<(VertexRole, usize)> = roles.iter().map(|&(r, d)| {
                ([VertexRole::Detector, VertexRole::Ancilla, VertexRole::Input][r], d)
            }).collect();
            let nv = roles.len();
            let forb: Vec<(usize, usize)> = forb.into_iter().filter(|&(u, v)| u < nv && v < nv)
                .map(|(u, v)| (u.min(v), u.max(v))).collect();
            let verts: Vec<String> = roles.iter().map(|&(r, d)| format!(r#"{{"role":"{}","dim":{d}}}"#, names[r])).collect();
            let forb_json: Vec<String> = forb.iter().map(|(u, v)| format!("[{u},{v}]")).collect();
            let ket: Vec<String> = roles.iter().filter(|r| r.0 != 1).map(|_| "0".to_string()).collect();
            prop_assume!(!ket.is_empty());
            let mode = if fock {
                format!(r#""mode":"fock","total_photons":{},"#, 2 * nv)
            } else {
                format!(r#""mode":"heralded","pair_count":{},"#, nv)
            };
            let text = format!(
                r#"{{{mode}"vertices":[{}],"forbidden_edges":[{}],"target":{{"kind":"pure_state","terms":[{{"ket":[{}],"amp":1}}]}}}}"#,
                verts.join(","), forb_json.join(","), ket.join(",")
            );
            let iset = parse(&text).unwrap();
            let g = build_initial_graph(&iset);
            prop_assert_eq!(g.num_edges(), closed_form_count(&roles_spec, fock, &forb));
            let mode = if fock { Mode::Fock } else { Mode::Heralded };
            prop_assert!(validate(&g, mode).is_ok(), "{}", validate(&g, mode));
        }
    }
}
