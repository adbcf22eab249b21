#![allow(dead_code)]

use graphdisc::enumeration::ConditioningRule;
use graphdisc::objectives::{LossName, TargetKind, TargetSpec};
use graphdisc::state::Ket;
use graphdisc::{ColoredGraph, Edge, EdgeKey, Mode, VertexRole, WeightDomain, C64};
use rand::seq::SliceRandom;
use rand::Rng;

pub const MODES: [Mode; 3] = [Mode::Postselect, Mode::Heralded, Mode::Fock];

pub fn fixture(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn schema(name: &str) -> serde_json::Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Validation messages of `instance` against the named schema file.
pub fn schema_errors(name: &str, instance: &serde_json::Value) -> Vec<String> {
    let compiled = jsonschema::JSONSchema::compile(&schema(name)).expect("schema compiles");
    let errors = match compiled.validate(instance) {
        Ok(()) => vec![],
        Err(errs) => errs.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    errors
}

fn weight(rng: &mut impl Rng, domain: WeightDomain) -> C64 {
    let mag = rng.gen_range(0.2..1.0);
    match domain {
        WeightDomain::Real => C64::new(if rng.gen_bool(0.5) { mag } else { -mag }, 0.0),
        WeightDomain::Complex => C64::from_polar(mag, rng.gen_range(0.0..std::f64::consts::TAU)),
    }
}

/// A random graph and detection rule: at most 6 vertices, 8 edges, local
/// dimension 3 and 3 photon pairs. Returns the pair count the rule implies.
pub fn random_case(rng: &mut impl Rng, mode: Mode) -> (ColoredGraph, ConditioningRule, usize) {
    let n = rng.gen_range(1..=6);
    let dims: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
    let domain = if rng.gen_bool(0.5) { WeightDomain::Real } else { WeightDomain::Complex };
    let roles: Vec<(VertexRole, usize)> = dims
        .iter()
        .map(|&d| (if rng.gen_bool(0.25) { VertexRole::Ancilla } else { VertexRole::Detector }, d))
        .collect();
    let ne = rng.gen_range(0..=8);
    let mut edges = Vec::new();
    for _ in 0..ne {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b && mode != Mode::Fock {
            continue;
        }
        let key = EdgeKey::new(a, b, rng.gen_range(0..dims[a]), rng.gen_range(0..dims[b]));
        edges.push(Edge::new(key, weight(rng, domain)));
    }
    let graph = ColoredGraph::from_roles(mode, domain, &roles, edges);
    let heralds: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
    let m = rng.gen_range(0..=3);
    match mode {
        Mode::Postselect => (graph, ConditioningRule::postselect(), n / 2),
        Mode::Heralded => (graph, ConditioningRule::heralded(heralds, m), m),
        Mode::Fock => (graph, ConditioningRule::fock(heralds, 2 * m), m),
    }
}

fn random_ket(rng: &mut impl Rng, dims: &[usize], mode: Mode) -> Ket {
    match mode {
        Mode::Fock => Ket::counts(&dims.iter().map(|_| rng.gen_range(0..=3)).collect::<Vec<_>>()),
        _ => Ket::qudits(&dims.iter().map(|&d| rng.gen_range(0..d)).collect::<Vec<_>>()),
    }
}

/// A (graph, rule, target) triple whose graph produces a nonzero state.
/// Targets share most of their kets with the produced state so the loss is
/// not flat.
pub fn random_triple(rng: &mut impl Rng) -> Option<(ColoredGraph, ConditioningRule, TargetSpec)> {
    let mode = *MODES.choose(rng).unwrap();
    let n = 2 * rng.gen_range(1..=3);
    let dims: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=3)).collect();
    let domain = if rng.gen_bool(0.5) { WeightDomain::Real } else { WeightDomain::Complex };
    let with_env = mode != Mode::Fock && rng.gen_bool(0.25) && n >= 4;
    let roles: Vec<(VertexRole, usize)> = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| (if with_env && i == n - 1 { VertexRole::Environment } else { VertexRole::Detector }, d))
        .collect();
    let mut edges = Vec::new();
    for _ in 0..rng.gen_range(2..=8) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b && mode != Mode::Fock {
            continue;
        }
        let key = EdgeKey::new(a, b, rng.gen_range(0..dims[a]), rng.gen_range(0..dims[b]));
        edges.push(Edge::new(key, weight(rng, domain)));
    }
    let graph = ColoredGraph::from_roles(mode, domain, &roles, edges);
    let heralds: Vec<usize> = if with_env { vec![n - 1] } else { vec![] };
    let rule = match mode {
        Mode::Postselect => ConditioningRule::postselect(),
        Mode::Heralded => ConditioningRule::heralded(heralds, n / 2),
        Mode::Fock => ConditioningRule::fock(heralds, n),
    };
    let state = graphdisc::state::compute_state(&graph, &rule);
    if state.norm_sqr() < 1e-6 {
        return None;
    }
    let logical: Vec<usize> = if with_env { dims[..n - 1].to_vec() } else { dims.clone() };
    let kind = rng.gen_range(0..4);
    let target = if kind == 3 && !with_env && mode != Mode::Fock {
        TargetSpec { kind: TargetKind::Entanglement { k: Some(rng.gen_range(1..=n / 2)) }, loss: LossName::PuritySum }
    } else {
        let mut terms: Vec<(Ket, C64)> = Vec::new();
        for (k, _) in state.terms.iter().take(3) {
            let k = if with_env { k.split_off(n - 1).0 } else { k.clone() };
            terms.push((k, weight(rng, domain)));
        }
        terms.push((random_ket(rng, &logical, mode), weight(rng, domain)));
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        terms.dedup_by(|a, b| a.0 == b.0);
        if with_env && kind >= 2 {
            // Mixture of the pure target with a diagonal part: full rank on its basis.
            let lambda = rng.gen_range(0.2..0.8);
            let basis: Vec<Ket> = terms.iter().map(|t| t.0.clone()).collect();
            let norm: f64 = terms.iter().map(|t| t.1.norm_sqr()).sum();
            let d = basis.len();
            let m = nalgebra::DMatrix::from_fn(d, d, |i, j| {
                let coherent = terms[i].1 * terms[j].1.conj() * (lambda / norm);
                if i == j {
                    coherent + C64::new((1.0 - lambda) / d as f64, 0.0)
                } else {
                    coherent
                }
            });
            let rho = graphdisc::state::DensityMatrix::new(basis, m).ok()?;
            return Some((graph, rule, TargetSpec { kind: TargetKind::Density(rho), loss: LossName::Fidelity }));
        }
        let mut pure = TargetSpec::pure(terms).ok()?;
        if kind == 2 && !with_env {
            pure.loss = LossName::CountRate;
        }
        pure
    };
    Some((graph, rule, target))
}

pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-5;
/// Gradient scale below which the comparison becomes absolute; central
/// differences at this step carry about 1e-10 of rounding noise.
pub const FD_FLOOR: f64 = 1e-3;

/// Largest relative deviation between the analytic gradient and central
/// differences of the loss, over every real coordinate.
pub fn gradient_error(graph: &ColoredGraph, rule: &ConditioningRule, target: &TargetSpec) -> Option<f64> {
    let obj = graphdisc::objectives::Objective::compile(graph, rule, target).ok()?;
    let analytic = graphdisc::objectives::loss_gradient(graph, rule, target).ok()?;
    let w0 = graph.weights();
    let complex = graph.weight_domain == WeightDomain::Complex;
    let mut numeric = Vec::new();
    for e in 0..w0.len() {
        let dirs: &[C64] = if complex { &[C64::new(1.0, 0.0), C64::new(0.0, 1.0)] } else { &[C64::new(1.0, 0.0)] };
        for &d in dirs {
            let mut wp = w0.clone();
            let mut wm = w0.clone();
            wp[e] += d * FD_STEP;
            wm[e] -= d * FD_STEP;
            numeric.push((obj.loss(&wp).ok()? - obj.loss(&wm).ok()?) / (2.0 * FD_STEP));
        }
    }
    assert_eq!(numeric.len(), analytic.len());
    let scale = numeric.iter().chain(&analytic).fold(FD_FLOOR, |m, x| m.max(x.abs()));
    Some(analytic.iter().zip(&numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max) / scale)
}
