//! From edge selections to kets and amplitudes.
//!
//! A selection with edge multiplicities `m_e` contributes
//! `prod_e w_e^m_e / m_e! * prod_(v,c) sqrt(n_(v,c)!)` to the ket it creates,
//! where `n_(v,c)` counts photons in color `c` at vertex `v`. This is the
//! multinomial expansion of the pair-creation operator applied to vacuum; the
//! `oracle` module checks it term by term.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumeration::{enumerate, ConditioningRule, EdgeSelection};
use crate::error::{Error, Result};
use crate::graph::ColoredGraph;

/// Relative threshold below which merged amplitudes are dropped.
pub const PRUNE_RELATIVE: f64 = 1e-14;

/// Occupation of every vertex: the sorted list of photon colors it holds.
/// A single-photon vertex holds one color; an empty list is a vacancy.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ket(pub Vec<Vec<u8>>);

impl Ket {
    /// One photon per vertex with the given colors.
    pub fn qudits(colors: &[usize]) -> Self {
        Self(colors.iter().map(|&c| vec![c as u8]).collect())
    }

    /// Photon counts in color 0.
    pub fn counts(counts: &[usize]) -> Self {
        Self(counts.iter().map(|&n| vec![0; n]).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn photons(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    /// Colors per vertex when every vertex holds exactly one photon.
    pub fn qudit_colors(&self) -> Option<Vec<usize>> {
        self.0.iter().map(|v| (v.len() == 1).then(|| v[0] as usize)).collect()
    }

    /// The ket with vertex `vertex` removed, and that vertex's occupation.
    pub fn split_off(&self, vertex: usize) -> (Ket, Vec<u8>) {
        let mut rest = self.0.clone();
        let removed = rest.remove(vertex);
        (Ket(rest), removed)
    }

    /// `prod_(v,c) n_(v,c)!` over every mode of this ket.
    pub fn mode_factorial(&self) -> f64 {
        let mut f = 1.0;
        for v in &self.0 {
            let mut i = 0;
            while i < v.len() {
                let mut j = i;
                while j < v.len() && v[j] == v[i] {
                    j += 1;
                }
                f *= factorial(j - i);
                i = j;
            }
        }
        f
    }
}

impl fmt::Display for Ket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("|")?;
        if let Some(colors) = self.qudit_colors() {
            let wide = colors.iter().any(|&c| c > 9);
            for (i, c) in colors.iter().enumerate() {
                if wide && i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{c}")?;
            }
        } else if self.0.iter().flatten().all(|&c| c == 0) {
            for (i, v) in self.0.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}", v.len())?;
            }
        } else {
            for v in &self.0 {
                f.write_str("{")?;
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("}")?;
            }
        }
        f.write_str("⟩")
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Sparse state: ket to amplitude, in ket order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KetMap {
    pub terms: BTreeMap<Ket, C64>,
    pub normalized: bool,
}

impl KetMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Ket, C64)>) -> Self {
        let mut map = Self::new();
        for (k, a) in terms {
            *map.terms.entry(k).or_insert(C64::new(0.0, 0.0)) += a;
        }
        map
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, ket: &Ket) -> C64 {
        self.terms.get(ket).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &KetMap) -> C64 {
        self.terms.iter().map(|(k, a)| a.conj() * other.get(k)).sum()
    }

    /// Drop entries below `PRUNE_RELATIVE` times the largest magnitude.
    pub fn prune(&mut self) {
        let max = self.terms.values().map(|a| a.norm()).fold(0.0, f64::max);
        let cut = PRUNE_RELATIVE * max;
        self.terms.retain(|_, a| a.norm() >= cut && a.norm() > 0.0);
    }

    /// Terms sorted by decreasing magnitude (ties in ket order).
    pub fn by_magnitude(&self) -> Vec<(&Ket, C64)> {
        let mut v: Vec<_> = self.terms.iter().map(|(k, a)| (k, *a)).collect();
        v.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()));
        v
    }

    pub fn to_json(&self) -> String {
        let doc: Vec<StateTermDoc> = self
            .terms
            .iter()
            .map(|(k, a)| StateTermDoc {
                ket: k.0.iter().map(|v| v.iter().map(|&c| c as usize).collect()).collect(),
                amp: [a.re, a.im],
            })
            .collect();
        serde_json::to_string(&doc).expect("state documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Vec<StateTermDoc> = serde_json::from_str(text)?;
        Ok(Self::from_terms(doc.into_iter().map(|t| {
            (Ket(t.ket.into_iter().map(|v| v.into_iter().map(|c| c as u8).collect()).collect()), C64::new(t.amp[0], t.amp[1]))
        })))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateTermDoc {
    ket: Vec<Vec<usize>>,
    amp: [f64; 2],
}

/// Ket and amplitude produced by one selection.
pub fn selection_amplitude(graph: &ColoredGraph, selection: &EdgeSelection) -> (Ket, C64) {
    let mut amp = C64::new(1.0, 0.0);
    for &(i, m) in &selection.entries {
        amp *= graph.edges()[i].weight.powu(m) / factorial(m as usize);
    }
    let ket = Ket(selection.vertex_colors(graph));
    let amp = amp * ket.mode_factorial().sqrt();
    (ket, amp)
}

/// The unnormalized conditioned state of `graph`.
pub fn compute_state(graph: &ColoredGraph, rule: &ConditioningRule) -> KetMap {
    let mut state = KetMap::new();
    for sel in enumerate(graph, rule) {
        let (ket, amp) = selection_amplitude(graph, &sel);
        *state.terms.entry(ket).or_insert(C64::new(0.0, 0.0)) += amp;
    }
    state.prune();
    state
}

/// Like [`compute_state`], evaluating amplitudes on `workers` threads. The
/// selection stream is consumed in chunks and merged in stream order, so the
/// result is bit-identical to the sequential one.
pub fn compute_state_parallel(graph: &ColoredGraph, rule: &ConditioningRule, workers: usize) -> Result<KetMap> {
    const CHUNK: usize = 4096;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Argument(e.to_string()))?;
    let mut state = KetMap::new();
    let mut stream = enumerate(graph, rule);
    loop {
        let chunk: Vec<EdgeSelection> = stream.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            break;
        }
        let amps: Vec<(Ket, C64)> = pool.install(|| chunk.par_iter().map(|s| selection_amplitude(graph, s)).collect());
        for (ket, amp) in amps {
            *state.terms.entry(ket).or_insert(C64::new(0.0, 0.0)) += amp;
        }
    }
    state.prune();
    Ok(state)
}

/// Scale to unit norm and rotate the global phase so the largest amplitude
/// (first in ket order among equals) is real and positive.
pub fn normalize(state: &KetMap) -> Result<KetMap> {
    let norm = state.norm_sqr().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroState);
    }
    let lead = state
        .terms
        .values()
        .fold(C64::new(0.0, 0.0), |best, &a| if a.norm() > best.norm() { a } else { best });
    let phase = lead.conj() / lead.norm();
    let terms = state.terms.iter().map(|(k, a)| (k.clone(), a * phase / norm)).collect();
    Ok(KetMap { terms, normalized: true })
}

/// A density matrix over an explicit ket basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    pub basis: Vec<Ket>,
    pub matrix: DMatrix<C64>,
    pub normalized: bool,
}

impl DensityMatrix {
    pub fn new(basis: Vec<Ket>, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for a basis of {} kets",
                matrix.nrows(),
                matrix.ncols(),
                basis.len()
            )));
        }
        Ok(Self { basis, matrix, normalized: false })
    }

    /// `|psi><psi|` over the kets of `state`.
    pub fn pure(state: &KetMap) -> Self {
        let basis: Vec<Ket> = state.terms.keys().cloned().collect();
        let v: Vec<C64> = state.terms.values().copied().collect();
        let n = v.len();
        let matrix = DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj());
        Self { basis, matrix, normalized: state.normalized }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        let t = self.trace();
        (&self.matrix * &self.matrix).trace().re / (t * t)
    }

    pub fn normalize(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(Error::ZeroState);
        }
        Ok(Self { basis: self.basis.clone(), matrix: &self.matrix / C64::new(t, 0.0), normalized: true })
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = hermitian_eigen(&self.matrix).0;
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Same operator expressed over `basis`, which must contain this basis.
    pub fn embed(&self, basis: &[Ket]) -> Result<Self> {
        let pos: BTreeMap<&Ket, usize> = basis.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let idx: Vec<usize> = self
            .basis
            .iter()
            .map(|k| pos.get(k).copied().ok_or_else(|| Error::Dimension(format!("ket {k} missing from basis"))))
            .collect::<Result<_>>()?;
        let mut m = DMatrix::zeros(basis.len(), basis.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                m[(i, j)] = self.matrix[(a, b)];
            }
        }
        Ok(Self { basis: basis.to_vec(), matrix: m, normalized: self.normalized })
    }
}

/// Eigenvalues and eigenvectors (as columns) of a Hermitian matrix.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    if m.nrows() == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

/// Trace out the environment vertex: `rho = sum_k |psi_k><psi_k|` where
/// `psi_k` collects the terms whose environment occupation is `k`.
pub fn trace_environment(state: &KetMap, env_vertex: Option<usize>) -> Result<DensityMatrix> {
    let env = env_vertex.ok_or(Error::NoEnvironment)?;
    let mut blocks: BTreeMap<Vec<u8>, Vec<(Ket, C64)>> = BTreeMap::new();
    let mut basis_set = std::collections::BTreeSet::new();
    for (ket, &amp) in &state.terms {
        if env >= ket.len() {
            return Err(Error::Dimension(format!("ket {ket} has no vertex {env}")));
        }
        let (sys, e) = ket.split_off(env);
        basis_set.insert(sys.clone());
        blocks.entry(e).or_default().push((sys, amp));
    }
    let basis: Vec<Ket> = basis_set.into_iter().collect();
    let index: BTreeMap<&Ket, usize> = basis.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for terms in blocks.values() {
        let mut v = vec![C64::new(0.0, 0.0); n];
        for (k, a) in terms {
            v[index[k]] += *a;
        }
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    Ok(DensityMatrix { basis, matrix: m, normalized: false })
}

/// One monomial of the state polynomial: `coeff * prod w_e^m_e` on ket `ket`.
#[derive(Clone, Debug, PartialEq)]
pub struct Term {
    pub ket: usize,
    pub coeff: f64,
    pub factors: Vec<(usize, u32)>,
}

/// The conditioned state as a polynomial in the edge weights, for repeated
/// evaluation under changing weights. Nothing is pruned.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePolynomial {
    pub kets: Vec<Ket>,
    pub terms: Vec<Term>,
    pub num_edges: usize,
}

impl StatePolynomial {
    pub fn build(graph: &ColoredGraph, rule: &ConditioningRule) -> Self {
        let mut raw = Vec::new();
        let mut kets = BTreeMap::new();
        for sel in enumerate(graph, rule) {
            let ket = Ket(sel.vertex_colors(graph));
            let coeff = ket.mode_factorial().sqrt()
                / sel.entries.iter().map(|&(_, m)| factorial(m as usize)).product::<f64>();
            kets.entry(ket.clone()).or_insert(());
            raw.push((ket, coeff, sel.entries));
        }
        let kets: Vec<Ket> = kets.into_keys().collect();
        let index: BTreeMap<&Ket, usize> = kets.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let terms = raw
            .into_iter()
            .map(|(ket, coeff, factors)| Term { ket: index[&ket], coeff, factors })
            .collect();
        Self { kets, terms, num_edges: graph.num_edges() }
    }

    pub fn amplitudes(&self, weights: &[C64]) -> Vec<C64> {
        let mut amps = vec![C64::new(0.0, 0.0); self.kets.len()];
        for t in &self.terms {
            let mut p = C64::new(t.coeff, 0.0);
            for &(e, m) in &t.factors {
                p *= weights[e].powu(m);
            }
            amps[t.ket] += p;
        }
        amps
    }

    pub fn to_ketmap(&self, weights: &[C64]) -> KetMap {
        let mut map = KetMap::from_terms(self.kets.iter().cloned().zip(self.amplitudes(weights)));
        map.prune();
        map
    }

    /// `G_e = sum_k conj(g_k) d a_k / d w_e` for the holomorphic amplitudes.
    /// With `g_k = dL/d conj(a_k)` of a real loss `L`, the derivatives are
    /// `dL/d Re w_e = 2 Re G_e` and `dL/d Im w_e = -2 Im G_e`.
    pub fn pullback(&self, weights: &[C64], g: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.num_edges];
        let mut pows: Vec<C64> = Vec::new();
        for t in &self.terms {
            let gk = g[t.ket].conj();
            if gk == C64::new(0.0, 0.0) {
                continue;
            }
            pows.clear();
            pows.extend(t.factors.iter().map(|&(e, m)| weights[e].powu(m)));
            for (j, &(e, m)) in t.factors.iter().enumerate() {
                let mut d = C64::new(t.coeff * m as f64, 0.0) * weights[e].powu(m - 1);
                for (l, p) in pows.iter().enumerate() {
                    if l != j {
                        d *= p;
                    }
                }
                out[e] += gk * d;
            }
        }
        out
    }
}
