//! Targets, figures of merit, and the differentiable losses the optimizer
//! minimizes.
//!
//! Losses are evaluated on the amplitude vector of a [`StatePolynomial`] and
//! differentiated through it: each loss supplies `g_k = dL/d conj(a_k)` and
//! the polynomial pulls that back onto the edge weights.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::enumeration::ConditioningRule;
use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, Mode, VertexRole, WeightDomain};
use crate::state::{hermitian_eigen, DensityMatrix, Ket, KetMap, StatePolynomial};

/// Relative eigenvalue cut for Schmidt ranks.
pub const SRV_THRESHOLD: f64 = 1e-8;
const PSD_TOLERANCE: f64 = 1e-9;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    #[default]
    Fidelity,
    CountRate,
    PuritySum,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetKind {
    /// Normalized superposition. Kets either cover the logical vertices
    /// (detectors and inputs) or every non-environment vertex.
    Pure(Vec<(Ket, C64)>),
    /// Trace-one PSD matrix over kets of the same two lengths.
    Density(DensityMatrix),
    /// Bipartition purity sum over subsets of size up to `k`; `None` is all.
    Entanglement { k: Option<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub loss: LossName,
}

// ---------------------------------------------------------------- wire format

/// A ket position: a color (a photon count of color 0 in fock mode), or an
/// explicit list of photon colors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KetEntry {
    Single(usize),
    Colors(Vec<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AmpDoc {
    Real(f64),
    Complex([f64; 2]),
}

impl AmpDoc {
    pub fn value(self) -> C64 {
        match self {
            AmpDoc::Real(x) => C64::new(x, 0.0),
            AmpDoc::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    pub ket: Vec<KetEntry>,
    pub amp: AmpDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateRowDoc {
    #[serde(rename = "in")]
    pub input: Vec<usize>,
    pub out: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PartitionSize {
    Size(usize),
    Named(AllPartitions),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllPartitions {
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetDoc {
    PureState {
        terms: Vec<TermDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loss: Option<LossName>,
    },
    DensityMatrix {
        basis: Vec<Vec<KetEntry>>,
        matrix: Vec<Vec<AmpDoc>>,
    },
    Entanglement {
        k: PartitionSize,
    },
    Gate {
        rows: Vec<GateRowDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        loss: Option<LossName>,
    },
}

pub fn resolve_ket(entries: &[KetEntry], mode: Mode) -> Ket {
    Ket(entries
        .iter()
        .map(|e| match e {
            KetEntry::Single(n) if mode == Mode::Fock => vec![0; *n],
            KetEntry::Single(c) => vec![*c as u8],
            KetEntry::Colors(cs) => {
                let mut v: Vec<u8> = cs.iter().map(|&c| c as u8).collect();
                v.sort_unstable();
                v
            }
        })
        .collect())
}

/// Scale a list of terms to unit norm, merging repeated kets.
pub fn normalize_terms(terms: Vec<(Ket, C64)>) -> Result<Vec<(Ket, C64)>> {
    let map = KetMap::from_terms(terms);
    let n = map.norm_sqr().sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Config("target state has zero norm".into()));
    }
    Ok(map.terms.into_iter().map(|(k, a)| (k, a / n)).collect())
}

impl TargetSpec {
    pub fn pure(terms: Vec<(Ket, C64)>) -> Result<Self> {
        Ok(Self { kind: TargetKind::Pure(normalize_terms(terms)?), loss: LossName::Fidelity })
    }

    pub fn from_json(text: &str, mode: Mode) -> Result<Self> {
        let doc: TargetDoc = serde_json::from_str(text)?;
        Self::from_doc(&doc, mode)
    }

    pub fn from_doc(doc: &TargetDoc, mode: Mode) -> Result<Self> {
        match doc {
            TargetDoc::PureState { terms, loss } => {
                let loss = loss.unwrap_or_default();
                if loss == LossName::PuritySum {
                    return Err(Error::Config("purity_sum needs an entanglement target".into()));
                }
                let terms = terms.iter().map(|t| (resolve_ket(&t.ket, mode), t.amp.value())).collect();
                Ok(Self { kind: TargetKind::Pure(normalize_terms(terms)?), loss })
            }
            TargetDoc::DensityMatrix { basis, matrix } => {
                let n = basis.len();
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::Dimension(format!("density matrix must be {n}x{n} to match its basis")));
                }
                let basis: Vec<Ket> = basis.iter().map(|b| resolve_ket(b, mode)).collect();
                let mut sorted = basis.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != n {
                    return Err(Error::Config("density matrix basis repeats a ket".into()));
                }
                let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j].value());
                let rho = DensityMatrix::new(basis, m)?;
                check_density(&rho)?;
                Ok(Self { kind: TargetKind::Density(rho.normalize()?), loss: LossName::Fidelity })
            }
            TargetDoc::Entanglement { k } => {
                let k = match k {
                    PartitionSize::Size(0) => return Err(Error::Config("partition size k must be at least 1".into())),
                    PartitionSize::Size(k) => Some(*k),
                    PartitionSize::Named(AllPartitions::All) => None,
                };
                Ok(Self { kind: TargetKind::Entanglement { k }, loss: LossName::PuritySum })
            }
            TargetDoc::Gate { .. } => Err(Error::Config("gate targets are expanded by the instruction set".into())),
        }
    }
}

fn check_density(rho: &DensityMatrix) -> Result<()> {
    let scale = rho.matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if rho.hermiticity_error() > PSD_TOLERANCE * scale {
        return Err(Error::Config("density matrix is not Hermitian".into()));
    }
    if let Some(&min) = rho.eigenvalues().first() {
        if min < -PSD_TOLERANCE * scale {
            return Err(Error::NotPsd(min));
        }
    }
    if !(rho.trace() > 0.0) {
        return Err(Error::ZeroState);
    }
    Ok(())
}

// --------------------------------------------------------------------- layout

/// How target kets sit inside the graph's kets. Logical vertices are the
/// detectors and inputs; ancillas are expected to hold one photon of color 0;
/// the environment is traced out.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub logical: Vec<usize>,
    pub ancillas: Vec<usize>,
    pub environment: Option<usize>,
    /// Local dimensions of the non-environment vertices, in vertex order.
    pub system_dims: Vec<usize>,
    system: Vec<usize>,
}

impl Layout {
    pub fn new(graph: &ColoredGraph) -> Self {
        let mut logical = Vec::new();
        let mut ancillas = Vec::new();
        let mut system = Vec::new();
        let mut system_dims = Vec::new();
        for v in graph.vertices() {
            match v.role {
                VertexRole::Detector | VertexRole::Input => logical.push(v.id),
                VertexRole::Ancilla => ancillas.push(v.id),
                VertexRole::Environment => continue,
            }
            system.push(v.id);
            system_dims.push(v.local_dim);
        }
        Self { logical, ancillas, environment: graph.environment(), system_dims, system }
    }

    /// Logical dimensions in logical order.
    pub fn logical_dims(&self) -> Vec<usize> {
        self.logical.iter().map(|v| self.system_dims[self.system.iter().position(|s| s == v).unwrap()]).collect()
    }

    /// Expand a target ket to the system (non-environment) vertices.
    pub fn lift(&self, ket: &Ket) -> Result<Ket> {
        let lifted = if ket.len() == self.system.len() {
            ket.clone()
        } else if ket.len() == self.logical.len() {
            let mut it = ket.0.iter();
            Ket(self
                .system
                .iter()
                .map(|v| if self.ancillas.contains(v) { vec![0] } else { it.next().unwrap().clone() })
                .collect())
        } else {
            return Err(Error::Dimension(format!(
                "target ket {ket} has {} positions; expected {} (logical) or {} (all non-environment vertices)",
                ket.len(),
                self.logical.len(),
                self.system.len()
            )));
        };
        for (pos, colors) in lifted.0.iter().enumerate() {
            if let Some(&c) = colors.iter().find(|&&c| c as usize >= self.system_dims[pos]) {
                return Err(Error::Dimension(format!(
                    "target ket {ket} uses color {c} at vertex {} of dimension {}",
                    self.system[pos], self.system_dims[pos]
                )));
            }
        }
        Ok(lifted)
    }

    /// Split a graph ket into its system part and environment occupation.
    pub fn split(&self, ket: &Ket) -> (Ket, Vec<u8>) {
        match self.environment {
            Some(e) => ket.split_off(e),
            None => (ket.clone(), Vec::new()),
        }
    }

    /// Restrict a pure graph state to the logical vertices, keeping the
    /// branch where every ancilla holds one photon of color 0.
    pub fn project(&self, state: &KetMap) -> KetMap {
        let terms = state.terms.iter().filter_map(|(ket, &a)| {
            let (sys, _) = self.split(ket);
            let mut out = Vec::with_capacity(self.logical.len());
            for (pos, colors) in sys.0.into_iter().enumerate() {
                if self.ancillas.contains(&self.system[pos]) {
                    if colors != [0] {
                        return None;
                    }
                } else {
                    out.push(colors);
                }
            }
            Some((Ket(out), a))
        });
        KetMap::from_terms(terms)
    }

    pub fn lift_pure(&self, terms: &[(Ket, C64)]) -> Result<KetMap> {
        let lifted = terms.iter().map(|(k, a)| Ok((self.lift(k)?, *a))).collect::<Result<Vec<_>>>()?;
        let mut map = KetMap::from_terms(lifted);
        map.normalized = true;
        Ok(map)
    }

    pub fn lift_density(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let basis = rho.basis.iter().map(|k| self.lift(k)).collect::<Result<Vec<_>>>()?;
        let mut out = DensityMatrix::new(basis, rho.matrix.clone())?;
        out.normalized = rho.normalized;
        Ok(out)
    }
}

// ------------------------------------------------------------ plain metrics

/// `|<target|psi>|^2 / <psi|psi>` for a normalized target.
pub fn fidelity_pure(state: &KetMap, target: &KetMap) -> Result<f64> {
    let n = state.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::ZeroState);
    }
    let t = target.norm_sqr();
    Ok((target.inner(state).norm_sqr() / (n * t)).clamp(0.0, 1.0))
}

/// Unnormalized squared overlap `|<target|psi>|^2`.
pub fn count_rate(state: &KetMap, target: &KetMap) -> f64 {
    target.inner(state).norm_sqr()
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2` after
/// normalizing both traces.
pub fn fidelity_mixed(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let mut basis: Vec<Ket> = rho.basis.iter().chain(&sigma.basis).cloned().collect();
    basis.sort();
    basis.dedup();
    let r = rho.embed(&basis)?;
    let s = sigma.embed(&basis)?;
    check_density(&r)?;
    check_density(&s)?;
    let r = r.normalize()?;
    let s = s.normalize()?;
    let sqrt_s = psd_power(&s.matrix, 0.5);
    let a = &sqrt_s * &r.matrix * &sqrt_s;
    let f = trace_sqrt(&a);
    Ok((f * f).clamp(0.0, 1.0))
}

/// `Tr sqrt(M)` for a PSD matrix. Round-off eigenvalues in the null space
/// would otherwise add their square roots, about 1e-8 each.
fn trace_sqrt(m: &DMatrix<C64>) -> f64 {
    let (lam, _) = hermitian_eigen(m);
    let cut = EIGEN_CUT * lam.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    lam.iter().filter(|&&l| l > cut).map(|&l| l.sqrt()).sum()
}

/// `M^p` for a PSD matrix, with eigenvalues below a relative cut treated as
/// zero (so negative powers are pseudo-inverse powers).
const EIGEN_CUT: f64 = 1e-12;

fn psd_power(m: &DMatrix<C64>, p: f64) -> DMatrix<C64> {
    let (lam, u) = hermitian_eigen(m);
    let max = lam.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let cut = EIGEN_CUT * max;
    let d: Vec<C64> = lam.iter().map(|&l| if l > cut { C64::new(l.powf(p), 0.0) } else { ZERO }).collect();
    let mut scaled = u.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    scaled * u.adjoint()
}

/// Partial trace onto `subsystem` (vertex indices) of a qudit-form state.
/// The basis holds the subsystem configurations that occur, in ket order.
pub fn reduced_density(state: &KetMap, subsystem: &[usize]) -> Result<DensityMatrix> {
    let n = state.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::ZeroState);
    }
    let mut rows: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut cols: BTreeMap<Vec<usize>, BTreeMap<Vec<usize>, C64>> = BTreeMap::new();
    for (ket, &a) in &state.terms {
        let colors = ket.qudit_colors().ok_or_else(|| Error::MultiOccupation(ket.to_string()))?;
        if let Some(&v) = subsystem.iter().find(|&&v| v >= colors.len()) {
            return Err(Error::Dimension(format!("vertex {v} outside a {}-vertex state", colors.len())));
        }
        let a_part: Vec<usize> = subsystem.iter().map(|&v| colors[v]).collect();
        let rest: Vec<usize> = (0..colors.len()).filter(|v| !subsystem.contains(v)).map(|v| colors[v]).collect();
        rows.insert(a_part.clone(), 0);
        *cols.entry(rest).or_default().entry(a_part).or_insert(ZERO) += a;
    }
    for (i, r) in rows.values_mut().enumerate() {
        *r = i;
    }
    let d = rows.len();
    let mut m = DMatrix::zeros(d, d);
    for col in cols.values() {
        for (ra, a) in col {
            for (rb, b) in col {
                m[(rows[ra], rows[rb])] += a * b.conj() / n;
            }
        }
    }
    let basis = rows.keys().map(|cs| Ket::qudits(cs)).collect();
    let mut rho = DensityMatrix::new(basis, m)?;
    rho.normalized = true;
    Ok(rho)
}

/// Subsets of `0..n` of size `1..=k`, one representative per complementary
/// pair when both halves have size `n/2` (the one holding position 0).
pub fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=k.min(n.saturating_sub(1)) {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            if 2 * size != n || combo[0] == 0 {
                out.push(combo.clone());
            }
            // Advance to the next combination in lexicographic order.
            let Some(i) = (0..size).rev().find(|&i| combo[i] < n - size + i) else { break };
            combo[i] += 1;
            for j in i + 1..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}

/// `sum_A Tr(rho_A^2)` over the given vertex subsets.
pub fn purity_sum_loss(state: &KetMap, partitions: &[Vec<usize>]) -> Result<f64> {
    partitions.iter().map(|p| Ok(reduced_density(state, p)?.purity())).sum()
}

/// Lower bound of the purity sum: every marginal maximally mixed.
pub fn purity_sum_bound(dims: &[usize], partitions: &[Vec<usize>]) -> f64 {
    let total: usize = dims.iter().product();
    partitions
        .iter()
        .map(|p| {
            let da: usize = p.iter().map(|&i| dims[i]).product();
            1.0 / da.min(total / da) as f64
        })
        .sum()
}

/// Rank of a density matrix with eigenvalues cut at `SRV_THRESHOLD` relative
/// to the largest.
pub fn rank(rho: &DensityMatrix) -> usize {
    let ev = rho.eigenvalues();
    let max = ev.iter().fold(0.0f64, |a, &b| a.max(b));
    ev.iter().filter(|&&l| l > SRV_THRESHOLD * max).count()
}

/// Ranks of every single-vertex marginal, sorted in descending order.
pub fn srv(state: &KetMap) -> Result<Vec<usize>> {
    let n = state.terms.keys().next().map_or(0, Ket::len);
    let mut ranks = (0..n).map(|v| Ok(rank(&reduced_density(state, &[v])?))).collect::<Result<Vec<_>>>()?;
    ranks.sort_unstable_by(|a, b| b.cmp(a));
    Ok(ranks)
}

fn spectrum(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let t = rho.trace();
    if !(t > 0.0) {
        return Err(Error::ZeroState);
    }
    Ok(rho.eigenvalues().into_iter().map(|l| (l / t).max(0.0)).collect())
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(spectrum(rho)?.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) {
        return Err(Error::Argument(format!("entropy order must be positive, got {alpha}")));
    }
    Ok(())
}

fn trace_power(rho: &DensityMatrix, alpha: f64) -> Result<f64> {
    Ok(spectrum(rho)?.iter().filter(|&&l| l > 0.0).map(|&l| l.powf(alpha)).sum())
}

/// `log(Tr rho^alpha) / (1 - alpha)`, natural log.
pub fn renyi_entropy(rho: &DensityMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if (alpha - 1.0).abs() < 1e-6 {
        return von_neumann_entropy(rho);
    }
    Ok(trace_power(rho, alpha)?.ln() / (1.0 - alpha))
}

/// `(Tr rho^alpha - 1) / (1 - alpha)`.
pub fn tsallis_entropy(rho: &DensityMatrix, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if (alpha - 1.0).abs() < 1e-6 {
        return von_neumann_entropy(rho);
    }
    Ok((trace_power(rho, alpha)? - 1.0) / (1.0 - alpha))
}

// -------------------------------------------------------- compiled objectives

#[derive(Clone, Debug)]
enum Kind {
    Pure {
        target: Vec<C64>,
        count_rate: bool,
    },
    Mixed {
        /// Environment block and system basis position of every polynomial ket.
        slots: Vec<(usize, usize)>,
        blocks: usize,
        sigma_sqrt: DMatrix<C64>,
    },
    Entanglement {
        parts: Vec<Part>,
        bound: f64,
    },
}

#[derive(Clone, Debug)]
struct Part {
    rows: usize,
    cols: usize,
    slots: Vec<(usize, usize)>,
}

/// Loss value and the success gap at one weight vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Distance from success: `1 - F` for state targets, distance above the
    /// maximal-entanglement bound for purity sums.
    pub gap: f64,
    pub fidelity: Option<f64>,
}

/// A loss compiled against one graph topology and detection rule.
#[derive(Clone, Debug)]
pub struct Objective {
    pub poly: StatePolynomial,
    pub domain: WeightDomain,
    pub loss_name: LossName,
    kind: Kind,
}

impl Objective {
    pub fn compile(graph: &ColoredGraph, rule: &ConditioningRule, target: &TargetSpec) -> Result<Self> {
        let poly = StatePolynomial::build(graph, rule);
        let layout = Layout::new(graph);
        let kind = match (&target.kind, layout.environment) {
            (TargetKind::Pure(terms), None) => {
                let t = layout.lift_pure(terms)?;
                let amps = poly.kets.iter().map(|k| t.get(k)).collect();
                Kind::Pure { target: amps, count_rate: target.loss == LossName::CountRate }
            }
            (TargetKind::Pure(terms), Some(_)) => {
                if target.loss == LossName::CountRate {
                    return Err(Error::Config("count_rate is only defined without an environment".into()));
                }
                let sigma = DensityMatrix::pure(&layout.lift_pure(terms)?);
                mixed_kind(&poly, &layout, &sigma)?
            }
            (TargetKind::Density(rho), _) => mixed_kind(&poly, &layout, &layout.lift_density(rho)?)?,
            (TargetKind::Entanglement { k }, env) => {
                if env.is_some() {
                    return Err(Error::Config("entanglement objectives need a graph without an environment".into()));
                }
                entanglement_kind(&poly, &layout, *k)?
            }
        };
        Ok(Self { poly, domain: graph.weight_domain, loss_name: target.loss, kind })
    }

    pub fn num_edges(&self) -> usize {
        self.poly.num_edges
    }

    pub fn evaluate(&self, weights: &[C64]) -> Result<Evaluation> {
        Ok(self.run(weights, false)?.0)
    }

    pub fn loss(&self, weights: &[C64]) -> Result<f64> {
        Ok(self.evaluate(weights)?.loss)
    }

    /// Loss and gradient. Entry `e` holds `dL/d Re w_e + i dL/d Im w_e`; the
    /// imaginary part is zero in the real weight domain.
    pub fn loss_and_grad(&self, weights: &[C64]) -> Result<(Evaluation, Vec<C64>)> {
        let (ev, g) = self.run(weights, true)?;
        let pulled = self.poly.pullback(weights, &g.unwrap());
        let real = self.domain == WeightDomain::Real;
        let grad = pulled
            .into_iter()
            .map(|z| {
                let d = 2.0 * z.conj();
                if real {
                    C64::new(d.re, 0.0)
                } else {
                    d
                }
            })
            .collect();
        Ok((ev, grad))
    }

    fn run(&self, weights: &[C64], want_grad: bool) -> Result<(Evaluation, Option<Vec<C64>>)> {
        let a = self.poly.amplitudes(weights);
        let n: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroState);
        }
        match &self.kind {
            Kind::Pure { target, count_rate } => {
                let s: C64 = target.iter().zip(&a).map(|(t, x)| t.conj() * x).sum();
                let s2 = s.norm_sqr();
                let f = (s2 / n).clamp(0.0, 1.0);
                let ev = if *count_rate {
                    Evaluation { loss: -s2, gap: 1.0 - f, fidelity: Some(f) }
                } else {
                    Evaluation { loss: 1.0 - f, gap: 1.0 - f, fidelity: Some(f) }
                };
                let g = want_grad.then(|| {
                    if *count_rate {
                        target.iter().map(|t| -s * t).collect()
                    } else {
                        target.iter().zip(&a).map(|(t, x)| -(s * t * n - x * s2) / (n * n)).collect()
                    }
                });
                Ok((ev, g))
            }
            Kind::Mixed { slots, blocks, sigma_sqrt } => {
                let d = sigma_sqrt.nrows();
                let mut psi = DMatrix::<C64>::zeros(d, *blocks);
                for (&(b, i), x) in slots.iter().zip(&a) {
                    psi[(i, b)] += x;
                }
                let rho_hat = &psi * psi.adjoint() / C64::new(n, 0.0);
                let m = sigma_sqrt * rho_hat * sigma_sqrt;
                let root = trace_sqrt(&m);
                let f = (root * root).clamp(0.0, 1.0);
                let ev = Evaluation { loss: 1.0 - f, gap: 1.0 - f, fidelity: Some(f) };
                let g = want_grad.then(|| {
                    let inv = psd_power(&m, -0.5);
                    let gm = sigma_sqrt * inv * sigma_sqrt * C64::new(root, 0.0);
                    let h = (gm - DMatrix::identity(d, d) * C64::new(f, 0.0)) / C64::new(n, 0.0);
                    let hpsi = h * &psi;
                    slots.iter().map(|&(b, i)| -hpsi[(i, b)]).collect()
                });
                Ok((ev, g))
            }
            Kind::Entanglement { parts, bound } => {
                let mut loss = 0.0;
                let mut g = vec![ZERO; a.len()];
                for p in parts {
                    let mut m = DMatrix::<C64>::zeros(p.rows, p.cols);
                    for (&(r, c), x) in p.slots.iter().zip(&a) {
                        m[(r, c)] += x;
                    }
                    let pm = &m * m.adjoint();
                    let q = (&pm * &pm).trace().re;
                    loss += q / (n * n);
                    if want_grad {
                        let pmm = &pm * &m;
                        for (k, &(r, c)) in p.slots.iter().enumerate() {
                            g[k] += pmm[(r, c)] * (2.0 / (n * n)) - a[k] * (2.0 * q / (n * n * n));
                        }
                    }
                }
                let ev = Evaluation { loss, gap: loss - bound, fidelity: None };
                Ok((ev, want_grad.then_some(g)))
            }
        }
    }

    /// Lower bound of the loss, where one is known.
    pub fn bound(&self) -> Option<f64> {
        match &self.kind {
            Kind::Entanglement { bound, .. } => Some(*bound),
            _ => None,
        }
    }
}

fn mixed_kind(poly: &StatePolynomial, layout: &Layout, sigma: &DensityMatrix) -> Result<Kind> {
    check_density(sigma)?;
    let sigma = sigma.normalize()?;
    let mut envs: BTreeMap<Vec<u8>, usize> = BTreeMap::new();
    let mut basis: Vec<Ket> = sigma.basis.clone();
    let split: Vec<(Ket, Vec<u8>)> = poly.kets.iter().map(|k| layout.split(k)).collect();
    for (sys, env) in &split {
        basis.push(sys.clone());
        envs.entry(env.clone()).or_insert(0);
    }
    basis.sort();
    basis.dedup();
    for (i, b) in envs.values_mut().enumerate() {
        *b = i;
    }
    let index: BTreeMap<&Ket, usize> = basis.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let slots = split.iter().map(|(sys, env)| (envs[env], index[sys])).collect();
    let sigma = sigma.embed(&basis)?;
    Ok(Kind::Mixed { slots, blocks: envs.len().max(1), sigma_sqrt: psd_power(&sigma.matrix, 0.5) })
}

fn entanglement_kind(poly: &StatePolynomial, layout: &Layout, k: Option<usize>) -> Result<Kind> {
    let nl = layout.logical.len();
    let k = k.unwrap_or(nl / 2);
    if k > nl / 2 || nl < 2 {
        return Err(Error::Config(format!("partition size {k} exceeds half of the {nl} logical vertices")));
    }
    let dims = layout.logical_dims();
    let colors = poly
        .kets
        .iter()
        .map(|ket| ket.qudit_colors().ok_or_else(|| Error::MultiOccupation(ket.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let subsets = partitions(nl, k);
    let bound = purity_sum_bound(&dims, &subsets);
    let parts = subsets
        .iter()
        .map(|subset| {
            let members: Vec<usize> = subset.iter().map(|&p| layout.logical[p]).collect();
            let rows: usize = subset.iter().map(|&p| dims[p]).product();
            let mut cols: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            let mut slots = Vec::with_capacity(colors.len());
            for cs in &colors {
                let row = members.iter().zip(subset).fold(0, |acc, (&v, &p)| acc * dims[p] + cs[v]);
                let rest: Vec<usize> = (0..cs.len()).filter(|v| !members.contains(v)).map(|v| cs[v]).collect();
                let next = cols.len();
                let col = *cols.entry(rest).or_insert(next);
                slots.push((row, col));
            }
            Part { rows, cols: cols.len().max(1), slots }
        })
        .collect();
    Ok(Kind::Entanglement { parts, bound })
}

/// Flattened gradient of the target's loss at the graph's current weights:
/// one entry per edge for real weights, `[re, im]` pairs for complex ones.
pub fn loss_gradient(graph: &ColoredGraph, rule: &ConditioningRule, target: &TargetSpec) -> Result<Vec<f64>> {
    let obj = Objective::compile(graph, rule, target)?;
    let (_, g) = obj.loss_and_grad(&graph.weights())?;
    Ok(match graph.weight_domain {
        WeightDomain::Real => g.iter().map(|z| z.re).collect(),
        WeightDomain::Complex => g.iter().flat_map(|z| [z.re, z.im]).collect(),
    })
}
