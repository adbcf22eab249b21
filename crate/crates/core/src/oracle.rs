//! Brute-force reference for the state engine.
//!
//! Expands `(1/m!) (sum_e w_e a+_(u,cu) a+_(v,cv))^m |vac>` by applying
//! creation operators one at a time to a dense map of occupation vectors.
//! Nothing clever happens here on purpose: no enumeration, no pruning, no
//! closed-form factors. Each creation operator contributes `sqrt(n + 1)`.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::enumeration::ConditioningRule;
use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, Mode};
use crate::state::{Ket, KetMap};

pub const MAX_ORDER: usize = 5;

/// Coefficients of occupation-number basis states at a fixed expansion order.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyState {
    /// Occupation vectors are laid out per vertex, per color.
    pub terms: BTreeMap<Vec<u8>, C64>,
    pub order: usize,
    offsets: Vec<usize>,
}

impl PolyState {
    fn mode_index(&self, vertex: usize, color: usize) -> usize {
        self.offsets[vertex] + color
    }

    /// Per-vertex photon colors of an occupation vector.
    fn ket_of(&self, occ: &[u8]) -> Ket {
        let n = self.offsets.len() - 1;
        Ket((0..n)
            .map(|v| {
                let mut colors = Vec::new();
                for (c, &k) in occ[self.offsets[v]..self.offsets[v + 1]].iter().enumerate() {
                    colors.extend(std::iter::repeat(c as u8).take(k as usize));
                }
                colors
            })
            .collect())
    }

    fn vertex_totals(&self, occ: &[u8]) -> Vec<usize> {
        self.offsets.windows(2).map(|w| occ[w[0]..w[1]].iter().map(|&k| k as usize).sum()).collect()
    }
}

/// The `m`-th order term of the pair-creation expansion applied to vacuum.
pub fn expand(graph: &ColoredGraph, order: usize) -> Result<PolyState> {
    if order > MAX_ORDER {
        return Err(Error::OrderCap(order));
    }
    let mut offsets = vec![0];
    for v in graph.vertices() {
        offsets.push(offsets.last().unwrap() + v.local_dim);
    }
    let modes = *offsets.last().unwrap();
    let mut poly = PolyState { terms: BTreeMap::new(), order, offsets };
    poly.terms.insert(vec![0; modes], C64::new(1.0, 0.0));

    for _ in 0..order {
        let mut next: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
        for (occ, &coeff) in &poly.terms {
            for e in graph.edges() {
                let k = e.key;
                let mut occ2 = occ.clone();
                let mut amp = coeff * e.weight;
                for (v, c) in [(k.u, k.cu), (k.v, k.cv)] {
                    let i = poly.mode_index(v, c);
                    occ2[i] += 1;
                    amp *= (occ2[i] as f64).sqrt();
                }
                *next.entry(occ2).or_insert(C64::new(0.0, 0.0)) += amp;
            }
        }
        poly.terms = next;
    }
    let fact: f64 = (1..=order).map(|k| k as f64).product();
    for c in poly.terms.values_mut() {
        *c /= fact;
    }
    Ok(poly)
}

/// Keep the occupation vectors a detection rule accepts and relabel them as
/// kets in the state engine's basis.
pub fn condition(poly: &PolyState, graph: &ColoredGraph, rule: &ConditioningRule) -> KetMap {
    let mut out = KetMap::new();
    if rule.pairs(graph) != Some(poly.order) {
        return out;
    }
    for (occ, &coeff) in &poly.terms {
        let totals = poly.vertex_totals(occ);
        let keep = match rule.mode {
            Mode::Postselect => totals.iter().all(|&t| t == 1),
            Mode::Heralded | Mode::Fock => rule.heralded_vertices.iter().all(|&h| totals[h] == 1),
        };
        if keep && coeff != C64::new(0.0, 0.0) {
            *out.terms.entry(poly.ket_of(occ)).or_insert(C64::new(0.0, 0.0)) += coeff;
        }
    }
    out
}

/// Largest amplitude difference between two states, with the ket where it occurs.
pub fn max_discrepancy(a: &KetMap, b: &KetMap) -> (f64, Option<Ket>) {
    let mut worst = (0.0, None);
    let keys: std::collections::BTreeSet<&Ket> = a.terms.keys().chain(b.terms.keys()).collect();
    for k in keys {
        let d = (a.get(k) - b.get(k)).norm();
        if d > worst.0 {
            worst = (d, Some(k.clone()));
        }
    }
    worst
}
