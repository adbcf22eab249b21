//! Enumeration of the edge structures that contribute terms to a state.
//!
//! * post-selection: perfect matchings, every vertex at degree 1;
//! * heralding: `m` edges where every heralded vertex has degree exactly 1 and
//!   the remaining vertices may be empty or multiply occupied;
//! * photon-number basis: `N/2` edges (self-loops allowed) with the same
//!   heralding constraint.
//!
//! All streams are lazy backtracking iterators and yield selections in
//! lexicographic order of their sorted edge indices (edges are kept in
//! canonical key order by [`ColoredGraph`]).

use crate::graph::{ColoredGraph, EdgeKey, Mode, VertexRole};

/// A multiset of edges, as `(edge index, multiplicity)` pairs sorted by index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeSelection {
    pub entries: Vec<(usize, u32)>,
}

impl EdgeSelection {
    /// Run-length encode a nondecreasing list of edge indices.
    pub fn from_sorted_indices(indices: &[usize]) -> Self {
        let mut entries: Vec<(usize, u32)> = Vec::new();
        for &i in indices {
            match entries.last_mut() {
                Some((j, m)) if *j == i => *m += 1,
                _ => entries.push((i, 1)),
            }
        }
        Self { entries }
    }

    pub fn num_pairs(&self) -> usize {
        self.entries.iter().map(|&(_, m)| m as usize).sum()
    }

    pub fn keys(&self, graph: &ColoredGraph) -> Vec<(EdgeKey, u32)> {
        self.entries.iter().map(|&(i, m)| (graph.edges()[i].key, m)).collect()
    }

    /// Photons per vertex; a self-loop counts twice at its vertex.
    pub fn degrees(&self, graph: &ColoredGraph) -> Vec<usize> {
        let mut deg = vec![0; graph.num_vertices()];
        for &(i, m) in &self.entries {
            let k = graph.edges()[i].key;
            deg[k.u] += m as usize;
            deg[k.v] += m as usize;
        }
        deg
    }

    /// Photon colors arriving at each vertex, sorted per vertex.
    pub fn vertex_colors(&self, graph: &ColoredGraph) -> Vec<Vec<u8>> {
        let mut colors = vec![Vec::new(); graph.num_vertices()];
        for &(i, m) in &self.entries {
            let k = graph.edges()[i].key;
            for _ in 0..m {
                colors[k.u].push(k.cu as u8);
                colors[k.v].push(k.cv as u8);
            }
        }
        for c in &mut colors {
            c.sort_unstable();
        }
        colors
    }
}

/// Which events are kept when the detectors are read out.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditioningRule {
    pub mode: Mode,
    /// Vertices that must receive exactly one photon (heralded and fock modes).
    pub heralded_vertices: Vec<usize>,
    /// Total photon number `N` (fock mode).
    pub total_photons: Option<usize>,
    /// Number of selected pairs `m` (heralded mode).
    pub pair_count: Option<usize>,
}

impl ConditioningRule {
    pub fn postselect() -> Self {
        Self { mode: Mode::Postselect, heralded_vertices: Vec::new(), total_photons: None, pair_count: None }
    }

    pub fn heralded(mut heralded_vertices: Vec<usize>, pair_count: usize) -> Self {
        heralded_vertices.sort_unstable();
        heralded_vertices.dedup();
        Self { mode: Mode::Heralded, heralded_vertices, total_photons: None, pair_count: Some(pair_count) }
    }

    pub fn fock(mut heralded_vertices: Vec<usize>, total_photons: usize) -> Self {
        heralded_vertices.sort_unstable();
        heralded_vertices.dedup();
        Self { mode: Mode::Fock, heralded_vertices, total_photons: Some(total_photons), pair_count: None }
    }

    /// Vertices that are detected one photon each unless the user says
    /// otherwise: ancillas, inputs and the environment.
    pub fn default_heralds(graph: &ColoredGraph) -> Vec<usize> {
        graph
            .vertices()
            .iter()
            .filter(|v| matches!(v.role, VertexRole::Ancilla | VertexRole::Input | VertexRole::Environment))
            .map(|v| v.id)
            .collect()
    }

    /// Number of pairs every term carries under this rule, if defined.
    pub fn pairs(&self, graph: &ColoredGraph) -> Option<usize> {
        match self.mode {
            Mode::Postselect => (graph.num_vertices() % 2 == 0).then(|| graph.num_vertices() / 2),
            Mode::Heralded => self.pair_count,
            Mode::Fock => self.total_photons.filter(|n| n % 2 == 0).map(|n| n / 2),
        }
    }

    /// Does a selection obey this rule's degree constraints?
    pub fn accepts(&self, graph: &ColoredGraph, sel: &EdgeSelection) -> bool {
        let deg = sel.degrees(graph);
        let pairs = sel.num_pairs();
        match self.mode {
            Mode::Postselect => deg.iter().all(|&d| d == 1) && sel.entries.iter().all(|&(_, m)| m == 1),
            Mode::Heralded | Mode::Fock => {
                Some(pairs) == self.pairs(graph) && self.heralded_vertices.iter().all(|&h| deg[h] == 1)
            }
        }
    }
}

/// Stream of the selections contributing under `rule`.
pub fn enumerate<'g>(graph: &'g ColoredGraph, rule: &ConditioningRule) -> Selections<'g> {
    match rule.mode {
        Mode::Postselect => Selections::Matchings(enumerate_perfect_matchings(graph)),
        Mode::Heralded => Selections::Multisets(enumerate_heralded(graph, rule)),
        Mode::Fock => Selections::Multisets(enumerate_fock(graph, rule)),
    }
}

pub enum Selections<'g> {
    Matchings(PerfectMatchings<'g>),
    Multisets(EdgeMultisets<'g>),
}

impl Iterator for Selections<'_> {
    type Item = EdgeSelection;

    fn next(&mut self) -> Option<EdgeSelection> {
        match self {
            Self::Matchings(it) => it.next(),
            Self::Multisets(it) => it.next(),
        }
    }
}

pub fn enumerate_perfect_matchings(graph: &ColoredGraph) -> PerfectMatchings<'_> {
    PerfectMatchings::new(graph)
}

/// Selections of `pair_count` edges covering every heralded vertex exactly once.
///
/// Repeated edges between non-heralded vertices are included: they are terms
/// of the pair-creation expansion like any other.
pub fn enumerate_heralded<'g>(graph: &'g ColoredGraph, rule: &ConditioningRule) -> EdgeMultisets<'g> {
    let m = rule.pair_count.unwrap_or(0);
    EdgeMultisets::new(graph, &rule.heralded_vertices, m)
}

/// Multisets of `N/2` edges, self-loops allowed, heralded vertices at degree 1.
pub fn enumerate_fock<'g>(graph: &'g ColoredGraph, rule: &ConditioningRule) -> EdgeMultisets<'g> {
    let n = rule.total_photons.unwrap_or(0);
    if n % 2 == 1 {
        log::warn!("odd total photon number {n}: no pair expansion term matches");
        return EdgeMultisets::empty(graph);
    }
    EdgeMultisets::new(graph, &rule.heralded_vertices, n / 2)
}

struct Frame {
    vertex: usize,
    pos: usize,
    choice: Option<usize>,
}

/// Perfect matchings, branching on the lowest uncovered vertex.
pub struct PerfectMatchings<'g> {
    graph: &'g ColoredGraph,
    /// Per vertex: `(edge index, other endpoint)` in edge order.
    adj: Vec<Vec<(usize, usize)>>,
    covered: Vec<bool>,
    frames: Vec<Frame>,
    started: bool,
    done: bool,
}

impl<'g> PerfectMatchings<'g> {
    fn new(graph: &'g ColoredGraph) -> Self {
        let n = graph.num_vertices();
        let mut adj = vec![Vec::new(); n];
        for (i, e) in graph.edges().iter().enumerate() {
            if e.key.is_loop() {
                continue;
            }
            adj[e.key.u].push((i, e.key.v));
            adj[e.key.v].push((i, e.key.u));
        }
        Self { graph, adj, covered: vec![false; n], frames: Vec::new(), started: false, done: n % 2 == 1 }
    }

    fn next_uncovered(&self, from: usize) -> Option<usize> {
        (from..self.covered.len()).find(|&v| !self.covered[v])
    }

    fn set(&mut self, edge: usize, value: bool) {
        let k = self.graph.edges()[edge].key;
        self.covered[k.u] = value;
        self.covered[k.v] = value;
    }

    fn current(&self) -> EdgeSelection {
        let mut idx: Vec<usize> = self.frames.iter().filter_map(|f| f.choice).collect();
        idx.sort_unstable();
        EdgeSelection::from_sorted_indices(&idx)
    }
}

impl Iterator for PerfectMatchings<'_> {
    type Item = EdgeSelection;

    fn next(&mut self) -> Option<EdgeSelection> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            match self.next_uncovered(0) {
                None => {
                    self.done = true;
                    return Some(EdgeSelection { entries: Vec::new() });
                }
                Some(v) => self.frames.push(Frame { vertex: v, pos: 0, choice: None }),
            }
        }
        loop {
            let Some(top) = self.frames.last_mut() else {
                self.done = true;
                return None;
            };
            let (vertex, start, prev) = (top.vertex, top.pos, top.choice.take());
            if let Some(e) = prev {
                self.set(e, false);
            }
            let found = self.adj[vertex][start..]
                .iter()
                .position(|&(_, other)| !self.covered[other])
                .map(|off| start + off);
            match found {
                Some(p) => {
                    let (e, _) = self.adj[vertex][p];
                    let top = self.frames.last_mut().expect("frame exists");
                    top.pos = p + 1;
                    top.choice = Some(e);
                    self.set(e, true);
                    match self.next_uncovered(vertex + 1) {
                        None => return Some(self.current()),
                        Some(w) => self.frames.push(Frame { vertex: w, pos: 0, choice: None }),
                    }
                }
                None => {
                    self.frames.pop();
                }
            }
        }
    }
}

/// Nondecreasing sequences of `budget` edge indices (i.e. multisets) with every
/// heralded vertex reaching degree exactly 1.
pub struct EdgeMultisets<'g> {
    graph: &'g ColoredGraph,
    budget: usize,
    heralded: Vec<bool>,
    /// Last edge index incident to each vertex, for reachability pruning.
    last_incident: Vec<Option<usize>>,
    /// Edges that may ever be selected (a loop on a heralded vertex never is).
    usable: Vec<bool>,
    deg: Vec<usize>,
    uncovered: usize,
    /// Chosen edge indices; `stack[i]` is the choice at depth `i`.
    stack: Vec<usize>,
    /// Next candidate index for the current depth.
    cursor: usize,
    started: bool,
    done: bool,
}

impl<'g> EdgeMultisets<'g> {
    fn new(graph: &'g ColoredGraph, heralded: &[usize], budget: usize) -> Self {
        let n = graph.num_vertices();
        let mut is_h = vec![false; n];
        for &h in heralded {
            if h < n {
                is_h[h] = true;
            }
        }
        let usable: Vec<bool> = graph
            .edges()
            .iter()
            .map(|e| !(e.key.is_loop() && is_h[e.key.u]))
            .collect();
        let mut last_incident = vec![None; n];
        for (i, e) in graph.edges().iter().enumerate() {
            if usable[i] {
                last_incident[e.key.u] = Some(i);
                last_incident[e.key.v] = Some(i);
            }
        }
        let uncovered = is_h.iter().filter(|&&h| h).count();
        let impossible = heralded.iter().any(|&h| h >= n);
        Self {
            graph,
            budget,
            heralded: is_h,
            last_incident,
            usable,
            deg: vec![0; n],
            uncovered,
            stack: Vec::new(),
            cursor: 0,
            started: false,
            done: impossible,
        }
    }

    fn empty(graph: &'g ColoredGraph) -> Self {
        let mut s = Self::new(graph, &[], 0);
        s.done = true;
        s
    }

    fn can_take(&self, i: usize) -> bool {
        if !self.usable[i] {
            return false;
        }
        let k = self.graph.edges()[i].key;
        !(self.heralded[k.u] && self.deg[k.u] > 0) && !(self.heralded[k.v] && self.deg[k.v] > 0)
    }

    fn apply(&mut self, i: usize, add: bool) {
        let k = self.graph.edges()[i].key;
        for x in [k.u, k.v] {
            if add {
                self.deg[x] += 1;
                if self.heralded[x] {
                    self.uncovered -= 1;
                }
            } else {
                self.deg[x] -= 1;
                if self.heralded[x] {
                    self.uncovered += 1;
                }
            }
        }
    }

    /// Can the remaining budget, using edges with index >= `from`, still cover
    /// every uncovered heralded vertex?
    fn feasible(&self, from: usize) -> bool {
        let remaining = self.budget - self.stack.len();
        if self.uncovered > 2 * remaining {
            return false;
        }
        self.heralded
            .iter()
            .enumerate()
            .filter(|&(v, &h)| h && self.deg[v] == 0)
            .all(|(v, _)| self.last_incident[v].is_some_and(|l| l >= from))
    }

    fn pop(&mut self) -> Option<usize> {
        let i = self.stack.pop()?;
        self.apply(i, false);
        Some(i)
    }
}

impl Iterator for EdgeMultisets<'_> {
    type Item = EdgeSelection;

    fn next(&mut self) -> Option<EdgeSelection> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.cursor = 0;
            if self.budget == 0 {
                self.done = true;
                return (self.uncovered == 0).then(|| EdgeSelection { entries: Vec::new() });
            }
        } else {
            // Resume after a yielded full selection: advance the deepest choice.
            match self.pop() {
                Some(i) => self.cursor = i + 1,
                None => {
                    self.done = true;
                    return None;
                }
            }
        }
        let num_edges = self.graph.num_edges();
        loop {
            let depth = self.stack.len();
            let mut advanced = false;
            if self.feasible(self.cursor) {
                let mut i = self.cursor;
                while i < num_edges {
                    if self.can_take(i) {
                        self.stack.push(i);
                        self.apply(i, true);
                        if self.feasible(i) {
                            advanced = true;
                            break;
                        }
                        self.pop();
                    }
                    i += 1;
                }
            }
            if advanced {
                let last = *self.stack.last().expect("just pushed");
                if depth + 1 == self.budget {
                    if self.uncovered == 0 {
                        return Some(EdgeSelection::from_sorted_indices(&self.stack));
                    }
                    // Full but not covering: try the next candidate at this depth.
                    self.pop();
                    self.cursor = last + 1;
                } else {
                    // Repetition allowed: the next depth starts at the same edge.
                    self.cursor = last;
                }
            } else {
                match self.pop() {
                    Some(i) => self.cursor = i + 1,
                    None => {
                        self.done = true;
                        return None;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, VertexRole, WeightDomain};
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;

    fn edge(a: usize, b: usize, ca: usize, cb: usize) -> Edge {
        Edge::new(EdgeKey::new(a, b, ca, cb), C64::new(1.0, 0.0))
    }

    fn two_matchings() -> ColoredGraph {
        ColoredGraph::from_roles(
            Mode::Postselect,
            WeightDomain::Real,
            &[(VertexRole::Detector, 2); 4],
            [edge(0, 1, 0, 0), edge(2, 3, 0, 0), edge(0, 2, 1, 1), edge(1, 3, 1, 1)],
        )
    }

    /// Output vertices 0 and 1, ancilla 2; loops on 0 and 1.
    fn noon3_graph(mode: Mode) -> ColoredGraph {
        ColoredGraph::from_roles(
            mode,
            WeightDomain::Real,
            &[(VertexRole::Detector, 1), (VertexRole::Detector, 1), (VertexRole::Ancilla, 1)],
            [edge(0, 0, 0, 0), edge(1, 1, 0, 0), edge(0, 1, 0, 0), edge(0, 2, 0, 0), edge(1, 2, 0, 0)],
        )
    }

    /// Brute force: every multiplicity vector with the right total.
    fn brute_force(graph: &ColoredGraph, rule: &ConditioningRule, allow_repeat: bool) -> Vec<EdgeSelection> {
        let Some(m) = rule.pairs(graph) else { return vec![] };
        let e = graph.num_edges();
        let cap = if allow_repeat { m } else { 1 };
        let mut out = Vec::new();
        let mut mult = vec![0usize; e];
        loop {
            if mult.iter().sum::<usize>() == m {
                let entries: Vec<(usize, u32)> =
                    mult.iter().enumerate().filter(|(_, &k)| k > 0).map(|(i, &k)| (i, k as u32)).collect();
                let sel = EdgeSelection { entries };
                if rule.accepts(graph, &sel) {
                    out.push(sel);
                }
            }
            // odometer
            let mut i = 0;
            loop {
                if i == e {
                    out.sort();
                    return out;
                }
                mult[i] += 1;
                if mult[i] <= cap {
                    break;
                }
                mult[i] = 0;
                i += 1;
            }
        }
    }

    fn lex_key(sel: &EdgeSelection) -> Vec<usize> {
        sel.entries.iter().flat_map(|&(i, m)| std::iter::repeat(i).take(m as usize)).collect()
    }

    #[test]
    fn two_matchings_has_two_perfect_matchings() {
        let g = two_matchings();
        let ms: Vec<_> = enumerate_perfect_matchings(&g).map(|s| s.keys(&g)).collect();
        assert_eq!(
            ms,
            vec![
                vec![(EdgeKey::new(0, 1, 0, 0), 1), (EdgeKey::new(2, 3, 0, 0), 1)],
                vec![(EdgeKey::new(0, 2, 1, 1), 1), (EdgeKey::new(1, 3, 1, 1), 1)],
            ]
        );
    }

    #[test]
    fn triangle_has_no_matching() {
        let g = ColoredGraph::from_roles(
            Mode::Postselect,
            WeightDomain::Real,
            &[(VertexRole::Detector, 1); 3],
            [edge(0, 1, 0, 0), edge(1, 2, 0, 0), edge(0, 2, 0, 0)],
        );
        assert_eq!(enumerate_perfect_matchings(&g).count(), 0);
    }

    #[test]
    fn k4_matchings_match_subset_brute_force() {
        let g = ColoredGraph::from_roles(
            Mode::Postselect,
            WeightDomain::Real,
            &[(VertexRole::Detector, 1); 4],
            (0..4).flat_map(|a| (a + 1..4).map(move |b| edge(a, b, 0, 0))),
        );
        // All 2^6 subsets, degree 1 everywhere.
        let mut count = 0;
        for mask in 0u32..64 {
            let mut deg = [0; 4];
            for (i, e) in g.edges().iter().enumerate() {
                if mask >> i & 1 == 1 {
                    deg[e.key.u] += 1;
                    deg[e.key.v] += 1;
                }
            }
            if deg.iter().all(|&d| d == 1) {
                count += 1;
            }
        }
        assert_eq!(count, 3);
        assert_eq!(enumerate_perfect_matchings(&g).count(), count);
    }

    #[test]
    fn empty_graph_has_the_empty_matching() {
        let g = ColoredGraph::new(Mode::Postselect, WeightDomain::Real, vec![], vec![]);
        assert_eq!(enumerate_perfect_matchings(&g).collect::<Vec<_>>(), vec![EdgeSelection { entries: vec![] }]);
    }

    #[test]
    fn heralding_everything_reduces_to_matchings() {
        let g = two_matchings();
        let rule = ConditioningRule::heralded(vec![0, 1, 2, 3], 2);
        let a: Vec<_> = enumerate_heralded(&g, &rule).collect();
        let b: Vec<_> = enumerate_perfect_matchings(&g).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn noon3_heralded_has_six_selections() {
        let g = noon3_graph(Mode::Heralded);
        let rule = ConditioningRule::heralded(vec![2], 2);
        let sels: Vec<_> = enumerate_heralded(&g, &rule).collect();
        assert_eq!(sels.len(), 6);
        for s in &sels {
            assert_eq!(s.degrees(&g)[2], 1);
        }
        // Without loops only the edge 0-1 pairs with an ancilla edge.
        let g_no_loops = g.retain_edges(|_, e| !e.key.is_loop());
        assert_eq!(enumerate_heralded(&g_no_loops, &rule).count(), 2);
    }

    #[test]
    fn zero_pairs_cannot_cover_heralds() {
        let g = two_matchings();
        assert_eq!(enumerate_heralded(&g, &ConditioningRule::heralded(vec![0], 0)).count(), 0);
    }

    #[test]
    fn noon2_loops_with_two_photons() {
        let g = ColoredGraph::from_roles(
            Mode::Fock,
            WeightDomain::Real,
            &[(VertexRole::Detector, 1); 2],
            [edge(0, 0, 0, 0), edge(1, 1, 0, 0)],
        );
        let sels: Vec<_> = enumerate_fock(&g, &ConditioningRule::fock(vec![], 2)).collect();
        assert_eq!(sels, vec![EdgeSelection { entries: vec![(0, 1)] }, EdgeSelection { entries: vec![(1, 1)] }]);
    }

    #[test]
    fn single_loop_four_photons() {
        let g = ColoredGraph::from_roles(Mode::Fock, WeightDomain::Real, &[(VertexRole::Detector, 1)], [edge(0, 0, 0, 0)]);
        let sels: Vec<_> = enumerate_fock(&g, &ConditioningRule::fock(vec![], 4)).collect();
        assert_eq!(sels, vec![EdgeSelection { entries: vec![(0, 2)] }]);
    }

    #[test]
    fn odd_photon_number_is_empty() {
        let g = noon3_graph(Mode::Fock);
        assert_eq!(enumerate_fock(&g, &ConditioningRule::fock(vec![2], 3)).count(), 0);
    }

    #[test]
    fn noon3_splits_into_noon_and_cancelling_terms() {
        let g = noon3_graph(Mode::Fock);
        let mut by_ket = std::collections::BTreeMap::<Vec<usize>, usize>::new();
        for s in enumerate_fock(&g, &ConditioningRule::fock(vec![2], 4)) {
            let d = s.degrees(&g);
            *by_ket.entry(vec![d[0], d[1]]).or_default() += 1;
        }
        let expected: std::collections::BTreeMap<Vec<usize>, usize> =
            [(vec![3, 0], 1), (vec![0, 3], 1), (vec![2, 1], 2), (vec![1, 2], 2)].into_iter().collect();
        assert_eq!(by_ket, expected);
    }

    fn arb_case() -> impl Strategy<Value = (ColoredGraph, ConditioningRule)> {
        (1usize..=6, 1usize..=3, 0u8..3)
            .prop_flat_map(|(n, dmax, mode)| {
                let dims = proptest::collection::vec(1..=dmax, n);
                let edges = proptest::collection::vec((0..n, 0..n, 0..dmax, 0..dmax), 0..=10);
                let heralds = proptest::collection::vec(any::<bool>(), n);
                (Just(mode), dims, edges, heralds, 0usize..=3)
            })
            .prop_map(|(mode, dims, raw, heralds, m)| {
                let mode = [Mode::Postselect, Mode::Heralded, Mode::Fock][mode as usize];
                let edges: Vec<Edge> = raw
                    .into_iter()
                    .filter(|&(a, b, _, _)| mode == Mode::Fock || a != b)
                    .map(|(a, b, ca, cb)| edge(a, b, ca % dims[a], cb % dims[b]))
                    .collect();
                let roles: Vec<_> = dims.iter().map(|&d| (VertexRole::Detector, d)).collect();
                let g = ColoredGraph::from_roles(mode, WeightDomain::Real, &roles, edges);
                let hv: Vec<usize> = heralds.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| i).collect();
                let rule = match mode {
                    Mode::Postselect => ConditioningRule::postselect(),
                    Mode::Heralded => ConditioningRule::heralded(hv, m),
                    Mode::Fock => ConditioningRule::fock(hv, 2 * m),
                };
                (g, rule)
            })
    }

    proptest! {
        #[test]
        fn streams_equal_brute_force((g, rule) in arb_case()) {
            let got: Vec<_> = enumerate(&g, &rule).collect();
            for s in &got {
                prop_assert!(rule.accepts(&g, s));
            }
            // Lexicographic and duplicate-free.
            let keys: Vec<_> = got.iter().map(lex_key).collect();
            prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
            let mut sorted = got.clone();
            sorted.sort();
            let want = brute_force(&g, &rule, rule.mode != Mode::Postselect);
            prop_assert_eq!(sorted, want);
            // Deterministic.
            let again: Vec<_> = enumerate(&g, &rule).collect();
            prop_assert_eq!(got, again);
        }
    }
}
