//! Weight optimization and topology search.
//!
//! Continuous phase: projected L-BFGS inside the box `[-w_max, w_max]` (real
//! and imaginary parts boxed separately), with Armijo backtracking and a
//! steepest-descent fallback. Discrete phase: edges are removed one at a time
//! and the survivors re-optimized from the previous optimum.

use std::collections::VecDeque;

use num_complex::Complex64 as C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumeration::ConditioningRule;
use crate::error::{Error, Result};
use crate::graph::{ColoredGraph, WeightDomain};
use crate::objectives::{Evaluation, Objective, TargetSpec};

/// Weight scales at which asymptotic solutions are reported.
pub const ASYMPTOTIC_SCALES: [f64; 2] = [0.1, 0.01];

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const STALL_WINDOW: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalOrder {
    #[default]
    Ascending,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    /// Success threshold on the gap (`1 - F`, or distance to the purity bound).
    pub loss_threshold: f64,
    pub grad_tol: f64,
    /// L-BFGS history length.
    pub memory: usize,
    pub removal_order: RemovalOrder,
    pub w_max: f64,
    /// Initial weights are drawn from `[-init_range, init_range]`.
    pub init_range: f64,
    /// Edges below this magnitude are dropped together before single removals.
    pub batch_threshold: f64,
    pub seed: Option<u64>,
    pub weight_domain: WeightDomain,
    /// Judge success on the fidelity after shrinking the small weights.
    pub asymptotic: bool,
    /// Prune every successful restart instead of the first one.
    pub prune_all: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 1000,
            loss_threshold: 1e-3,
            grad_tol: 1e-7,
            memory: 10,
            removal_order: RemovalOrder::Ascending,
            w_max: 1.0,
            init_range: 0.3,
            batch_threshold: 0.01,
            seed: None,
            weight_domain: WeightDomain::Real,
            asymptotic: false,
            prune_all: false,
        }
    }
}

impl OptimizerConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("optimizer: {what}")));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.loss_threshold > 0.0) || !(self.grad_tol > 0.0) || !(self.batch_threshold >= 0.0) {
            return bad("thresholds must be positive");
        }
        if !(self.w_max > 0.0) || !(self.init_range > 0.0) || self.init_range > self.w_max {
            return bad("bounds must satisfy 0 < init_range <= w_max");
        }
        if self.memory == 0 {
            return bad("memory must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Projected gradient below `grad_tol`.
    Converged,
    /// No further decrease could be found.
    Stalled,
    IterationCap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    pub weights: Vec<C64>,
    pub eval: Evaluation,
    pub iterations: usize,
    pub termination: Termination,
}

/// Free parameters: the real (and imaginary) parts of the active edges.
struct Params<'a> {
    active: &'a [bool],
    complex: bool,
    bound: f64,
}

impl Params<'_> {
    fn to_weights(&self, x: &[f64]) -> Vec<C64> {
        let mut it = x.iter();
        self.active
            .iter()
            .map(|&on| {
                if !on {
                    return C64::new(0.0, 0.0);
                }
                let re = *it.next().unwrap();
                let im = if self.complex { *it.next().unwrap() } else { 0.0 };
                C64::new(re, im)
            })
            .collect()
    }

    fn from_weights(&self, w: &[C64]) -> Vec<f64> {
        let mut x = Vec::new();
        for (z, _) in w.iter().zip(self.active).filter(|(_, &on)| on) {
            x.push(z.re.clamp(-self.bound, self.bound));
            if self.complex {
                x.push(z.im.clamp(-self.bound, self.bound));
            }
        }
        x
    }

    fn from_grad(&self, g: &[C64]) -> Vec<f64> {
        let mut x = Vec::new();
        for (z, _) in g.iter().zip(self.active).filter(|(_, &on)| on) {
            x.push(z.re);
            if self.complex {
                x.push(z.im);
            }
        }
        x
    }

    fn project(&self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(-self.bound, self.bound);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradient in parameter space; a vanishing state counts as an
/// infinite loss so line searches back away from it.
fn eval_params(obj: &Objective, p: &Params, x: &[f64]) -> Result<Option<(Evaluation, Vec<f64>)>> {
    match obj.loss_and_grad(&p.to_weights(x)) {
        Ok((ev, g)) if ev.loss.is_finite() => Ok(Some((ev, p.from_grad(&g)))),
        Ok(_) | Err(Error::ZeroState) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Minimize the objective over the active edges, starting from `init`.
/// Inactive edges are held at zero.
pub fn optimize_weights(obj: &Objective, init: &[C64], active: &[bool], cfg: &OptimizerConfig) -> Result<Optimized> {
    let p = Params { active, complex: obj.domain == WeightDomain::Complex, bound: cfg.w_max };
    let mut x = p.from_weights(init);
    let (mut ev, mut g) = eval_params(obj, &p, &x)?.ok_or(Error::ZeroState)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut stall = 0;
    let projected_norm = |x: &[f64], g: &[f64]| {
        x.iter()
            .zip(g)
            .map(|(&xi, &gi)| (xi - (xi - gi).clamp(-cfg.w_max, cfg.w_max)).abs())
            .fold(0.0, f64::max)
    };

    for iter in 0..cfg.max_iters {
        if projected_norm(&x, &g) <= cfg.grad_tol {
            return Ok(Optimized { weights: p.to_weights(&x), eval: ev, iterations: iter, termination: Termination::Converged });
        }
        let mut step = None;
        for use_history in [true, false] {
            if use_history && history.is_empty() {
                continue;
            }
            let d = if use_history { two_loop(&g, &history) } else { g.iter().map(|v| -v).collect() };
            if dot(&g, &d) >= 0.0 {
                continue;
            }
            let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let mut alpha = if use_history { 1.0 } else { (0.1 / gmax).min(1.0) };
            for _ in 0..MAX_BACKTRACKS {
                let mut xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                p.project(&mut xt);
                if xt == x {
                    break;
                }
                let decrease: f64 = g.iter().zip(xt.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
                if let Some((evt, gt)) = eval_params(obj, &p, &xt)? {
                    if evt.loss <= ev.loss + ARMIJO * decrease {
                        step = Some((xt, evt, gt));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if step.is_some() {
                break;
            }
            history.clear();
        }
        let Some((xt, evt, gt)) = step else {
            return Ok(Optimized { weights: p.to_weights(&x), eval: ev, iterations: iter, termination: Termination::Stalled });
        };
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == cfg.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        if ev.loss - evt.loss <= 1e-14 * ev.loss.abs().max(1e-3) {
            stall += 1;
        } else {
            stall = 0;
        }
        x = xt;
        ev = evt;
        g = gt;
        if stall >= STALL_WINDOW {
            return Ok(Optimized { weights: p.to_weights(&x), eval: ev, iterations: iter + 1, termination: Termination::Stalled });
        }
    }
    let termination = if projected_norm(&x, &g) <= cfg.grad_tol { Termination::Converged } else { Termination::IterationCap };
    Ok(Optimized { weights: p.to_weights(&x), eval: ev, iterations: cfg.max_iters, termination })
}

/// `-H g` from the L-BFGS history.
fn two_loop(g: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.into_iter().map(|v| -v).collect()
}

/// Uniform initial weights; complex weights get a uniform phase.
pub fn random_weights(n: usize, cfg: &OptimizerConfig, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let r = rng.gen_range(-cfg.init_range..=cfg.init_range);
            match cfg.weight_domain {
                WeightDomain::Real => C64::new(r, 0.0),
                WeightDomain::Complex => C64::from_polar(r.abs(), rng.gen_range(0.0..std::f64::consts::TAU)),
            }
        })
        .collect()
}

/// Random stream for one restart of a run seeded with `master`.
pub fn restart_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Fidelities after rescaling the small weights, for solutions that only
/// reach the target in a limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub scales: Vec<f64>,
    pub fidelities: Vec<f64>,
}

/// Weights with every edge below half the largest magnitude rescaled so the
/// largest of them has magnitude `scale`.
pub fn rescale_small(weights: &[C64], scale: f64) -> Vec<C64> {
    let max = weights.iter().map(|w| w.norm()).fold(0.0, f64::max);
    let small_max = weights.iter().map(|w| w.norm()).filter(|&m| m < 0.5 * max).fold(0.0, f64::max);
    if small_max == 0.0 {
        return weights.to_vec();
    }
    let f = scale / small_max;
    weights.iter().map(|&w| if w.norm() < 0.5 * max { w * f } else { w }).collect()
}

pub fn asymptotic_report(obj: &Objective, weights: &[C64]) -> Result<AsymptoticReport> {
    let fidelities = ASYMPTOTIC_SCALES
        .iter()
        .map(|&s| {
            obj.evaluate(&rescale_small(weights, s))?
                .fidelity
                .ok_or_else(|| Error::Config("asymptotic mode needs a fidelity target".into()))
        })
        .collect::<Result<_>>()?;
    Ok(AsymptoticReport { scales: ASYMPTOTIC_SCALES.to_vec(), fidelities })
}

/// The gap that decides success under this configuration.
pub fn success_gap(obj: &Objective, opt: &Optimized, cfg: &OptimizerConfig) -> Result<f64> {
    if cfg.asymptotic {
        let rep = asymptotic_report(obj, &opt.weights)?;
        Ok(1.0 - rep.fidelities.last().unwrap())
    } else {
        Ok(opt.eval.gap)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub edge: [usize; 4],
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pruned {
    pub active: Vec<bool>,
    pub opt: Optimized,
    pub gap: f64,
    pub removals: Vec<Removal>,
    pub trace: Vec<f64>,
}

/// Remove edges while the gap stays within the threshold. `start` must
/// already be successful.
pub fn prune(
    obj: &Objective,
    graph: &ColoredGraph,
    start: Optimized,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Pruned> {
    let n = graph.num_edges();
    let keys: Vec<[usize; 4]> = graph.edges().iter().map(|e| e.key.as_array()).collect();
    let mut active = vec![true; n];
    let mut gap = success_gap(obj, &start, cfg)?;
    let mut best = start;
    let mut removals = Vec::new();
    let mut trace = vec![best.eval.loss];
    let ok = |opt: &Optimized| -> Result<Option<f64>> {
        let g = success_gap(obj, opt, cfg)?;
        Ok((g <= cfg.loss_threshold).then_some(g))
    };

    // Weights that already vanished go in one step.
    let tiny: Vec<usize> = (0..n).filter(|&i| best.weights[i].norm() < cfg.batch_threshold).collect();
    if !tiny.is_empty() && tiny.len() < n {
        let mut trial = active.clone();
        for &i in &tiny {
            trial[i] = false;
        }
        if let Ok(opt) = optimize_weights(obj, &best.weights, &trial, cfg) {
            trace.push(opt.eval.loss);
            if let Some(g) = ok(&opt)? {
                active = trial;
                best = opt;
                gap = g;
                removals.extend(tiny.iter().map(|&i| Removal { edge: keys[i], accepted: true }));
            }
        }
    }

    let mut tried = vec![false; n];
    loop {
        let mut candidates: Vec<usize> = (0..n).filter(|&i| active[i] && !tried[i]).collect();
        if candidates.is_empty() || active.iter().filter(|&&a| a).count() <= 1 {
            break;
        }
        match cfg.removal_order {
            RemovalOrder::Ascending => {
                candidates.sort_by(|&a, &b| best.weights[a].norm().total_cmp(&best.weights[b].norm()).then(a.cmp(&b)))
            }
            RemovalOrder::Random => candidates.shuffle(rng),
        }
        let i = candidates[0];
        let mut trial = active.clone();
        trial[i] = false;
        let accepted = match optimize_weights(obj, &best.weights, &trial, cfg) {
            Ok(opt) => {
                trace.push(opt.eval.loss);
                match ok(&opt)? {
                    Some(g) => {
                        active = trial;
                        best = opt;
                        gap = g;
                        true
                    }
                    None => false,
                }
            }
            Err(Error::ZeroState) => false,
            Err(e) => return Err(e),
        };
        removals.push(Removal { edge: keys[i], accepted });
        if accepted {
            tried.iter_mut().for_each(|t| *t = false);
        } else {
            tried[i] = true;
        }
    }
    Ok(Pruned { active, opt: best, gap, removals, trace })
}

/// Outcome of a discovery run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub graph: ColoredGraph,
    pub loss: Option<f64>,
    pub gap: Option<f64>,
    pub fidelity: Option<f64>,
    pub success: bool,
    pub restart: usize,
    pub seed: u64,
    pub termination: Termination,
    pub removals: Vec<Removal>,
    pub trace: Vec<f64>,
    pub init_range: f64,
    pub restart_gaps: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<AsymptoticReport>,
}

impl DiscoveryResult {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("results always serialize")
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

struct RestartOutcome {
    index: usize,
    opt: Option<Optimized>,
    gap: f64,
}

fn run_restart(obj: &Objective, n: usize, cfg: &OptimizerConfig, master: u64, index: usize) -> Result<RestartOutcome> {
    let mut rng = restart_rng(master, index as u64);
    let init = random_weights(n, cfg, &mut rng);
    match optimize_weights(obj, &init, &vec![true; n], cfg) {
        Ok(opt) => {
            let gap = success_gap(obj, &opt, cfg)?;
            Ok(RestartOutcome { index, opt: Some(opt), gap })
        }
        Err(Error::ZeroState) => Ok(RestartOutcome { index, opt: None, gap: f64::INFINITY }),
        Err(e) => Err(e),
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Argument(e.to_string()))
}

/// Restarts from random weights, then topology search on the successful ones.
/// The winner is the pruned restart with the fewest edges, then the lowest
/// gap, then the lowest restart index.
pub fn discover_graph(
    graph: &ColoredGraph,
    rule: &ConditioningRule,
    target: &TargetSpec,
    cfg: &OptimizerConfig,
    master: u64,
    threads: usize,
) -> Result<DiscoveryResult> {
    cfg.check()?;
    let obj = Objective::compile(graph, rule, target)?;
    let n = graph.num_edges();
    let pool = thread_pool(threads)?;
    let outcomes: Vec<RestartOutcome> = pool.install(|| {
        (0..cfg.restarts).into_par_iter().map(|i| run_restart(&obj, n, cfg, master, i)).collect::<Result<_>>()
    })?;
    let restart_gaps = outcomes.iter().map(|o| finite(o.gap)).collect();
    let successes: Vec<&RestartOutcome> = outcomes.iter().filter(|o| o.gap <= cfg.loss_threshold).collect();

    let finish = |graph: ColoredGraph, opt: &Optimized, gap: f64, success, restart, removals, trace| -> Result<DiscoveryResult> {
        let asymptotic = if cfg.asymptotic { Some(asymptotic_report(&obj, &opt.weights)?) } else { None };
        Ok(DiscoveryResult {
            graph,
            loss: finite(opt.eval.loss),
            gap: finite(gap),
            fidelity: opt.eval.fidelity,
            success,
            restart,
            seed: master,
            termination: opt.termination,
            removals,
            trace,
            init_range: cfg.init_range,
            restart_gaps: Vec::new(),
            asymptotic,
        })
    };

    let mut result = if successes.is_empty() {
        let best = outcomes
            .iter()
            .filter(|o| o.opt.is_some())
            .min_by(|a, b| a.gap.total_cmp(&b.gap).then(a.index.cmp(&b.index)));
        let Some(best) = best else {
            return Err(Error::ZeroState);
        };
        let opt = best.opt.as_ref().unwrap();
        finish(graph.with_weights(&opt.weights), opt, best.gap, false, best.index, Vec::new(), vec![opt.eval.loss])?
    } else {
        let chosen: Vec<&RestartOutcome> = if cfg.prune_all { successes } else { successes[..1].to_vec() };
        let pruned: Vec<(usize, Pruned)> = pool.install(|| {
            chosen
                .par_iter()
                .map(|o| {
                    let mut rng = restart_rng(master, (1u64 << 32) + o.index as u64);
                    Ok((o.index, prune(&obj, graph, o.opt.clone().unwrap(), cfg, &mut rng)?))
                })
                .collect::<Result<_>>()
        })?;
        let (index, best) = pruned
            .into_iter()
            .min_by(|(ia, a), (ib, b)| {
                let ea = a.active.iter().filter(|&&x| x).count();
                let eb = b.active.iter().filter(|&&x| x).count();
                ea.cmp(&eb).then(a.gap.total_cmp(&b.gap)).then(ia.cmp(ib))
            })
            .unwrap();
        let final_graph = graph.with_weights(&best.opt.weights).retain_edges(|i, _| best.active[i]);
        finish(final_graph, &best.opt, best.gap, true, index, best.removals, best.trace)?
    };
    result.restart_gaps = restart_gaps;
    Ok(result)
}

/// Single-edge deletion check on a finished graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub gap: f64,
    pub success: bool,
    pub deletions: Vec<DeletionCheck>,
    pub minimal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeletionCheck {
    pub edge: [usize; 4],
    pub best_gap: Option<f64>,
    pub removable: bool,
}

/// Delete each edge in turn and re-optimize from the current weights and
/// from `fresh` random starts; the graph is locally minimal when no deletion
/// reaches the threshold.
pub fn verify_minimal(
    graph: &ColoredGraph,
    rule: &ConditioningRule,
    target: &TargetSpec,
    cfg: &OptimizerConfig,
    master: u64,
    fresh: usize,
) -> Result<MinimalityReport> {
    cfg.check()?;
    let obj = Objective::compile(graph, rule, target)?;
    let n = graph.num_edges();
    let weights = graph.weights();
    let base = Optimized { eval: obj.evaluate(&weights)?, weights: weights.clone(), iterations: 0, termination: Termination::Converged };
    let gap = success_gap(&obj, &base, cfg)?;
    let mut deletions = Vec::new();
    for i in 0..n {
        let mut active = vec![true; n];
        active[i] = false;
        let mut starts = vec![weights.clone()];
        let mut rng = restart_rng(master, (2u64 << 32) + i as u64);
        for _ in 0..fresh {
            starts.push(random_weights(n, cfg, &mut rng));
        }
        let mut best: Option<f64> = None;
        for s in starts {
            match optimize_weights(&obj, &s, &active, cfg) {
                Ok(opt) => {
                    let g = success_gap(&obj, &opt, cfg)?;
                    if best.map_or(true, |b| g < b) {
                        best = Some(g);
                    }
                }
                Err(Error::ZeroState) => {}
                Err(e) => return Err(e),
            }
        }
        let removable = best.is_some_and(|g| g <= cfg.loss_threshold);
        deletions.push(DeletionCheck { edge: graph.edges()[i].key.as_array(), best_gap: best, removable });
    }
    let minimal = deletions.iter().all(|d| !d.removable);
    Ok(MinimalityReport { gap, success: gap <= cfg.loss_threshold, deletions, minimal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, EdgeKey, Mode, VertexRole};
    use crate::state::Ket;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn edge(a: usize, b: usize, ca: usize, cb: usize, w: f64) -> Edge {
        Edge::new(EdgeKey::new(a, b, ca, cb), c(w))
    }

    fn bell_target() -> TargetSpec {
        TargetSpec::pure(vec![(Ket::qudits(&[0, 0]), c(1.0)), (Ket::qudits(&[1, 1]), c(1.0))]).unwrap()
    }

    fn two_vertex(edges: Vec<Edge>) -> ColoredGraph {
        ColoredGraph::from_roles(Mode::Postselect, WeightDomain::Real, &[(VertexRole::Detector, 2); 2], edges)
    }

    fn two_matchings(weights: [f64; 4]) -> ColoredGraph {
        ColoredGraph::from_roles(
            Mode::Postselect,
            WeightDomain::Real,
            &[(VertexRole::Detector, 2); 4],
            [
                edge(0, 1, 0, 0, weights[0]),
                edge(2, 3, 0, 0, weights[1]),
                edge(0, 2, 1, 1, weights[2]),
                edge(1, 3, 1, 1, weights[3]),
            ],
        )
    }

    fn ghz4() -> TargetSpec {
        TargetSpec::pure(vec![(Ket::qudits(&[0; 4]), c(1.0)), (Ket::qudits(&[1; 4]), c(1.0))]).unwrap()
    }

    #[test]
    fn bell_is_exact() {
        let g = two_vertex(vec![edge(0, 1, 0, 0, 0.2), edge(0, 1, 1, 1, -0.1)]);
        let obj = Objective::compile(&g, &ConditioningRule::postselect(), &bell_target()).unwrap();
        let opt = optimize_weights(&obj, &g.weights(), &[true, true], &OptimizerConfig::default()).unwrap();
        assert!(opt.eval.loss <= 1e-9, "{opt:?}");
        assert!(opt.weights.iter().all(|w| w.norm() <= 1.0));
    }

    #[test]
    fn infeasible_bell_stops_at_half() {
        let g = two_vertex(vec![edge(0, 1, 0, 0, 0.2)]);
        let obj = Objective::compile(&g, &ConditioningRule::postselect(), &bell_target()).unwrap();
        let opt = optimize_weights(&obj, &g.weights(), &[true], &OptimizerConfig::default()).unwrap();
        assert!((opt.eval.loss - 0.5).abs() < 1e-12);
        assert_eq!(opt.termination, Termination::Converged);
    }

    #[test]
    fn two_matchings_reaches_equal_magnitudes() {
        let g = two_matchings([0.3, -0.2, 0.1, 0.25]);
        let obj = Objective::compile(&g, &ConditioningRule::postselect(), &ghz4()).unwrap();
        let opt = optimize_weights(&obj, &g.weights(), &[true; 4], &OptimizerConfig::default()).unwrap();
        assert!(opt.eval.loss <= 1e-6);
        let w = |a, b, ca, cb| opt.weights[g.edge_index(&EdgeKey::new(a, b, ca, cb)).unwrap()].re;
        let (ab, cd, ac, bd) = (w(0, 1, 0, 0), w(2, 3, 0, 0), w(0, 2, 1, 1), w(1, 3, 1, 1));
        assert!((ab * cd - ac * bd).abs() < 1e-3, "{:?}", opt.weights);
        let w: Vec<f64> = opt.weights.iter().map(|z| z.re).collect();
        assert!(w.iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = two_matchings([0.3, -0.2, 0.1, 0.25]);
        let obj = Objective::compile(&g, &ConditioningRule::postselect(), &ghz4()).unwrap();
        let cfg = OptimizerConfig { max_iters: 1, ..Default::default() };
        let opt = optimize_weights(&obj, &g.weights(), &[true; 4], &cfg).unwrap();
        assert_eq!(opt.termination, Termination::IterationCap);
    }

    #[test]
    fn minimal_two_matchings_keeps_every_edge() {
        let g = two_matchings([1.0; 4]);
        let obj = Objective::compile(&g, &ConditioningRule::postselect(), &ghz4()).unwrap();
        let start = optimize_weights(&obj, &g.weights(), &[true; 4], &OptimizerConfig::default()).unwrap();
        let p = prune(&obj, &g, start, &OptimizerConfig::default(), &mut restart_rng(0, 0)).unwrap();
        assert!(p.active.iter().all(|&a| a));
        assert!(p.removals.iter().all(|r| !r.accepted));
        assert_eq!(p.removals.len(), 4);
    }

    #[test]
    fn product_target_prunes_to_one_edge() {
        let g = two_vertex(vec![edge(0, 1, 0, 0, 0.5), edge(0, 1, 0, 1, 0.3), edge(0, 1, 1, 1, 0.4)]);
        let t = TargetSpec::pure(vec![(Ket::qudits(&[0, 0]), c(1.0))]).unwrap();
        let r = discover_graph(&g, &ConditioningRule::postselect(), &t, &OptimizerConfig::default(), 3, 1).unwrap();
        assert!(r.success);
        assert_eq!(r.graph.num_edges(), 1);
        assert_eq!(r.graph.edges()[0].key, EdgeKey::new(0, 1, 0, 0));
        assert!(r.removals.iter().filter(|x| x.accepted).count() == 2);
    }

    #[test]
    fn rescaling_small_weights() {
        let w = [c(1.0), c(0.3), c(-0.15), c(0.9)];
        let r = rescale_small(&w, 0.01);
        assert_eq!(r[0], c(1.0));
        assert!((r[1].re - 0.01).abs() < 1e-15 && (r[2].re + 0.005).abs() < 1e-15);
        assert_eq!(r[3], c(0.9));
    }

    #[test]
    fn restart_streams_differ() {
        let cfg = OptimizerConfig::default();
        let a = random_weights(5, &cfg, &mut restart_rng(7, 0));
        let b = random_weights(5, &cfg, &mut restart_rng(7, 1));
        assert_ne!(a, b);
        assert_eq!(a, random_weights(5, &cfg, &mut restart_rng(7, 0)));
        assert!(a.iter().all(|w| w.re.abs() <= 0.3));
    }

    #[test]
    fn config_checks() {
        assert!(OptimizerConfig::default().check().is_ok());
        assert!(OptimizerConfig { restarts: 0, ..Default::default() }.check().is_err());
        assert!(OptimizerConfig { w_max: -1.0, ..Default::default() }.check().is_err());
        assert!(OptimizerConfig { loss_threshold: 0.0, ..Default::default() }.check().is_err());
        let cfg: OptimizerConfig = serde_json::from_str(r#"{"restarts":3}"#).unwrap();
        assert_eq!(cfg.restarts, 3);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"restart":3}"#).is_err());
    }
}
