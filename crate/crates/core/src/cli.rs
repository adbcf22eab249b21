//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use crate::enumeration::ConditioningRule;
use crate::error::{Error, Result};
use crate::graph::{validate, ColoredGraph, Mode};
use crate::instruction::{self, InstructionSet};
use crate::objectives::{
    count_rate, partitions, purity_sum_bound, purity_sum_loss, reduced_density, renyi_entropy, srv, tsallis_entropy,
    von_neumann_entropy, Layout, Objective, TargetKind, TargetSpec,
};
use crate::optimizer::{verify_minimal, DiscoveryResult, OptimizerConfig};
use crate::oracle;
use crate::render::{render_dot, RenderStyle};
use crate::state::{compute_state, normalize, trace_environment, DensityMatrix, Ket, KetMap};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BEST_EFFORT: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;

pub const SEED_VAR: &str = "GRAPHDISC_SEED";
const ORACLE_TOLERANCE: f64 = 1e-10;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  usage, config or input error
  2  best effort: discovery finished without reaching the loss threshold (result still written)
  3  verification failure: oracle disagreement, or a graph that is not locally minimal

The seed is taken from --seed, then the config, then GRAPHDISC_SEED, then 0.";

#[derive(Debug, Parser)]
#[command(name = "graphdisc", version, about = "Discover quantum optics experiments as colored weighted graphs", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a minimal graph that produces a config's target
    Discover(DiscoverArgs),
    /// Print the state a graph produces, with fidelity and entanglement metrics
    Evaluate(EvaluateArgs),
    /// Write a Graphviz description of a graph
    Render(RenderArgs),
    /// Compare the state engine with the brute-force operator expansion
    OracleCheck(OracleArgs),
    /// Check that no single edge of a graph can be removed
    VerifyMinimal(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct RuleArgs {
    /// Total photon number (fock-mode graphs)
    #[arg(long)]
    pub photons: Option<usize>,
    /// Number of photon pairs (heralded-mode graphs; default V/2)
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Vertices that must see exactly one photon (default: ancillas, inputs, environment)
    #[arg(long, value_delimiter = ',')]
    pub heralded: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct DiscoverArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of random restarts
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Worker threads for restarts (0 = all cores)
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Output directory (default graphdisc-out/<config name>)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the result JSON to stdout instead of a summary
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Srv,
    Purity,
    Entropy,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Graph file, or a discovery result holding one
    pub graph: PathBuf,
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub metric: Vec<Metric>,
    /// Largest subsystem size for the purity sum (default 1)
    #[arg(long)]
    pub k: Option<usize>,
    /// Entropy order
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    pub graph: PathBuf,
    /// Output file (default stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub graph: PathBuf,
    /// Expansion order (default: the pair count the detection rule implies)
    #[arg(long)]
    pub order: Option<usize>,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[arg(long)]
    pub json: bool,
    /// Perturb the engine result before comparing (negative control)
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Graph file, or a discovery result holding one
    pub graph: PathBuf,
    /// Config supplying target, detection rule and optimizer settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Target file, when no config is given
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Fresh random restarts per deletion, on top of the warm start
    #[arg(long, default_value_t = 3)]
    pub fresh: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[arg(long)]
    pub json: bool,
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let out = match cli.command {
        Command::Discover(a) => cmd_discover(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Render(a) => cmd_render(&a),
        Command::OracleCheck(a) => cmd_oracle_check(&a),
        Command::VerifyMinimal(a) => cmd_verify_minimal(&a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Argument(format!("{}: {e}", path.display())))
}

/// Seed precedence: flag, config, environment, zero.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Argument(format!("{SEED_VAR}={v} is not a 64-bit seed"))),
        Err(_) => Ok(0),
    }
}

/// A graph file, or the `graph` member of a discovery result.
pub fn load_graph(path: &Path) -> Result<ColoredGraph> {
    let text = read(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Graph(crate::graph::parse_error(&text, &e)))?;
    let graph = match value.get("graph") {
        Some(inner) => ColoredGraph::from_json(&inner.to_string())?,
        None => {
            let (g, warnings) = ColoredGraph::from_json_with_warnings(&text)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            g
        }
    };
    let report = validate(&graph, graph.mode);
    if !report.is_ok() {
        return Err(Error::InvalidGraph(report.to_string()));
    }
    Ok(graph)
}

pub fn rule_for(graph: &ColoredGraph, args: &RuleArgs) -> Result<ConditioningRule> {
    let heralds = if args.heralded.is_empty() { ConditioningRule::default_heralds(graph) } else { args.heralded.clone() };
    if let Some(&h) = heralds.iter().find(|&&h| h >= graph.num_vertices()) {
        return Err(Error::Argument(format!("heralded vertex {h} does not exist")));
    }
    let nv = graph.num_vertices();
    Ok(match graph.mode {
        Mode::Postselect => ConditioningRule::postselect(),
        Mode::Heralded => {
            let m = match args.pairs {
                Some(m) => m,
                None if nv % 2 == 0 => nv / 2,
                None => return Err(Error::Argument("heralded graphs with an odd vertex count need --pairs".into())),
            };
            ConditioningRule::heralded(heralds, m)
        }
        Mode::Fock => {
            let n = args.photons.ok_or_else(|| Error::Argument("fock-mode graphs need --photons".into()))?;
            ConditioningRule::fock(heralds, n)
        }
    })
}

fn fmt_amp(a: C64) -> String {
    if a.im == 0.0 {
        format!("{:+.6}", a.re)
    } else {
        format!("{:+.6}{:+.6}i", a.re, a.im)
    }
}

fn ket_json(k: &Ket) -> Value {
    json!(k.0.iter().map(|v| v.iter().map(|&c| c as usize).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn state_json(s: &KetMap) -> Value {
    Value::Array(s.by_magnitude().into_iter().map(|(k, a)| json!({"ket": ket_json(k), "amp": [a.re, a.im]})).collect())
}

fn density_json(rho: &DensityMatrix) -> Value {
    let n = rho.dim();
    json!({
        "basis": rho.basis.iter().map(ket_json).collect::<Vec<_>>(),
        "matrix": (0..n).map(|i| (0..n).map(|j| {
            let z = rho.matrix[(i, j)];
            json!([z.re, z.im])
        }).collect::<Vec<_>>()).collect::<Vec<_>>(),
    })
}

/// Terms that would print as zero are summarized in one line.
fn state_listing(state: &KetMap) -> String {
    let mut s = String::new();
    let mut hidden = 0;
    for (k, a) in state.by_magnitude() {
        if a.norm() < 5e-7 {
            hidden += 1;
        } else {
            s.push_str(&format!("  {} {k}\n", fmt_amp(a)));
        }
    }
    if hidden > 0 {
        s.push_str(&format!("  ({hidden} terms below 5e-7 omitted)\n"));
    }
    s
}

fn srv_text(v: &[usize]) -> String {
    format!("({})", v.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let graph = load_graph(&args.graph)?;
    let rule = rule_for(&graph, &args.rule)?;
    let layout = Layout::new(&graph);
    let raw = compute_state(&graph, &rule);
    let mut report = json!({
        "mode": graph.mode.to_string(),
        "vertices": graph.num_vertices(),
        "edges": graph.num_edges(),
        "state": Value::Null,
        "density": Value::Null,
        "fidelity": Value::Null,
    });
    let mut text = format!("mode: {}, {} vertices, {} edges\n", graph.mode, graph.num_vertices(), graph.num_edges());

    let pure = if graph.environment().is_some() {
        let rho = trace_environment(&raw, graph.environment())?.normalize()?;
        text.push_str(&format!("mixed state after tracing the environment ({} basis kets):\n", rho.dim()));
        for i in 0..rho.dim() {
            for j in 0..rho.dim() {
                let z = rho.matrix[(i, j)];
                if z.norm() > 1e-12 {
                    let bra = rho.basis[j].to_string();
                    let bra = bra.trim_start_matches('|').trim_end_matches('⟩');
                    text.push_str(&format!("  {} {}⟨{bra}|\n", fmt_amp(z), rho.basis[i]));
                }
            }
        }
        text.push_str(&format!("purity: {:.6}\n", rho.purity()));
        report["density"] = density_json(&rho);
        None
    } else {
        let state = normalize(&raw)?;
        text.push_str(&format!("state (normalized, {} terms):\n", state.len()));
        text.push_str(&state_listing(&state));
        report["state"] = state_json(&state);
        Some(state)
    };

    if let Some(path) = &args.target {
        let target = TargetSpec::from_json(&read(path)?, graph.mode)?;
        let obj = Objective::compile(&graph, &rule, &target)?;
        let ev = obj.evaluate(&graph.weights())?;
        match ev.fidelity {
            Some(f) => {
                text.push_str(&format!("fidelity: {f:.6}\n"));
                report["fidelity"] = json!(f);
            }
            None => {
                text.push_str(&format!("purity sum: {:.6} (bound {:.6})\n", ev.loss, ev.loss - ev.gap));
                report["purity_sum"] = json!({"value": ev.loss, "bound": ev.loss - ev.gap});
            }
        }
        if let (TargetKind::Pure(terms), None) = (&target.kind, graph.environment()) {
            let cr = count_rate(&raw, &layout.lift_pure(terms)?);
            text.push_str(&format!("count rate: {cr:.6}\n"));
            report["count_rate"] = json!(cr);
        }
    }

    if !args.metric.is_empty() {
        let Some(state) = &pure else {
            return Err(Error::Argument("entanglement metrics need a graph without an environment".into()));
        };
        let logical = layout.project(state);
        if logical.is_empty() {
            return Err(Error::ZeroState);
        }
        let n = layout.logical.len();
        for m in &args.metric {
            match m {
                Metric::Srv => {
                    let v = srv(&logical)?;
                    text.push_str(&format!("SRV: {}\n", srv_text(&v)));
                    report["srv"] = json!(v);
                }
                Metric::Purity => {
                    let k = args.k.unwrap_or(1);
                    if k == 0 || k > n / 2 {
                        return Err(Error::Argument(format!("--k must be between 1 and {}", n / 2)));
                    }
                    let parts = partitions(n, k);
                    let value = purity_sum_loss(&logical, &parts)?;
                    let bound = purity_sum_bound(&layout.logical_dims(), &parts);
                    text.push_str(&format!("purity sum (k={k}): {value:.6} (bound {bound:.6})\n"));
                    report["purity_sum"] = json!({"value": value, "bound": bound, "k": k});
                }
                Metric::Entropy => {
                    let mut rows = Vec::new();
                    for v in 0..n {
                        let rho = reduced_density(&logical, &[v])?;
                        let (r, t, vn) =
                            (renyi_entropy(&rho, args.alpha)?, tsallis_entropy(&rho, args.alpha)?, von_neumann_entropy(&rho)?);
                        text.push_str(&format!(
                            "vertex {}: renyi {r:.6}, tsallis {t:.6}, von neumann {vn:.6} (alpha {})\n",
                            layout.logical[v], args.alpha
                        ));
                        rows.push(json!({"vertex": layout.logical[v], "renyi": r, "tsallis": t, "von_neumann": vn}));
                    }
                    report["entropies"] = json!({"alpha": args.alpha, "vertices": rows});
                }
            }
        }
    }

    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{text}");
    }
    Ok(EXIT_OK)
}

fn cmd_render(args: &RenderArgs) -> Result<i32> {
    let graph = load_graph(&args.graph)?;
    let dot = render_dot(&graph, &RenderStyle::default())?;
    match &args.out {
        Some(p) => fs::write(p, dot)?,
        None => print!("{dot}"),
    }
    Ok(EXIT_OK)
}

fn cmd_oracle_check(args: &OracleArgs) -> Result<i32> {
    let graph = load_graph(&args.graph)?;
    let mut rule_args = RuleArgs { photons: args.rule.photons, pairs: args.rule.pairs, heralded: args.rule.heralded.clone() };
    if let Some(m) = args.order {
        match graph.mode {
            Mode::Fock => rule_args.photons = rule_args.photons.or(Some(2 * m)),
            Mode::Heralded => rule_args.pairs = rule_args.pairs.or(Some(m)),
            Mode::Postselect => {}
        }
    }
    let rule = rule_for(&graph, &rule_args)?;
    let order = match args.order.or(rule.pairs(&graph)) {
        Some(m) => m,
        None => return Err(Error::Argument("the detection rule fixes no expansion order; pass --order".into())),
    };
    let expected = oracle::condition(&oracle::expand(&graph, order)?, &graph, &rule);
    let mut engine = compute_state(&graph, &rule);
    if args.corrupt {
        let first = engine.terms.keys().next().cloned();
        match first {
            Some(k) => *engine.terms.get_mut(&k).unwrap() *= 1.0 + 1e-6,
            None => {
                engine.terms.insert(Ket(vec![vec![0]; graph.num_vertices()]), C64::new(1e-6, 0.0));
            }
        }
    }
    let (diff, ket) = oracle::max_discrepancy(&engine, &expected);
    let agree = diff <= ORACLE_TOLERANCE;
    if args.json {
        let report = json!({
            "order": order,
            "engine_terms": engine.len(),
            "oracle_terms": expected.len(),
            "max_diff": diff,
            "agree": agree,
            "ket": ket.as_ref().map(ket_json),
        });
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("order {order}: engine {} terms, oracle {} terms", engine.len(), expected.len());
        println!("max diff {diff:.1e}");
        if !agree {
            let k = ket.unwrap();
            println!("disagreement at {k}: engine {}, oracle {}", fmt_amp(engine.get(&k)), fmt_amp(expected.get(&k)));
        }
    }
    Ok(if agree { EXIT_OK } else { EXIT_VERIFY })
}

fn default_out(iset: &InstructionSet, config: &Path) -> PathBuf {
    let name = iset
        .doc
        .name
        .clone()
        .or_else(|| config.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "run".into());
    PathBuf::from("graphdisc-out").join(name)
}

fn threads(n: usize) -> usize {
    if n > 0 {
        n
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

fn cmd_discover(args: &DiscoverArgs) -> Result<i32> {
    let mut iset = instruction::parse(&read(&args.config)?)?;
    if let Some(r) = args.restarts {
        iset.optimizer.restarts = r;
    }
    let seed = resolve_seed(args.seed, iset.optimizer.seed)?;
    let result = instruction::discover(&iset, seed, threads(args.threads))?;
    let out = args.out.clone().unwrap_or_else(|| default_out(&iset, &args.config));
    write_outputs(&out, &iset, &result)?;
    if args.json {
        println!("{}", result.to_json_pretty());
    } else {
        print!("{}", summary(&result, &iset));
        println!("wrote {}", out.join("result.json").display());
    }
    Ok(if result.success { EXIT_OK } else { EXIT_BEST_EFFORT })
}

fn summary(r: &DiscoveryResult, iset: &InstructionSet) -> String {
    let mut s = String::new();
    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    if r.success {
        s.push_str(&format!("success: {} edges\n", r.graph.num_edges()));
    } else {
        s.push_str(&format!("no restart reached the threshold {}\n", iset.optimizer.loss_threshold));
        s.push_str(&format!("best loss: {}\n", fmt(r.loss)));
    }
    s.push_str(&format!("loss: {}\ngap: {}\n", fmt(r.loss), fmt(r.gap)));
    if let Some(f) = r.fidelity {
        s.push_str(&format!("fidelity: {f:.6}\n"));
    }
    if let Some(a) = &r.asymptotic {
        for (w, f) in a.scales.iter().zip(&a.fidelities) {
            s.push_str(&format!("fidelity at small-weight scale {w}: {f:.9}\n"));
        }
    }
    s.push_str(&format!("restart: {} (seed {})\n", r.restart, r.seed));
    for (name, members) in &iset.doc.parties {
        s.push_str(&format!("party {name}: vertices {members:?}\n"));
    }
    s
}

fn write_outputs(dir: &Path, iset: &InstructionSet, r: &DiscoveryResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("result.json"), r.to_json_pretty() + "\n")?;
    fs::write(dir.join("graph.json"), r.graph.to_json_pretty() + "\n")?;
    if iset.emit.dot {
        fs::write(dir.join("graph.dot"), render_dot(&r.graph, &RenderStyle::default())?)?;
    }
    if iset.emit.state {
        let state = compute_state(&r.graph, &iset.rule);
        let listing = if graph_has_env(&r.graph) {
            let rho = trace_environment(&state, r.graph.environment())?;
            format!("mixed state over {} basis kets, purity {:.6}\n", rho.dim(), rho.purity())
        } else {
            match normalize(&state) {
                Ok(s) => state_listing(&s),
                Err(_) => "zero state\n".to_string(),
            }
        };
        fs::write(dir.join("state.txt"), listing)?;
    }
    Ok(())
}

fn graph_has_env(g: &ColoredGraph) -> bool {
    g.environment().is_some()
}

fn cmd_verify_minimal(args: &VerifyArgs) -> Result<i32> {
    let graph = load_graph(&args.graph)?;
    let (rule, target, mut cfg) = match &args.config {
        Some(path) => {
            let iset = instruction::parse(&read(path)?)?;
            (iset.rule, iset.target, iset.optimizer)
        }
        None => {
            let path = args.target.as_ref().ok_or_else(|| Error::Argument("pass --config or --target".into()))?;
            let target = TargetSpec::from_json(&read(path)?, graph.mode)?;
            (rule_for(&graph, &args.rule)?, target, OptimizerConfig::default())
        }
    };
    if let Some(t) = args.threshold {
        cfg.loss_threshold = t;
    }
    cfg.weight_domain = graph.weight_domain;
    let seed = resolve_seed(args.seed, cfg.seed)?;
    let report = verify_minimal(&graph, &rule, &target, &cfg, seed, args.fresh)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("graph gap: {:.3e} ({})", report.gap, if report.success { "within threshold" } else { "above threshold" });
        for d in &report.deletions {
            let gap = d.best_gap.map_or("zero state".into(), |g| format!("{g:.3e}"));
            let [u, v, cu, cv] = d.edge;
            println!("  without ({u},{v}:{cu}{cv}): best gap {gap}{}", if d.removable { "  REMOVABLE" } else { "" });
        }
        println!("{}", if report.minimal { "locally minimal" } else { "not minimal" });
    }
    Ok(if report.success && report.minimal { EXIT_OK } else { EXIT_VERIFY })
}
