use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::{json, Value};

use cberlab::expansions::bijection::greedy_bijection;
use cberlab::expansions::colouring::equivariant_colouring;
use cberlab::expansions::forest::{graph_edges, spanning_forest};
use cberlab::expansions::linearize::{merge_linearizations, singleton_pieces};
use cberlab::expansions::tree::tree_linearization;
use cberlab::expansions::zline::{zline_select, OrderSpec, ZlineVerdict};
use cberlab::expansions::Frame;
use cberlab::gallery::adversary::{adversary, replay, shipped_rules, AdversaryProblem};
use cberlab::gallery::dyadic::{check_conjugation, check_flip, check_successor, check_transitivity};
use cberlab::gallery::ramsey::clique_statistics;
use cberlab::groups::{Element, GroupModel, Window};
use cberlab::harness::{list_experiments, run_experiment, with_threads, ExperimentConfig};
use cberlab::ire_lp::{
    build_lp, max_marked_density, solve, verify, BaseSpec, Certificate, Decoration, HardConstraints, WindowModel,
};
use cberlab::local_rules::LocalRule;
use cberlab::patterns::{Language, Pattern};
use cberlab::walks::{freq_estimate, Target, WalkConfig};

/// Finite-window experiments on expansion problems over countable groups.
#[derive(Parser)]
#[command(name = "cberlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its report.
    Run {
        config: PathBuf,
        /// Overrides the config's report path.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Overrides the config's CSV directory.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
    },
    /// List experiment ids.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Random walks.
    #[command(subcommand)]
    Walk(WalkCommand),
    /// Window LPs for invariant random expansions on Z.
    #[command(subcommand)]
    Ire(IreCommand),
    /// Worked examples and adversaries.
    #[command(subcommand)]
    Gallery(GalleryCommand),
    /// Run an expansion algorithm on a pattern.
    Expand(ExpandArgs),
}

#[derive(Subcommand)]
enum WalkCommand {
    /// Estimate how often a walk visits a target set.
    Freq {
        #[arg(long, default_value = "Z")]
        group: String,
        /// `all`, `evens`, `odds`, `kZ` or `kZ+r` (first coordinate in Z^d).
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 200_000)]
        steps: usize,
        #[arg(long, default_value_t = 20)]
        walks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Holding probability of a lazy walk.
        #[arg(long, default_value_t = 0.0)]
        hold: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LpProblemArg {
    Ramsey,
    Linearization,
}

#[derive(Subcommand)]
enum IreCommand {
    /// Largest P[0 ∈ T] for homogeneous marked sets on n-windows.
    MaxDensity {
        #[arg(long, value_enum, default_value = "ramsey")]
        problem: LpProblemArg,
        #[arg(long, default_value = "1/2")]
        p: String,
        #[arg(long)]
        window: usize,
        /// Where to write the certificate.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Feasibility of the window LP, with a certificate either way.
    Feasible {
        #[arg(long, value_enum)]
        problem: LpProblemArg,
        #[arg(long, default_value = "1/2")]
        p: String,
        #[arg(long)]
        window: usize,
        /// Require P[0 ∈ T] ≥ this (Ramsey only).
        #[arg(long)]
        min_density: Option<String>,
        /// Require T to meet every window (Ramsey only).
        #[arg(long)]
        nonempty: bool,
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DyadicCheckArg {
    Successor,
    Transitivity,
    Flip,
    Conjugation,
}

#[derive(Subcommand)]
enum GalleryCommand {
    /// Checks on the dyadic order over truncations of length `len`.
    Dyadic {
        #[arg(long, value_enum)]
        check: DyadicCheckArg,
        #[arg(long, default_value_t = 12)]
        len: usize,
        /// Sample this many triples instead of all (transitivity only).
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Largest homogeneous sets of random pair colourings.
    RamseyClique {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "1/2")]
        p: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Search for a configuration defeating a local rule.
    Adversary {
        /// `ramsey`, `linearization` or `zline`.
        #[arg(long)]
        problem: String,
        /// Table-form rule JSON; the shipped rule when absent.
        #[arg(long)]
        rule: Option<PathBuf>,
        /// Radius of the shipped rule.
        #[arg(long, default_value_t = 1)]
        radius: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Bijection,
    Colouring,
    Forest,
    Linearize,
    TreeOrder,
    Zline,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(value_enum)]
    algorithm: Algorithm,
    /// Pattern JSON (an order spec for `zline`).
    input: PathBuf,
    /// Where to write the decorated pattern; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Degree bound for `colouring`; the largest degree when absent.
    #[arg(long)]
    d: Option<usize>,
    /// Treat the input as a window into a larger structure, reporting only
    /// on the ball of this radius (`bijection`, `colouring`).
    #[arg(long)]
    interior: Option<usize>,
    /// Block frequencies for `zline` as a JSON object; read from the input's
    /// "freqs" key when absent.
    #[arg(long)]
    freqs: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_threads(None, || dispatch(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

// A closed stdout (say, piped into `head`) is not an error.
fn print(v: &Value) {
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn ratio(s: &str) -> Result<BigRational> {
    let r: BigRational = s.trim().parse().map_err(|_| anyhow!("'{s}' is not a rational number such as 1/2"))?;
    Ok(r)
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Returns whether every check passed.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, report, csv_dir } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if report.is_some() {
                cfg.outputs.report = report;
            }
            if csv_dir.is_some() {
                cfg.outputs.csv_dir = csv_dir;
            }
            let r = run_experiment(&cfg)?;
            for (job, c) in r.checks() {
                eprintln!("{} [{}] {}", if c.pass { "PASS" } else { "FAIL" }, job.experiment, c.name);
            }
            eprintln!("{}: {}", cfg.id, r.summary);
            let written = r.write_outputs()?;
            if cfg.outputs.report.is_none() {
                print(&r.to_json());
            }
            for p in written {
                eprintln!("wrote {}", p.display());
            }
            Ok(r.pass)
        }
        Command::List { json } => {
            if json {
                print(&serde_json::to_value(list_experiments())?);
            } else {
                let width = list_experiments().iter().map(|e| e.id.len()).max().unwrap_or(0);
                for e in list_experiments() {
                    let _ = writeln!(std::io::stdout().lock(), "{:width$}  {}", e.id, e.topic);
                }
            }
            Ok(true)
        }
        Command::Walk(WalkCommand::Freq { group, target, steps, walks, seed, hold }) => {
            let group: GroupModel = group.parse().map_err(|e| anyhow!("{e}"))?;
            let target: Target = target.parse()?;
            let mut cfg = WalkConfig::simple(group, steps, seed);
            if hold > 0.0 {
                cfg = cfg.lazy(hold);
            }
            let est = freq_estimate(|x| target.contains(x), &cfg, walks)?;
            let expected = target.density();
            let pass = est.agrees_with(expected);
            print(&json!({
                "estimate": est.estimate,
                "se": est.se,
                "expected": expected,
                "verdict": if pass { "PASS" } else { "FAIL" },
                "target": target.to_string(),
                "config": cfg.to_json(),
                "walks": walks,
            }));
            Ok(true)
        }
        Command::Ire(cmd) => ire(cmd),
        Command::Gallery(cmd) => gallery(cmd),
        Command::Expand(args) => expand(args),
    }
}

fn ire(cmd: IreCommand) -> Result<bool> {
    match cmd {
        IreCommand::MaxDensity { problem, p, window, certificate } => {
            if !matches!(problem, LpProblemArg::Ramsey) {
                bail!("max-density is defined for the ramsey problem only");
            }
            let p = ratio(&p)?;
            let r = max_marked_density(&p, window)?;
            verify(&r.lp, &r.certificate)?;
            let path = certificate.unwrap_or_else(|| PathBuf::from(format!("max-density-n{window}.json")));
            let mut doc = r.to_json();
            doc["p"] = json!(p.to_string());
            doc["certificate"] = r.certificate.to_json(&r.lp);
            write_json(&path, &doc)?;
            print(&json!({
                "delta_star": r.delta.to_string(),
                "delta_star_float": doc["delta_star_float"],
                "window": window,
                "certificate_path": path.display().to_string(),
            }));
            Ok(true)
        }
        IreCommand::Feasible { problem, p, window, min_density, nonempty, certificate } => {
            let (base, deco) = match problem {
                LpProblemArg::Ramsey => (BaseSpec::IidPairs { p: ratio(&p)? }, Decoration::MarkedSet),
                LpProblemArg::Linearization => (BaseSpec::Empty, Decoration::LinearOrder),
            };
            if matches!(problem, LpProblemArg::Linearization) && (min_density.is_some() || nonempty) {
                bail!("--min-density and --nonempty apply to the ramsey problem only");
            }
            let hard = HardConstraints {
                nonempty,
                min_density: min_density.as_deref().map(ratio).transpose()?,
                largest_only: false,
            };
            let model = WindowModel::new(window, base, deco)?;
            let lp = build_lp(&model, &hard, false)?;
            let cert = solve(&lp)?;
            verify(&lp, &cert)?;
            let verdict = if cert.is_feasible() { "FEASIBLE" } else { "INFEASIBLE" };
            let path = certificate.unwrap_or_else(|| PathBuf::from(format!("feasible-n{window}.json")));
            write_json(&path, &json!({"lp": lp.summary(), "verdict": verdict, "certificate": cert.to_json(&lp)}))?;
            print(&json!({
                "verdict": verdict,
                "window": window,
                "certificate_kind": match cert { Certificate::Infeasible { .. } => "farkas", _ => "primal" },
                "certificate_path": path.display().to_string(),
            }));
            Ok(true)
        }
    }
}

fn gallery(cmd: GalleryCommand) -> Result<bool> {
    match cmd {
        GalleryCommand::Dyadic { check, len, samples, seed } => {
            let lo = if check == DyadicCheckArg::Successor { 2 } else { 1 };
            if !(lo..=20).contains(&len) {
                bail!("--len must lie in {lo}..=20");
            }
            let c = match check {
                DyadicCheckArg::Successor => check_successor(len),
                DyadicCheckArg::Transitivity => check_transitivity(len, samples, seed),
                DyadicCheckArg::Flip => check_flip(len),
                DyadicCheckArg::Conjugation => check_conjugation(len),
            };
            print(&c.to_json());
            Ok(c.passed())
        }
        GalleryCommand::RamseyClique { n, p, samples, seed } => {
            let stats = clique_statistics(n, &ratio(&p)?, samples, seed)?;
            print(&stats.to_json());
            Ok(true)
        }
        GalleryCommand::Adversary { problem, rule, radius, seed } => {
            let problem: AdversaryProblem = problem.parse()?;
            let rule: LocalRule = match rule {
                Some(path) => LocalRule::from_table_json(&read_json(&path)?)?,
                None => shipped_rules(radius)
                    .into_iter()
                    .find(|(p, _)| *p == problem)
                    .map(|(_, r)| r)
                    .ok_or_else(|| anyhow!("no shipped rule for {problem}"))?,
            };
            let outcome = adversary(problem, &rule, seed)?;
            let mut doc = outcome.to_json();
            doc["rule"] = json!(rule.name);
            if let Some(d) = outcome.defeat() {
                doc["replayed"] = json!(replay(&rule, d)?);
            }
            print(&doc);
            Ok(true)
        }
    }
}

/// `base` with one more relation.
fn decorate(base: &Pattern, name: &str, arity: usize, tuples: impl IntoIterator<Item = Vec<Element>>) -> Result<Pattern> {
    let lang = base.language().extend(&Language::new([(name, arity)])?)?;
    let mut p = Pattern::new(base.group, lang, base.universe().iter().cloned());
    for s in base.language().symbols() {
        for t in base.tuples(&s.name) {
            p.insert(&s.name, t.clone())?;
        }
    }
    for t in tuples {
        p.insert(name, t)?;
    }
    Ok(p)
}

/// The ball around the identity covering the universe, padded out from
/// `interior` when given.
fn covering_window(p: &Pattern, interior: Option<usize>) -> Result<(Window, Frame)> {
    let reach = p.universe().iter().map(Element::length).max().unwrap_or(0);
    Ok(match interior {
        None => (Window::ball(p.group, reach), Frame::Closed),
        Some(r) if r <= reach => (Window::padded(p.group, r, reach - r), Frame::Window),
        Some(r) => bail!("--interior {r} exceeds the input radius {reach}"),
    })
}

fn expand(args: ExpandArgs) -> Result<bool> {
    let input = read_json(&args.input)?;
    let (out, report): (Value, Value) = if args.algorithm == Algorithm::Zline {
        let spec = OrderSpec::from_json(&input)?;
        let freqs = match &args.freqs {
            Some(s) => serde_json::from_str(s).context("--freqs is not JSON")?,
            None => input.get("freqs").cloned().unwrap_or(Value::Null),
        };
        let freqs: BTreeMap<usize, f64> = freqs
            .as_object()
            .ok_or_else(|| anyhow!("block frequencies are needed as a JSON object"))?
            .iter()
            .map(|(k, v)| Ok((k.parse()?, v.as_f64().ok_or_else(|| anyhow!("frequency of block {k}"))?)))
            .collect::<Result<_>>()?;
        match zline_select(&spec, &freqs)? {
            ZlineVerdict::Selected(b) => (spec.decorate(b)?.to_json(), json!({"verdict": "SELECTED", "block": b})),
            ZlineVerdict::NotInX(why) => (spec.to_pattern()?.to_json(), json!({"verdict": "NOT-IN-X", "reason": why})),
        }
    } else {
        let p = Pattern::from_json(&input)?;
        expand_pattern(args.algorithm, &p, &args)?
    };
    match &args.out {
        Some(path) => write_json(path, &out)?,
        None => print(&out),
    }
    eprintln!("{}", serde_json::to_string_pretty(&report)?);
    Ok(true)
}

fn expand_pattern(alg: Algorithm, p: &Pattern, args: &ExpandArgs) -> Result<(Value, Value)> {
    Ok(match alg {
        Algorithm::Bijection => {
            let (w, frame) = covering_window(p, args.interior)?;
            let a: BTreeSet<Element> = p.unary("A");
            let b: BTreeSet<Element> = p.unary("B");
            let t = greedy_bijection(&a, &b, &w, None, frame)?;
            let pairs = t.phi.iter().map(|(x, y)| vec![x.clone(), y.clone()]);
            let report = json!({
                "frame": frame,
                "pairs": t.phi.len(),
                "dichotomy": t.dichotomy(),
                "unmatched_a": t.unmatched_a.len(),
                "unmatched_b": t.unmatched_b.len(),
                "undetermined": t.undetermined_a.len() + t.undetermined_b.len(),
            });
            (decorate(p, "Phi", 2, pairs)?.to_json(), report)
        }
        Algorithm::Colouring => {
            let (w, frame) = covering_window(p, args.interior)?;
            let d = match args.d {
                Some(d) => d,
                None => {
                    let mut degree: BTreeMap<&Element, usize> = BTreeMap::new();
                    for t in p.tuples("E").filter(|t| t[0] != t[1]) {
                        *degree.entry(&t[0]).or_default() += 1;
                    }
                    degree.values().copied().max().unwrap_or(0)
                }
            };
            let s = equivariant_colouring(p, &w, d, frame)?;
            let used: BTreeSet<usize> = s.colour.values().copied().collect();
            let report = json!({
                "frame": frame,
                "d": d,
                "coloured": s.colour.len(),
                "uncoloured": s.uncoloured.len(),
                "colours_used": used.len(),
            });
            (s.decorate(p)?.to_json(), report)
        }
        Algorithm::Forest => {
            let reach = p.universe().iter().map(Element::length).max().unwrap_or(0);
            let exhaustion: Vec<Vec<BTreeSet<Element>>> = (0..=reach)
                .map(|t| {
                    let ball: BTreeSet<Element> = p.universe().iter().filter(|x| x.length() <= t).cloned().collect();
                    let mut stage = vec![ball.clone()];
                    stage.extend(p.universe().iter().filter(|x| !ball.contains(*x)).map(|x| BTreeSet::from([x.clone()])));
                    stage
                })
                .collect();
            graph_edges(p)?;
            let t = spanning_forest(p, &exhaustion)?;
            let edges = t.edges().iter().flat_map(|(x, y)| [vec![x.clone(), y.clone()], vec![y.clone(), x.clone()]]);
            let report = json!({"stages": t.stages.iter().map(|s| s.len()).collect::<Vec<_>>(), "edges": t.edges().len()});
            (decorate(p, "T", 2, edges)?.to_json(), report)
        }
        Algorithm::Linearize => {
            let t = merge_linearizations(p, &singleton_pieces(p.universe()))?;
            let order = t.order();
            let pairs = order.iter().enumerate().flat_map(|(i, x)| order[i + 1..].iter().map(move |y| vec![x.clone(), y.clone()]));
            (decorate(p, "L", 2, pairs)?.to_json(), t.to_json())
        }
        Algorithm::TreeOrder => {
            let t = tree_linearization(p, None)?;
            let pairs = t
                .orders
                .iter()
                .flat_map(|o| o.iter().enumerate().flat_map(move |(i, x)| o[i + 1..].iter().map(move |y| vec![x.clone(), y.clone()])));
            (decorate(p, "L", 2, pairs)?.to_json(), t.to_json())
        }
        Algorithm::Zline => unreachable!("handled by the caller"),
    })
}
