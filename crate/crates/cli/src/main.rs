//! `smdp`: command-line frontend for smdp-core.
//!
//! Exit codes: 0 when a value was computed or a verdict is positive
//! (holds / not refuted / valid), 1 for a negative verdict, 2 for usage and
//! model errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use smdp_core::compose::compose;
use smdp_core::cylinder::{
    parse_word, prob_cylinder_inductive, prob_cylinder_paths, prob_rect_cylinder, Interval, RectCylinder,
    TimeBoundedCylinder, TimeSet,
};
use smdp_core::dist::smt::export_smt_dominance;
use smdp_core::grid::default_points;
use smdp_core::model::{parse_model, parse_scheduler, serialize_model, validate_model};
use smdp_core::monotonicity::{check_with, Mode, MonoWitness, MonotonicityOptions, Verdict};
use smdp_core::montecarlo::estimate_cylinder;
use smdp_core::relations::{bisimilar, faster_than_bounded, simulates, FasterThanBounds, FasterThanVerdict};
use smdp_core::{CompositionOperator, Scheduler, Smdp, TimeGrid};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "smdp", version, about = "Semi-Markov decision processes: cylinder probabilities, composition, faster-than and monotonicity checks")]
struct Cli {
    /// Print a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probability of the time-bounded cylinder C(word, t).
    Prob(ProbArgs),
    /// Synchronous composition of two models.
    Compose(ComposeArgs),
    /// Bounded check of the faster-than preorder.
    FasterThan(FasterArgs),
    /// Does the right model simulate the left one?
    Simulates(PairArgs),
    /// Are the two models bisimilar?
    Bisimilar(PairArgs),
    /// Strong or bounded monotonicity of a composition operator.
    Monotonicity(MonoArgs),
    /// Monte Carlo estimate of a cylinder probability.
    Simulate(SimulateArgs),
    /// Parse and validate a model file.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Engine {
    Paths,
    Inductive,
    Rect,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Strong,
    Bounded,
}

#[derive(Args)]
struct ProbArgs {
    #[arg(long)]
    model: PathBuf,
    /// Scheduler file (`state label weight` lines); uniform when omitted.
    #[arg(long)]
    scheduler: Option<PathBuf>,
    #[arg(long)]
    word: String,
    /// Time bound; `inf` is accepted.
    #[arg(long)]
    t: f64,
    #[arg(long, value_enum, default_value = "paths")]
    engine: Engine,
    /// Compose the model with this context first.
    #[arg(long)]
    ctx: Option<PathBuf>,
    #[arg(long, value_parser = parse_op)]
    op: Option<CompositionOperator>,
}

#[derive(Args)]
struct ComposeArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long, value_parser = parse_op)]
    op: CompositionOperator,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FasterArgs {
    /// `FAST SLOW`, as an alternative to the flags.
    #[arg(num_args = 0..=2)]
    models: Vec<PathBuf>,
    #[arg(long)]
    fast: Option<PathBuf>,
    #[arg(long)]
    slow: Option<PathBuf>,
    /// Longest word checked.
    #[arg(long, default_value_t = 13)]
    depth: usize,
    /// Lattice step for slow-side schedulers.
    #[arg(long, default_value_t = 0.25)]
    step: f64,
    #[arg(long, default_value_t = 10.0)]
    tmax: f64,
    /// Grid points in (0, tmax]; defaults to $SMDP_GRID_POINTS or 20.
    #[arg(long)]
    points: Option<usize>,
    /// Explicit time bounds, comma separated; replaces the linear grid.
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Check only this slow-side scheduler.
    #[arg(long)]
    adversary: Option<PathBuf>,
    #[arg(long, default_value_t = 4096)]
    max_schedulers: usize,
}

#[derive(Args)]
struct PairArgs {
    /// `LEFT RIGHT`, as an alternative to the flags.
    #[arg(num_args = 0..=2)]
    models: Vec<PathBuf>,
    #[arg(long)]
    left: Option<PathBuf>,
    #[arg(long)]
    right: Option<PathBuf>,
}

#[derive(Args)]
struct MonoArgs {
    #[arg(long)]
    fast: PathBuf,
    #[arg(long)]
    slow: PathBuf,
    #[arg(long)]
    ctx: PathBuf,
    /// Context of the slow side; `--ctx` when omitted.
    #[arg(long)]
    ctx2: Option<PathBuf>,
    #[arg(long, value_parser = parse_op)]
    op: CompositionOperator,
    #[arg(long, value_enum, default_value = "strong")]
    mode: ModeArg,
    /// Path length for the check; the path bound when omitted.
    #[arg(long)]
    n: Option<usize>,
    /// Report every violation instead of the first.
    #[arg(long)]
    all: bool,
    /// Write SMT-LIB dominance queries into this directory.
    #[arg(long)]
    emit_smt: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    scheduler: Option<PathBuf>,
    #[arg(long)]
    word: String,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(required_unless_present = "model_flag")]
    model: Option<PathBuf>,
    #[arg(long = "model", id = "model_flag")]
    model_flag: Option<PathBuf>,
}

fn parse_op(s: &str) -> std::result::Result<CompositionOperator, String> {
    s.parse().map_err(|e: smdp_core::Error| e.to_string())
}

#[derive(Serialize)]
struct Input {
    role: String,
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Report {
    schema_version: u32,
    command: &'static str,
    inputs: Vec<Input>,
    result: Value,
    bounds: Value,
    wall_time_ms: f64,
}

/// What a command produced.
struct Outcome {
    text: String,
    result: Value,
    bounds: Value,
    negative: bool,
}

impl Outcome {
    fn value(text: String, result: Value) -> Self {
        Outcome {
            text,
            result,
            bounds: Value::Null,
            negative: false,
        }
    }
}

#[derive(Default)]
struct Inputs(Vec<Input>);

impl Inputs {
    fn read(&mut self, role: &str, path: &Path) -> Result<String> {
        let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.0.push(Input {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    fn model(&mut self, role: &str, path: &Path) -> Result<Smdp> {
        let text = self.read(role, path)?;
        let m = parse_model(&text).with_context(|| format!("{}", path.display()))?;
        m.ensure_valid().with_context(|| format!("{}", path.display()))?;
        Ok(m)
    }

    fn scheduler(&mut self, m: &Smdp, path: Option<&Path>) -> Result<Scheduler> {
        match path {
            None => Ok(Scheduler::uniform(m)),
            Some(p) => {
                let text = self.read("scheduler", p)?;
                parse_scheduler(m, &text).with_context(|| format!("{}", p.display()))
            }
        }
    }
}

fn pair(models: &[PathBuf], a: &Option<PathBuf>, b: &Option<PathBuf>, names: (&str, &str)) -> Result<(PathBuf, PathBuf)> {
    let mut pos = models.iter().cloned();
    let first = a.clone().or_else(|| pos.next());
    let second = b.clone().or_else(|| pos.next());
    match (first, second) {
        (Some(x), Some(y)) if pos.next().is_none() => Ok((x, y)),
        _ => bail!("expected two models (`--{} F --{} G` or two positional paths)", names.0, names.1),
    }
}

fn named_weights(sched: &std::collections::BTreeMap<String, std::collections::BTreeMap<String, f64>>) -> String {
    sched
        .iter()
        .map(|(s, row)| {
            let w: Vec<String> = row.iter().map(|(a, p)| format!("{a}={p}")).collect();
            format!("{s}: {}", w.join(" "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn run_prob(a: &ProbArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let mut m = inputs.model("model", &a.model)?;
    if let Some(ctx) = &a.ctx {
        let op = a.op.ok_or_else(|| anyhow!("--ctx needs --op"))?;
        let w = inputs.model("context", ctx)?;
        m = compose(&m, &w, op)?;
    }
    let sch = inputs.scheduler(&m, a.scheduler.as_deref())?;
    let word = parse_word(&m, &a.word)?;
    let s = m.initial();
    let p = match a.engine {
        Engine::Paths => prob_cylinder_paths(&m, &sch, s, &TimeBoundedCylinder::new(word.clone(), a.t)?)?,
        Engine::Inductive => prob_cylinder_inductive(&m, &sch, s, &TimeBoundedCylinder::new(word.clone(), a.t)?)?,
        Engine::Rect => {
            // Every step bounded by t on its own; equal to C(word, t) for one label.
            let mut c = RectCylinder::unbounded_word(&m, &word);
            if a.t.is_finite() {
                for st in &mut c.steps {
                    st.times = TimeSet::new(vec![Interval::closed(0.0, a.t)])?;
                }
            }
            prob_rect_cylinder(&m, &sch, s, &c)?
        }
    };
    let labels: Vec<&str> = word.iter().map(|&l| m.label_name(l)).collect();
    Ok(Outcome::value(
        format!("{p:.6}"),
        json!({ "probability": p, "engine": a.engine, "word": labels, "t": a.t }),
    ))
}

fn run_compose(a: &ComposeArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let u = inputs.model("left", &a.left)?;
    let w = inputs.model("right", &a.right)?;
    let c = compose(&u, &w, a.op)?;
    let text = serialize_model(&c);
    let out = match &a.out {
        Some(p) => {
            std::fs::write(p, &text).with_context(|| format!("cannot write {}", p.display()))?;
            format!("wrote {} ({} states)", p.display(), c.num_states())
        }
        None => text.trim_end().to_string(),
    };
    Ok(Outcome::value(
        out,
        json!({
            "operator": a.op.to_string(),
            "states": c.states(),
            "labels": c.labels(),
            "out": a.out.as_ref().map(|p| p.display().to_string()),
            "model": text,
        }),
    ))
}

fn run_faster(a: &FasterArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let (fast_p, slow_p) = pair(&a.models, &a.fast, &a.slow, ("fast", "slow"))?;
    let fast = inputs.model("fast", &fast_p)?;
    let slow = inputs.model("slow", &slow_p)?;
    let mut bounds = FasterThanBounds::new(a.depth);
    bounds.grid = if a.times.is_empty() {
        TimeGrid::linear(a.tmax, a.points.unwrap_or_else(|| default_points(20)))?
    } else {
        TimeGrid::explicit(a.times.clone())?
    };
    bounds.search.step = a.step;
    bounds.search.max_schedulers = a.max_schedulers;
    if let Some(p) = &a.adversary {
        bounds.search.adversaries = Some(vec![inputs.scheduler(&slow, Some(p))?]);
    }
    let verdict = faster_than_bounded(&fast, &slow, &bounds)?;
    let text = match &verdict {
        FasterThanVerdict::Refuted(w) => {
            let mut s = String::from("REFUTED\n");
            let _ = writeln!(s, "  word: {}", w.word.join(" "));
            let _ = writeln!(s, "  t: {}", w.t);
            let _ = writeln!(s, "  P_fast = {:.6} < P_slow = {:.6}", w.prob_fast, w.prob_slow);
            let _ = writeln!(s, "  slow scheduler: {}", named_weights(&w.slow_scheduler));
            let _ = writeln!(s, "  fast scheduler: {}", named_weights(&w.fast_scheduler));
            let _ = write!(
                s,
                "  {}",
                if w.exact {
                    "exact: the fast model has no choices"
                } else {
                    "best fast scheduler found by search"
                }
            );
            s
        }
        FasterThanVerdict::NotRefuted {
            depth,
            times,
            step,
            adversaries_checked,
            truncated,
        } => format!(
            "NOT REFUTED (bounded evidence: words up to length {depth}, {} time points up to {}, scheduler step {step}, {adversaries_checked} adversaries{})",
            times.len(),
            times.last().copied().unwrap_or(0.0),
            if *truncated { ", truncated" } else { "" }
        ),
    };
    Ok(Outcome {
        text,
        negative: verdict.is_refuted(),
        result: serde_json::to_value(&verdict)?,
        bounds: serde_json::to_value(&bounds)?,
    })
}

fn run_relation(a: &PairArgs, inputs: &mut Inputs, bisim: bool) -> Result<Outcome> {
    let (lp, rp) = pair(&a.models, &a.left, &a.right, ("left", "right"))?;
    let l = inputs.model("left", &lp)?;
    let r = inputs.model("right", &rp)?;
    let res = if bisim { bisimilar(&l, &r)? } else { simulates(&l, &r)? };
    let mut text = format!("{}", res.holds);
    for (x, y) in &res.pairs {
        let _ = write!(text, "\n  {x} {y}");
    }
    Ok(Outcome {
        text,
        negative: !res.holds,
        result: serde_json::to_value(&res)?,
        bounds: Value::Null,
    })
}

fn run_monotonicity(a: &MonoArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let u = inputs.model("fast", &a.fast)?;
    let v = inputs.model("slow", &a.slow)?;
    let w = inputs.model("context", &a.ctx)?;
    let w2 = match &a.ctx2 {
        Some(p) => inputs.model("context2", p)?,
        None => w.clone(),
    };
    let mode = match a.mode {
        ModeArg::Strong => Mode::Strong,
        ModeArg::Bounded => Mode::Bounded,
    };
    if mode == Mode::Strong && a.n.is_some() {
        bail!("--n applies to bounded mode only");
    }
    let opts = MonotonicityOptions {
        all: a.all,
        ..MonotonicityOptions::default()
    };
    let report = check_with(&u, &v, &w, &w2, a.op, mode, a.n, &opts)?;

    let mut smt_files = Vec::new();
    if let Some(dir) = &a.emit_smt {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for (k, c) in report.dominance_checks.iter().enumerate() {
            match export_smt_dominance(&c.left, &c.right) {
                Ok(q) => {
                    let path = dir.join(format!("dominance_{k:03}.smt2"));
                    let header = format!("; {:?} at {}: F_{} >= F_{}\n", c.condition, c.state, c.left, c.right);
                    std::fs::write(&path, header + &q.text)?;
                    smt_files.push(json!({ "path": path.display().to_string(), "exact": q.exact }));
                }
                Err(e) => smt_files.push(json!({ "state": c.state, "skipped": e.to_string() })),
            }
        }
    }

    let mut text = format!(
        "{} ({} mode, path bound m = {}, checked up to length {})",
        match report.verdict {
            Verdict::Holds => "HOLDS",
            Verdict::Fails => "FAILS",
        },
        match mode {
            Mode::Strong => "strong",
            Mode::Bounded => "bounded",
        },
        report.bound,
        report.checked_depth
    );
    for v in &report.violations {
        let at = v.index.map(|i| format!(" at i = {i}")).unwrap_or_default();
        let label = v.label.as_ref().map(|l| format!(", label {l}")).unwrap_or_default();
        let detail = match &v.witness {
            MonoWitness::Time { t, left, right, left_cdf, right_cdf } => {
                format!("F_{left}({t}) = {left_cdf:.6} < F_{right}({t}) = {right_cdf:.6}")
            }
            MonoWitness::Schedulers { component, composite, lhs, rhs, .. } => format!(
                "component at {} [{}], composite at {} [{}]: {lhs:.6} < {rhs:.6}",
                component.state,
                component.weights.keys().cloned().collect::<Vec<_>>().join(","),
                composite.state,
                composite.weights.keys().cloned().collect::<Vec<_>>().join(","),
            ),
            MonoWitness::Assignment { state, total, .. } => {
                format!("demands on the scheduler at {state} sum to {total:.6} > 1")
            }
            MonoWitness::Kernel { state, label, successors } => {
                format!("{state} branches under {label} to {}", successors.join(", "))
            }
        };
        let _ = write!(text, "\n  {:?}{at}{label}: {detail}", v.condition);
        if !v.path.is_empty() {
            let _ = write!(text, "\n    path: {}", v.path.join(" "));
        }
    }
    for c in &report.caveats {
        let _ = write!(text, "\n  note: {c}");
    }
    let mut result = serde_json::to_value(&report)?;
    if a.emit_smt.is_some() {
        result["smt_files"] = Value::Array(smt_files);
    }
    Ok(Outcome {
        text,
        negative: report.verdict == Verdict::Fails,
        bounds: json!({ "bound": report.bound, "depth": report.depth }),
        result,
    })
}

fn run_simulate(a: &SimulateArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let m = inputs.model("model", &a.model)?;
    let sch = inputs.scheduler(&m, a.scheduler.as_deref())?;
    let word = parse_word(&m, &a.word)?;
    let e = estimate_cylinder(&m, &sch, &word, a.t, a.samples, a.seed)?;
    Ok(Outcome {
        text: format!(
            "{:.6} ± {:.6} (99% CI, {} of {} runs)",
            e.estimate, e.half_width, e.hits, e.samples
        ),
        result: serde_json::to_value(e)?,
        bounds: json!({ "samples": a.samples, "seed": a.seed }),
        negative: false,
    })
}

/// Validation problems are model errors: exit 2 with the list.
fn run_validate(a: &ValidateArgs, inputs: &mut Inputs) -> Result<Outcome> {
    let path = a.model.as_ref().or(a.model_flag.as_ref()).expect("clap enforces a model");
    let text = inputs.read("model", path)?;
    let m = parse_model(&text).with_context(|| format!("{}", path.display()))?;
    let violations = validate_model(&m);
    if violations.is_empty() {
        return Ok(Outcome::value(
            format!("valid ({} states, {} labels)", m.num_states(), m.num_labels()),
            json!({ "valid": true, "violations": [] }),
        ));
    }
    let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
    Err(anyhow!(ValidationFailed(serde_json::to_value(&violations)?, list)))
}

#[derive(Debug)]
struct ValidationFailed(Value, Vec<String>);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid model:")?;
        for v in &self.1 {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationFailed {}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let mut inputs = Inputs::default();
    let (name, res) = match &cli.command {
        Command::Prob(a) => ("prob", run_prob(a, &mut inputs)),
        Command::Compose(a) => ("compose", run_compose(a, &mut inputs)),
        Command::FasterThan(a) => ("faster-than", run_faster(a, &mut inputs)),
        Command::Simulates(a) => ("simulates", run_relation(a, &mut inputs, false)),
        Command::Bisimilar(a) => ("bisimilar", run_relation(a, &mut inputs, true)),
        Command::Monotonicity(a) => ("monotonicity", run_monotonicity(a, &mut inputs)),
        Command::Simulate(a) => ("simulate", run_simulate(a, &mut inputs)),
        Command::Validate(a) => ("validate", run_validate(a, &mut inputs)),
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    match res {
        Ok(out) => {
            if cli.json {
                let report = Report {
                    schema_version: SCHEMA_VERSION,
                    command: name,
                    inputs: inputs.0,
                    result: out.result,
                    bounds: out.bounds,
                    wall_time_ms,
                };
                emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
            } else {
                emit(&out.text);
            }
            if out.negative {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            if cli.json {
                let detail = e.downcast_ref::<ValidationFailed>().map(|v| v.0.clone());
                let report = json!({
                    "schema_version": SCHEMA_VERSION,
                    "command": name,
                    "inputs": inputs.0,
                    "error": format!("{e:#}"),
                    "violations": detail,
                    "wall_time_ms": wall_time_ms,
                });
                emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
            }
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
