//! Monotonicity of a composition operator in `U`, `V`, `W`, `W'`, in its
//! strong (both schedulers universal) and bounded (existential inner
//! scheduler) forms.
//!
//! Scheduler quantifiers are eliminated per transition:
//!
//! * strong, fast side: `inf` of the composite side is 0 when there is more
//!   than one label, so any positive `τ_U(u_i,a)(u_{i+1})` is a violation;
//!   with one label the composite must carry `τ_W = 1`.
//! * strong, slow side: with more than one label any positive composite
//!   transition is a violation; with one label it never is.
//! * bounded, fast side: a Dirac adversary at `a` forces weight
//!   `1 / τ_W(w_i,a)(w_{i+1})` on the composite state, so `τ_W < 1` next to a
//!   positive `τ_U` is a violation.
//! * bounded, slow side: `σ_V(v)` has to cover, for every label, the largest
//!   demand of the composite states `v⋆w'` met along a pair of paths; the
//!   adversary puts each composite state on one label.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::compose::composite_name;
use crate::dist::dominance::{dominates, DominanceGrid, DominanceOutcome};
use crate::dist::{compose_residence, CompositionOperator, Distribution};
use crate::error::{Error, Result};
use crate::model::{has_deterministic_kernel, LabelId, Smdp, StateId};

const TAU_TOL: f64 = 1e-12;

/// A state path `s_1 … s_n` starting in the initial state.
pub type StatePath = Vec<StateId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Strong,
    Bounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Holds,
    Fails,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Condition {
    DetKernel,
    CdfFast,
    CdfSlow,
    SchedFast,
    SchedSlow,
}

/// A scheduler row at one state, `label -> weight`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulerChoice {
    pub state: String,
    pub weights: BTreeMap<String, f64>,
}

impl SchedulerChoice {
    fn dirac(state: String, label: &str) -> Self {
        SchedulerChoice {
            state,
            weights: BTreeMap::from([(label.to_string(), 1.0)]),
        }
    }
}

/// One composite state of a slow-side assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignedChoice {
    pub composite_state: String,
    pub label: String,
    /// Weight `σ_V(v)(label)` needed to match this composite state.
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonoWitness {
    /// `F_left(t) < F_right(t)` although `left` should dominate.
    Time {
        t: f64,
        left: Distribution,
        right: Distribution,
        left_cdf: f64,
        right_cdf: f64,
    },
    /// Extremal schedulers under which the transition inequality fails:
    /// the side that should be larger evaluates to `lhs < rhs`.
    Schedulers {
        component: SchedulerChoice,
        composite: SchedulerChoice,
        successor: String,
        composite_successor: String,
        lhs: f64,
        rhs: f64,
        /// Weight the composite scheduler would need (bounded mode, > 1).
        required: Option<f64>,
    },
    /// Composite choices whose demands on `σ_V(state)` sum above 1.
    Assignment {
        state: String,
        choices: Vec<AssignedChoice>,
        total: f64,
    },
    /// `W'` branches under `label` at `state`.
    Kernel {
        state: String,
        label: String,
        successors: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonoViolation {
    pub condition: Condition,
    /// 1-based path index `i`; absent for the kernel check.
    pub index: Option<usize>,
    pub label: Option<String>,
    /// Composite state path prefix `s_1⋆s'_1 … ` leading to the violation.
    pub path: Vec<String>,
    pub witness: MonoWitness,
}

/// A residence comparison made for condition 1, kept for SMT export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceCheck {
    pub condition: Condition,
    pub state: String,
    pub left: Distribution,
    pub right: Distribution,
    pub outcome: DominanceOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub verdict: Verdict,
    pub mode: Mode,
    pub operator: CompositionOperator,
    /// The path bound `m` of the four models.
    pub bound: usize,
    /// Path length the check was asked to cover.
    pub depth: usize,
    /// Largest length at which all four models have a state path.
    pub checked_depth: usize,
    pub violations: Vec<MonoViolation>,
    pub caveats: Vec<String>,
    pub dominance_checks: Vec<DominanceCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityOptions {
    /// Collect every violation instead of stopping at the first.
    pub all: bool,
    pub grid: DominanceGrid,
    /// Cap on path pairs visited by the bounded slow-side check.
    pub max_path_pairs: usize,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        MonotonicityOptions {
            all: false,
            grid: DominanceGrid::default(),
            max_path_pairs: 1_000_000,
        }
    }
}

/// `max(|S_U||S_W|, |S_V||S_W'|) + max(|S_U|, |S_V|, |S_W|, |S_W'|) + 1`.
pub fn path_bound(u: &Smdp, v: &Smdp, w: &Smdp, w2: &Smdp) -> usize {
    let (a, b, c, d) = (u.num_states(), v.num_states(), w.num_states(), w2.num_states());
    (a * c).max(b * d) + a.max(b).max(c).max(d) + 1
}

/// All state paths of length exactly `n`, in lexicographic order of state ids.
pub fn enumerate_state_paths(m: &Smdp, n: usize) -> impl Iterator<Item = StatePath> + '_ {
    let ext = extendable(m, n);
    let post: Vec<Vec<StateId>> = (0..m.num_states()).map(|s| m.post(s)).collect();
    let mut stack: Vec<StatePath> = Vec::new();
    if n >= 1 && ext[n - 1][m.initial()] {
        stack.push(vec![m.initial()]);
    }
    std::iter::from_fn(move || {
        while let Some(path) = stack.pop() {
            if path.len() == n {
                return Some(path);
            }
            let last = *path.last().expect("non-empty");
            let remaining = n - path.len() - 1;
            for &s in post[last].iter().rev() {
                if ext[remaining][s] {
                    let mut next = path.clone();
                    next.push(s);
                    stack.push(next);
                }
            }
        }
        None
    })
}

/// `ext[k][s]`: a path with `k` further steps starts in `s`.
fn extendable(m: &Smdp, n: usize) -> Vec<Vec<bool>> {
    let mut ext = vec![vec![true; m.num_states()]];
    for k in 1..n.max(1) {
        let prev = &ext[k - 1];
        let row = (0..m.num_states())
            .map(|s| m.post(s).iter().any(|&t| prev[t]))
            .collect();
        ext.push(row);
    }
    ext
}

/// States reachable in exactly `i` steps, for `i < n`.
fn layers(m: &Smdp, n: usize) -> Vec<Vec<StateId>> {
    let mut out: Vec<Vec<StateId>> = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(vec![m.initial()]);
    for i in 1..n {
        let mut next = vec![false; m.num_states()];
        for &s in &out[i - 1] {
            for t in m.post(s) {
                next[t] = true;
            }
        }
        out.push((0..m.num_states()).filter(|&s| next[s]).collect());
    }
    out
}

/// Some path `s_1 … s_{i+1}` ending in `s`, with `s` in layer `i`.
fn prefix_to(m: &Smdp, layers: &[Vec<StateId>], i: usize, s: StateId) -> Vec<StateId> {
    let mut path = vec![s];
    let mut cur = s;
    for j in (0..i).rev() {
        cur = *layers[j]
            .iter()
            .find(|&&p| m.post(p).contains(&cur))
            .expect("layered state has a predecessor");
        path.push(cur);
    }
    path.reverse();
    path
}

/// Checks strong monotonicity up to the path bound, which decides it for
/// every length.
pub fn check_strong_monotonicity(
    u: &Smdp,
    v: &Smdp,
    w: &Smdp,
    w2: &Smdp,
    op: CompositionOperator,
) -> Result<MonotonicityReport> {
    check_with(u, v, w, w2, op, Mode::Strong, None, &MonotonicityOptions::default())
}

/// Checks `n`-monotonicity (every length up to `n`).
pub fn check_monotonicity_bounded(
    u: &Smdp,
    v: &Smdp,
    w: &Smdp,
    w2: &Smdp,
    op: CompositionOperator,
    n: usize,
) -> Result<MonotonicityReport> {
    check_with(u, v, w, w2, op, Mode::Bounded, Some(n), &MonotonicityOptions::default())
}

/// General entry point. `depth` defaults to the path bound.
#[allow(clippy::too_many_arguments)]
pub fn check_with(
    u: &Smdp,
    v: &Smdp,
    w: &Smdp,
    w2: &Smdp,
    op: CompositionOperator,
    mode: Mode,
    depth: Option<usize>,
    opts: &MonotonicityOptions,
) -> Result<MonotonicityReport> {
    for m in [u, v, w, w2] {
        m.ensure_valid()?;
    }
    u.ensure_same_labels(v)?;
    u.ensure_same_labels(w)?;
    u.ensure_same_labels(w2)?;
    let v = v.with_label_order(u.labels())?;
    let w = w.with_label_order(u.labels())?;
    let w2 = w2.with_label_order(u.labels())?;

    let bound = path_bound(u, &v, &w, &w2);
    let depth = depth.unwrap_or(bound);
    let mut checker = Checker {
        u,
        v: &v,
        w: &w,
        w2: &w2,
        op,
        mode,
        opts,
        violations: Vec::new(),
        caveats: Vec::new(),
        dominance_checks: Vec::new(),
    };
    let checked_depth = checker.run(depth)?;

    let mut caveats = std::mem::take(&mut checker.caveats);
    if checked_depth < depth {
        caveats.push(format!(
            "some process has no state path of length {}; longer lengths hold vacuously",
            checked_depth + 1
        ));
    }
    if mode == Mode::Bounded {
        caveats.push(format!("verdict covers state paths up to length {depth} only"));
    }
    let mut violations = checker.violations;
    violations.sort_by_key(|v| (v.index, v.condition));
    Ok(MonotonicityReport {
        verdict: if violations.is_empty() {
            Verdict::Holds
        } else {
            Verdict::Fails
        },
        mode,
        operator: op,
        bound,
        depth,
        checked_depth,
        violations,
        caveats,
        dominance_checks: checker.dominance_checks,
    })
}

struct Checker<'a> {
    u: &'a Smdp,
    v: &'a Smdp,
    w: &'a Smdp,
    w2: &'a Smdp,
    op: CompositionOperator,
    mode: Mode,
    opts: &'a MonotonicityOptions,
    violations: Vec<MonoViolation>,
    caveats: Vec<String>,
    dominance_checks: Vec<DominanceCheck>,
}

/// Which pair of processes a check concerns.
#[derive(Clone, Copy)]
enum Side {
    Fast,
    Slow,
}

impl<'a> Checker<'a> {
    fn done(&self) -> bool {
        !self.opts.all && !self.violations.is_empty()
    }

    fn pair(&self, side: Side) -> (&'a Smdp, &'a Smdp) {
        match side {
            Side::Fast => (self.u, self.w),
            Side::Slow => (self.v, self.w2),
        }
    }

    fn run(&mut self, depth: usize) -> Result<usize> {
        self.check_kernel();
        if self.done() {
            return Ok(0);
        }

        let models = [self.u, self.v, self.w, self.w2];
        let checked = (1..=depth)
            .take_while(|&n| models.iter().all(|m| extendable(m, n)[n - 1][m.initial()]))
            .last()
            .unwrap_or(0);
        let lay: Vec<Vec<Vec<StateId>>> = models.iter().map(|m| layers(m, checked)).collect();
        let (lu, lv, lw, lw2) = (&lay[0], &lay[1], &lay[2], &lay[3]);

        for i in 0..checked {
            self.check_cdf(Side::Fast, lu, lw, i)?;
            if self.done() {
                break;
            }
            self.check_cdf(Side::Slow, lv, lw2, i)?;
            if self.done() {
                break;
            }
            if i + 1 < checked {
                self.check_fast_transitions(lu, lw, i);
                if self.done() {
                    break;
                }
                if self.mode == Mode::Strong {
                    self.check_slow_transitions_strong(lv, lw2, i);
                    if self.done() {
                        break;
                    }
                }
            }
        }
        if self.mode == Mode::Bounded && !self.done() && self.u.num_labels() > 1 {
            self.check_slow_bounded(checked)?;
        }
        Ok(checked)
    }

    fn check_kernel(&mut self) {
        let w2 = self.w2;
        if has_deterministic_kernel(w2) {
            return;
        }
        for s in 0..w2.num_states() {
            for a in 0..w2.num_labels() {
                let succ = w2.successors(s, a);
                if succ.len() > 1 {
                    self.violations.push(MonoViolation {
                        condition: Condition::DetKernel,
                        index: None,
                        label: Some(w2.label_name(a).to_string()),
                        path: Vec::new(),
                        witness: MonoWitness::Kernel {
                            state: w2.state_name(s).to_string(),
                            label: w2.label_name(a).to_string(),
                            successors: succ.iter().map(|&(t, _)| w2.state_name(t).to_string()).collect(),
                        },
                    });
                    if !self.opts.all {
                        return;
                    }
                }
            }
        }
    }

    fn composite_path(
        &self,
        side: Side,
        lx: &[Vec<StateId>],
        ly: &[Vec<StateId>],
        i: usize,
        x: StateId,
        y: StateId,
    ) -> Vec<String> {
        let (mx, my) = self.pair(side);
        let px = prefix_to(mx, lx, i, x);
        let py = prefix_to(my, ly, i, y);
        px.iter()
            .zip(&py)
            .map(|(&a, &b)| composite_name(mx.state_name(a), my.state_name(b)))
            .collect()
    }

    fn check_cdf(&mut self, side: Side, lx: &[Vec<StateId>], ly: &[Vec<StateId>], i: usize) -> Result<()> {
        let (mx, my) = self.pair(side);
        let condition = match side {
            Side::Fast => Condition::CdfFast,
            Side::Slow => Condition::CdfSlow,
        };
        for &x in &lx[i] {
            for &y in &ly[i] {
                let composite = compose_residence(self.op, mx.residence(x), my.residence(y))?;
                let own = mx.residence(x).clone();
                // Fast side: the composite must be at least as fast as u_i.
                // Slow side: v_i must be at least as fast as the composite.
                let (left, right) = match side {
                    Side::Fast => (composite, own),
                    Side::Slow => (own, composite),
                };
                let state = composite_name(mx.state_name(x), my.state_name(y));
                let verdict = dominates(&left, &right, self.opts.grid);
                if !self.dominance_checks.iter().any(|c| c.left == left && c.right == right) {
                    self.dominance_checks.push(DominanceCheck {
                        condition,
                        state: state.clone(),
                        left: left.clone(),
                        right: right.clone(),
                        outcome: verdict.outcome,
                    });
                    if verdict.outcome == DominanceOutcome::HoldsOnGrid {
                        self.caveats.push(format!(
                            "F_{left} >= F_{right} at {state} holds on a sampling grid only"
                        ));
                    }
                }
                if !verdict.holds() {
                    let t = verdict.witness().unwrap_or(f64::NAN);
                    let path = self.composite_path(side, lx, ly, i, x, y);
                    self.violations.push(MonoViolation {
                        condition,
                        index: Some(i + 1),
                        label: None,
                        path,
                        witness: MonoWitness::Time {
                            t,
                            left_cdf: left.cdf(t),
                            right_cdf: right.cdf(t),
                            left,
                            right,
                        },
                    });
                    if self.done() {
                        return Ok(());
                    }
                }
            }
        }
        Ok(())
    }

    fn sched_violation(&mut self, side: Side, lx: &[Vec<StateId>], ly: &[Vec<StateId>], i: usize, f: SchedFailure) {
        let (mx, my) = self.pair(side);
        let (x, x2, y, y2) = f.states;
        let mut path = self.composite_path(side, lx, ly, i, x, y);
        let composite_successor = composite_name(mx.state_name(x2), my.state_name(y2));
        path.push(composite_successor.clone());
        let composite = composite_name(mx.state_name(x), my.state_name(y));
        self.violations.push(MonoViolation {
            condition: match side {
                Side::Fast => Condition::SchedFast,
                Side::Slow => Condition::SchedSlow,
            },
            index: Some(i + 1),
            label: Some(mx.label_name(f.label).to_string()),
            path,
            witness: MonoWitness::Schedulers {
                component: SchedulerChoice::dirac(mx.state_name(x).to_string(), mx.label_name(f.component_label)),
                composite: SchedulerChoice::dirac(composite, mx.label_name(f.composite_label)),
                successor: mx.state_name(x2).to_string(),
                composite_successor,
                lhs: f.lhs,
                rhs: f.rhs,
                required: f.required,
            },
        });
    }

    fn check_fast_transitions(&mut self, lu: &[Vec<StateId>], lw: &[Vec<StateId>], i: usize) {
        let (u, w) = (self.u, self.w);
        let labels = u.num_labels();
        for &x in &lu[i] {
            for &y in &lw[i] {
                for a in 0..labels {
                    for &(x2, tu) in u.successors(x, a) {
                        for y2 in w.post(y) {
                            let tw = w.prob(y, a, y2);
                            let failure = if self.mode == Mode::Strong && labels > 1 {
                                // The composite scheduler may avoid `a` altogether.
                                Some(SchedFailure {
                                    states: (x, x2, y, y2),
                                    label: a,
                                    component_label: a,
                                    composite_label: other_label(a),
                                    lhs: 0.0,
                                    rhs: tu,
                                    required: None,
                                })
                            } else if tw < 1.0 - TAU_TOL {
                                Some(SchedFailure {
                                    states: (x, x2, y, y2),
                                    label: a,
                                    component_label: a,
                                    composite_label: a,
                                    lhs: tu * tw,
                                    rhs: tu,
                                    required: (self.mode == Mode::Bounded)
                                        .then(|| if tw > 0.0 { 1.0 / tw } else { f64::INFINITY }),
                                })
                            } else {
                                None
                            };
                            if let Some(f) = failure {
                                self.sched_violation(Side::Fast, lu, lw, i, f);
                                if self.done() {
                                    return;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn check_slow_transitions_strong(&mut self, lv: &[Vec<StateId>], lw2: &[Vec<StateId>], i: usize) {
        let (v, w2) = (self.v, self.w2);
        let labels = v.num_labels();
        if labels < 2 {
            return;
        }
        for &x in &lv[i] {
            for &y in &lw2[i] {
                for a in 0..labels {
                    for &(x2, tv) in v.successors(x, a) {
                        for &(y2, tw) in w2.successors(y, a) {
                            if tv * tw <= 0.0 {
                                continue;
                            }
                            // `σ_V` avoids `a` while the composite takes it.
                            self.sched_violation(
                                Side::Slow,
                                lv,
                                lw2,
                                i,
                                SchedFailure {
                                    states: (x, x2, y, y2),
                                    label: a,
                                    component_label: other_label(a),
                                    composite_label: a,
                                    lhs: 0.0,
                                    rhs: tv * tw,
                                    required: None,
                                },
                            );
                            if self.done() {
                                return;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Walks all pairs of equally long paths of `V` and `W'` up to length
    /// `depth`, tracking per composite state the largest demand per label.
    fn check_slow_bounded(&mut self, depth: usize) -> Result<()> {
        if depth < 2 {
            return Ok(());
        }
        let mut walk = SlowWalk {
            v: self.v,
            w2: self.w2,
            depth,
            visited: 0,
            cap: self.opts.max_path_pairs,
            all: self.opts.all,
            found: Vec::new(),
            seen: Vec::new(),
        };
        let start = (self.v.initial(), self.w2.initial());
        walk.visit(&mut vec![start], &mut HashMap::new())?;
        self.violations.extend(walk.found);
        Ok(())
    }
}

fn other_label(a: LabelId) -> LabelId {
    if a == 0 {
        1
    } else {
        0
    }
}

/// A transition inequality refuted by Dirac schedulers.
struct SchedFailure {
    /// `(x, x', y, y')`: component step `x -> x'`, context step `y -> y'`.
    states: (StateId, StateId, StateId, StateId),
    label: LabelId,
    component_label: LabelId,
    composite_label: LabelId,
    lhs: f64,
    rhs: f64,
    required: Option<f64>,
}

/// Demand table: `(v, w') -> per-label demand on σ_V(v)`.
type Demands = HashMap<(StateId, StateId), Vec<f64>>;

struct SlowWalk<'a> {
    v: &'a Smdp,
    w2: &'a Smdp,
    depth: usize,
    visited: usize,
    cap: usize,
    all: bool,
    found: Vec<MonoViolation>,
    /// `(v, assignment)` pairs already reported.
    seen: Vec<(StateId, Vec<(StateId, LabelId)>)>,
}

impl SlowWalk<'_> {
    fn visit(&mut self, path: &mut Vec<(StateId, StateId)>, demands: &mut Demands) -> Result<()> {
        if path.len() == self.depth || (!self.all && !self.found.is_empty()) {
            return Ok(());
        }
        let (x, y) = *path.last().expect("non-empty");
        let labels = self.v.num_labels();
        for x2 in self.v.post(x) {
            for y2 in self.w2.post(y) {
                self.visited += 1;
                if self.visited > self.cap {
                    return Err(Error::PathExplosion(self.cap));
                }
                let mut changed = Vec::new();
                let entry = demands.entry((x, y)).or_insert_with(|| vec![0.0; labels]);
                for a in 0..labels {
                    if self.v.prob(x, a, x2) > 0.0 {
                        let d = self.w2.prob(y, a, y2);
                        if d > entry[a] {
                            changed.push((a, entry[a]));
                            entry[a] = d;
                        }
                    }
                }
                path.push((x2, y2));
                if !changed.is_empty() {
                    self.check(x, path, demands);
                }
                self.visit(path, demands)?;
                path.pop();
                let entry = demands.get_mut(&(x, y)).expect("entry exists");
                for (a, old) in changed.into_iter().rev() {
                    entry[a] = old;
                }
                if !self.all && !self.found.is_empty() {
                    return Ok(());
                }
            }
        }
        Ok(())
    }

    /// Best adversary for `σ_V(v)`: each label takes the demand of at most
    /// one composite state, each composite state serves one label.
    fn check(&mut self, v: StateId, path: &[(StateId, StateId)], demands: &Demands) {
        let rows: Vec<(StateId, &Vec<f64>)> = {
            let mut r: Vec<_> = demands
                .iter()
                .filter(|((x, _), _)| *x == v)
                .map(|(&(_, y), d)| (y, d))
                .collect();
            r.sort_by_key(|e| e.0);
            r
        };
        let labels = self.v.num_labels();
        let mut best = (0.0, Vec::new());
        let mut used = vec![false; rows.len()];
        let mut current = Vec::new();
        fn search(
            a: usize,
            labels: usize,
            rows: &[(StateId, &Vec<f64>)],
            used: &mut [bool],
            current: &mut Vec<(StateId, LabelId, f64)>,
            total: f64,
            best: &mut (f64, Vec<(StateId, LabelId, f64)>),
        ) {
            if a == labels {
                if total > best.0 {
                    *best = (total, current.clone());
                }
                return;
            }
            search(a + 1, labels, rows, used, current, total, best);
            for (k, (y, d)) in rows.iter().enumerate() {
                if !used[k] && d[a] > 0.0 {
                    used[k] = true;
                    current.push((*y, a, d[a]));
                    search(a + 1, labels, rows, used, current, total + d[a], best);
                    current.pop();
                    used[k] = false;
                }
            }
        }
        search(0, labels, &rows, &mut used, &mut current, 0.0, &mut best);
        if best.0 <= 1.0 + TAU_TOL {
            return;
        }
        let key: Vec<(StateId, LabelId)> = best.1.iter().map(|&(y, a, _)| (y, a)).collect();
        if self.seen.iter().any(|(s, k)| *s == v && *k == key) {
            return;
        }
        self.seen.push((v, key));

        let name = |&(x, y): &(StateId, StateId)| composite_name(self.v.state_name(x), self.w2.state_name(y));
        // Report at the latest position of `v` on the path.
        let index = path[..path.len() - 1].iter().rposition(|&(x, _)| x == v).expect("v on path");
        self.found.push(MonoViolation {
            condition: Condition::SchedSlow,
            index: Some(index + 1),
            label: best.1.last().map(|e| self.v.label_name(e.1).to_string()),
            path: path.iter().map(name).collect(),
            witness: MonoWitness::Assignment {
                state: self.v.state_name(v).to_string(),
                choices: best
                    .1
                    .iter()
                    .map(|&(y, a, d)| AssignedChoice {
                        composite_state: composite_name(self.v.state_name(v), self.w2.state_name(y)),
                        label: self.v.label_name(a).to_string(),
                        demand: d,
                    })
                    .collect(),
                total: best.0,
            },
        });
    }
}
