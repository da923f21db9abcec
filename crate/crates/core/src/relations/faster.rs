//! Bounded checking of the faster-than preorder.
//!
//! `U ⪯ V` holds when for every scheduler of `V` some scheduler of `U`
//! reaches every time-bounded cylinder at least as likely. The checker
//! explores slow-side schedulers from a finite search space, cylinders up to a
//! word length and a time grid, and looks for one fast-side scheduler that
//! matches all of them at once. A refutation names the slow scheduler for
//! which the search failed and the cylinder where the best fast scheduler
//! falls short; a non-refutation is bounded evidence only.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::{collapse, frontier_step, initial_frontier, Frontier};
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{LabelId, Scheduler, Smdp, StateId};

/// Probabilities may fall short of the slow side by this much.
pub const PROB_TOL: f64 = 1e-9;

/// Where slow-side schedulers (adversaries) and fast-side candidates come from.
#[derive(Debug, Clone, Serialize)]
pub struct SchedulerSearch {
    /// Lattice step on each state's label simplex.
    pub step: f64,
    /// Upper bound on adversaries examined; further ones are skipped and the
    /// verdict is flagged as truncated.
    pub max_schedulers: usize,
    /// Upper bound on lattice candidates tried on the fast side.
    pub max_candidates: usize,
    /// Iterations of fast-side coordinate ascent per adversary.
    pub ascent_iterations: usize,
    /// Explicit adversaries replacing the enumerated ones.
    #[serde(skip)]
    pub adversaries: Option<Vec<Scheduler>>,
}

impl Default for SchedulerSearch {
    fn default() -> Self {
        SchedulerSearch {
            step: 0.25,
            max_schedulers: 4096,
            max_candidates: 4096,
            ascent_iterations: 100,
            adversaries: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FasterThanBounds {
    pub depth: usize,
    pub grid: TimeGrid,
    pub search: SchedulerSearch,
}

impl FasterThanBounds {
    pub fn new(depth: usize) -> Self {
        FasterThanBounds {
            depth,
            grid: TimeGrid::default(),
            search: SchedulerSearch::default(),
        }
    }
}

/// A failing cylinder for a given adversary.
#[derive(Debug, Clone, Serialize)]
pub struct FasterThanWitness {
    /// Adversary on the slow side, `state -> label -> weight`.
    pub slow_scheduler: BTreeMap<String, BTreeMap<String, f64>>,
    /// Best fast-side scheduler the search found.
    pub fast_scheduler: BTreeMap<String, BTreeMap<String, f64>>,
    pub word: Vec<String>,
    pub t: f64,
    pub prob_fast: f64,
    pub prob_slow: f64,
    /// True when the fast side offers no choice, so no other fast scheduler
    /// exists and the refutation is exact.
    pub exact: bool,
    #[serde(skip)]
    pub slow: Scheduler,
    #[serde(skip)]
    pub fast: Scheduler,
    #[serde(skip)]
    pub word_ids: Vec<LabelId>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FasterThanVerdict {
    NotRefuted {
        depth: usize,
        times: Vec<f64>,
        step: f64,
        adversaries_checked: usize,
        /// Set when the adversary enumeration hit `max_schedulers`.
        truncated: bool,
    },
    Refuted(Box<FasterThanWitness>),
}

impl FasterThanVerdict {
    pub fn is_refuted(&self) -> bool {
        matches!(self, FasterThanVerdict::Refuted(_))
    }

    pub fn witness(&self) -> Option<&FasterThanWitness> {
        match self {
            FasterThanVerdict::Refuted(w) => Some(w),
            _ => None,
        }
    }
}

/// Labels with a nonempty transition row at `s`. Scheduler mass on other
/// labels only loses probability, so searches restrict to these.
fn enabled_labels(m: &Smdp, s: StateId) -> Vec<LabelId> {
    (0..m.num_labels())
        .filter(|&a| m.successors(s, a).iter().any(|(_, p)| *p > 0.0))
        .collect()
}

/// Reachable states with at least two enabled labels, and their labels.
fn choice_states(m: &Smdp) -> Vec<(StateId, Vec<LabelId>)> {
    let reach = m.reachable();
    (0..m.num_states())
        .filter(|&s| reach[s])
        .map(|s| (s, enabled_labels(m, s)))
        .filter(|(_, l)| l.len() >= 2)
        .collect()
}

/// Distributions over `labels` with weights in multiples of `1/k`.
fn simplex_points(n_labels: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v);
            rec(left - v, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, n_labels, &mut Vec::new(), &mut out);
    out
}

/// Base scheduler: uniform on enabled labels (all labels when none is).
fn base_scheduler(m: &Smdp) -> Scheduler {
    let mut sch = Scheduler::uniform(m);
    for s in 0..m.num_states() {
        let en = enabled_labels(m, s);
        if !en.is_empty() {
            let mut row = vec![0.0; m.num_labels()];
            for &a in &en {
                row[a] = 1.0 / en.len() as f64;
            }
            sch.set_row(s, row);
        }
    }
    sch
}

/// Lattice schedulers over the choice states, vertices first. Returns the
/// list and whether it was cut at `limit`.
fn lattice(m: &Smdp, step: f64, limit: usize) -> (Vec<Scheduler>, bool) {
    let k = (1.0 / step).round().max(1.0) as usize;
    let choices = choice_states(m);
    let base = base_scheduler(m);
    let per_state: Vec<Vec<Vec<f64>>> = choices
        .iter()
        .map(|(_, labels)| {
            let mut pts = simplex_points(labels.len(), k);
            // vertices first
            pts.sort_by_key(|p| usize::from(!p.contains(&k)));
            pts.into_iter()
                .map(|p| {
                    let mut row = vec![0.0; m.num_labels()];
                    for (&a, &c) in labels.iter().zip(&p) {
                        row[a] = c as f64 / k as f64;
                    }
                    row
                })
                .collect()
        })
        .collect();
    let n_vertices: Vec<usize> = choices.iter().map(|(_, l)| l.len()).collect();

    let mut out = Vec::new();
    let mut truncated = false;
    // Two passes: all-vertex assignments, then everything else.
    for pass in 0..2 {
        let mut idx = vec![0usize; choices.len()];
        loop {
            let all_vertex = idx.iter().zip(&n_vertices).all(|(i, n)| i < n);
            if (pass == 0) == all_vertex {
                if out.len() >= limit {
                    truncated = true;
                    break;
                }
                let mut sch = base.clone();
                for (c, &i) in idx.iter().enumerate() {
                    sch.set_row(choices[c].0, per_state[c][i].clone());
                }
                out.push(sch);
            }
            // odometer
            let mut pos = 0;
            loop {
                if pos == idx.len() {
                    break;
                }
                let bound = if pass == 0 { n_vertices[pos] } else { per_state[pos].len() };
                idx[pos] += 1;
                if idx[pos] < bound {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == idx.len() {
                break;
            }
        }
        if truncated {
            break;
        }
    }
    (out, truncated)
}

/// Cylinders with positive slow-side trace, in shortlex order of words.
struct CylinderTree {
    times: Vec<f64>,
    /// `levels[i]` holds words of length `i + 1`.
    levels: Vec<Vec<Node>>,
}

struct Node {
    parent: usize,
    label: LabelId,
    slow: Vec<f64>,
}

#[derive(Default)]
struct CdfCache {
    map: HashMap<Distribution, Vec<f64>>,
}

impl CdfCache {
    fn values(&mut self, d: &Distribution, times: &[f64]) -> &[f64] {
        self.map
            .entry(d.clone())
            .or_insert_with(|| times.iter().map(|&t| d.cdf(t)).collect())
    }

    fn probs(&mut self, frontier: &Frontier, times: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; times.len()];
        for (d, w) in collapse(frontier) {
            for (o, v) in out.iter_mut().zip(self.values(&d, times)) {
                *o += w * v;
            }
        }
        out
    }
}

impl CylinderTree {
    fn build(v: &Smdp, sigma: &Scheduler, depth: usize, times: &[f64], cache: &mut CdfCache) -> Self {
        let mut levels: Vec<Vec<Node>> = Vec::new();
        let mut frontiers: Vec<Frontier> = vec![initial_frontier(v.initial())];
        for level in 0..depth {
            let mut nodes = Vec::new();
            let mut next_frontiers = Vec::new();
            for (pi, f) in frontiers.iter().enumerate() {
                for a in 0..v.num_labels() {
                    let g = frontier_step(v, sigma, f, a);
                    if g.is_empty() {
                        continue;
                    }
                    let slow = cache.probs(&g, times);
                    nodes.push(Node {
                        parent: if level == 0 { 0 } else { pi },
                        label: a,
                        slow,
                    });
                    next_frontiers.push(g);
                }
            }
            if nodes.is_empty() {
                break;
            }
            levels.push(nodes);
            frontiers = next_frontiers;
        }
        CylinderTree {
            times: times.to_vec(),
            levels,
        }
    }

    fn word(&self, level: usize, mut idx: usize) -> Vec<LabelId> {
        let mut w = Vec::with_capacity(level + 1);
        for l in (0..=level).rev() {
            let n = &self.levels[l][idx];
            w.push(n.label);
            idx = n.parent;
        }
        w.reverse();
        w
    }

    /// Smallest `P_fast - P_slow` over all cylinders, stopping early once it
    /// drops below `stop_below`. Also returns the first cylinder (level,
    /// node, time index) with a deficit beyond [`PROB_TOL`].
    fn margin(
        &self,
        u: &Smdp,
        sigma: &Scheduler,
        stop_below: f64,
        cache: &mut CdfCache,
    ) -> (f64, Option<(usize, usize, usize)>) {
        let mut margin = f64::INFINITY;
        let mut first = None;
        let mut frontiers: Vec<Frontier> = vec![initial_frontier(u.initial())];
        for (level, nodes) in self.levels.iter().enumerate() {
            let mut next = Vec::with_capacity(nodes.len());
            for (ni, node) in nodes.iter().enumerate() {
                let parent = if level == 0 { &frontiers[0] } else { &frontiers[node.parent] };
                let g = frontier_step(u, sigma, parent, node.label);
                let fast = cache.probs(&g, &self.times);
                for (ti, (pf, ps)) in fast.iter().zip(&node.slow).enumerate() {
                    let d = pf - ps;
                    if d < margin {
                        margin = d;
                    }
                    if d < -PROB_TOL && first.is_none() {
                        first = Some((level, ni, ti));
                    }
                }
                if margin < stop_below {
                    return (margin, first);
                }
                next.push(g);
            }
            frontiers = next;
        }
        (margin, first)
    }
}

/// Candidate matching `sigma` state by state when both models share state
/// and label names.
fn copied(u: &Smdp, v: &Smdp, sigma: &Scheduler) -> Option<Scheduler> {
    let mut rows = Vec::with_capacity(u.num_states());
    for s in 0..u.num_states() {
        let vs = v.state_id(u.state_name(s)).ok()?;
        let mut row = vec![0.0; u.num_labels()];
        for (a, slot) in row.iter_mut().enumerate() {
            *slot = sigma.weight(vs, v.label_id(u.label_name(a)).ok()?);
        }
        rows.push(row);
    }
    Scheduler::from_weights(u, rows).ok()
}

/// Improves `start` by moving probability between labels of one state at a
/// time, halving the step when no move helps.
fn ascend(
    u: &Smdp,
    tree: &CylinderTree,
    start: Scheduler,
    start_margin: f64,
    iterations: usize,
    cache: &mut CdfCache,
) -> (Scheduler, f64) {
    let choices = choice_states(u);
    let mut best = start;
    let mut best_margin = start_margin;
    let mut delta: f64 = 0.25;
    for _ in 0..iterations {
        if best_margin >= -PROB_TOL || delta < 1e-6 {
            break;
        }
        let mut improved = false;
        for (s, labels) in &choices {
            for &to in labels {
                for &from in labels {
                    if to == from {
                        continue;
                    }
                    let avail = best.weight(*s, from);
                    if avail <= 0.0 {
                        continue;
                    }
                    let mv = delta.min(avail);
                    let mut row = best.row(*s).to_vec();
                    row[from] -= mv;
                    row[to] += mv;
                    let mut cand = best.clone();
                    cand.set_row(*s, row);
                    let (m, _) = tree.margin(u, &cand, best_margin, cache);
                    if m > best_margin {
                        best = cand;
                        best_margin = m;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            delta /= 2.0;
        }
    }
    (best, best_margin)
}

fn label_order_check(u: &Smdp, v: &Smdp) -> Result<Smdp> {
    u.ensure_same_labels(v)?;
    u.with_label_order(v.labels())
}

/// Checks `u ⪯ v` up to the given bounds.
pub fn faster_than_bounded(u: &Smdp, v: &Smdp, bounds: &FasterThanBounds) -> Result<FasterThanVerdict> {
    u.ensure_valid()?;
    v.ensure_valid()?;
    if bounds.depth == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if !(bounds.search.step > 0.0 && bounds.search.step <= 1.0) {
        return Err(Error::InvalidArgument(format!("lattice step must be in (0, 1], got {}", bounds.search.step)));
    }
    let u = label_order_check(u, v)?;
    let times = bounds.grid.points();
    let search = &bounds.search;

    let (adversaries, truncated) = match &search.adversaries {
        Some(list) => {
            for s in list {
                if s.num_states() != v.num_states() {
                    return Err(Error::InvalidScheduler("adversary belongs to another model".into()));
                }
            }
            (list.clone(), false)
        }
        None => lattice(v, search.step, search.max_schedulers),
    };
    let (candidates, _) = lattice(&u, search.step, search.max_candidates);
    let fast_exact = choice_states(&u).is_empty();

    let refutation = adversaries.par_iter().find_map_first(|sigma| {
        let mut cache = CdfCache::default();
        let tree = CylinderTree::build(v, sigma, bounds.depth, &times, &mut cache);
        let mut best: Option<(Scheduler, f64)> = None;
        let mut pool: Vec<Scheduler> = copied(&u, v, sigma).into_iter().collect();
        pool.extend(candidates.iter().cloned());
        for cand in pool {
            let floor = best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1);
            let (m, _) = tree.margin(&u, &cand, floor, &mut cache);
            if m >= -PROB_TOL {
                return None;
            }
            if m > floor {
                best = Some((cand, m));
            }
        }
        let (start, start_margin) = best.expect("at least one candidate");
        let (fast, margin) = ascend(&u, &tree, start, start_margin, search.ascent_iterations, &mut cache);
        if margin >= -PROB_TOL {
            return None;
        }
        let (_, first) = tree.margin(&u, &fast, f64::NEG_INFINITY, &mut cache);
        let (level, node, ti) = first.expect("negative margin has a failing cylinder");
        let word = tree.word(level, node);
        let t = times[ti];
        let prob_slow = tree.levels[level][node].slow[ti];
        let mut f = initial_frontier(u.initial());
        for &a in &word {
            f = frontier_step(&u, &fast, &f, a);
        }
        let prob_fast = cache.probs(&f, &[t])[0];
        Some(FasterThanWitness {
            slow_scheduler: sigma.to_named(v),
            fast_scheduler: fast.to_named(&u),
            word: word.iter().map(|&a| v.label_name(a).to_string()).collect(),
            t,
            prob_fast,
            prob_slow,
            exact: fast_exact,
            slow: sigma.clone(),
            fast,
            word_ids: word,
        })
    });

    Ok(match refutation {
        Some(w) => FasterThanVerdict::Refuted(Box::new(w)),
        None => FasterThanVerdict::NotRefuted {
            depth: bounds.depth,
            times,
            step: search.step,
            adversaries_checked: adversaries.len(),
            truncated,
        },
    })
}

/// Both directions of [`faster_than_bounded`].
pub fn equally_fast_bounded(
    u: &Smdp,
    v: &Smdp,
    bounds: &FasterThanBounds,
) -> Result<(FasterThanVerdict, FasterThanVerdict)> {
    Ok((faster_than_bounded(u, v, bounds)?, faster_than_bounded(v, u, bounds)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_points_count() {
        // C(k + n - 1, n - 1)
        assert_eq!(simplex_points(2, 4).len(), 5);
        assert_eq!(simplex_points(3, 2).len(), 6);
        assert!(simplex_points(2, 2).iter().all(|p| p.iter().sum::<usize>() == 2));
    }
}
