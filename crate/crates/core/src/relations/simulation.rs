//! Simulation (greatest fixpoint with max-flow weight functions) and
//! bisimulation (partition refinement) between two SMDPs.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::dist::dominance::{dominates, DominanceGrid};
use crate::error::Result;
use crate::model::{LabelId, Smdp, StateId};

/// Transition masses are scaled to integers with this resolution.
const QUANTUM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationResult {
    pub holds: bool,
    /// Related pairs `(state of the left model, state of the right model)`.
    pub pairs: Vec<(String, String)>,
    /// True when some residence comparison was only checked on a grid.
    pub grid_based: bool,
}

fn quantize(p: f64) -> i64 {
    (p / QUANTUM).round() as i64
}

/// Edmonds-Karp on a small dense graph.
fn max_flow(cap: &mut [Vec<i64>], s: usize, t: usize) -> i64 {
    let n = cap.len();
    let mut flow = 0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut q = VecDeque::from([s]);
        while let Some(x) = q.pop_front() {
            if x == t {
                break;
            }
            for y in 0..n {
                if prev[y] == usize::MAX && cap[x][y] > 0 {
                    prev[y] = x;
                    q.push_back(y);
                }
            }
        }
        if prev[t] == usize::MAX {
            return flow;
        }
        let mut push = i64::MAX;
        let mut y = t;
        while y != s {
            let x = prev[y];
            push = push.min(cap[x][y]);
            y = x;
        }
        let mut y = t;
        while y != s {
            let x = prev[y];
            cap[x][y] -= push;
            cap[y][x] += push;
            y = x;
        }
        flow += push;
    }
}

/// Whether a weight function with marginals `left` and `right` exists whose
/// support lies in `related`.
fn coupling_exists(
    left: &[(StateId, f64)],
    right: &[(StateId, f64)],
    related: impl Fn(StateId, StateId) -> bool,
) -> bool {
    let l: Vec<(StateId, i64)> = left.iter().map(|&(s, p)| (s, quantize(p))).filter(|e| e.1 > 0).collect();
    let r: Vec<(StateId, i64)> = right.iter().map(|&(s, p)| (s, quantize(p))).filter(|e| e.1 > 0).collect();
    let slack = (l.len() + r.len()) as i64;
    let total_l: i64 = l.iter().map(|e| e.1).sum();
    let total_r: i64 = r.iter().map(|e| e.1).sum();
    if (total_l - total_r).abs() > slack {
        return false;
    }
    if l.is_empty() || r.is_empty() {
        return total_l <= slack && total_r <= slack;
    }
    let n = l.len() + r.len() + 2;
    let (src, sink) = (n - 2, n - 1);
    let mut cap = vec![vec![0i64; n]; n];
    for (i, &(s, p)) in l.iter().enumerate() {
        cap[src][i] = p;
        for (j, &(s2, _)) in r.iter().enumerate() {
            if related(s, s2) {
                cap[i][l.len() + j] = i64::MAX / 4;
            }
        }
    }
    for (j, &(_, q)) in r.iter().enumerate() {
        cap[l.len() + j][sink] = q;
    }
    let f = max_flow(&mut cap, src, sink);
    f >= total_l.max(total_r) - slack
}

/// Does `v` simulate `u` (written `u ≾ v`)? Computes the largest simulation
/// between states of `u` and states of `v`.
pub fn simulates(u: &Smdp, v: &Smdp) -> Result<RelationResult> {
    u.ensure_valid()?;
    v.ensure_valid()?;
    u.ensure_same_labels(v)?;
    let labels: Vec<(LabelId, LabelId)> = (0..u.num_labels())
        .map(|a| (a, v.label_id(u.label_name(a)).expect("same labels")))
        .collect();

    let grid = DominanceGrid::default();
    let mut grid_based = false;
    let mut rel = vec![vec![false; v.num_states()]; u.num_states()];
    for (s1, row) in rel.iter_mut().enumerate() {
        for (s2, cell) in row.iter_mut().enumerate() {
            let verdict = dominates(v.residence(s2), u.residence(s1), grid);
            *cell = verdict.holds();
            if *cell && verdict.outcome == crate::dist::dominance::DominanceOutcome::HoldsOnGrid {
                grid_based = true;
            }
        }
    }

    loop {
        let mut changed = false;
        for s1 in 0..u.num_states() {
            for s2 in 0..v.num_states() {
                if !rel[s1][s2] {
                    continue;
                }
                let ok = labels.iter().all(|&(a1, a2)| {
                    coupling_exists(u.successors(s1, a1), v.successors(s2, a2), |x, y| rel[x][y])
                });
                if !ok {
                    rel[s1][s2] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let pairs = pairs_of(u, v, |x, y| rel[x][y]);
    Ok(RelationResult {
        holds: rel[u.initial()][v.initial()],
        pairs,
        grid_based,
    })
}

fn pairs_of(u: &Smdp, v: &Smdp, related: impl Fn(StateId, StateId) -> bool) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for x in 0..u.num_states() {
        for y in 0..v.num_states() {
            if related(x, y) {
                out.push((u.state_name(x).to_string(), v.state_name(y).to_string()));
            }
        }
    }
    out
}

/// Largest bisimulation on the disjoint union of `u` and `v`.
pub fn bisimilar(u: &Smdp, v: &Smdp) -> Result<RelationResult> {
    u.ensure_valid()?;
    v.ensure_valid()?;
    u.ensure_same_labels(v)?;
    let nu = u.num_states();
    let n = nu + v.num_states();
    let label_map: Vec<LabelId> = (0..u.num_labels())
        .map(|a| v.label_id(u.label_name(a)).expect("same labels"))
        .collect();
    let residence = |s: usize| if s < nu { u.residence(s) } else { v.residence(s - nu) };
    let successors = |s: usize, a: LabelId| -> Vec<(usize, f64)> {
        if s < nu {
            u.successors(s, a).to_vec()
        } else {
            v.successors(s - nu, label_map[a])
                .iter()
                .map(|&(t, p)| (t + nu, p))
                .collect()
        }
    };

    // Initial blocks: equal residence CDFs.
    let grid = DominanceGrid::default();
    let mut grid_based = false;
    let mut block = vec![0usize; n];
    let mut reps: Vec<usize> = Vec::new();
    for s in 0..n {
        let d = residence(s);
        let found = reps.iter().position(|&r| {
            let e = residence(r);
            if e == d {
                return true;
            }
            let fwd = dominates(d, e, grid);
            let bwd = dominates(e, d, grid);
            let same = fwd.holds() && bwd.holds();
            if same {
                grid_based = true;
            }
            same
        });
        block[s] = match found {
            Some(b) => b,
            None => {
                reps.push(s);
                reps.len() - 1
            }
        };
    }

    loop {
        let mut sigs: BTreeMap<(usize, Vec<(LabelId, usize, i64)>), usize> = BTreeMap::new();
        let mut next = vec![0usize; n];
        for s in 0..n {
            let mut sig = Vec::new();
            for a in 0..u.num_labels() {
                let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
                for (t, p) in successors(s, a) {
                    *mass.entry(block[t]).or_insert(0.0) += p;
                }
                for (b, p) in mass {
                    let q = quantize(p);
                    if q > 0 {
                        sig.push((a, b, q));
                    }
                }
            }
            let key = (block[s], sig);
            let len = sigs.len();
            next[s] = *sigs.entry(key).or_insert(len);
        }
        let stable = sigs.len() == block.iter().collect::<std::collections::BTreeSet<_>>().len();
        block = next;
        if stable {
            break;
        }
    }

    let pairs = pairs_of(u, v, |x, y| block[x] == block[y + nu]);
    Ok(RelationResult {
        holds: block[u.initial()] == block[v.initial() + nu],
        pairs,
        grid_based,
    })
}
