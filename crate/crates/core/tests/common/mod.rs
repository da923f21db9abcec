//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use smdp_core::dist::dominance::{dominates, DominanceGrid};
use smdp_core::model::{has_deterministic_kernel, parse_model};
use smdp_core::{compose_residence, CompositionOperator, Distribution, Smdp};

use CompositionOperator::*;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus(name: &str) -> Smdp {
    let path = corpus_dir().join(format!("{name}.smdp"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_model(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// `P(X1 + X2 <= t)` for independent exponentials with distinct rates.
pub fn hypoexp2(r1: f64, r2: f64, t: f64) -> f64 {
    1.0 - (r2 * (-r1 * t).exp() - r1 * (-r2 * t).exp()) / (r2 - r1)
}

/// Erlang-`k` CDF with rate `r`.
pub fn erlang(k: u32, r: f64, t: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for j in 1..k {
        term *= r * t / j as f64;
        sum += term;
    }
    1.0 - (-r * t).exp() * sum
}

/// All state paths of length `n` by plain recursion.
pub fn all_paths(m: &Smdp, n: usize) -> Vec<Vec<usize>> {
    fn rec(m: &Smdp, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        let last = *cur.last().unwrap();
        for s in 0..m.num_states() {
            if (0..m.num_labels()).any(|a| m.prob(last, a, s) > 0.0) {
                cur.push(s);
                rec(m, n, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(m, n, &mut vec![m.initial()], &mut out);
    }
    out
}

/// Label simplex points of a two-label lattice with step 0.1 (or the single
/// point for one label).
fn lattice(labels: usize) -> Vec<Vec<f64>> {
    match labels {
        1 => vec![vec![1.0]],
        2 => (0..=10).map(|k| vec![k as f64 / 10.0, 1.0 - k as f64 / 10.0]).collect(),
        _ => panic!("oracle supports at most two labels"),
    }
}

/// Every combination of one lattice point per entry of `keys`.
fn assignments(len: usize, labels: usize) -> Vec<Vec<Vec<f64>>> {
    let pts = lattice(labels);
    let mut out: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                pts.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.push(p.clone());
                    v
                })
            })
            .collect();
    }
    out
}

/// Whether some scheduler row `p` on the label simplex satisfies `p >= need`
/// coordinatewise.
fn row_exists(need: &[f64]) -> bool {
    need.iter().all(|x| x.is_finite()) && need.iter().sum::<f64>() <= 1.0 + 1e-9
}

/// n-monotonicity straight from the definition: explicit path tuples for
/// every length up to `n`; universal schedulers range over the 0.1 lattice
/// on the states of the paths, existential schedulers are decided exactly.
pub fn brute_force_bounded(u: &Smdp, v: &Smdp, w: &Smdp, w2: &Smdp, op: CompositionOperator, n: usize) -> bool {
    let v = v.with_label_order(u.labels()).unwrap();
    let w = w.with_label_order(u.labels()).unwrap();
    let w2 = w2.with_label_order(u.labels()).unwrap();
    if !has_deterministic_kernel(&w2) {
        return false;
    }
    let labels = u.num_labels();
    for len in 1..=n {
        let (pu, pv, pw, pw2) = (all_paths(u, len), all_paths(&v, len), all_paths(&w, len), all_paths(&w2, len));
        if pu.is_empty() || pv.is_empty() || pw.is_empty() || pw2.is_empty() {
            break;
        }
        // condition 1
        let grid = DominanceGrid::default();
        for (a, b) in pu.iter().flat_map(|x| pw.iter().map(move |y| (x, y))) {
            for i in 0..len {
                let c = compose_residence(op, u.residence(a[i]), w.residence(b[i])).unwrap();
                if !dominates(&c, u.residence(a[i]), grid).holds() {
                    return false;
                }
            }
        }
        for (a, b) in pv.iter().flat_map(|x| pw2.iter().map(move |y| (x, y))) {
            for i in 0..len {
                let c = compose_residence(op, v.residence(a[i]), w2.residence(b[i])).unwrap();
                if !dominates(v.residence(a[i]), &c, grid).holds() {
                    return false;
                }
            }
        }
        // condition 2: for all σ_U there is σ_{U,W}
        for pa in &pu {
            for pb in &pw {
                let mut ustates: Vec<usize> = pa[..len - 1].to_vec();
                ustates.sort();
                ustates.dedup();
                for sig in assignments(ustates.len(), labels) {
                    let row = |s: usize| &sig[ustates.iter().position(|&x| x == s).unwrap()];
                    // needed weight per composite state and label
                    let mut need: std::collections::HashMap<(usize, usize), Vec<f64>> = Default::default();
                    for i in 0..len - 1 {
                        for a in 0..labels {
                            let rhs = row(pa[i])[a] * u.prob(pa[i], a, pa[i + 1]);
                            if rhs <= 0.0 {
                                continue;
                            }
                            let tau = u.prob(pa[i], a, pa[i + 1]) * w.prob(pb[i], a, pb[i + 1]);
                            let req = if tau > 0.0 { rhs / tau } else { f64::INFINITY };
                            let e = need.entry((pa[i], pb[i])).or_insert_with(|| vec![0.0; labels]);
                            e[a] = e[a].max(req);
                        }
                    }
                    if !need.values().all(|r| row_exists(r)) {
                        return false;
                    }
                }
            }
        }
        // condition 3: for all σ_{V,W'} there is σ_V
        for pa in &pv {
            for pb in &pw2 {
                let mut xs: Vec<(usize, usize)> = (0..len - 1).map(|i| (pa[i], pb[i])).collect();
                xs.sort();
                xs.dedup();
                for sig in assignments(xs.len(), labels) {
                    let row = |x: (usize, usize)| &sig[xs.iter().position(|&y| y == x).unwrap()];
                    let mut need: std::collections::HashMap<usize, Vec<f64>> = Default::default();
                    for i in 0..len - 1 {
                        for a in 0..labels {
                            let tv = v.prob(pa[i], a, pa[i + 1]);
                            if tv <= 0.0 {
                                continue;
                            }
                            let rhs = row((pa[i], pb[i]))[a] * tv * w2.prob(pb[i], a, pb[i + 1]);
                            let e = need.entry(pa[i]).or_insert_with(|| vec![0.0; labels]);
                            e[a] = e[a].max(rhs / tv);
                        }
                    }
                    if !need.values().all(|r| row_exists(r)) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Quadruples from the corpus with at most four states and two labels.
pub fn corpus_instances() -> Vec<(Smdp, Smdp, Smdp, Smdp, CompositionOperator)> {
    let mut out = Vec::new();
    for ctx in ["fig4_W_prod", "fig4_W_min", "fig4_W_max", "fig4_W_same"] {
        for op in [Minimum, Maximum, ProductRate] {
            let (u, v, w) = (corpus("fig2_U"), corpus("fig2_V"), corpus(ctx));
            out.push((u, v, w.clone(), w, op));
        }
    }
    for op in [Minimum, Maximum] {
        let (u, v, w) = (corpus("twolabel_U"), corpus("twolabel_V"), corpus("twolabel_W"));
        out.push((u.clone(), v.clone(), w.clone(), w.clone(), op));
        out.push((v, u, w.clone(), w, op));
        let (u3, v3) = (corpus("fig3_U"), corpus("fig3_V"));
        out.push((u3.clone(), v3.clone(), u3.clone(), v3.clone(), op));
        out.push((v3.clone(), u3.clone(), v3.clone(), u3.clone(), op));
        out.push((u3.clone(), u3.clone(), v3.clone(), v3, op));
    }
    out
}

// ---------------------------------------------------------------------------
// Random small instances

pub const RATES: [f64; 3] = [0.5, 1.0, 2.0];

/// A model over `labels` with `states` states; every state has at least one
/// outgoing transition. Transition rows are Dirac or split in half.
pub fn model_strategy(prefix: &'static str, labels: usize, states: usize, deterministic: bool) -> impl Strategy<Value = Smdp> {
    model_strategy_rates(prefix, labels, states, deterministic, RATES.len())
}

/// As [`model_strategy`], drawing rates from the first `rate_choices` of [`RATES`].
pub fn model_strategy_rates(
    prefix: &'static str,
    labels: usize,
    states: usize,
    deterministic: bool,
    rate_choices: usize,
) -> impl Strategy<Value = Smdp> {
    let row = (0..states, 0..states, any::<bool>(), any::<bool>());
    (
        prop::collection::vec(0..rate_choices, states),
        prop::collection::vec(prop::collection::vec(row, labels), states),
    )
        .prop_map(move |(rates, rows)| {
            let names: Vec<String> = (0..states).map(|i| format!("{prefix}{i}")).collect();
            let lnames = ["a", "b"];
            let mut b = Smdp::builder();
            b.labels(lnames[..labels].iter().copied());
            for (n, r) in names.iter().zip(&rates) {
                b.state(n, Distribution::exponential(RATES[*r]).unwrap());
            }
            b.initial(&names[0]);
            for (s, per_label) in rows.iter().enumerate() {
                for (a, &(t1, t2, split, enabled)) in per_label.iter().enumerate() {
                    // label 0 is always enabled so nothing deadlocks
                    if a > 0 && !enabled {
                        continue;
                    }
                    if split && !deterministic && t1 != t2 {
                        b.transition(&names[s], lnames[a], &names[t1], 0.5);
                        b.transition(&names[s], lnames[a], &names[t2], 0.5);
                    } else {
                        b.transition(&names[s], lnames[a], &names[t1], if split { 0.5 } else { 1.0 });
                    }
                }
            }
            b.build()
        })
}

pub fn instance(labels: usize) -> impl Strategy<Value = (Smdp, Smdp, Smdp, Smdp, CompositionOperator)> {
    (
        (1usize..=3).prop_flat_map(move |k| model_strategy("u", labels, k, false)),
        (1usize..=3).prop_flat_map(move |k| model_strategy("v", labels, k, false)),
        (1usize..=3).prop_flat_map(move |k| model_strategy("w", labels, k, false)),
        (1usize..=3).prop_flat_map(move |k| model_strategy("x", labels, k, true)),
        prop_oneof![Just(Minimum), Just(Maximum), Just(ProductRate)],
    )
}

/// All residences `exp(0.5)`: condition 1 holds under min and max, so the
/// verdict rests on the scheduler conditions.
pub fn equal_rate_instance() -> impl Strategy<Value = (Smdp, Smdp, Smdp, Smdp, CompositionOperator)> {
    (
        (1usize..=3).prop_flat_map(|k| model_strategy_rates("u", 2, k, false, 1)),
        (1usize..=3).prop_flat_map(|k| model_strategy_rates("v", 2, k, false, 1)),
        (1usize..=3).prop_flat_map(|k| model_strategy_rates("w", 2, k, false, 1)),
        (1usize..=3).prop_flat_map(|k| model_strategy_rates("x", 2, k, true, 1)),
        prop_oneof![Just(Minimum), Just(Maximum)],
    )
}
