//! Synchronous parallel composition of SMDPs.

use std::collections::{BTreeMap, VecDeque};

use crate::dist::{compose_residence, CompositionOperator};
use crate::error::{Error, Result};
use crate::model::{Smdp, StateId};

/// Separator in composite state names.
pub const STAR: char = '⋆';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposeOptions {
    /// Keep only product states reachable from the initial pair.
    pub prune: bool,
    /// Synchronise on the common labels instead of requiring equal label sets.
    pub project: bool,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            prune: true,
            project: false,
        }
    }
}

/// Name of the composite state `u⋆w`.
pub fn composite_name(u: &str, w: &str) -> String {
    let wrap = |s: &str| {
        if s.contains(STAR) {
            format!("({s})")
        } else {
            s.to_string()
        }
    };
    format!("{}{STAR}{}", wrap(u), wrap(w))
}

/// `U ⋆ W` with default options: equal label sets, unreachable pairs pruned.
pub fn compose(u: &Smdp, w: &Smdp, op: CompositionOperator) -> Result<Smdp> {
    compose_with(u, w, op, ComposeOptions::default())
}

pub fn compose_with(u: &Smdp, w: &Smdp, op: CompositionOperator, opts: ComposeOptions) -> Result<Smdp> {
    u.ensure_valid()?;
    w.ensure_valid()?;
    let labels: Vec<String> = if opts.project {
        u.labels().iter().filter(|l| w.label_id(l).is_ok()).cloned().collect()
    } else {
        u.ensure_same_labels(w)?;
        u.labels().to_vec()
    };
    if labels.is_empty() {
        return Err(Error::LabelMismatch {
            left: u.labels().to_vec(),
            right: w.labels().to_vec(),
        });
    }
    let pairs: Vec<(usize, usize)> = labels
        .iter()
        .map(|l| (u.label_id(l).expect("shared label"), w.label_id(l).expect("shared label")))
        .collect();

    let mut order: Vec<(StateId, StateId)> = Vec::new();
    let mut index: BTreeMap<(StateId, StateId), usize> = BTreeMap::new();
    let start = (u.initial(), w.initial());
    if opts.prune {
        let mut queue = VecDeque::from([start]);
        index.insert(start, 0);
        order.push(start);
        while let Some((x, y)) = queue.pop_front() {
            for &(la, lb) in &pairs {
                for &(x2, p) in u.successors(x, la) {
                    for &(y2, q) in w.successors(y, lb) {
                        if p * q > 0.0 && !index.contains_key(&(x2, y2)) {
                            index.insert((x2, y2), order.len());
                            order.push((x2, y2));
                            queue.push_back((x2, y2));
                        }
                    }
                }
            }
        }
    } else {
        for x in 0..u.num_states() {
            for y in 0..w.num_states() {
                index.insert((x, y), order.len());
                order.push((x, y));
            }
        }
    }

    let mut b = Smdp::builder();
    for l in &labels {
        b.label(l);
    }
    let names: Vec<String> = order
        .iter()
        .map(|&(x, y)| composite_name(u.state_name(x), w.state_name(y)))
        .collect();
    for (k, &(x, y)) in order.iter().enumerate() {
        let d = compose_residence(op, u.residence(x), w.residence(y))?;
        b.state(&names[k], d);
    }
    b.initial(&names[index[&start]]);
    for (k, &(x, y)) in order.iter().enumerate() {
        for (a, &(la, lb)) in pairs.iter().enumerate() {
            for &(x2, p) in u.successors(x, la) {
                for &(y2, q) in w.successors(y, lb) {
                    if p * q > 0.0 {
                        b.transition_ids(k, a, index[&(x2, y2)], p * q);
                    }
                }
            }
        }
    }
    Ok(b.build())
}
