//! Semi-Markov decision processes and memoryless schedulers.

pub mod format;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::dist::Distribution;
use crate::error::{Error, Result};

pub use format::{
    parse_distribution, parse_model, parse_scheduler, serialize_model, serialize_scheduler,
    ParseError,
};

pub type StateId = usize;
pub type LabelId = usize;

/// Mass tolerance for subdistributions and scheduler rows.
pub const MASS_TOL: f64 = 1e-12;

/// A finite SMDP `(S, s0, tau, rho)` over a label set `L`.
///
/// States and labels are interned; names referenced without being declared
/// are kept (and flagged) so that [`validate_model`] can report them.
#[derive(Debug, Clone, PartialEq)]
pub struct Smdp {
    labels: Vec<String>,
    label_declared: Vec<bool>,
    states: Vec<String>,
    state_declared: Vec<bool>,
    initial: StateId,
    residence: Vec<Option<Distribution>>,
    /// `rows[s][a]`: successor entries sorted by target, no duplicates.
    rows: Vec<Vec<Vec<(StateId, f64)>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NoLabels,
    NoStates,
    MassExceeded { state: String, label: String, mass: f64 },
    ProbabilityOutOfRange { state: String, label: String, target: String, probability: f64 },
    DanglingState { name: String },
    DanglingLabel { name: String },
    MissingResidence { state: String },
    InvalidResidence { state: String, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoLabels => write!(f, "label set is empty"),
            Violation::NoStates => write!(f, "state set is empty"),
            Violation::MassExceeded { state, label, mass } => {
                write!(f, "transitions from `{state}` on `{label}` have total mass {mass} > 1")
            }
            Violation::ProbabilityOutOfRange {
                state,
                label,
                target,
                probability,
            } => write!(
                f,
                "probability {probability} of `{state}` -{label}-> `{target}` is outside [0, 1]"
            ),
            Violation::DanglingState { name } => write!(f, "state `{name}` is used but not declared"),
            Violation::DanglingLabel { name } => write!(f, "label `{name}` is used but not declared"),
            Violation::MissingResidence { state } => {
                write!(f, "state `{state}` has no residence distribution")
            }
            Violation::InvalidResidence { state, reason } => {
                write!(f, "residence of `{state}` is invalid: {reason}")
            }
        }
    }
}

/// Incremental construction of an [`Smdp`].
#[derive(Debug, Clone, Default)]
pub struct SmdpBuilder {
    m: Smdp,
}

impl Default for Smdp {
    fn default() -> Self {
        Smdp {
            labels: Vec::new(),
            label_declared: Vec::new(),
            states: Vec::new(),
            state_declared: Vec::new(),
            initial: 0,
            residence: Vec::new(),
            rows: Vec::new(),
        }
    }
}

impl SmdpBuilder {
    pub fn new() -> Self {
        SmdpBuilder::default()
    }

    pub fn label(&mut self, name: &str) -> LabelId {
        let id = self.m.intern_label(name);
        self.m.label_declared[id] = true;
        id
    }

    pub fn labels<'a>(&mut self, names: impl IntoIterator<Item = &'a str>) -> &mut Self {
        for n in names {
            self.label(n);
        }
        self
    }

    pub fn state(&mut self, name: &str, residence: Distribution) -> StateId {
        let id = self.declare_state(name);
        self.m.residence[id] = Some(residence);
        id
    }

    pub fn declare_state(&mut self, name: &str) -> StateId {
        let id = self.m.intern_state(name);
        self.m.state_declared[id] = true;
        id
    }

    pub fn residence(&mut self, state: &str, residence: Distribution) -> &mut Self {
        let id = self.m.intern_state(state);
        self.m.residence[id] = Some(residence);
        self
    }

    pub fn initial(&mut self, name: &str) -> &mut Self {
        self.m.initial = self.m.intern_state(name);
        self
    }

    /// Adds `p` to `tau(from, label)(to)`.
    pub fn transition(&mut self, from: &str, label: &str, to: &str, p: f64) -> &mut Self {
        let s = self.m.intern_state(from);
        let a = self.m.intern_label(label);
        let t = self.m.intern_state(to);
        self.m.add_mass(s, a, t, p);
        self
    }

    pub fn transition_ids(&mut self, from: StateId, label: LabelId, to: StateId, p: f64) -> &mut Self {
        self.m.add_mass(from, label, to, p);
        self
    }

    pub fn build(self) -> Smdp {
        self.m
    }
}

impl Smdp {
    pub fn builder() -> SmdpBuilder {
        SmdpBuilder::new()
    }

    fn intern_state(&mut self, name: &str) -> StateId {
        if let Some(i) = self.states.iter().position(|s| s == name) {
            return i;
        }
        self.states.push(name.to_string());
        self.state_declared.push(false);
        self.residence.push(None);
        self.rows.push(vec![Vec::new(); self.labels.len()]);
        self.states.len() - 1
    }

    fn intern_label(&mut self, name: &str) -> LabelId {
        if let Some(i) = self.labels.iter().position(|s| s == name) {
            return i;
        }
        self.labels.push(name.to_string());
        self.label_declared.push(false);
        for row in &mut self.rows {
            row.push(Vec::new());
        }
        self.labels.len() - 1
    }

    fn add_mass(&mut self, s: StateId, a: LabelId, t: StateId, p: f64) {
        let row = &mut self.rows[s][a];
        match row.binary_search_by_key(&t, |e| e.0) {
            Ok(i) => row[i].1 += p,
            Err(i) => row.insert(i, (t, p)),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.states[s]
    }

    pub fn label_name(&self, a: LabelId) -> &str {
        &self.labels[a]
    }

    pub fn state_id(&self, name: &str) -> Result<StateId> {
        self.states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn label_id(&self, name: &str) -> Result<LabelId> {
        self.labels
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn is_state_declared(&self, s: StateId) -> bool {
        self.state_declared[s]
    }

    pub fn is_label_declared(&self, a: LabelId) -> bool {
        self.label_declared[a]
    }

    /// Residence distribution of `s`. Panics if missing; call
    /// [`Smdp::ensure_valid`] first.
    pub fn residence(&self, s: StateId) -> &Distribution {
        self.residence[s]
            .as_ref()
            .expect("residence present in a validated model")
    }

    pub fn residence_opt(&self, s: StateId) -> Option<&Distribution> {
        self.residence[s].as_ref()
    }

    /// `tau(s, a)` as `(target, probability)` pairs sorted by target.
    pub fn successors(&self, s: StateId, a: LabelId) -> &[(StateId, f64)] {
        &self.rows[s][a]
    }

    /// `tau(s, a)(t)`.
    pub fn prob(&self, s: StateId, a: LabelId, t: StateId) -> f64 {
        let row = &self.rows[s][a];
        row.binary_search_by_key(&t, |e| e.0)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    /// States reachable from `s` in one step with positive probability.
    pub fn post(&self, s: StateId) -> Vec<StateId> {
        let mut out: Vec<StateId> = self.rows[s]
            .iter()
            .flatten()
            .filter(|(_, p)| *p > 0.0)
            .map(|(t, _)| *t)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// True when no transition leaves `s` with positive probability.
    pub fn is_deadlock(&self, s: StateId) -> bool {
        self.post(s).is_empty()
    }

    /// States reachable from the initial state.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(s) = stack.pop() {
            for t in self.post(s) {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_model(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    /// Errors unless `other` has exactly the same label sequence.
    pub fn ensure_same_labels(&self, other: &Smdp) -> Result<()> {
        let mut l1 = self.labels.clone();
        let mut l2 = other.labels.clone();
        l1.sort();
        l2.sort();
        if l1 != l2 {
            return Err(Error::LabelMismatch {
                left: l1,
                right: l2,
            });
        }
        Ok(())
    }

    /// The same model with labels reordered to `order` (a permutation of the
    /// current labels).
    pub fn with_label_order(&self, order: &[String]) -> Result<Smdp> {
        let mut b = Smdp::builder();
        for l in order {
            self.label_id(l)?;
            b.label(l);
        }
        if order.len() != self.labels.len() {
            return Err(Error::LabelMismatch {
                left: self.labels.clone(),
                right: order.to_vec(),
            });
        }
        for (s, name) in self.states.iter().enumerate() {
            let id = b.m.intern_state(name);
            b.m.state_declared[id] = self.state_declared[s];
            b.m.residence[id] = self.residence[s].clone();
        }
        b.m.initial = self.initial;
        for s in 0..self.num_states() {
            for (a, l) in self.labels.iter().enumerate() {
                let na = b.m.label_id(l)?;
                for &(t, p) in &self.rows[s][a] {
                    b.m.add_mass(s, na, t, p);
                }
            }
        }
        Ok(b.build())
    }
}

/// Lists every structural problem of `m`; empty means valid.
pub fn validate_model(m: &Smdp) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.labels.is_empty() {
        out.push(Violation::NoLabels);
    }
    if m.states.is_empty() {
        out.push(Violation::NoStates);
        return out;
    }
    for (a, name) in m.labels.iter().enumerate() {
        if !m.label_declared[a] {
            out.push(Violation::DanglingLabel { name: name.clone() });
        }
    }
    for (s, name) in m.states.iter().enumerate() {
        if !m.state_declared[s] {
            out.push(Violation::DanglingState { name: name.clone() });
            continue;
        }
        match &m.residence[s] {
            None => out.push(Violation::MissingResidence { state: name.clone() }),
            Some(d) => {
                if let Err(e) = d.validate() {
                    out.push(Violation::InvalidResidence {
                        state: name.clone(),
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    for s in 0..m.num_states() {
        for a in 0..m.num_labels() {
            let mut mass = 0.0;
            for &(t, p) in &m.rows[s][a] {
                if !(0.0..=1.0).contains(&p) {
                    out.push(Violation::ProbabilityOutOfRange {
                        state: m.states[s].clone(),
                        label: m.labels[a].clone(),
                        target: m.states[t].clone(),
                        probability: p,
                    });
                }
                mass += p;
            }
            if mass > 1.0 + MASS_TOL {
                out.push(Violation::MassExceeded {
                    state: m.states[s].clone(),
                    label: m.labels[a].clone(),
                    mass,
                });
            }
        }
    }
    out
}

/// True iff every `tau(s, a)` has at most one positive entry.
pub fn has_deterministic_kernel(m: &Smdp) -> bool {
    m.rows
        .iter()
        .flatten()
        .all(|row| row.iter().filter(|(_, p)| *p > 0.0).count() <= 1)
}

/// A memoryless scheduler: one distribution over labels per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Scheduler {
    weights: Vec<Vec<f64>>,
}

impl Scheduler {
    /// Equal weight on every label in every state.
    pub fn uniform(m: &Smdp) -> Scheduler {
        let n = m.num_labels().max(1);
        Scheduler {
            weights: vec![vec![1.0 / n as f64; m.num_labels()]; m.num_states()],
        }
    }

    /// Chooses `choice[s]` with probability one in state `s`.
    pub fn dirac(m: &Smdp, choice: &[LabelId]) -> Result<Scheduler> {
        if choice.len() != m.num_states() {
            return Err(Error::InvalidScheduler(format!(
                "expected {} choices, got {}",
                m.num_states(),
                choice.len()
            )));
        }
        let mut weights = vec![vec![0.0; m.num_labels()]; m.num_states()];
        for (s, &a) in choice.iter().enumerate() {
            if a >= m.num_labels() {
                return Err(Error::InvalidScheduler(format!("label index {a} out of range")));
            }
            weights[s][a] = 1.0;
        }
        Ok(Scheduler { weights })
    }

    /// The scheduler choosing `label` everywhere.
    pub fn constant(m: &Smdp, label: LabelId) -> Result<Scheduler> {
        Scheduler::dirac(m, &vec![label; m.num_states()])
    }

    pub fn from_weights(m: &Smdp, weights: Vec<Vec<f64>>) -> Result<Scheduler> {
        if weights.len() != m.num_states() || weights.iter().any(|w| w.len() != m.num_labels()) {
            return Err(Error::InvalidScheduler(format!(
                "weights must be a {} x {} table",
                m.num_states(),
                m.num_labels()
            )));
        }
        for (s, row) in weights.iter().enumerate() {
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidScheduler(format!(
                    "negative or non-finite weight at `{}`",
                    m.state_name(s)
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidScheduler(format!(
                    "weights at `{}` sum to {sum}",
                    m.state_name(s)
                )));
            }
        }
        Ok(Scheduler { weights })
    }

    /// `sigma(s)(a)`.
    pub fn weight(&self, s: StateId, a: LabelId) -> f64 {
        self.weights[s][a]
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.weights[s]
    }

    pub fn num_states(&self) -> usize {
        self.weights.len()
    }

    /// Replaces the distribution at `s`. The caller keeps it normalised.
    pub(crate) fn set_row(&mut self, s: StateId, row: Vec<f64>) {
        self.weights[s] = row;
    }

    /// `state -> label -> weight` with names, omitting zero weights.
    pub fn to_named(&self, m: &Smdp) -> BTreeMap<String, BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for (s, row) in self.weights.iter().enumerate() {
            let entry: BTreeMap<String, f64> = row
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(a, w)| (m.label_name(a).to_string(), *w))
                .collect();
            out.insert(m.state_name(s).to_string(), entry);
        }
        out
    }
}

/// `tau^sigma(s, a)(s2) = tau(s, a)(s2) * sigma(s)(a)`, by name.
pub fn effective_transition(m: &Smdp, sch: &Scheduler, s: &str, a: &str, s2: &str) -> Result<f64> {
    let (s, a, s2) = (m.state_id(s)?, m.label_id(a)?, m.state_id(s2)?);
    if sch.num_states() != m.num_states() {
        return Err(Error::InvalidScheduler("scheduler belongs to another model".into()));
    }
    Ok(m.prob(s, a, s2) * sch.weight(s, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(r: f64) -> Distribution {
        Distribution::exponential(r).unwrap()
    }

    fn chain() -> Smdp {
        let mut b = Smdp::builder();
        b.labels(["a"]);
        b.state("u0", exp(2.0));
        b.state("u1", exp(0.5));
        b.state("u2", exp(1.0));
        b.initial("u0")
            .transition("u0", "a", "u1", 1.0)
            .transition("u1", "a", "u2", 1.0)
            .transition("u2", "a", "u2", 1.0);
        b.build()
    }

    #[test]
    fn chain_is_valid_and_deterministic() {
        let m = chain();
        assert!(validate_model(&m).is_empty());
        assert!(has_deterministic_kernel(&m));
        let s = Scheduler::uniform(&m);
        assert_eq!(effective_transition(&m, &s, "u0", "a", "u1").unwrap(), 1.0);
    }

    #[test]
    fn mass_violation() {
        let mut b = Smdp::builder();
        b.labels(["a"]);
        b.state("s", exp(1.0));
        b.state("t", exp(1.0));
        b.transition("s", "a", "t", 0.7).transition("s", "a", "s", 0.5);
        let v = validate_model(&b.build());
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::MassExceeded { .. }));
    }

    #[test]
    fn missing_residence_and_dangling() {
        let mut b = Smdp::builder();
        b.labels(["a"]);
        b.state("s", exp(1.0));
        b.declare_state("t");
        b.transition("s", "a", "ghost", 0.5);
        let v = validate_model(&b.build());
        assert!(v.contains(&Violation::MissingResidence { state: "t".into() }));
        assert!(v.contains(&Violation::DanglingState {
            name: "ghost".into()
        }));
    }

    #[test]
    fn unknown_names_are_errors() {
        let m = chain();
        let s = Scheduler::uniform(&m);
        assert!(matches!(
            effective_transition(&m, &s, "nope", "a", "u1"),
            Err(Error::UnknownState(_))
        ));
        assert!(matches!(
            effective_transition(&m, &s, "u0", "b", "u1"),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn scheduler_rows_must_sum_to_one() {
        let m = chain();
        assert!(Scheduler::from_weights(&m, vec![vec![0.5]; 3]).is_err());
        assert!(Scheduler::from_weights(&m, vec![vec![1.0]; 3]).is_ok());
    }

    #[test]
    fn two_successor_row_is_not_deterministic() {
        let mut b = Smdp::builder();
        b.labels(["a"]);
        b.state("s", exp(1.0));
        b.state("s1", exp(1.0));
        b.state("s2", exp(1.0));
        b.transition("s", "a", "s1", 0.5).transition("s", "a", "s2", 0.5);
        assert!(!has_deterministic_kernel(&b.build()));
    }
}
