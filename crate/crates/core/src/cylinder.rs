//! Probabilities of rectangular and time-bounded cylinders.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dist::{convolve, Distribution};
use crate::error::{Error, Result};
use crate::model::{LabelId, Scheduler, Smdp, StateId};

/// Number of intervals the inductive engine tabulates on `[0, t]`.
pub const INDUCTIVE_CELLS: usize = 1024;

/// Quadrature tolerance of the inductive engine.
const INDUCTIVE_TOL: f64 = 1e-7;

/// `C(a1 ... an, t)`: the first `n` labels are `word` and the first `n`
/// sojourn times sum to at most `bound`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeBoundedCylinder {
    pub word: Vec<LabelId>,
    pub bound: f64,
}

impl TimeBoundedCylinder {
    pub fn new(word: Vec<LabelId>, bound: f64) -> Result<Self> {
        if word.is_empty() {
            return Err(Error::InvalidArgument("cylinder word must be nonempty".into()));
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidArgument(format!("time bound must be finite and >= 0, got {bound}")));
        }
        Ok(TimeBoundedCylinder { word, bound })
    }
}

/// One interval of nonnegative reals; `hi` may be infinite (then open).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub lo_closed: bool,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval {
            lo,
            lo_closed: true,
            hi,
            hi_closed: true,
        }
    }

    /// `[lo, infinity)`.
    pub fn from(lo: f64) -> Self {
        Interval {
            lo,
            lo_closed: true,
            hi: f64::INFINITY,
            hi_closed: false,
        }
    }

    fn is_empty(&self) -> bool {
        self.hi < self.lo || (self.hi == self.lo && !(self.lo_closed && self.hi_closed))
    }
}

/// A finite union of ordered, disjoint intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSet {
    intervals: Vec<Interval>,
}

impl TimeSet {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        for (i, iv) in intervals.iter().enumerate() {
            if !(iv.lo >= 0.0 && iv.lo.is_finite()) || iv.hi.is_nan() || iv.is_empty() {
                return Err(Error::InvalidArgument(format!("invalid interval {iv:?}")));
            }
            if iv.hi.is_infinite() && iv.hi_closed {
                return Err(Error::InvalidArgument("an infinite end cannot be closed".into()));
            }
            if i > 0 {
                let prev = intervals[i - 1];
                let touching = prev.hi == iv.lo && prev.hi_closed && iv.lo_closed;
                if prev.hi > iv.lo || touching {
                    return Err(Error::InvalidArgument("intervals must be ordered and disjoint".into()));
                }
            }
        }
        Ok(TimeSet { intervals })
    }

    /// `[0, infinity)`.
    pub fn all() -> Self {
        TimeSet {
            intervals: vec![Interval::from(0.0)],
        }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// `d(R)`, with point masses included exactly at closed ends.
    pub fn measure(&self, d: &Distribution) -> f64 {
        self.intervals
            .iter()
            .map(|iv| d.interval_mass(iv.lo, iv.lo_closed, iv.hi, iv.hi_closed))
            .sum::<f64>()
            .min(1.0)
    }
}

/// One step `(L_i, R_i, S_i)` of a rectangular cylinder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectStep {
    pub labels: Vec<LabelId>,
    pub times: TimeSet,
    pub states: Vec<StateId>,
}

/// `C(L1 ... Ln, R1 ... Rn, S1 ... Sn)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RectCylinder {
    pub steps: Vec<RectStep>,
}

impl RectCylinder {
    /// The rectangular cylinder with `L_i = {a_i}`, `R_i = [0, inf)`, `S_i = S`.
    pub fn unbounded_word(m: &Smdp, word: &[LabelId]) -> RectCylinder {
        let states: Vec<StateId> = (0..m.num_states()).collect();
        RectCylinder {
            steps: word
                .iter()
                .map(|&a| RectStep {
                    labels: vec![a],
                    times: TimeSet::all(),
                    states: states.clone(),
                })
                .collect(),
        }
    }
}

/// Splits a word into labels: separated by whitespace, commas or dots, a
/// single label name, or otherwise one character per label.
pub fn parse_word(m: &Smdp, text: &str) -> Result<Vec<LabelId>> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::InvalidArgument("empty word".into()));
    }
    let separated = text.contains(|c: char| c.is_whitespace() || c == ',' || c == '.');
    let parts: Vec<String> = if separated {
        text.split(|c: char| c.is_whitespace() || c == ',' || c == '.')
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect()
    } else if m.label_id(text).is_ok() {
        vec![text.to_string()]
    } else {
        text.chars().map(|c| c.to_string()).collect()
    };
    parts.iter().map(|p| m.label_id(p)).collect()
}

pub(crate) fn check_inputs(m: &Smdp, sch: &Scheduler, s: StateId, labels: &[LabelId]) -> Result<()> {
    m.ensure_valid()?;
    if sch.num_states() != m.num_states() {
        return Err(Error::InvalidScheduler("scheduler belongs to another model".into()));
    }
    if s >= m.num_states() {
        return Err(Error::UnknownState(format!("#{s}")));
    }
    if let Some(&a) = labels.iter().find(|&&a| a >= m.num_labels()) {
        return Err(Error::UnknownLabel(format!("#{a}")));
    }
    Ok(())
}

/// Weighted prefixes: current state and accumulated residence convolution.
/// Paths reaching the same state with the same accumulated distribution are
/// merged, which is sound because convolution is commutative.
pub type Frontier = BTreeMap<(StateId, Distribution), f64>;

pub fn initial_frontier(s: StateId) -> Frontier {
    let mut f = Frontier::new();
    f.insert((s, Distribution::Dirac(0.0)), 1.0);
    f
}

/// Extends every prefix by one `a`-transition under `sch`.
pub fn frontier_step(m: &Smdp, sch: &Scheduler, frontier: &Frontier, a: LabelId) -> Frontier {
    let mut next = Frontier::new();
    let mut conv_cache: BTreeMap<(&Distribution, StateId), Distribution> = BTreeMap::new();
    for ((x, acc), w) in frontier {
        let choose = sch.weight(*x, a);
        if choose <= 0.0 {
            continue;
        }
        let succ = m.successors(*x, a);
        if succ.iter().all(|(_, p)| *p <= 0.0) {
            continue;
        }
        let acc2 = conv_cache
            .entry((acc, *x))
            .or_insert_with(|| convolve(acc, m.residence(*x)))
            .clone();
        for &(y, p) in succ {
            let mass = w * choose * p;
            if mass > 0.0 {
                *next.entry((y, acc2.clone())).or_insert(0.0) += mass;
            }
        }
    }
    next
}

/// The time-bounded cylinder probability as a function of `t`: a list of
/// `(distribution, weight)` with `P(t) = sum weight * F(t)`.
pub fn cylinder_mixture(m: &Smdp, sch: &Scheduler, s: StateId, word: &[LabelId]) -> Result<Vec<(Distribution, f64)>> {
    check_inputs(m, sch, s, word)?;
    if word.is_empty() {
        return Err(Error::InvalidArgument("cylinder word must be nonempty".into()));
    }
    let mut frontier = initial_frontier(s);
    for &a in word {
        frontier = frontier_step(m, sch, &frontier, a);
    }
    Ok(collapse(&frontier))
}

/// Sums frontier weights per accumulated distribution.
pub fn collapse(frontier: &Frontier) -> Vec<(Distribution, f64)> {
    let mut by_dist: BTreeMap<&Distribution, f64> = BTreeMap::new();
    for ((_, acc), w) in frontier {
        *by_dist.entry(acc).or_insert(0.0) += w;
    }
    by_dist.into_iter().map(|(d, w)| (d.clone(), w)).collect()
}

/// Evaluates a mixture at `t`.
pub fn mixture_cdf(mixture: &[(Distribution, f64)], t: f64) -> f64 {
    mixture.iter().map(|(d, w)| w * d.cdf(t)).sum()
}

/// Sum over state paths of the transition product times the CDF of the
/// convolved residences along the path.
pub fn prob_cylinder_paths(m: &Smdp, sch: &Scheduler, s: StateId, c: &TimeBoundedCylinder) -> Result<f64> {
    let mix = cylinder_mixture(m, sch, s, &c.word)?;
    Ok(mixture_cdf(&mix, c.bound).clamp(0.0, 1.0))
}

/// Probability of the label sequence regardless of time.
pub fn trace_probability(m: &Smdp, sch: &Scheduler, s: StateId, word: &[LabelId]) -> Result<f64> {
    check_inputs(m, sch, s, word)?;
    if word.is_empty() {
        return Err(Error::InvalidArgument("word must be nonempty".into()));
    }
    // Only weights matter here; track states alone.
    let mut w = vec![0.0; m.num_states()];
    w[s] = 1.0;
    for &a in word {
        let mut next = vec![0.0; m.num_states()];
        for (x, &wx) in w.iter().enumerate() {
            let c = wx * sch.weight(x, a);
            if c > 0.0 {
                for &(y, p) in m.successors(x, a) {
                    next[y] += c * p;
                }
            }
        }
        w = next;
    }
    Ok(w.iter().sum::<f64>().min(1.0))
}

/// Recursive evaluation over `(L_i, R_i, S_i)` steps.
pub fn prob_rect_cylinder(m: &Smdp, sch: &Scheduler, s: StateId, c: &RectCylinder) -> Result<f64> {
    let labels: Vec<LabelId> = c.steps.iter().flat_map(|st| st.labels.iter().copied()).collect();
    check_inputs(m, sch, s, &labels)?;
    if c.steps.is_empty() {
        return Err(Error::InvalidArgument("cylinder must have at least one step".into()));
    }
    if let Some(&x) = c.steps.iter().flat_map(|st| st.states.iter()).find(|&&x| x >= m.num_states()) {
        return Err(Error::UnknownState(format!("#{x}")));
    }
    Ok(rect_rec(m, sch, s, &c.steps).min(1.0))
}

fn rect_rec(m: &Smdp, sch: &Scheduler, s: StateId, steps: &[RectStep]) -> f64 {
    let Some((step, rest)) = steps.split_first() else {
        return 1.0;
    };
    let time = step.times.measure(m.residence(s));
    if time <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for &a in &step.labels {
        let choose = sch.weight(s, a);
        if choose <= 0.0 {
            continue;
        }
        for &(y, p) in m.successors(s, a) {
            if p > 0.0 && step.states.contains(&y) {
                total += choose * p * rect_rec(m, sch, y, rest);
            }
        }
    }
    time * total
}

/// Tabulated sub-CDF on the uniform grid `k h`, `k = 0..=cells`.
struct Table {
    h: f64,
    values: Vec<f64>,
}

impl Table {
    fn at(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 0.0;
        }
        let n = self.values.len() - 1;
        if self.h == 0.0 || n == 0 {
            return self.values[0];
        }
        let x = u / self.h;
        if x >= n as f64 {
            return self.values[n];
        }
        let i = x.floor() as usize;
        let f = x - i as f64;
        let v = |k: isize| self.values[k.clamp(0, n as isize) as usize];
        let i = i as isize;
        let (p0, p1, p2, p3) = (v(i - 1), v(i), v(i + 1), v(i + 2));
        // Catmull-Rom
        let y = p1
            + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
        y.clamp(0.0, 1.0)
    }
}

/// `(d * H)([0, u])` for a tabulated `H`.
fn convolve_with_table(d: &Distribution, table: &Table, u: f64) -> f64 {
    let mut total = 0.0;
    for (p, mass) in d.atoms() {
        if p <= u {
            total += mass * table.at(u - p);
        }
    }
    if u > 0.0 {
        let hi = u.min(d.upper_quantile(1e-15));
        let cuts: Vec<f64> = d.breakpoints();
        total += crate::dist::integrate(|x| d.density(x) * table.at(u - x), 0.0, hi, &cuts, INDUCTIVE_TOL);
    }
    total
}

/// The inductive characterisation, evaluated on a tabulated grid over
/// `[0, t]` from the end of the word backwards.
pub fn prob_cylinder_inductive(m: &Smdp, sch: &Scheduler, s: StateId, c: &TimeBoundedCylinder) -> Result<f64> {
    check_inputs(m, sch, s, &c.word)?;
    let n = c.word.len();
    let t = c.bound;
    let cells = if t > 0.0 { INDUCTIVE_CELLS } else { 0 };
    let h = if cells > 0 { t / cells as f64 } else { 0.0 };
    let grid: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();

    // States that can occur at each position of the word.
    let mut layers = vec![vec![false; m.num_states()]; n];
    layers[0][s] = true;
    for i in 1..n {
        for x in 0..m.num_states() {
            if layers[i - 1][x] && sch.weight(x, c.word[i - 1]) > 0.0 {
                for &(y, p) in m.successors(x, c.word[i - 1]) {
                    if p > 0.0 {
                        layers[i][y] = true;
                    }
                }
            }
        }
    }

    // tables[x] = P(x)(a_{i+1} ... a_n) on the grid
    let mut tables: Vec<Option<Table>> = (0..m.num_states()).map(|_| None).collect();
    for i in (0..n).rev() {
        let a = c.word[i];
        let mut next: Vec<Option<Table>> = (0..m.num_states()).map(|_| None).collect();
        for x in 0..m.num_states() {
            if !layers[i][x] {
                continue;
            }
            let rho = m.residence(x);
            let choose = sch.weight(x, a);
            let values: Vec<f64> = if i + 1 == n {
                let mass: f64 = m.successors(x, a).iter().map(|(_, p)| p).sum::<f64>() * choose;
                grid.iter().map(|&u| mass * rho.cdf(u)).collect()
            } else {
                let succ: Vec<(StateId, f64)> = m
                    .successors(x, a)
                    .iter()
                    .filter(|(_, p)| *p > 0.0 && choose > 0.0)
                    .map(|&(y, p)| (y, choose * p))
                    .collect();
                grid.iter()
                    .map(|&u| {
                        succ.iter()
                            .map(|&(y, w)| {
                                let tab = tables[y].as_ref().expect("successor tabulated");
                                w * convolve_with_table(rho, tab, u)
                            })
                            .sum()
                    })
                    .collect()
            };
            next[x] = Some(Table { h, values });
        }
        tables = next;
    }
    let top = tables[s].as_ref().expect("start state tabulated");
    Ok(top.values[cells].clamp(0.0, 1.0))
}
