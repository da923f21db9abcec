//! Discrete-event simulation of SMDPs under a memoryless scheduler.
//!
//! Randomness comes from ChaCha8. Sample `k` of an estimate belongs to chunk
//! `k / CHUNK`, and chunk `c` draws from stream `c` of the generator seeded
//! with the user seed, so results do not depend on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::check_inputs;
use crate::dist::{Distribution, Extremum};
use crate::error::{Error, Result};
use crate::model::{LabelId, Scheduler, Smdp, StateId};

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_901;

const CHUNK: usize = 1 << 16;
const BISECT_WIDTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimedStep {
    pub label: LabelId,
    /// Time spent in the state left by this step.
    pub sojourn: f64,
    /// State entered by this step.
    pub state: StateId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimedPath {
    pub start: StateId,
    pub steps: Vec<TimedStep>,
}

impl TimedPath {
    pub fn total_time(&self) -> f64 {
        self.steps.iter().map(|s| s.sojourn).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "path", rename_all = "snake_case")]
pub enum SampledPath {
    Complete(TimedPath),
    /// The run stopped early: no successor was drawn after the last step.
    Deadlock(TimedPath),
}

impl SampledPath {
    pub fn path(&self) -> &TimedPath {
        match self {
            SampledPath::Complete(p) | SampledPath::Deadlock(p) => p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    /// Half-width of the 99% normal-approximation confidence interval.
    pub half_width: f64,
    pub hits: u64,
    pub samples: u64,
}

impl Estimate {
    pub fn contains(&self, p: f64) -> bool {
        (p - self.estimate).abs() <= self.half_width
    }
}

fn pick(rng: &mut ChaCha8Rng, weights: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut r: f64 = rng.random();
    for (k, w) in weights {
        if r < w {
            return Some(k);
        }
        r -= w;
    }
    None
}

/// One step from `s`: label, successor and sojourn, or `None` on deadlock.
fn step(m: &Smdp, sch: &Scheduler, s: StateId, rng: &mut ChaCha8Rng) -> Option<TimedStep> {
    let label = pick(rng, sch.row(s).iter().copied().enumerate())?;
    let state = pick(rng, m.successors(s, label).iter().copied())?;
    let sojourn = sample(m.residence(s), rng);
    Some(TimedStep { label, sojourn, state })
}

/// Draws a path of `len` steps from the initial state.
pub fn sample_path(m: &Smdp, sch: &Scheduler, len: usize, seed: u64) -> Result<SampledPath> {
    check_inputs(m, sch, m.initial(), &[])?;
    if len == 0 {
        return Err(Error::InvalidArgument("path length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut path = TimedPath {
        start: m.initial(),
        steps: Vec::with_capacity(len),
    };
    let mut s = m.initial();
    while path.steps.len() < len {
        match step(m, sch, s, &mut rng) {
            Some(st) => {
                s = st.state;
                path.steps.push(st);
            }
            None => return Ok(SampledPath::Deadlock(path)),
        }
    }
    Ok(SampledPath::Complete(path))
}

/// Fraction of runs whose first `word.len()` labels are `word` and whose
/// sojourns in the first `word.len()` states sum to at most `t`.
pub fn estimate_cylinder(
    m: &Smdp,
    sch: &Scheduler,
    word: &[LabelId],
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    check_inputs(m, sch, m.initial(), word)?;
    if samples < 1000 {
        return Err(Error::InvalidArgument("at least 1000 samples are required".into()));
    }
    if word.is_empty() || !(t >= 0.0) {
        return Err(Error::InvalidArgument("need a nonempty word and a time bound >= 0".into()));
    }
    let chunks = (samples as usize).div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(samples as usize - c * CHUNK);
            (0..n).filter(|_| run_matches(m, sch, word, t, &mut rng)).count() as u64
        })
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(Estimate {
        estimate: p,
        half_width: Z99 * (p * (1.0 - p) / samples as f64).sqrt(),
        hits,
        samples,
    })
}

fn run_matches(m: &Smdp, sch: &Scheduler, word: &[LabelId], t: f64, rng: &mut ChaCha8Rng) -> bool {
    let mut s = m.initial();
    let mut elapsed = 0.0;
    for &a in word {
        match step(m, sch, s, rng) {
            Some(st) if st.label == a => {
                elapsed += st.sojourn;
                s = st.state;
            }
            _ => return false,
        }
    }
    elapsed <= t
}

/// One draw from `d`.
pub fn sample(d: &Distribution, rng: &mut impl Rng) -> f64 {
    match d {
        Distribution::PhaseType(rates) => rates.iter().map(|r| exp_quantile(*r, rng.random())).sum(),
        Distribution::NumericConvolution(factors) => factors.iter().map(|f| sample(f, rng)).sum(),
        Distribution::Shifted { base, shift } => shift + sample(base, rng),
        _ => quantile(d, rng.random()),
    }
}

fn exp_quantile(rate: f64, u: f64) -> f64 {
    -(1.0 - u).ln() / rate
}

/// Smallest `t` with `F(t) >= u`, for `u` in `[0, 1)`.
pub fn quantile(d: &Distribution, u: f64) -> f64 {
    match d {
        Distribution::Dirac(c) => *c,
        Distribution::Exponential(r) => exp_quantile(*r, u),
        Distribution::Uniform { lo, hi } => lo + u * (hi - lo),
        Distribution::Shifted { base, shift } => shift + quantile(base, u),
        // F = min(F1, F2) reaches u once both do; F = max(F1, F2) once either does.
        Distribution::MinMaxCdf { op, left, right } => {
            let (a, b) = (quantile(left, u), quantile(right, u));
            match op {
                Extremum::Min => a.max(b),
                Extremum::Max => a.min(b),
            }
        }
        Distribution::PhaseType(_) | Distribution::NumericConvolution(_) => {
            let mut hi = 1.0;
            while d.cdf(hi) < u {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            while hi - lo > BISECT_WIDTH {
                let mid = 0.5 * (lo + hi);
                if d.cdf(mid) >= u {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        }
    }
}
