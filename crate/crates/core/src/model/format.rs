//! Text formats for models, schedulers and distribution literals.
//!
//! The grammar is documented in `docs/model-format.md`.

use std::fmt::{self, Write as _};

use super::{Scheduler, Smdp, SmdpBuilder};
use crate::dist::{compose_residence, convolve, CompositionOperator, Distribution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

type PResult<T> = std::result::Result<T, ParseError>;

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Whitespace-separated tokens with their 1-based columns (in characters).
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (ci, (bi, ch)) in line.char_indices().enumerate() {
        let sep = ch.is_whitespace() || ch == ',';
        match (start, sep) {
            (None, false) => start = Some((ci, bi)),
            (Some((c0, b0)), true) => {
                out.push((c0 + 1, &line[b0..bi]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some((c0, b0)) = start {
        out.push((c0 + 1, &line[b0..]));
    }
    out
}

fn column_of(line: &str, byte: usize) -> usize {
    line[..byte].chars().count() + 1
}

/// Parses a probability or number: decimal, or a fraction `p/q`.
fn parse_number(tok: &str) -> Option<f64> {
    if let Some((p, q)) = tok.split_once('/') {
        let p: f64 = p.trim().parse().ok()?;
        let q: f64 = q.trim().parse().ok()?;
        if q == 0.0 {
            return None;
        }
        return Some(p / q);
    }
    let v: f64 = tok.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(':')
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Labels,
    States,
    Residence,
    Transitions,
}

/// Parses the model text format. Semantic problems (mass, missing
/// residences, undeclared names) are left to [`super::validate_model`].
pub fn parse_model(text: &str) -> PResult<Smdp> {
    let mut b = SmdpBuilder::new();
    let mut section = Section::None;
    let mut seen_keys: Vec<String> = Vec::new();
    let mut initial: Option<String> = None;
    // (section, line number, line, byte offset of the entry)
    let mut body: Vec<(Section, usize, &str, usize)> = Vec::new();

    // Declarations are processed first so identifiers follow declaration order.
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let lead = line.len() - line.trim_start().len();
        let mut start = lead;
        if let Some(key) = section_key(&line[lead..]) {
            let col = column_of(line, lead);
            if seen_keys.iter().any(|k| k == key) {
                return Err(ParseError::new(lineno, col, format!("duplicate section `{key}`")));
            }
            seen_keys.push(key.to_string());
            start = lead + key.len() + 1;
            section = match key {
                "labels" => Section::Labels,
                "states" => Section::States,
                "residence" => Section::Residence,
                "transitions" => Section::Transitions,
                "initial" => {
                    let toks = tokens(&line[start..]);
                    let off = column_of(line, start) - 1;
                    match toks.as_slice() {
                        [(_, name)] if valid_name(name) => initial = Some(name.to_string()),
                        _ => {
                            return Err(ParseError::new(
                                lineno,
                                off + 1,
                                "`initial:` expects exactly one state name",
                            ))
                        }
                    }
                    section = Section::None;
                    continue;
                }
                other => return Err(ParseError::new(lineno, col, format!("unknown key `{other}`"))),
            };
        }
        let rest = &line[start..];
        if rest.trim().is_empty() {
            continue;
        }
        let offset = column_of(line, start) - 1;
        match section {
            Section::None => {
                return Err(ParseError::new(lineno, offset + 1, "content outside of a section"))
            }
            Section::Labels | Section::States => {
                for (c, name) in tokens(rest) {
                    if !valid_name(name) {
                        return Err(ParseError::new(lineno, offset + c, format!("invalid name `{name}`")));
                    }
                    let labels = section == Section::Labels;
                    let dup = if labels {
                        b.m.label_id(name).map(|i| b.m.label_declared[i])
                    } else {
                        b.m.state_id(name).map(|i| b.m.state_declared[i])
                    };
                    if dup == Ok(true) {
                        return Err(ParseError::new(lineno, offset + c, format!("`{name}` declared twice")));
                    }
                    if labels {
                        b.label(name);
                    } else {
                        b.declare_state(name);
                    }
                }
            }
            Section::Residence | Section::Transitions => body.push((section, lineno, line, start)),
        }
    }

    let iname = initial.ok_or_else(|| ParseError::new(1, 1, "missing `initial:`"))?;
    b.initial(&iname);

    let mut has_residence: Vec<&str> = Vec::new();
    for (section, lineno, line, start) in body {
        let entry = &line[start..];
        let lead = start + (entry.len() - entry.trim_start().len());
        let entry = entry.trim_start();
        match section {
            Section::Residence => {
                let split = entry
                    .find(char::is_whitespace)
                    .ok_or_else(|| ParseError::new(lineno, column_of(line, lead), "expected `state distribution`"))?;
                let name = &entry[..split];
                if !valid_name(name) {
                    return Err(ParseError::new(lineno, column_of(line, lead), format!("invalid name `{name}`")));
                }
                if has_residence.contains(&name) {
                    return Err(ParseError::new(
                        lineno,
                        column_of(line, lead),
                        format!("residence of `{name}` given twice"),
                    ));
                }
                let lit_start = lead + split;
                let d = parse_distribution(&line[lit_start..]).map_err(|e| {
                    ParseError::new(lineno, column_of(line, lit_start) - 1 + e.column, e.message)
                })?;
                has_residence.push(name);
                b.residence(name, d);
            }
            Section::Transitions => {
                let off = column_of(line, start) - 1;
                let toks = tokens(&line[start..]);
                if toks.len() != 4 {
                    return Err(ParseError::new(
                        lineno,
                        off + toks.first().map_or(1, |t| t.0),
                        "expected `from label to probability`",
                    ));
                }
                for &(c, name) in &toks[..3] {
                    if !valid_name(name) {
                        return Err(ParseError::new(lineno, off + c, format!("invalid name `{name}`")));
                    }
                }
                let (pc, ptok) = toks[3];
                let p = parse_number(ptok)
                    .ok_or_else(|| ParseError::new(lineno, off + pc, format!("invalid probability `{ptok}`")))?;
                b.transition(toks[0].1, toks[1].1, toks[2].1, p);
            }
            _ => unreachable!("only entry sections are deferred"),
        }
    }
    Ok(b.build())
}

/// `key` when the line starts with `key:` for an alphabetic key.
fn section_key(line: &str) -> Option<&str> {
    let end = line.find(|c: char| !(c.is_ascii_alphabetic() || c == '_'))?;
    (end > 0 && line[end..].starts_with(':')).then(|| &line[..end])
}

/// Writes `m` in the model text format. `parse_model` inverts it exactly.
pub fn serialize_model(m: &Smdp) -> String {
    let mut s = String::new();
    let declared = |names: &[String], flags: &[bool]| -> Vec<String> {
        names
            .iter()
            .zip(flags)
            .filter(|(_, d)| **d)
            .map(|(n, _)| n.clone())
            .collect()
    };
    let _ = writeln!(s, "labels: {}", declared(&m.labels, &m.label_declared).join(" "));
    let _ = writeln!(s, "states: {}", declared(&m.states, &m.state_declared).join(" "));
    if !m.states.is_empty() {
        let _ = writeln!(s, "initial: {}", m.states[m.initial]);
    }
    let _ = writeln!(s, "residence:");
    for (st, d) in m.states.iter().zip(&m.residence) {
        if let Some(d) = d {
            let _ = writeln!(s, "  {st} {d}");
        }
    }
    let _ = writeln!(s, "transitions:");
    for (si, rows) in m.rows.iter().enumerate() {
        for (a, row) in rows.iter().enumerate() {
            for &(t, p) in row {
                let _ = writeln!(s, "  {} {} {} {}", m.states[si], m.labels[a], m.states[t], p);
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Distribution literals

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(1, column_of(self.src, self.pos), msg)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn eat(&mut self, ch: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(ch) {
            self.pos += ch.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, ch: char) -> PResult<()> {
        if self.eat(ch) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{ch}`")))
        }
    }

    fn ident(&mut self) -> &'a str {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_ascii_alphabetic() {
                self.pos += 1;
            } else {
                break;
            }
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self) -> PResult<f64> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-' | '/') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let tok = &self.src[start..self.pos];
        parse_number(tok).ok_or_else(|| ParseError::new(1, column_of(self.src, start), format!("invalid number `{tok}`")))
    }

    fn distribution(&mut self) -> PResult<Distribution> {
        self.skip_ws();
        let start = self.pos;
        let name = self.ident();
        let at = |msg: String| ParseError::new(1, column_of(self.src, start), msg);
        self.expect('(')?;
        let wrap = |r: crate::error::Result<Distribution>| r.map_err(|e| at(e.to_string()));
        let d = match name {
            "dirac" => wrap(Distribution::dirac(self.number()?))?,
            "exp" => wrap(Distribution::exponential(self.number()?))?,
            "uniform" => {
                let lo = self.number()?;
                self.expect(',')?;
                let hi = self.number()?;
                wrap(Distribution::uniform(lo, hi))?
            }
            "erlang" => {
                let k = self.number()?;
                self.expect(',')?;
                let rate = self.number()?;
                if !(k >= 1.0 && k.fract() == 0.0 && k <= 10_000.0) {
                    return Err(at(format!("erlang shape must be a positive integer, got {k}")));
                }
                wrap(Distribution::phase_type(vec![rate; k as usize]))?
            }
            "phasetype" => {
                let mut rates = vec![self.number()?];
                while self.eat(',') {
                    rates.push(self.number()?);
                }
                wrap(Distribution::phase_type(rates))?
            }
            "shift" => {
                let base = self.distribution()?;
                self.expect(',')?;
                let c = self.number()?;
                wrap(Distribution::shifted(base, c))?
            }
            "conv" => {
                let mut acc = self.distribution()?;
                while self.eat(',') {
                    acc = convolve(&acc, &self.distribution()?);
                }
                acc
            }
            "min" | "max" => {
                let op = if name == "min" {
                    CompositionOperator::Minimum
                } else {
                    CompositionOperator::Maximum
                };
                let l = self.distribution()?;
                self.expect(',')?;
                let r = self.distribution()?;
                wrap(compose_residence(op, &l, &r))?
            }
            "" => return Err(at("expected a distribution".into())),
            other => return Err(at(format!("unknown distribution `{other}`"))),
        };
        self.expect(')')?;
        Ok(d)
    }
}

/// Parses a distribution literal such as `exp(2)` or `shift(uniform(0, 1), 0.5)`.
/// Reported positions are relative to `text` (line 1).
pub fn parse_distribution(text: &str) -> PResult<Distribution> {
    let mut c = Cursor { src: text, pos: 0 };
    let d = c.distribution()?;
    c.skip_ws();
    if c.pos != text.len() {
        return Err(c.err("trailing input after distribution"));
    }
    Ok(d)
}

// ---------------------------------------------------------------------------
// Schedulers

/// Parses `state label weight` lines. States without lines get the uniform
/// distribution; listed states must sum to one.
pub fn parse_scheduler(m: &Smdp, text: &str) -> crate::error::Result<Scheduler> {
    let mut weights: Vec<Option<Vec<f64>>> = vec![None; m.num_states()];
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(raw);
        let toks = tokens(line);
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 3 {
            return Err(ParseError::new(lineno, toks[0].0, "expected `state label weight`").into());
        }
        let s = m
            .state_id(toks[0].1)
            .map_err(|_| ParseError::new(lineno, toks[0].0, format!("unknown state `{}`", toks[0].1)))?;
        let a = m
            .label_id(toks[1].1)
            .map_err(|_| ParseError::new(lineno, toks[1].0, format!("unknown label `{}`", toks[1].1)))?;
        let w = parse_number(toks[2].1)
            .ok_or_else(|| ParseError::new(lineno, toks[2].0, format!("invalid weight `{}`", toks[2].1)))?;
        let row = weights[s].get_or_insert_with(|| vec![0.0; m.num_labels()]);
        row[a] += w;
    }
    let uniform = Scheduler::uniform(m);
    let table = weights
        .into_iter()
        .enumerate()
        .map(|(s, w)| w.unwrap_or_else(|| uniform.row(s).to_vec()))
        .collect();
    Scheduler::from_weights(m, table)
}

/// Writes every positive weight of `sch` as a `state label weight` line.
pub fn serialize_scheduler(m: &Smdp, sch: &Scheduler) -> String {
    let mut s = String::new();
    for st in 0..m.num_states() {
        for a in 0..m.num_labels() {
            let w = sch.weight(st, a);
            if w > 0.0 {
                let _ = writeln!(s, "{} {} {}", m.state_name(st), m.label_name(a), w);
            }
        }
    }
    s
}

impl fmt::Display for Smdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_model(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, Violation};

    const FIG: &str = "\
# chain
labels: a
states: u0 u1 u2
initial: u0
residence:
  u0 exp(2)
  u1 exp(0.5)
  u2 exp(1)
transitions:
  u0 a u1 1
  u1 a u2 1/1
  u2 a u2 1
";

    #[test]
    fn parses_chain() {
        let m = parse_model(FIG).unwrap();
        assert_eq!(m.states(), ["u0", "u1", "u2"]);
        assert!(validate_model(&m).is_empty());
        assert_eq!(m.residence(1), &Distribution::exponential(0.5).unwrap());
    }

    #[test]
    fn round_trip() {
        let m = parse_model(FIG).unwrap();
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn malformed_residence_is_located() {
        let bad = FIG.replace("u1 exp(0.5)", "u1 expo(0.5)");
        let e = parse_model(&bad).unwrap_err();
        assert_eq!(e.line, 7);
        assert_eq!(e.column, 6);
    }

    #[test]
    fn unknown_key_rejected() {
        let bad = FIG.replace("initial: u0", "initial: u0\nrewards: 3");
        let e = parse_model(&bad).unwrap_err();
        assert!(e.message.contains("unknown key"));
        assert_eq!(e.line, 5);
    }

    #[test]
    fn undeclared_target_is_a_violation_not_an_error() {
        let text = FIG.replace("u2 a u2 1", "u2 a u9 1");
        let m = parse_model(&text).unwrap();
        assert!(validate_model(&m).contains(&Violation::DanglingState { name: "u9".into() }));
    }

    #[test]
    fn literals() {
        let d = parse_distribution("conv(exp(2), exp(0.5), dirac(1))").unwrap();
        assert_eq!(d.to_string(), "shift(phasetype(0.5, 2), 1)");
        assert_eq!(parse_distribution(&d.to_string()).unwrap(), d);
        assert_eq!(
            parse_distribution("erlang(2, 2)").unwrap(),
            Distribution::phase_type(vec![2.0, 2.0]).unwrap()
        );
        let e = parse_distribution("uniform(2, 1)").unwrap_err();
        assert_eq!(e.column, 1);
        assert!(parse_distribution("exp(1) x").is_err());
    }

    #[test]
    fn scheduler_defaults_to_uniform() {
        let text = "labels: a b\nstates: s t\ninitial: s\nresidence:\n  s exp(1)\n  t exp(1)\ntransitions:\n  s a t 1\n";
        let m = parse_model(text).unwrap();
        let sch = parse_scheduler(&m, "s a 1\n").unwrap();
        assert_eq!(sch.row(0), [1.0, 0.0]);
        assert_eq!(sch.row(1), [0.5, 0.5]);
        assert!(parse_scheduler(&m, "s a 0.3\n").is_err());
    }
}
