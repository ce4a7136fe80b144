//! CPLEX-LP text reader and writer.
//!
//! Variables are named `b<id>`. Fractional constraint coefficients are
//! scaled to integers on output. Constraint names carry the provenance tag
//! so that a written problem reads back with the same provenance.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{Signed, Zero};

use super::LpProblem;
use crate::constraints::{ConstraintKind, LinearConstraint, Provenance};
use crate::error::{Error, Result};

const PROVENANCES: [Provenance; 9] = [
    Provenance::IntraEqual,
    Provenance::IntraSubtree,
    Provenance::Triangle,
    Provenance::BandLo,
    Provenance::BandHi,
    Provenance::FreezeSep,
    Provenance::FreezeMerge,
    Provenance::Cycle,
    Provenance::Other,
];

fn name_tag(p: Provenance) -> String {
    p.tag().replace('-', "_")
}

pub fn write_lp(p: &LpProblem) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj:");
    for (j, q) in p.objective.iter().enumerate() {
        if *q != 0.0 {
            let sign = if q.is_sign_negative() { '-' } else { '+' };
            let _ = write!(out, " {sign} {} b{j}", q.abs());
        }
    }
    out.push_str("\nSubject To\n");
    for (i, c) in p.constraints.iter().enumerate() {
        let scale = c
            .terms
            .iter()
            .fold(*c.rhs.denom(), |l, (_, a)| l.lcm(a.denom()));
        let _ = write!(out, " {}_{i}:", name_tag(c.provenance));
        for (v, a) in &c.terms {
            let a = *a * scale;
            let sign = if a.is_negative() { '-' } else { '+' };
            let _ = write!(out, " {sign} {} b{v}", a.abs().to_integer());
        }
        if c.terms.is_empty() {
            out.push_str(" 0 b0");
        }
        let op = match c.kind {
            ConstraintKind::Equal => "=",
            ConstraintKind::LessEqual => "<=",
        };
        let _ = writeln!(out, " {op} {}", (c.rhs * scale).to_integer());
    }
    out.push_str("Bounds\n");
    for j in 0..p.var_count() {
        match p.fixed.get(&j) {
            Some(v) => {
                let _ = writeln!(out, " b{j} = {v}");
            }
            None => {
                let _ = writeln!(out, " 0 <= b{j} <= 1");
            }
        }
    }
    out.push_str("Binary\n");
    for j in 0..p.var_count() {
        let _ = writeln!(out, " b{j}");
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "minimize" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn var_id(token: &str) -> Result<usize> {
    token
        .strip_prefix('b')
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::format("variable", format!("expected b<id>, got `{token}`")))
}

fn parse_ratio(token: &str) -> Result<Rational64> {
    let bad = || Error::format("coefficient", format!("cannot parse `{token}`"));
    let (int, frac) = token.split_once('.').unwrap_or((token, ""));
    let digits = format!("{int}{frac}");
    let numer: i64 = digits.parse().map_err(|_| bad())?;
    let denom = 10i64.checked_pow(frac.len() as u32).ok_or_else(bad)?;
    Ok(Rational64::new(numer, denom))
}

fn parse_signed(token: &str) -> Result<Rational64> {
    let t = token.trim();
    match t.strip_prefix('-') {
        Some(rest) => Ok(-parse_ratio(rest.trim())?),
        None => parse_ratio(t.trim_start_matches('+').trim()),
    }
}

/// Splits `+ 2 b1 - b3` into `(coefficient token, variable)` pairs.
fn linear_terms(expr: &str) -> Result<Vec<(String, usize)>> {
    let spaced = expr.replace('+', " + ").replace('-', " - ");
    let mut out = Vec::new();
    let mut sign = "";
    let mut coef: Option<String> = None;
    for tok in spaced.split_whitespace() {
        match tok {
            "+" => sign = "",
            "-" => sign = "-",
            t if t.starts_with('b') => {
                let c = coef.take().unwrap_or_else(|| "1".into());
                out.push((format!("{sign}{c}"), var_id(t)?));
                sign = "";
            }
            t => coef = Some(t.to_string()),
        }
    }
    if coef.is_some() {
        return Err(Error::format("expression", format!("dangling constant in `{expr}`")));
    }
    Ok(out)
}

pub fn read_lp(text: &str) -> Result<LpProblem> {
    let mut section = Section::Preamble;
    let mut objective_text = String::new();
    let mut constraint_lines: Vec<String> = Vec::new();
    let mut pending = String::new();
    let mut bounds: Vec<String> = Vec::new();
    let mut binaries: Vec<usize> = Vec::new();
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            section = s;
            continue;
        }
        match section {
            Section::Preamble | Section::End => {
                return Err(Error::format("section", format!("unexpected line `{line}`")))
            }
            Section::Objective => {
                objective_text.push(' ');
                objective_text.push_str(line);
            }
            Section::Constraints => {
                pending.push(' ');
                pending.push_str(line);
                if pending.contains(['<', '>', '=']) {
                    constraint_lines.push(std::mem::take(&mut pending));
                }
            }
            Section::Bounds => bounds.push(line.to_string()),
            Section::Binary => {
                for t in line.split_whitespace() {
                    binaries.push(var_id(t)?);
                }
            }
        }
    }
    if !pending.trim().is_empty() {
        return Err(Error::format("constraint", "missing relational operator"));
    }

    let mut max_var: Option<usize> = binaries.iter().copied().max();
    let mut bump = |v: usize| max_var = Some(max_var.map_or(v, |m| m.max(v)));

    let obj_expr = objective_text
        .split_once(':')
        .map_or(objective_text.as_str(), |(_, e)| e);
    let mut objective: BTreeMap<usize, f64> = BTreeMap::new();
    for (c, v) in linear_terms(obj_expr)? {
        let q: f64 = c
            .parse()
            .map_err(|_| Error::format("objective", format!("cannot parse `{c}`")))?;
        *objective.entry(v).or_insert(0.0) += q;
        bump(v);
    }

    let mut constraints = Vec::new();
    for line in constraint_lines {
        let (name, body) = match line.split_once(':') {
            Some((n, b)) => (n.trim().to_string(), b.to_string()),
            None => (String::new(), line.clone()),
        };
        let provenance = name
            .rsplit_once('_')
            .and_then(|(tag, _)| PROVENANCES.into_iter().find(|p| name_tag(*p) == tag))
            .unwrap_or(Provenance::Other);
        let (op, pos) = ["<=", ">=", "=<", "=>", "<", ">", "="]
            .iter()
            .find_map(|op| body.find(op).map(|pos| (*op, pos)))
            .ok_or_else(|| Error::format("constraint", format!("no operator in `{line}`")))?;
        let lhs = &body[..pos];
        let rhs = parse_signed(&body[pos + op.len()..])?;
        let mut terms = Vec::new();
        for (c, v) in linear_terms(lhs)? {
            terms.push((v, parse_signed(&c)?));
            bump(v);
        }
        let (kind, negate) = match op {
            "=" => (ConstraintKind::Equal, false),
            "<=" | "=<" | "<" => (ConstraintKind::LessEqual, false),
            _ => (ConstraintKind::LessEqual, true),
        };
        let sign = Rational64::from_integer(if negate { -1 } else { 1 });
        let c = LinearConstraint::new(
            kind,
            terms.into_iter().map(|(v, a)| (v, a * sign)),
            rhs * sign,
            provenance,
        );
        constraints.push(c);
    }

    let mut fixed = BTreeMap::new();
    for b in &bounds {
        let toks: Vec<&str> = b.split_whitespace().collect();
        match toks.as_slice() {
            [v, "=", x] => {
                let id = var_id(v)?;
                bump(id);
                let x = parse_ratio(x)?;
                if x != Rational64::zero() && x != Rational64::from_integer(1) {
                    return Err(Error::format("bounds", format!("non-binary fixing `{b}`")));
                }
                fixed.insert(id, x.to_integer() as u8);
            }
            [lo, "<=", v, "<=", hi] => {
                bump(var_id(v)?);
                if parse_ratio(lo)? != Rational64::zero() || parse_ratio(hi)? != Rational64::from_integer(1) {
                    return Err(Error::format("bounds", format!("only [0, 1] bounds supported: `{b}`")));
                }
            }
            _ => return Err(Error::format("bounds", format!("cannot parse `{b}`"))),
        }
    }

    let n = max_var.map_or(0, |m| m + 1);
    let mut obj = vec![0.0; n];
    for (v, q) in objective {
        obj[v] = q;
    }
    Ok(LpProblem {
        objective: obj,
        constraints,
        fixed,
    })
}
