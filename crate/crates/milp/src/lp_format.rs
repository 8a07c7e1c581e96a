//! Reader and writer for a subset of the CPLEX LP text format.
//!
//! The writer is deterministic: columns appear in the `Bounds` section in
//! model order with both bounds spelled out, so [`parse_lp_format`] rebuilds
//! the identical model (same column order, same coefficients, same row
//! order). Numbers are written with [`Scalar::to_number_string`], which for
//! exact rationals is a terminating decimal or a `p/q` fraction.

use std::collections::HashMap;
use std::fmt::Write;

use crate::error::LpParseError;
use crate::model::{Column, MilpModel, Row, RowSense, VarKind};
use crate::scalar::Scalar;

const WRAP: usize = 78;

struct Wrapper {
    out: String,
    line_len: usize,
}

impl Wrapper {
    fn new() -> Self {
        Wrapper { out: String::new(), line_len: 0 }
    }

    fn start(&mut self, text: &str) {
        self.out.push(' ');
        self.out.push_str(text);
        self.line_len = text.len() + 1;
    }

    fn push(&mut self, chunk: &str) {
        if self.line_len + chunk.len() + 1 > WRAP && self.line_len > 4 {
            self.out.push_str("\n   ");
            self.line_len = 3;
        }
        self.out.push(' ');
        self.out.push_str(chunk);
        self.line_len += chunk.len() + 1;
    }

    fn end(&mut self) {
        self.out.push('\n');
        self.line_len = 0;
    }
}

fn term<T: Scalar>(coef: &T, name: &str, first: bool) -> String {
    let (sign, magnitude) = if coef.is_negative() { ("-", -coef.clone()) } else { ("+", coef.clone()) };
    let number = magnitude.to_number_string();
    if first && sign == "+" {
        format!("{number} {name}")
    } else {
        format!("{sign} {number} {name}")
    }
}

fn bound_text<T: Scalar>(v: &Option<T>, lower: bool) -> String {
    match v {
        Some(x) => x.to_number_string(),
        None if lower => "-inf".to_string(),
        None => "+inf".to_string(),
    }
}

/// Renders `model` as LP text.
pub fn export_lp_format<T: Scalar>(model: &MilpModel<T>) -> String {
    let mut w = Wrapper::new();
    let _ = writeln!(w.out, "\\ Problem: {}", model.name);
    w.out.push_str("Minimize\n");
    w.start("obj:");
    let mut first = true;
    for c in &model.columns {
        if !c.objective.is_zero() {
            w.push(&term(&c.objective, &c.name, first));
            first = false;
        }
    }
    w.end();
    w.out.push_str("Subject To\n");
    for r in &model.rows {
        w.start(&format!("{}:", r.name));
        for (k, (j, a)) in r.coefficients.iter().enumerate() {
            w.push(&term(a, &model.columns[*j].name, k == 0));
        }
        w.push(&format!("{} {}", r.sense, r.rhs.to_number_string()));
        w.end();
    }
    w.out.push_str("Bounds\n");
    for c in &model.columns {
        if c.lower.is_none() && c.upper.is_none() {
            let _ = writeln!(w.out, " {} free", c.name);
        } else {
            let _ = writeln!(w.out, " {} <= {} <= {}", bound_text(&c.lower, true), c.name, bound_text(&c.upper, false));
        }
    }
    for (header, kind) in [("General", VarKind::Integer), ("Binary", VarKind::Binary)] {
        let names: Vec<&str> = model.columns.iter().filter(|c| c.kind == kind).map(|c| c.name.as_str()).collect();
        if names.is_empty() {
            continue;
        }
        w.out.push_str(header);
        w.out.push('\n');
        w.start(names[0]);
        for n in &names[1..] {
            w.push(n);
        }
        w.end();
    }
    w.out.push_str("End\n");
    w.out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    General,
    Binary,
    End,
}

fn section_of(line: &str) -> Option<Result<Section, String>> {
    let lower = line.trim().to_ascii_lowercase();
    let lower = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(Ok(match lower.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Section::Objective,
        "maximize" | "maximise" | "maximum" | "max" => {
            return Some(Err("maximisation is not supported; negate the objective".into()))
        }
        "subject to" | "such that" | "st" | "s.t." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "general" | "generals" | "gen" => Section::General,
        "binary" | "binaries" | "bin" => Section::Binary,
        "end" => Section::End,
        _ => return None,
    }))
}

fn is_identifier(tok: &str) -> bool {
    let mut chars = tok.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && tok.chars().all(|c| c.is_ascii_alphanumeric() || "_.[]#$%&~@!'".contains(c))
}

fn parse_sense(tok: &str) -> Option<RowSense> {
    match tok {
        "<=" | "=<" | "<" => Some(RowSense::Le),
        ">=" | "=>" | ">" => Some(RowSense::Ge),
        "=" => Some(RowSense::Eq),
        _ => None,
    }
}

fn parse_bound_value<T: Scalar>(tok: &str, line: usize) -> Result<Option<T>, LpParseError> {
    match tok.to_ascii_lowercase().as_str() {
        "-inf" | "-infinity" | "+inf" | "+infinity" | "inf" | "infinity" => Ok(None),
        _ => T::parse_number(tok)
            .map(Some)
            .ok_or_else(|| LpParseError::new(line, format!("bad number `{tok}`"))),
    }
}

struct Builder<T> {
    order: Vec<String>,
    index: HashMap<String, usize>,
    bounds: HashMap<usize, (Option<T>, Option<T>)>,
    kinds: HashMap<usize, VarKind>,
    objective: HashMap<usize, T>,
    rows: Vec<Row<T>>,
}

impl<T: Scalar> Builder<T> {
    fn column(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        self.order.push(name.to_string());
        self.index.insert(name.to_string(), self.order.len() - 1);
        self.order.len() - 1
    }
}

/// Parses terms `[+|-] [number] name ...` until a sense token. Returns the
/// terms and the position of the first token that is not part of a term.
fn parse_terms<T: Scalar>(
    toks: &[(usize, String)],
    mut pos: usize,
    b: &mut Builder<T>,
) -> Result<(Vec<(usize, T)>, usize), LpParseError> {
    let mut terms = Vec::new();
    let mut negative = false;
    let mut coef: Option<T> = None;
    let mut pending = false;
    while pos < toks.len() {
        let (line, tok) = &toks[pos];
        if parse_sense(tok).is_some() || tok.ends_with(':') {
            break;
        }
        if tok == "+" || tok == "-" {
            if coef.is_some() {
                return Err(LpParseError::new(*line, "sign after coefficient"));
            }
            negative ^= tok == "-";
            pending = true;
        } else if is_identifier(tok) {
            let j = b.column(tok);
            let c = coef.take().unwrap_or_else(T::one);
            terms.push((j, if negative { -c } else { c }));
            negative = false;
            pending = false;
        } else if let Some(v) = T::parse_number(tok) {
            if coef.is_some() {
                return Err(LpParseError::new(*line, format!("two coefficients in a row near `{tok}`")));
            }
            coef = Some(v);
            pending = true;
        } else {
            return Err(LpParseError::new(*line, format!("unexpected token `{tok}`")));
        }
        pos += 1;
    }
    if pending {
        let line = toks.get(pos.saturating_sub(1)).map_or(0, |t| t.0);
        return Err(LpParseError::new(line, "dangling coefficient or sign"));
    }
    Ok((terms, pos))
}

/// Parses LP text into a model. Columns are ordered by their first
/// appearance in `Bounds`, then by first appearance elsewhere.
pub fn parse_lp_format<T: Scalar>(text: &str) -> Result<MilpModel<T>, LpParseError> {
    let mut name = String::from("model");
    let mut section = Section::Preamble;
    let mut objective_toks: Vec<(usize, String)> = Vec::new();
    let mut constraint_toks: Vec<(usize, String)> = Vec::new();
    let mut bound_lines: Vec<(usize, String)> = Vec::new();
    let mut general: Vec<(usize, String)> = Vec::new();
    let mut binary: Vec<(usize, String)> = Vec::new();
    let mut saw_objective = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix('\\') {
            if let Some(n) = rest.trim().strip_prefix("Problem:") {
                name = n.trim().to_string();
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        if let Some(s) = section_of(trimmed) {
            section = s.map_err(|m| LpParseError::new(line_no, m))?;
            saw_objective |= section == Section::Objective;
            continue;
        }
        let toks = trimmed.split_whitespace().map(|t| (line_no, t.to_string()));
        match section {
            Section::Preamble => return Err(LpParseError::new(line_no, "expected `Minimize`")),
            Section::Objective => objective_toks.extend(toks),
            Section::Constraints => constraint_toks.extend(toks),
            Section::Bounds => bound_lines.push((line_no, trimmed.to_string())),
            Section::General => general.extend(toks),
            Section::Binary => binary.extend(toks),
            Section::End => return Err(LpParseError::new(line_no, "text after `End`")),
        }
    }
    if !saw_objective {
        return Err(LpParseError::new(1, "missing `Minimize` section"));
    }
    if section != Section::End {
        return Err(LpParseError::new(text.lines().count(), "missing `End`"));
    }

    let mut b = Builder {
        order: Vec::new(),
        index: HashMap::new(),
        bounds: HashMap::new(),
        kinds: HashMap::new(),
        objective: HashMap::new(),
        rows: Vec::new(),
    };

    // Bounds first so that they fix the column order.
    for (line, text) in &bound_lines {
        let toks: Vec<&str> = text.split_whitespace().collect();
        match toks.as_slice() {
            [n, free] if free.eq_ignore_ascii_case("free") && is_identifier(n) => {
                let j = b.column(n);
                b.bounds.insert(j, (None, None));
            }
            [lo, s1, n, s2, hi] if is_identifier(n) => {
                let (Some(RowSense::Le), Some(RowSense::Le)) = (parse_sense(s1), parse_sense(s2)) else {
                    return Err(LpParseError::new(*line, "expected `lo <= name <= hi`"));
                };
                let lo = parse_bound_value::<T>(lo, *line)?;
                let hi = parse_bound_value::<T>(hi, *line)?;
                let j = b.column(n);
                b.bounds.insert(j, (lo, hi));
            }
            [n, s, v] if is_identifier(n) => {
                let sense = parse_sense(s).ok_or_else(|| LpParseError::new(*line, format!("bad sense `{s}`")))?;
                let v = parse_bound_value::<T>(v, *line)?;
                let j = b.column(n);
                let entry = b.bounds.entry(j).or_insert((Some(T::zero()), None));
                match sense {
                    RowSense::Le => entry.1 = v,
                    RowSense::Ge => entry.0 = v,
                    RowSense::Eq => *entry = (v.clone(), v),
                }
            }
            [v, s, n] if is_identifier(n) => {
                let sense = parse_sense(s).ok_or_else(|| LpParseError::new(*line, format!("bad sense `{s}`")))?;
                let v = parse_bound_value::<T>(v, *line)?;
                let j = b.column(n);
                let entry = b.bounds.entry(j).or_insert((Some(T::zero()), None));
                match sense {
                    RowSense::Le => entry.0 = v,
                    RowSense::Ge => entry.1 = v,
                    RowSense::Eq => *entry = (v.clone(), v),
                }
            }
            _ => return Err(LpParseError::new(*line, format!("cannot read bound `{text}`"))),
        }
    }

    let mut pos = 0;
    if let Some((_, t)) = objective_toks.first() {
        if t.ends_with(':') {
            pos = 1;
        }
    }
    let (terms, end) = parse_terms(&objective_toks, pos, &mut b)?;
    if end != objective_toks.len() {
        return Err(LpParseError::new(objective_toks[end].0, "unexpected token in objective"));
    }
    for (j, c) in terms {
        if b.objective.insert(j, c).is_some() {
            return Err(LpParseError::new(objective_toks[0].0, format!("column `{}` repeated in objective", b.order[j])));
        }
    }

    let mut pos = 0;
    let mut counter = 0usize;
    while pos < constraint_toks.len() {
        let (line, tok) = &constraint_toks[pos];
        let row_name = if let Some(n) = tok.strip_suffix(':') {
            pos += 1;
            n.to_string()
        } else {
            counter += 1;
            format!("R{counter}")
        };
        let (terms, next) = parse_terms(&constraint_toks, pos, &mut b)?;
        let Some((_, sense_tok)) = constraint_toks.get(next) else {
            return Err(LpParseError::new(*line, format!("row `{row_name}` has no sense")));
        };
        let sense = parse_sense(sense_tok)
            .ok_or_else(|| LpParseError::new(*line, format!("row `{row_name}` has no sense")))?;
        let Some((rl, rhs_tok)) = constraint_toks.get(next + 1) else {
            return Err(LpParseError::new(*line, format!("row `{row_name}` has no right-hand side")));
        };
        let rhs = T::parse_number(rhs_tok).ok_or_else(|| LpParseError::new(*rl, format!("bad number `{rhs_tok}`")))?;
        b.rows.push(Row::new(row_name, terms, sense, rhs));
        pos = next + 2;
    }

    for (toks, kind) in [(&general, VarKind::Integer), (&binary, VarKind::Binary)] {
        for (line, n) in toks {
            if !is_identifier(n) {
                return Err(LpParseError::new(*line, format!("bad column name `{n}`")));
            }
            let j = b.column(n);
            b.kinds.insert(j, kind);
        }
    }

    let mut model = MilpModel::new(name);
    for (j, n) in b.order.iter().enumerate() {
        let kind = b.kinds.get(&j).copied().unwrap_or(VarKind::Continuous);
        let (lower, upper) = match b.bounds.get(&j) {
            Some(bounds) => bounds.clone(),
            None if kind == VarKind::Binary => (Some(T::zero()), Some(T::one())),
            None => (Some(T::zero()), None),
        };
        model.columns.push(Column {
            name: n.clone(),
            lower,
            upper,
            kind,
            objective: b.objective.get(&j).cloned().unwrap_or_else(T::zero),
        });
    }
    model.rows = b.rows;
    model
        .validate()
        .map_err(|e| LpParseError::new(0, e.to_string()))?;
    Ok(model)
}
