//! Line-oriented system description.
//!
//! ```text
//! # comment
//! players: 3
//! facilities: 5
//! actions 1:
//!   1 2 3
//!   3 4 5
//! actions 2:
//!   ...
//! perf:
//!   33 27 24 ...          # canonical order, or `1 1 2 = 27` per profile
//! xi:
//!   0.5 0 0.5             # one row per facility, n columns
//! constraints:
//!   1 0 0 0 0 < 3         # m coefficients, then `< threshold`
//! fixed:
//!   1: 11 2 4             # facility: n costs
//! ```
//!
//! A header is a line whose key starts with a letter and ends in `:`.
//! Facility, player, and action numbers are 1-based. An empty action is written `-`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use fbs::design::Constraint;
use fbs::{CostMatrix, FbsModel, PerfTable};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `{0}`")]
    Missing(&'static str),
    #[error("invalid system: {0}")]
    Model(#[from] fbs::Error),
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemDocument {
    pub model: FbsModel,
    pub perf: Option<PerfTable>,
    pub xi: Option<CostMatrix>,
    pub constraints: Vec<Constraint>,
    /// 0-based facility → cost row.
    pub fixed: BTreeMap<usize, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Section {
    Actions(usize),
    Perf,
    Xi,
    Constraints,
    Fixed,
}

/// `(line, content)` pairs under one header.
type Rows = Vec<(usize, String)>;

#[derive(Default)]
struct Raw {
    players: Option<usize>,
    facilities: Option<usize>,
    blocks: Vec<(Section, usize, Rows)>,
}

fn parse_usize(s: &str, line: usize, what: &str) -> Result<usize, ParseError> {
    s.trim().parse().map_err(|_| {
        syntax(
            line,
            format!(
                "{what}: expected a non-negative integer, got `{}`",
                s.trim()
            ),
        )
    })
}

fn parse_real(s: &str, line: usize) -> Result<f64, ParseError> {
    let x: f64 = s
        .parse()
        .map_err(|_| syntax(line, format!("expected a number, got `{s}`")))?;
    if !x.is_finite() {
        return Err(syntax(line, format!("non-finite number `{s}`")));
    }
    Ok(x)
}

fn parse_reals(s: &str, line: usize) -> Result<Vec<f64>, ParseError> {
    s.split_whitespace().map(|t| parse_real(t, line)).collect()
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a).trim()
}

fn header(line: &str) -> Option<(&str, &str)> {
    let (key, rest) = line.split_once(':')?;
    let key = key.trim();
    key.chars()
        .next()
        .filter(char::is_ascii_alphabetic)
        .map(|_| (key, rest.trim()))
}

fn tokenize(text: &str) -> Result<Raw, ParseError> {
    let mut raw = Raw::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = strip_comment(line);
        if line.is_empty() {
            continue;
        }
        if let Some((key, rest)) = header(line) {
            let section = match key {
                "players" | "facilities" => {
                    let v = parse_usize(rest, lineno, key)?;
                    let slot = if key == "players" {
                        &mut raw.players
                    } else {
                        &mut raw.facilities
                    };
                    if slot.replace(v).is_some() {
                        return Err(syntax(lineno, format!("`{key}` given twice")));
                    }
                    continue;
                }
                "perf" => Section::Perf,
                "xi" => Section::Xi,
                "constraints" => Section::Constraints,
                "fixed" => Section::Fixed,
                k => match k.strip_prefix("actions") {
                    Some(num) if num.starts_with(char::is_whitespace) => {
                        let p = parse_usize(num, lineno, "player number")?;
                        if p == 0 {
                            return Err(syntax(lineno, "player numbers start at 1"));
                        }
                        Section::Actions(p - 1)
                    }
                    _ => return Err(syntax(lineno, format!("unknown key `{k}`"))),
                },
            };
            if !rest.is_empty() {
                return Err(syntax(
                    lineno,
                    format!("`{key}:` starts a block; put its rows on the following lines"),
                ));
            }
            if raw.blocks.iter().any(|(s, _, _)| *s == section) {
                return Err(syntax(lineno, format!("block `{key}` given twice")));
            }
            raw.blocks.push((section, lineno, Vec::new()));
        } else {
            match raw.blocks.last_mut() {
                Some((_, _, rows)) => rows.push((lineno, line.to_string())),
                None => return Err(syntax(lineno, "row outside of any block")),
            }
        }
    }
    Ok(raw)
}

fn parse_action(row: &str, line: usize) -> Result<Vec<usize>, ParseError> {
    if row == "-" {
        return Ok(Vec::new());
    }
    row.split_whitespace()
        .map(|t| {
            let f = parse_usize(t, line, "facility")?;
            if f == 0 {
                return Err(syntax(line, "facility numbers start at 1"));
            }
            Ok(f - 1)
        })
        .collect()
}

/// Rows of a `fixed` block: `facility: n costs`.
fn parse_fixed_rows(rows: &[(usize, String)]) -> Result<BTreeMap<usize, Vec<f64>>, ParseError> {
    let mut out = BTreeMap::new();
    for (line, row) in rows {
        let (fac, costs) = row
            .split_once(':')
            .ok_or_else(|| syntax(*line, "expected `facility: costs…`"))?;
        let f = parse_usize(fac, *line, "facility")?;
        if f == 0 {
            return Err(syntax(*line, "facility numbers start at 1"));
        }
        if out.insert(f - 1, parse_reals(costs, *line)?).is_some() {
            return Err(syntax(*line, format!("facility {f} fixed twice")));
        }
    }
    Ok(out)
}

/// Parses a standalone fixed-costs file (rows as in a `fixed:` block, the header optional).
pub fn parse_fixed(text: &str) -> Result<BTreeMap<usize, Vec<f64>>, ParseError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = strip_comment(line);
        if line.is_empty() || (rows.is_empty() && line == "fixed:") {
            continue;
        }
        rows.push((i + 1, line.to_string()));
    }
    parse_fixed_rows(&rows)
}

fn parse_perf(
    model: &FbsModel,
    rows: &[(usize, String)],
    header_line: usize,
) -> Result<PerfTable, ParseError> {
    let ell = model.profile_count();
    if rows.iter().any(|(_, r)| r.contains('=')) {
        let mut values = vec![None; ell];
        for (line, row) in rows {
            let (tuple, value) = row
                .split_once('=')
                .ok_or_else(|| syntax(*line, "expected `choices = value`"))?;
            let choices = tuple
                .split_whitespace()
                .map(|t| {
                    parse_usize(t, *line, "action").and_then(|a| {
                        a.checked_sub(1)
                            .ok_or_else(|| syntax(*line, "action numbers start at 1"))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let k = model
                .rank(&choices)
                .map_err(|e| syntax(*line, e.to_string()))?;
            if values[k]
                .replace(parse_real(value.trim(), *line)?)
                .is_some()
            {
                return Err(syntax(*line, "profile listed twice"));
            }
        }
        let values: Option<Vec<f64>> = values.into_iter().collect();
        let values =
            values.ok_or_else(|| syntax(header_line, "perf map does not cover every profile"))?;
        Ok(PerfTable::new(values)?)
    } else {
        let mut values = Vec::new();
        for (line, row) in rows {
            values.extend(parse_reals(row, *line)?);
        }
        if values.len() != ell {
            return Err(syntax(
                header_line,
                format!(
                    "perf has {} values, the system has {ell} profiles",
                    values.len()
                ),
            ));
        }
        Ok(PerfTable::new(values)?)
    }
}

fn parse_constraint(row: &str, line: usize, m: usize) -> Result<Constraint, ParseError> {
    let (lhs, rhs) = row
        .split_once('<')
        .ok_or_else(|| syntax(line, "expected `coefficients < threshold`"))?;
    let coeffs = parse_reals(lhs, line)?;
    if coeffs.len() != m {
        return Err(syntax(
            line,
            format!("expected {m} coefficients, got {}", coeffs.len()),
        ));
    }
    Ok(Constraint::new(coeffs, parse_real(rhs.trim(), line)?)?)
}

impl SystemDocument {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let raw = tokenize(text)?;
        let n = raw.players.ok_or(ParseError::Missing("players"))?;
        let m = raw.facilities.ok_or(ParseError::Missing("facilities"))?;

        let mut actions: Vec<Option<Vec<Vec<usize>>>> = vec![None; n];
        for (section, line, rows) in &raw.blocks {
            if let Section::Actions(p) = section {
                if *p >= n {
                    return Err(syntax(
                        *line,
                        format!("player {} but `players: {n}`", p + 1),
                    ));
                }
                actions[*p] = Some(
                    rows.iter()
                        .map(|(l, r)| parse_action(r, *l))
                        .collect::<Result<_, _>>()?,
                );
            }
        }
        let actions = actions
            .into_iter()
            .enumerate()
            .map(|(p, a)| a.ok_or_else(|| syntax(0, format!("missing `actions {}:` block", p + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        let model = FbsModel::new(m, actions)?;

        let mut doc = SystemDocument {
            model,
            perf: None,
            xi: None,
            constraints: Vec::new(),
            fixed: BTreeMap::new(),
        };
        for (section, line, rows) in &raw.blocks {
            match section {
                Section::Actions(_) => {}
                Section::Perf => doc.perf = Some(parse_perf(&doc.model, rows, *line)?),
                Section::Xi => {
                    let table = rows
                        .iter()
                        .map(|(l, r)| parse_reals(r, *l))
                        .collect::<Result<Vec<_>, _>>()?;
                    if table.len() != m || table.iter().any(|r| r.len() != n) {
                        return Err(syntax(*line, format!("xi must be {m} rows of {n} values")));
                    }
                    doc.xi = Some(CostMatrix::from_rows(&table)?);
                }
                Section::Constraints => {
                    doc.constraints = rows
                        .iter()
                        .map(|(l, r)| parse_constraint(r, *l, m))
                        .collect::<Result<_, _>>()?;
                }
                Section::Fixed => doc.fixed = parse_fixed_rows(rows)?,
            }
        }
        Ok(doc)
    }

    /// Canonical text form of the system alone (players, facilities, actions).
    pub fn model_text(model: &FbsModel) -> String {
        let mut s = String::new();
        writeln!(s, "players: {}", model.players()).unwrap();
        writeln!(s, "facilities: {}", model.facilities()).unwrap();
        for p in 0..model.players() {
            writeln!(s, "actions {}:", p + 1).unwrap();
            for a in model.actions(p) {
                if a.is_empty() {
                    s.push_str("  -\n");
                } else {
                    writeln!(s, "  {}", join(a.iter().map(|f| f + 1))).unwrap();
                }
            }
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = Self::model_text(&self.model);
        if let Some(perf) = &self.perf {
            s.push_str("perf:\n");
            writeln!(s, "  {}", join(perf.values())).unwrap();
        }
        if let Some(xi) = &self.xi {
            s.push_str("xi:\n");
            for row in xi.rows() {
                writeln!(s, "  {}", join(row)).unwrap();
            }
        }
        if !self.constraints.is_empty() {
            s.push_str("constraints:\n");
            for c in &self.constraints {
                writeln!(s, "  {} < {}", join(&c.coeffs), c.threshold).unwrap();
            }
        }
        if !self.fixed.is_empty() {
            s.push_str("fixed:\n");
            for (f, row) in &self.fixed {
                writeln!(s, "  {}: {}", f + 1, join(row)).unwrap();
            }
        }
        s
    }
}

pub(crate) fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
