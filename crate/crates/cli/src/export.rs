//! CSV tables. Indices are 1-based, rows are in canonical profile order, and
//! reals use the shortest representation that round-trips.

use std::fmt::Write as _;

use fbs::design::DesignSystem;
use fbs::{CostMatrix, FbsModel, PayoffTable, PerfTable};

use crate::document::join;

fn cost_column(n: usize, col: usize) -> String {
    format!("f{}_{}", col / n + 1, col % n + 1)
}

fn profile_cells(model: &FbsModel, k: usize) -> String {
    let p = model.profile(k).expect("index below profile count");
    format!("{},{}", k + 1, p.label())
}

fn binary_table(model: &FbsModel, sys: &DesignSystem, cols: &[usize]) -> String {
    let n = model.players();
    let mut s = String::from("profile,choices");
    for &c in cols {
        write!(s, ",{}", cost_column(n, c)).unwrap();
    }
    s.push('\n');
    for k in 0..model.profile_count() {
        let bits = sys.row_bits(k);
        s.push_str(&profile_cells(model, k));
        for &c in cols {
            write!(s, ",{}", bits[c]).unwrap();
        }
        s.push('\n');
    }
    s
}

/// The stacked design matrix `B`, one column per `(facility, load)` pair.
pub fn b_matrix_csv(model: &FbsModel, sys: &DesignSystem) -> String {
    let cols: Vec<usize> = (0..model.cost_len()).collect();
    binary_table(model, sys, &cols)
}

/// `B` restricted to the kept columns.
pub fn b0_matrix_csv(model: &FbsModel, sys: &DesignSystem, kept: &[usize]) -> String {
    binary_table(model, sys, kept)
}

pub fn loads_csv(model: &FbsModel) -> String {
    let mut s = String::from("profile,choices");
    for j in 0..model.facilities() {
        write!(s, ",r{}", j + 1).unwrap();
    }
    s.push('\n');
    for p in model.profiles() {
        writeln!(
            s,
            "{},{}",
            profile_cells(model, p.index()),
            join(model.load_vector(&p).0).replace(' ', ",")
        )
        .unwrap();
    }
    s
}

pub fn payoffs_csv(model: &FbsModel, payoffs: &PayoffTable) -> String {
    let mut s = String::from("profile,choices");
    for i in 0..model.players() {
        write!(s, ",c{}", i + 1).unwrap();
    }
    s.push('\n');
    for k in 0..model.profile_count() {
        s.push_str(&profile_cells(model, k));
        for i in 0..model.players() {
            write!(s, ",{}", payoffs.get(k, i)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn xi_csv(xi: &CostMatrix) -> String {
    let mut s = String::from("facility");
    for k in 1..=xi.players() {
        write!(s, ",k{k}").unwrap();
    }
    s.push('\n');
    for (j, row) in xi.rows().enumerate() {
        write!(s, "{}", j + 1).unwrap();
        for x in row {
            write!(s, ",{x}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Reads a table written by [`xi_csv`].
pub fn parse_xi_csv(text: &str) -> Result<CostMatrix, String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let fac: usize = cells
            .next()
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| format!("line {}: bad facility number", i + 1))?;
        if fac != rows.len() + 1 {
            return Err(format!(
                "line {}: facilities must be listed in order",
                i + 1
            ));
        }
        let row = cells
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("line {}: bad number `{c}`", i + 1))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    CostMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

pub fn perf_pair_csv(model: &FbsModel, perf: &PerfTable, p0: &PerfTable) -> String {
    let mut s = String::from("profile,choices,perf,p0\n");
    for k in 0..model.profile_count() {
        writeln!(
            s,
            "{},{},{}",
            profile_cells(model, k),
            perf.get(k),
            p0.get(k)
        )
        .unwrap();
    }
    s
}

pub fn perf_csv(model: &FbsModel, perf: &PerfTable) -> String {
    let mut s = String::from("profile,choices,perf\n");
    for k in 0..model.profile_count() {
        writeln!(s, "{},{}", profile_cells(model, k), perf.get(k)).unwrap();
    }
    s
}

/// Human-readable payoff table rounded to two decimals, one row per player.
pub fn payoff_report(model: &FbsModel, payoffs: &PayoffTable) -> String {
    let mut s = String::from("c\\a");
    for p in model.profiles() {
        write!(s, "\t{}", p.label().replace(' ', "")).unwrap();
    }
    s.push('\n');
    for i in 0..model.players() {
        write!(s, "c{}", i + 1).unwrap();
        for k in 0..model.profile_count() {
            write!(s, "\t{:.2}", payoffs.get(k, i)).unwrap();
        }
        s.push('\n');
    }
    s
}
