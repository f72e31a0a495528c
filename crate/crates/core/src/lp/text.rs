//! Plain-text LP dump for debugging.
//!
//! ```text
//! sense max
//! var 0 1 nonneg lambda
//! row 0 ge 0 reward[0]
//! coef 0 0 -1
//! ```
//!
//! `var <index> <objective> <nonneg|free> [label]`,
//! `row <index> <le|ge|eq> <rhs> [label]`, `coef <row> <var> <value>`.
//! Blank lines and lines starting with `#` are ignored. Floats are written
//! in shortest round-trip form, so dump followed by load is lossless.

use std::fmt::Write as _;

use super::{Cmp, LinearProgram, Sense};
use crate::error::{Error, Result};

pub fn dump(lp: &LinearProgram) -> String {
    let mut out = String::new();
    let sense = match lp.sense() {
        Sense::Maximize => "max",
        Sense::Minimize => "min",
    };
    writeln!(out, "sense {sense}").unwrap();
    for (i, v) in lp.vars().iter().enumerate() {
        let sign = if v.nonneg { "nonneg" } else { "free" };
        match &v.label {
            Some(l) => writeln!(out, "var {i} {} {sign} {l}", v.obj).unwrap(),
            None => writeln!(out, "var {i} {} {sign}", v.obj).unwrap(),
        }
    }
    for (r, row) in lp.rows().iter().enumerate() {
        let cmp = match row.cmp {
            Cmp::Le => "le",
            Cmp::Ge => "ge",
            Cmp::Eq => "eq",
        };
        match &row.label {
            Some(l) => writeln!(out, "row {r} {cmp} {} {l}", row.rhs).unwrap(),
            None => writeln!(out, "row {r} {cmp} {}", row.rhs).unwrap(),
        }
    }
    for (r, row) in lp.rows().iter().enumerate() {
        for &(v, a) in &row.coeffs {
            writeln!(out, "coef {r} {v} {a}").unwrap();
        }
    }
    out
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

pub fn load(text: &str) -> Result<LinearProgram> {
    let mut lp: Option<LinearProgram> = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(5, ' ');
        let tag = parts.next().unwrap_or_default();
        let mut field = |what: &str| parts.next().ok_or_else(|| parse_err(line_no, format!("missing {what}")));
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(line_no, e));
        let idx = |s: &str| s.parse::<usize>().map_err(|e| parse_err(line_no, e));
        match tag {
            "sense" => {
                let sense = match field("sense")? {
                    "max" => Sense::Maximize,
                    "min" => Sense::Minimize,
                    other => return Err(parse_err(line_no, format!("unknown sense {other}"))),
                };
                lp = Some(LinearProgram::new(sense));
            }
            "var" => {
                let prog = lp.as_mut().ok_or_else(|| parse_err(line_no, "sense must come first"))?;
                let i = idx(field("index")?)?;
                let obj = num(field("objective")?)?;
                let nonneg = match field("sign")? {
                    "nonneg" => true,
                    "free" => false,
                    other => return Err(parse_err(line_no, format!("unknown sign {other}"))),
                };
                let label = parts.next().map(|s| s.to_string());
                if i != prog.num_vars() {
                    return Err(parse_err(line_no, "variables must be listed in order"));
                }
                let v = prog.add_var(obj, nonneg);
                if let Some(l) = label {
                    prog.set_var_label(v, l);
                }
            }
            "row" => {
                let prog = lp.as_mut().ok_or_else(|| parse_err(line_no, "sense must come first"))?;
                let r = idx(field("index")?)?;
                let cmp = match field("comparison")? {
                    "le" => Cmp::Le,
                    "ge" => Cmp::Ge,
                    "eq" => Cmp::Eq,
                    other => return Err(parse_err(line_no, format!("unknown comparison {other}"))),
                };
                let rhs = num(field("rhs")?)?;
                let label = parts.next().map(|s| s.to_string());
                if r != prog.num_rows() {
                    return Err(parse_err(line_no, "rows must be listed in order"));
                }
                let row = prog.add_row(Vec::new(), cmp, rhs);
                if let Some(l) = label {
                    prog.set_row_label(row, l);
                }
            }
            "coef" => {
                let prog = lp.as_mut().ok_or_else(|| parse_err(line_no, "sense must come first"))?;
                let r = idx(field("row")?)?;
                let v = idx(field("var")?)?;
                let a = num(field("value")?)?;
                if r >= prog.num_rows() || v >= prog.num_vars() {
                    return Err(parse_err(line_no, "coefficient refers to an undeclared row or variable"));
                }
                prog.push_coeff(r, v, a);
            }
            other => return Err(parse_err(line_no, format!("unknown record {other}"))),
        }
    }
    let lp = lp.ok_or_else(|| Error::Parse("empty program".into()))?;
    lp.validate()?;
    Ok(lp)
}
