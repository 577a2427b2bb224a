//! Grammar-directed random formulas and synthetic corpora.

use formulakit::curation::FormulaRecord;
use formulakit::seed::{rng_from, Rng};
use formulakit::FunctionCatalog;
use rand::seq::IndexedRandom;
use rand::Rng as _;

const FUNCS: &[&str] = &[
    "SUM",
    "SUMIF",
    "IF",
    "ISERROR",
    "VLOOKUP",
    "INDEX",
    "MATCH",
    "AND",
    "OR",
    "MAX",
    "MIN",
    "ROUND",
    "LEFT",
    "CONCATENATE",
    "COUNTIF",
    "EDATE",
    "TODAY",
    "ABS",
    "AVERAGE",
    "sum",
    "If",
];
const BINARY: &[&str] = &["+", "-", "*", "/", "^", "&", "=", "<>", "<=", ">=", "<", ">"];
const SHEETS: &[&str] = &["Sheet1", "Data", "'My Sheet'", "'Q1 2020'", "'It''s'"];
const TEXTS: &[&str] = &[
    "",
    "x",
    "Not available",
    "a,b",
    "say \"\"hi\"\"",
    "(",
    "1:2",
    "ünï",
    "A1",
];

/// A random well-formed formula. `depth` bounds nesting.
pub fn formula(rng: &mut Rng, depth: u32) -> String {
    let mut out = String::from("=");
    expr(rng, &mut out, depth);
    out
}

/// Like [`formula`] but never a bare operand: the top level is a call,
/// an operator or a parenthesized expression.
pub fn compound_formula(rng: &mut Rng, depth: u32) -> String {
    let mut out = String::from("=");
    let choice = rng.random_range(5..11);
    expr_as(rng, &mut out, depth.max(1), choice);
    out
}

pub fn formula_from_seed(seed: u64) -> String {
    formula(&mut rng_from(seed), 3)
}

fn space(rng: &mut Rng, out: &mut String) {
    if rng.random_bool(0.15) {
        out.push(' ');
    }
}

fn column(rng: &mut Rng) -> String {
    let n = *[1, 1, 1, 2, 3].choose(rng).unwrap();
    let mut s: String = (0..n).map(|_| char::from(b'A' + rng.random_range(0..26u8))).collect();
    if n == 3 {
        // three-letter columns stop at XFD
        s.replace_range(0..1, "X");
        s.replace_range(1..2, "A");
    }
    s
}

fn cell(rng: &mut Rng, out: &mut String) {
    if rng.random_bool(0.2) {
        out.push('$');
    }
    let col = column(rng);
    out.push_str(&if rng.random_bool(0.2) { col.to_lowercase() } else { col });
    if rng.random_bool(0.2) {
        out.push('$');
    }
    out.push_str(&rng.random_range(1..100_000u32).to_string());
}

fn number(rng: &mut Rng, out: &mut String) {
    match rng.random_range(0..4) {
        0 => out.push_str(&rng.random_range(0..10u32).to_string()),
        1 => out.push_str(&rng.random_range(0..100_000u32).to_string()),
        2 => out.push_str(&format!(
            "{}.{}",
            rng.random_range(0..100u32),
            rng.random_range(0..1000u32)
        )),
        _ => out.push_str(&format!(
            "{}E+{}",
            rng.random_range(1..10u32),
            rng.random_range(0..20u32)
        )),
    }
}

fn reference(rng: &mut Rng, out: &mut String) {
    if rng.random_bool(0.2) {
        out.push_str(SHEETS.choose(rng).unwrap());
        out.push('!');
    }
    cell(rng, out);
    if rng.random_bool(0.4) {
        out.push(':');
        cell(rng, out);
    }
}

fn expr(rng: &mut Rng, out: &mut String, depth: u32) {
    let choice = if depth == 0 {
        rng.random_range(0..5)
    } else {
        rng.random_range(0..11)
    };
    expr_as(rng, out, depth, choice);
}

fn expr_as(rng: &mut Rng, out: &mut String, depth: u32, choice: u32) {
    match choice {
        0 | 1 => reference(rng, out),
        2 => number(rng, out),
        3 => {
            out.push('"');
            out.push_str(TEXTS.choose(rng).unwrap());
            out.push('"');
        }
        4 => out.push_str(["TRUE", "FALSE", "true", "rate", "Total_2"].choose(rng).unwrap()),
        5..=7 => {
            let name = FUNCS.choose(rng).unwrap();
            out.push_str(name);
            out.push('(');
            let arity = FunctionCatalog::builtin().get(name).expect("catalog function");
            let argc = rng.random_range(arity.min..=arity.max.unwrap_or(3).min(arity.min + 3));
            for i in 0..argc {
                if i > 0 {
                    out.push(',');
                    space(rng, out);
                }
                expr(rng, out, depth - 1);
            }
            out.push(')');
        }
        8 => {
            expr(rng, out, depth - 1);
            space(rng, out);
            out.push_str(BINARY.choose(rng).unwrap());
            space(rng, out);
            expr(rng, out, depth - 1);
        }
        9 => {
            out.push('(');
            expr(rng, out, depth - 1);
            out.push(')');
        }
        _ => {
            if rng.random_bool(0.5) {
                out.push('-');
                expr(rng, out, depth - 1);
            } else {
                expr(rng, out, depth - 1);
                out.push('%');
            }
        }
    }
}

/// `n` records spread over a few workbooks, drawn from a small pool so that
/// exact and sketch-level duplicates are common.
pub fn corpus(seed: u64, n: usize) -> Vec<FormulaRecord> {
    let mut rng = rng_from(seed);
    let pool: Vec<String> = (0..(n / 3).max(1)).map(|_| formula(&mut rng, 2)).collect();
    let workbooks = rng.random_range(1..6);
    (0..n)
        .map(|_| {
            let mut f = pool.choose(&mut rng).unwrap().clone();
            if rng.random_bool(0.3) {
                // same sketch, different literals
                f = f.replace('1', "7");
            }
            let wb = format!("wb{}", rng.random_range(0..workbooks));
            FormulaRecord::new(&wb, "s1", &f)
        })
        .collect()
}
