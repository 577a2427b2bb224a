//! The seventeen user-inspired noise operators.
//!
//! Each operator enumerates its possible edits as splices over the source
//! text. Operators 14, 16 and 17 have quadratic or large edit spaces, so
//! [`apply_noise_operator`] samples those structurally rather than
//! materializing every candidate.

use std::fmt;
use std::ops::Range;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveError, PretrainExample};
use crate::lexer::{string_terminated, Lexer, Token, TokenKind};
use crate::seed::Rng;

/// Operators inserted by the random-operator and operator-at-end noise.
pub const OPERATOR_POOL: [&str; 12] = ["+", "-", "*", "/", "^", "&", "<", ">", "=", ".", ")", "#"];

/// Delimiters treated as unreliable tokens.
const DELIMITERS: [&str; 7] = [",", "(", ")", ":", "!", "\"", "'"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseOperator {
    WrongRange,
    MalformedRange,
    SpaceBeforeCallParen,
    ChangeArity,
    SwapArguments,
    SpaceInRelationalOp,
    SwapRelationalOp,
    InequalityNoise,
    InvalidEquality,
    MalformedSheetName,
    RemoveExclamation,
    MalformedString,
    CommaParenNoise,
    AddRandomOperator,
    AddOperatorAtEnd,
    AddParentheses,
    CorruptUnreliableTokens,
}

impl NoiseOperator {
    pub const ALL: [NoiseOperator; 17] = [
        NoiseOperator::WrongRange,
        NoiseOperator::MalformedRange,
        NoiseOperator::SpaceBeforeCallParen,
        NoiseOperator::ChangeArity,
        NoiseOperator::SwapArguments,
        NoiseOperator::SpaceInRelationalOp,
        NoiseOperator::SwapRelationalOp,
        NoiseOperator::InequalityNoise,
        NoiseOperator::InvalidEquality,
        NoiseOperator::MalformedSheetName,
        NoiseOperator::RemoveExclamation,
        NoiseOperator::MalformedString,
        NoiseOperator::CommaParenNoise,
        NoiseOperator::AddRandomOperator,
        NoiseOperator::AddOperatorAtEnd,
        NoiseOperator::AddParentheses,
        NoiseOperator::CorruptUnreliableTokens,
    ];

    /// 1-based operator number.
    pub fn id(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(usize::from(id).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseOperator::WrongRange => "WrongRange",
            NoiseOperator::MalformedRange => "MalformedRange",
            NoiseOperator::SpaceBeforeCallParen => "SpaceBeforeCallParen",
            NoiseOperator::ChangeArity => "ChangeArity",
            NoiseOperator::SwapArguments => "SwapArguments",
            NoiseOperator::SpaceInRelationalOp => "SpaceInRelationalOp",
            NoiseOperator::SwapRelationalOp => "SwapRelationalOp",
            NoiseOperator::InequalityNoise => "InequalityNoise",
            NoiseOperator::InvalidEquality => "InvalidEquality",
            NoiseOperator::MalformedSheetName => "MalformedSheetName",
            NoiseOperator::RemoveExclamation => "RemoveExclamation",
            NoiseOperator::MalformedString => "MalformedString",
            NoiseOperator::CommaParenNoise => "CommaParenNoise",
            NoiseOperator::AddRandomOperator => "AddRandomOperator",
            NoiseOperator::AddOperatorAtEnd => "AddOperatorAtEnd",
            NoiseOperator::AddParentheses => "AddParentheses",
            NoiseOperator::CorruptUnreliableTokens => "CorruptUnreliableTokens",
        }
    }

    pub fn is_applicable(self, formula: &str, lexer: &Lexer<'_>) -> bool {
        let view = View::new(formula, lexer);
        self.applicable_in(&view)
    }

    fn applicable_in(self, v: &View<'_>) -> bool {
        match self {
            NoiseOperator::AddRandomOperator => !v.inner_boundaries().is_empty(),
            NoiseOperator::AddOperatorAtEnd
            | NoiseOperator::AddParentheses
            | NoiseOperator::CorruptUnreliableTokens => !v.src.is_empty(),
            _ => !self.edits(v).is_empty(),
        }
    }

    /// Every output this operator can produce on `formula`, with variant
    /// labels. Empty when the operator does not apply.
    pub fn candidates(self, formula: &str, lexer: &Lexer<'_>) -> Vec<Noised> {
        let v = View::new(formula, lexer);
        let mut out: Vec<Noised> = self.edits(&v).into_iter().map(|e| e.apply(formula)).collect();
        if self == NoiseOperator::AddParentheses {
            for n in &mut out {
                label_balance(n, lexer);
            }
        }
        out
    }

    fn edits(self, v: &View<'_>) -> Vec<Edit> {
        match self {
            NoiseOperator::WrongRange => wrong_range(v),
            NoiseOperator::MalformedRange => malformed_range(v),
            NoiseOperator::SpaceBeforeCallParen => space_before_paren(v),
            NoiseOperator::ChangeArity => change_arity(v),
            NoiseOperator::SwapArguments => swap_arguments(v),
            NoiseOperator::SpaceInRelationalOp => relational(v, |op| {
                vec![(format!("split {op}"), format!("{} {}", &op[..1], &op[1..]))]
            }),
            NoiseOperator::SwapRelationalOp => relational(v, |op| {
                vec![(format!("swap {op}"), format!("{}{}", &op[1..], &op[..1]))]
            }),
            NoiseOperator::InequalityNoise => relational(v, |op| match op {
                "<>" => vec![("!=".into(), "!=".into()), ("=!".into(), "=!".into())],
                _ => Vec::new(),
            }),
            NoiseOperator::InvalidEquality => invalid_equality(v),
            NoiseOperator::MalformedSheetName => malformed_sheet_name(v),
            NoiseOperator::RemoveExclamation => remove_exclamation(v),
            NoiseOperator::MalformedString => malformed_string(v),
            NoiseOperator::CommaParenNoise => comma_paren(v),
            NoiseOperator::AddRandomOperator => v
                .inner_boundaries()
                .into_iter()
                .flat_map(|at| OPERATOR_POOL.map(|op| Edit::insert(format!("insert {op} at {at}"), at, op)))
                .collect(),
            NoiseOperator::AddOperatorAtEnd => end_operators(v)
                .into_iter()
                .map(|op| Edit::insert(format!("append {op}"), v.src.len(), op))
                .collect(),
            NoiseOperator::AddParentheses => {
                let b = v.all_boundaries();
                b.iter()
                    .flat_map(|&i| b.iter().map(move |&j| paren_edit(i, j)))
                    .collect()
            }
            NoiseOperator::CorruptUnreliableTokens => {
                let mut out: Vec<Edit> = v
                    .all_boundaries()
                    .into_iter()
                    .flat_map(|at| DELIMITERS.map(|d| Edit::insert(format!("add {d} at {at}"), at, d)))
                    .collect();
                for (at, d) in delimiter_sites(v) {
                    out.push(Edit::replace(format!("delete {d} at {}", at.start), at.clone(), ""));
                    for r in DELIMITERS.iter().filter(|&&r| r != d) {
                        out.push(Edit::replace(
                            format!("replace {d} with {r} at {}", at.start),
                            at.clone(),
                            r,
                        ));
                    }
                }
                out
            }
        }
    }

    fn sample(self, v: &View<'_>, rng: &mut Rng) -> Option<Noised> {
        let edit = match self {
            NoiseOperator::AddRandomOperator => {
                let at = *v.inner_boundaries().choose(rng)?;
                let op = OPERATOR_POOL.choose(rng)?;
                Edit::insert(format!("insert {op} at {at}"), at, op)
            }
            NoiseOperator::AddParentheses => {
                let b = v.all_boundaries();
                let (i, j) = (*b.choose(rng)?, *b.choose(rng)?);
                let mut n = paren_edit(i, j).apply(v.src);
                label_balance(&mut n, v.lexer);
                return Some(n);
            }
            NoiseOperator::CorruptUnreliableTokens => {
                let sites = delimiter_sites(v);
                let action = if sites.is_empty() { 0 } else { rng.random_range(0..3) };
                match action {
                    0 => {
                        let at = *v.all_boundaries().choose(rng)?;
                        let d = DELIMITERS.choose(rng)?;
                        Edit::insert(format!("add {d} at {at}"), at, d)
                    }
                    1 => {
                        let (at, d) = sites.choose(rng)?.clone();
                        Edit::replace(format!("delete {d} at {}", at.start), at, "")
                    }
                    _ => {
                        let (at, d) = sites.choose(rng)?.clone();
                        let others: Vec<&str> = DELIMITERS.iter().copied().filter(|&r| r != d).collect();
                        let r = others.choose(rng)?;
                        Edit::replace(format!("replace {d} with {r} at {}", at.start), at, r)
                    }
                }
            }
            _ => self.edits(v).choose(rng)?.clone(),
        };
        Some(edit.apply(v.src))
    }
}

impl fmt::Display for NoiseOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id(), self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Noised {
    pub output: String,
    pub variant: String,
}

/// Corrupts `formula` with `op`, choosing uniformly among its edits.
pub fn apply_noise_operator(
    formula: &str,
    op: NoiseOperator,
    lexer: &Lexer<'_>,
    rng: &mut Rng,
) -> Result<Noised, ObjectiveError> {
    let v = View::new(formula, lexer);
    if !op.applicable_in(&v) {
        return Err(ObjectiveError::NotApplicable { op });
    }
    let n = op.sample(&v, rng).ok_or(ObjectiveError::NotApplicable { op })?;
    debug_assert_ne!(n.output, formula, "{op} left the formula unchanged");
    Ok(n)
}

/// Applies one operator drawn uniformly from those applicable, falling back
/// to appending an operator.
pub fn user_noise(formula: &str, lexer: &Lexer<'_>, rng: &mut Rng) -> Result<PretrainExample, ObjectiveError> {
    let v = View::new(formula, lexer);
    let applicable: Vec<NoiseOperator> = NoiseOperator::ALL
        .into_iter()
        .filter(|op| op.applicable_in(&v))
        .collect();
    let op = applicable
        .choose(rng)
        .copied()
        .unwrap_or(NoiseOperator::AddOperatorAtEnd);
    let n = op.sample(&v, rng).ok_or(ObjectiveError::Empty)?;
    Ok(PretrainExample::new(
        formula,
        n.output,
        Objective::UserNoise,
        format!("{}:{}", op.id(), n.variant),
    ))
}

struct View<'a> {
    src: &'a str,
    toks: Vec<Token<'a>>,
    lexer: &'a Lexer<'a>,
}

impl<'a> View<'a> {
    fn new(src: &'a str, lexer: &'a Lexer<'a>) -> Self {
        Self {
            src,
            toks: lexer.lex(src),
            lexer,
        }
    }

    fn first_body_token(&self) -> usize {
        usize::from(self.toks.first().is_some_and(|t| t.is_operator("=")))
    }

    /// Token starts after the leading `=`, not including the end.
    fn inner_boundaries(&self) -> Vec<usize> {
        self.toks[self.first_body_token().min(self.toks.len())..]
            .iter()
            .map(|t| t.span.start)
            .collect()
    }

    /// Inner boundaries plus the end of the formula.
    fn all_boundaries(&self) -> Vec<usize> {
        let mut b = self.inner_boundaries();
        if !self.src.is_empty() {
            b.push(self.src.len());
        }
        b
    }

    fn next_solid(&self, i: usize) -> Option<usize> {
        (i + 1..self.toks.len()).find(|&j| !self.toks[j].is_whitespace())
    }

    fn kind_at(&self, i: usize) -> Option<TokenKind> {
        self.toks.get(i).map(|t| t.kind)
    }

    /// Calls to catalog functions whose parentheses close.
    fn calls(&self) -> Vec<Call> {
        let mut out = Vec::new();
        for (i, t) in self.toks.iter().enumerate() {
            if t.kind != TokenKind::FuncName {
                continue;
            }
            let Some(open) = self.next_solid(i).filter(|&j| self.toks[j].is_punct("(")) else {
                continue;
            };
            let mut depth = 0usize;
            let mut commas = Vec::new();
            let mut close = None;
            for j in open + 1..self.toks.len() {
                let tj = &self.toks[j];
                if tj.is_punct("(") {
                    depth += 1;
                } else if tj.is_punct(")") {
                    if depth == 0 {
                        close = Some(j);
                        break;
                    }
                    depth -= 1;
                } else if tj.is_punct(",") && depth == 0 {
                    commas.push(j);
                }
            }
            let Some(close) = close else { continue };
            let blank = self.toks[open + 1..close].iter().all(Token::is_whitespace);
            let args = if blank {
                Vec::new()
            } else {
                let mut bounds = vec![open];
                bounds.extend(&commas);
                bounds.push(close);
                bounds.windows(2).map(|w| w[0] + 1..w[1]).collect()
            };
            out.push(Call {
                name: i,
                open,
                close,
                commas,
                args,
            });
        }
        out
    }

    /// Byte range of an argument without surrounding whitespace.
    fn trimmed(&self, arg: &Range<usize>) -> Option<Range<usize>> {
        let solid: Vec<&Token<'_>> = self.toks[arg.clone()].iter().filter(|t| !t.is_whitespace()).collect();
        Some(solid.first()?.span.start..solid.last()?.span.end)
    }
}

struct Call {
    name: usize,
    open: usize,
    close: usize,
    commas: Vec<usize>,
    /// Token index ranges between the separators.
    args: Vec<Range<usize>>,
}

#[derive(Debug, Clone)]
struct Edit {
    variant: String,
    splices: Vec<(Range<usize>, String)>,
}

impl Edit {
    fn insert(variant: String, at: usize, text: &str) -> Self {
        Self::replace(variant, at..at, text)
    }

    fn replace(variant: String, at: Range<usize>, text: &str) -> Self {
        Self {
            variant,
            splices: vec![(at, text.to_owned())],
        }
    }

    fn apply(&self, src: &str) -> Noised {
        let mut splices: Vec<&(Range<usize>, String)> = self.splices.iter().collect();
        splices.sort_by_key(|(r, _)| (r.start, r.end));
        let mut out = String::with_capacity(src.len() + 8);
        let mut pos = 0;
        for (r, text) in splices {
            out.push_str(&src[pos..r.start]);
            out.push_str(text);
            pos = r.end;
        }
        out.push_str(&src[pos..]);
        Noised {
            output: out,
            variant: self.variant.clone(),
        }
    }
}

fn range_colons(v: &View<'_>) -> Vec<usize> {
    (1..v.toks.len())
        .filter(|&i| {
            v.toks[i].is_punct(":")
                && v.kind_at(i - 1) == Some(TokenKind::CellRef)
                && v.kind_at(i + 1) == Some(TokenKind::CellRef)
        })
        .collect()
}

fn wrong_range(v: &View<'_>) -> Vec<Edit> {
    let mut out = Vec::new();
    for i in range_colons(v) {
        let at = v.toks[i].span;
        for (label, with) in [
            ("replace ;", ";"),
            ("replace ,", ","),
            ("replace space", " "),
            ("replace \"", "\""),
            ("delete", ""),
        ] {
            out.push(Edit::replace(label.into(), at.start..at.end, with));
        }
    }
    out
}

/// Length of the column part (`$` included) of a cell reference.
fn column_len(cell: &str) -> usize {
    let b = cell.as_bytes();
    let dollar = usize::from(b.first() == Some(&b'$'));
    dollar + b[dollar..].iter().take_while(|c| c.is_ascii_alphabetic()).count()
}

fn malformed_range(v: &View<'_>) -> Vec<Edit> {
    let mut out = Vec::new();
    for i in range_colons(v) {
        for (side, t) in [("1", &v.toks[i - 1]), ("2", &v.toks[i + 1])] {
            let split = t.span.start + column_len(t.text);
            out.push(Edit::replace(format!("delete col{side}"), t.span.start..split, ""));
            out.push(Edit::replace(format!("delete row{side}"), split..t.span.end, ""));
        }
    }
    out
}

fn space_before_paren(v: &View<'_>) -> Vec<Edit> {
    (0..v.toks.len())
        .filter(|&i| v.toks[i].kind == TokenKind::FuncName && v.toks.get(i + 1).is_some_and(|t| t.is_punct("(")))
        .map(|i| Edit::insert(format!("space after {}", v.toks[i].text), v.toks[i].span.end, " "))
        .collect()
}

fn change_arity(v: &View<'_>) -> Vec<Edit> {
    let mut out = Vec::new();
    for call in v.calls() {
        let name = v.toks[call.name].text;
        let Some(arity) = v.lexer.catalog().get(name) else {
            continue;
        };
        let Some(max) = arity.max else { continue };
        let argc = call.args.len();
        if argc == arity.min && argc > 0 {
            for k in 0..argc {
                let cut = if argc == 1 {
                    v.toks[call.open].span.end..v.toks[call.close].span.start
                } else if k == 0 {
                    let next = &call.args[1];
                    let end = v.trimmed(next).map_or(v.toks[next.end].span.start, |r| r.start);
                    v.toks[call.open].span.end..end
                } else {
                    v.toks[call.commas[k - 1]].span.start..v.toks[call.args[k].end].span.start
                };
                out.push(Edit::replace(format!("delete arg {}", k + 1), cut, ""));
            }
        }
        if argc == max && argc > 0 {
            let last = call.args[argc - 1].clone();
            let lead: String = v.toks[last.clone()]
                .iter()
                .take_while(|t| t.is_whitespace())
                .map(|t| t.text)
                .collect();
            let at = v.trimmed(&last).map_or(v.toks[call.close].span.start, |r| r.end);
            for (k, arg) in call.args.iter().enumerate() {
                let copy = v.trimmed(arg).map_or("", |r| &v.src[r]);
                out.push(Edit::insert(
                    format!("copy arg {}", k + 1),
                    at,
                    &format!(",{lead}{copy}"),
                ));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArgType {
    Logical,
    Number,
    Text,
    Reference,
    Other,
}

fn arg_type(toks: &[Token<'_>]) -> ArgType {
    let solid: Vec<&Token<'_>> = toks.iter().filter(|t| !t.is_whitespace()).collect();
    let mut depth = 0usize;
    for t in &solid {
        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            depth = depth.saturating_sub(1);
        } else if depth == 0 && t.kind == TokenKind::Operator && matches!(t.text, "=" | "<" | ">" | "<=" | ">=" | "<>")
        {
            return ArgType::Logical;
        }
    }
    match solid.as_slice() {
        [t] if t.kind == TokenKind::Number => ArgType::Number,
        [s, t] if (s.is_operator("-") || s.is_operator("+")) && t.kind == TokenKind::Number => ArgType::Number,
        [t] if t.kind == TokenKind::StringLit => ArgType::Text,
        [t] if t.kind == TokenKind::Identifier && matches!(t.text.to_ascii_uppercase().as_str(), "TRUE" | "FALSE") => {
            ArgType::Logical
        }
        ts if !ts.is_empty()
            && ts.iter().any(|t| t.kind == TokenKind::CellRef)
            && ts.iter().all(|t| {
                matches!(t.kind, TokenKind::CellRef | TokenKind::SheetName) || t.is_punct(":") || t.is_punct("!")
            }) =>
        {
            ArgType::Reference
        }
        _ => ArgType::Other,
    }
}

fn swap_arguments(v: &View<'_>) -> Vec<Edit> {
    let mut out = Vec::new();
    for call in v.calls() {
        let typed: Vec<(Range<usize>, ArgType)> = call
            .args
            .iter()
            .filter_map(|a| Some((v.trimmed(a)?, arg_type(&v.toks[a.clone()]))))
            .collect();
        for (x, (ra, ta)) in typed.iter().enumerate() {
            for (y, (rb, tb)) in typed.iter().enumerate().skip(x + 1) {
                if ta != tb {
                    out.push(Edit {
                        variant: format!("swap {} {} in {}", x + 1, y + 1, v.toks[call.name].text),
                        splices: vec![
                            (ra.clone(), v.src[rb.clone()].to_owned()),
                            (rb.clone(), v.src[ra.clone()].to_owned()),
                        ],
                    });
                }
            }
        }
    }
    out
}

fn relational(v: &View<'_>, rewrite: impl Fn(&str) -> Vec<(String, String)>) -> Vec<Edit> {
    let mut out = Vec::new();
    for t in &v.toks {
        if t.kind == TokenKind::Operator && matches!(t.text, "<=" | ">=" | "<>") {
            for (label, with) in rewrite(t.text) {
                out.push(Edit::replace(label, t.span.start..t.span.end, &with));
            }
        }
    }
    out
}

fn invalid_equality(v: &View<'_>) -> Vec<Edit> {
    let mut out = Vec::new();
    for t in v.toks.iter().skip(1).filter(|t| t.is_operator("=")) {
        for with in ["==", "==="] {
            out.push(Edit::replace(with.into(), t.span.start..t.span.end, with));
        }
    }
    out
}

fn malformed_sheet_name(v: &View<'_>) -> Vec<Edit> {
    let mut out = Vec::new();
    for t in v
        .toks
        .iter()
        .filter(|t| t.kind == TokenKind::SheetName && t.text.starts_with('\''))
    {
        let inner = &t.text[1..t.text.len() - 1];
        let at = t.span.start..t.span.end;
        out.push(Edit::replace("delete quotes".into(), at.clone(), inner));
        out.push(Edit::replace("double quotes".into(), at, &format!("\"{inner}\"")));
    }
    out
}

fn remove_exclamation(v: &View<'_>) -> Vec<Edit> {
    (1..v.toks.len())
        .filter(|&i| v.toks[i].is_punct("!") && v.kind_at(i - 1) == Some(TokenKind::SheetName))
        .map(|i| Edit::replace("delete !".into(), v.toks[i].span.start..v.toks[i].span.end, ""))
        .collect()
}

fn malformed_string(v: &View<'_>) -> Vec<Edit> {
    let mut out = Vec::new();
    for t in &v.toks {
        if t.kind != TokenKind::StringLit || !string_terminated(t.text) {
            continue;
        }
        let inner = &t.text[1..t.text.len() - 1];
        let at = t.span.start..t.span.end;
        out.push(Edit::replace("delete quotes".into(), at.clone(), inner));
        out.push(Edit::replace("single quotes".into(), at, &format!("'{inner}'")));
    }
    out
}

fn comma_paren(v: &View<'_>) -> Vec<Edit> {
    let mut out = Vec::new();
    for t in v.toks.iter().filter(|t| t.is_punct(")")) {
        out.push(Edit::insert("insert , before )".into(), t.span.start, ","));
        out.push(Edit::replace("replace ) with ,".into(), t.span.start..t.span.end, ","));
    }
    out
}

/// Pool operators that stay a separate token when appended, so `.` is not
/// absorbed into a trailing number or name and `<` + `=` do not fuse.
fn end_operators(v: &View<'_>) -> Vec<&'static str> {
    if v.src.is_empty() {
        return Vec::new();
    }
    OPERATOR_POOL
        .into_iter()
        .filter(|op| {
            let s = format!("{}{op}", v.src);
            v.lexer.lex(&s).last().is_some_and(|t| t.text == *op)
        })
        .collect()
}

fn paren_edit(open: usize, close: usize) -> Edit {
    let variant = format!("( at {open}, ) at {close}");
    if open == close {
        return Edit::insert(variant, open, "()");
    }
    Edit {
        variant,
        splices: vec![(open..open, "(".into()), (close..close, ")".into())],
    }
}

fn label_balance(n: &mut Noised, lexer: &Lexer<'_>) {
    let mut depth = 0i64;
    let mut ok = true;
    for t in lexer.lex(&n.output) {
        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            depth -= 1;
            ok &= depth >= 0;
        }
    }
    let label = if ok && depth == 0 { "balanced" } else { "unbalanced" };
    n.variant = format!("{}; {label}", n.variant);
}

/// Delimiter characters outside string and sheet-name contents.
fn delimiter_sites(v: &View<'_>) -> Vec<(Range<usize>, &'static str)> {
    let mut out = Vec::new();
    for t in &v.toks {
        let s = t.span;
        match t.kind {
            TokenKind::Punct => {
                if let Some(d) = DELIMITERS.iter().find(|&&d| d == t.text) {
                    out.push((s.start..s.end, *d));
                }
            }
            TokenKind::StringLit => {
                out.push((s.start..s.start + 1, "\""));
                if string_terminated(t.text) {
                    out.push((s.end - 1..s.end, "\""));
                }
            }
            TokenKind::SheetName if t.text.starts_with('\'') => {
                out.push((s.start..s.start + 1, "'"));
                out.push((s.end - 1..s.end, "'"));
            }
            _ => {}
        }
    }
    out
}
