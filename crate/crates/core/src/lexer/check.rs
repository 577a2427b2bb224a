//! Lightweight well-formedness checks over the token stream.

use serde::{Deserialize, Serialize};

use super::{is_column_only, is_row_only, Lexer, Span, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticCode {
    UnbalancedParens,
    BadArity,
    UnterminatedString,
    InvalidOperatorSequence,
    LexError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    fn new(code: DiagnosticCode, span: Span, message: impl Into<String>) -> Self {
        Self {
            code,
            span,
            message: message.into(),
        }
    }
}

pub(super) fn check(lexer: &Lexer<'_>, formula: &str) -> Vec<Diagnostic> {
    let all = lexer.lex(formula);
    let toks: Vec<Token<'_>> = all.into_iter().filter(|t| !t.is_whitespace()).collect();
    let mut diags = Vec::new();

    lexical(&toks, &mut diags);
    let pairs = parens(&toks, &mut diags);
    arity(lexer, &toks, &pairs, &mut diags);
    operators(&toks, &pairs, &mut diags);

    diags.sort_by_key(|d| d.span.start);
    diags
}

fn lexical(toks: &[Token<'_>], diags: &mut Vec<Diagnostic>) {
    for (i, t) in toks.iter().enumerate() {
        match t.kind {
            TokenKind::Error => diags.push(Diagnostic::new(
                DiagnosticCode::LexError,
                t.span,
                format!("unrecognized character `{}`", t.text),
            )),
            TokenKind::StringLit if !string_terminated(t.text) => diags.push(Diagnostic::new(
                DiagnosticCode::UnterminatedString,
                t.span,
                "string literal is not terminated",
            )),
            TokenKind::SheetName if !toks.get(i + 1).is_some_and(|n| n.is_punct("!")) => diags.push(Diagnostic::new(
                DiagnosticCode::LexError,
                t.span,
                "quoted name must be followed by `!`",
            )),
            _ => {}
        }
    }
}

pub(crate) fn string_terminated(text: &str) -> bool {
    // Opening quote, then pairs of `""` or non-quote bytes, then a closing quote.
    let inner = &text.as_bytes()[1..];
    let mut i = 0;
    while i < inner.len() {
        if inner[i] == b'"' {
            if inner.get(i + 1) == Some(&b'"') {
                i += 2;
                continue;
            }
            return i + 1 == inner.len();
        }
        i += 1;
    }
    false
}

/// Matches parentheses; returns `close[i] = Some(j)` for each matched `(` at `i`.
fn parens(toks: &[Token<'_>], diags: &mut Vec<Diagnostic>) -> Vec<Option<usize>> {
    let mut close = vec![None; toks.len()];
    let mut stack = Vec::new();
    for (i, t) in toks.iter().enumerate() {
        if t.is_punct("(") {
            stack.push(i);
        } else if t.is_punct(")") {
            match stack.pop() {
                Some(open) => close[open] = Some(i),
                None => diags.push(Diagnostic::new(
                    DiagnosticCode::UnbalancedParens,
                    t.span,
                    "unmatched `)`",
                )),
            }
        }
    }
    for open in stack {
        diags.push(Diagnostic::new(
            DiagnosticCode::UnbalancedParens,
            toks[open].span,
            "unclosed `(`",
        ));
    }
    close
}

/// Number of top-level arguments between a matched `(` at `open` and `)` at `close`.
pub(crate) fn count_args(toks: &[Token<'_>], open: usize, close: usize) -> usize {
    if close == open + 1 {
        return 0;
    }
    let mut depth = 0usize;
    let mut argc = 1;
    for t in &toks[open + 1..close] {
        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            depth = depth.saturating_sub(1);
        } else if t.is_punct(",") && depth == 0 {
            argc += 1;
        }
    }
    argc
}

fn arity(lexer: &Lexer<'_>, toks: &[Token<'_>], close: &[Option<usize>], diags: &mut Vec<Diagnostic>) {
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokenKind::FuncName {
            continue;
        }
        let Some(arity) = lexer.catalog().get(t.text) else {
            continue;
        };
        let open = i + 1;
        let Some(Some(close)) = close.get(open) else {
            continue;
        };
        let argc = count_args(toks, open, *close);
        if !arity.accepts(argc) {
            diags.push(Diagnostic::new(
                DiagnosticCode::BadArity,
                t.span,
                format!("{} expects {} argument(s), got {argc}", t.text.to_uppercase(), arity),
            ));
        }
    }
}

fn ends_value(t: &Token<'_>) -> bool {
    matches!(
        t.kind,
        TokenKind::CellRef | TokenKind::Number | TokenKind::StringLit | TokenKind::Identifier
    ) || t.is_punct(")")
        || t.is_operator("%")
}

fn starts_value(t: &Token<'_>) -> bool {
    matches!(
        t.kind,
        TokenKind::CellRef
            | TokenKind::Number
            | TokenKind::StringLit
            | TokenKind::Identifier
            | TokenKind::FuncName
            | TokenKind::SheetName
    ) || t.is_punct("(")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RangeSide {
    Cell,
    Column,
    Row,
    Opaque,
}

fn range_side(t: Option<&Token<'_>>, left: bool) -> Option<RangeSide> {
    let t = t?;
    match t.kind {
        TokenKind::CellRef => Some(RangeSide::Cell),
        TokenKind::Identifier if is_column_only(t.text) => Some(RangeSide::Column),
        TokenKind::Identifier => Some(RangeSide::Opaque),
        TokenKind::Number if is_row_only(t.text) => Some(RangeSide::Row),
        TokenKind::FuncName if !left => Some(RangeSide::Opaque),
        TokenKind::Punct if left && t.text == ")" => Some(RangeSide::Opaque),
        _ => None,
    }
}

fn operators(toks: &[Token<'_>], close: &[Option<usize>], diags: &mut Vec<Diagnostic>) {
    use DiagnosticCode::InvalidOperatorSequence as Ios;

    let mut depth = 0usize;
    for (i, t) in toks.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| &toks[p]);
        let next = toks.get(i + 1);
        let is_marker = i == 0 && t.is_operator("=");

        if t.is_punct("(") {
            depth += 1;
        } else if t.is_punct(")") {
            depth = depth.saturating_sub(1);
        }

        match t.kind {
            TokenKind::Operator if t.text == "%" => {
                if !prev.is_some_and(ends_value) {
                    diags.push(Diagnostic::new(Ios, t.span, "`%` needs a preceding operand"));
                }
            }
            TokenKind::Operator => {
                let binary_context = !is_marker && prev.is_some_and(ends_value);
                if !is_marker && !binary_context && !matches!(t.text, "+" | "-") {
                    diags.push(Diagnostic::new(
                        Ios,
                        t.span,
                        format!("operator `{}` is missing its left operand", t.text),
                    ));
                }
                match next {
                    None => diags.push(Diagnostic::new(
                        Ios,
                        t.span,
                        format!("operator `{}` is missing its right operand", t.text),
                    )),
                    Some(n) if n.is_punct(")") || n.is_punct(",") || n.is_punct(":") || n.is_punct("!") => {
                        diags.push(Diagnostic::new(
                            Ios,
                            t.span,
                            format!("operator `{}` is missing its right operand", t.text),
                        ))
                    }
                    _ => {}
                }
            }
            TokenKind::Punct if t.text == "," => {
                if next.is_some_and(|n| n.is_punct(")")) {
                    diags.push(Diagnostic::new(Ios, t.span, "dangling `,` before `)`"));
                } else if depth == 0 {
                    diags.push(Diagnostic::new(Ios, t.span, "`,` outside a parenthesized list"));
                }
            }
            TokenKind::Punct if t.text == "!" => {
                if !prev.is_some_and(|p| p.kind == TokenKind::SheetName) {
                    diags.push(Diagnostic::new(Ios, t.span, "`!` must follow a sheet name"));
                }
                let refers = next.is_some_and(|n| {
                    matches!(n.kind, TokenKind::CellRef | TokenKind::Identifier)
                        || (n.kind == TokenKind::Number && is_row_only(n.text))
                });
                if !refers {
                    diags.push(Diagnostic::new(Ios, t.span, "`!` must be followed by a reference"));
                }
            }
            TokenKind::Punct if t.text == ":" => {
                let left = range_side(prev, true);
                let right = range_side(next, false);
                let ok = match (left, right) {
                    (Some(RangeSide::Opaque), Some(_)) | (Some(_), Some(RangeSide::Opaque)) => true,
                    (Some(l), Some(r)) => l == r,
                    _ => false,
                };
                if !ok {
                    diags.push(Diagnostic::new(Ios, t.span, "malformed range"));
                }
            }
            TokenKind::Punct if t.text == "(" => {
                let is_call = prev.is_some_and(|p| matches!(p.kind, TokenKind::FuncName | TokenKind::Identifier));
                if !is_call && close[i] == Some(i + 1) {
                    diags.push(Diagnostic::new(Ios, t.span, "empty parentheses"));
                }
            }
            _ => {}
        }

        // Two operands in a row with nothing joining them. An identifier
        // directly before `(` is a call to a function outside the catalog.
        if let Some(n) = next {
            if ends_value(t) && starts_value(n) && !(t.kind == TokenKind::Identifier && n.is_punct("(")) {
                diags.push(Diagnostic::new(
                    Ios,
                    Span::new(t.span.start, n.span.end),
                    format!("missing operator between `{}` and `{}`", t.text, n.text),
                ));
            }
        }
    }
}
