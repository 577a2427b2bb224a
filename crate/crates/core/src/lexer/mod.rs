//! Lexical analysis for Excel formulas.
//!
//! The lexer is total: every input, however malformed, produces a token list
//! whose texts concatenate back to the input. Characters that start no known
//! token become single-character [`TokenKind::Error`] tokens.

mod catalog;
mod check;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use catalog::{Arity, CatalogError, FunctionCatalog};
pub(crate) use check::string_terminated;
pub use check::{Diagnostic, DiagnosticCode};

/// Placeholder spellings used by [`Lexer::sketch`].
pub const SKETCH_CELL: &str = "cell";
pub const SKETCH_NUMBER: &str = "number";
pub const SKETCH_STRING: &str = "string";

/// Error literals that lex as a single operand.
const ERROR_LITERALS: &[&str] = &[
    "#GETTING_DATA",
    "#DIV/0!",
    "#VALUE!",
    "#SPILL!",
    "#CALC!",
    "#NULL!",
    "#NAME?",
    "#REF!",
    "#NUM!",
    "#N/A",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    CellRef,
    Number,
    StringLit,
    FuncName,
    Identifier,
    SheetName,
    Punct,
    Operator,
    Whitespace,
    Error,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Half-open byte range `[start, end)` into the source formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub span: Span,
}

impl Token<'_> {
    pub fn is_whitespace(&self) -> bool {
        self.kind == TokenKind::Whitespace
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_operator(&self, op: &str) -> bool {
        self.kind == TokenKind::Operator && self.text == op
    }
}

/// Formula lexer bound to a function catalog.
///
/// The catalog only decides whether an identifier followed by `(` is a
/// [`TokenKind::FuncName`]; unknown call targets lex as identifiers.
#[derive(Debug, Clone, Copy)]
pub struct Lexer<'c> {
    catalog: &'c FunctionCatalog,
}

impl Default for Lexer<'static> {
    fn default() -> Self {
        Self::new(FunctionCatalog::builtin())
    }
}

impl<'c> Lexer<'c> {
    pub fn new(catalog: &'c FunctionCatalog) -> Self {
        Self { catalog }
    }

    pub fn catalog(&self) -> &'c FunctionCatalog {
        self.catalog
    }

    pub fn lex<'a>(&self, src: &'a str) -> Vec<Token<'a>> {
        let mut out = Vec::with_capacity(src.len() / 2 + 1);
        let mut pos = 0;
        while pos < src.len() {
            let rest = &src[pos..];
            let c = rest.chars().next().expect("pos is on a char boundary");
            let single = pos + c.len_utf8();
            let (kind, end) = match c {
                c if c.is_whitespace() => (TokenKind::Whitespace, scan_while(src, pos, char::is_whitespace)),
                '"' => (TokenKind::StringLit, scan_string(src, pos)),
                '\'' => match scan_quoted_name(src, pos) {
                    Some(end) => (TokenKind::SheetName, end),
                    None => (TokenKind::Error, single),
                },
                '0'..='9' => (TokenKind::Number, scan_number(src, pos)),
                '.' if rest[1..].starts_with(|c: char| c.is_ascii_digit()) => {
                    (TokenKind::Number, scan_number(src, pos))
                }
                '#' => match ERROR_LITERALS
                    .iter()
                    .find(|lit| starts_with_ignore_ascii_case(rest, lit))
                {
                    Some(lit) => (TokenKind::Identifier, pos + lit.len()),
                    None => (TokenKind::Error, single),
                },
                '<' if rest.starts_with("<=") || rest.starts_with("<>") => (TokenKind::Operator, pos + 2),
                '>' if rest.starts_with(">=") => (TokenKind::Operator, pos + 2),
                '+' | '-' | '*' | '/' | '^' | '&' | '=' | '<' | '>' | '%' => (TokenKind::Operator, single),
                '(' | ')' | ',' | ':' | '!' => (TokenKind::Punct, single),
                c if is_word_start(c) => {
                    let end = scan_while(src, pos, is_word_char);
                    self.push_word(src, pos, end, &mut out);
                    pos = end;
                    continue;
                }
                _ => (TokenKind::Error, single),
            };
            out.push(Token {
                kind,
                text: &src[pos..end],
                span: Span::new(pos, end),
            });
            pos = end;
        }
        out
    }

    fn push_word<'a>(&self, src: &'a str, start: usize, end: usize, out: &mut Vec<Token<'a>>) {
        let word = &src[start..end];
        let mut push = |kind, s: usize, e: usize| {
            out.push(Token {
                kind,
                text: &src[s..e],
                span: Span::new(s, e),
            })
        };
        if word.bytes().all(|b| b == b'$') {
            for i in start..end {
                push(TokenKind::Error, i, i + 1);
            }
            return;
        }
        if src[end..].starts_with('!') {
            return push(TokenKind::SheetName, start, end);
        }
        if next_non_whitespace(src, end) == Some('(') && self.catalog.contains(word) {
            return push(TokenKind::FuncName, start, end);
        }
        if is_cell_ref(word) {
            return push(TokenKind::CellRef, start, end);
        }
        if let Some(parts) = split_cell_refs(word) {
            let mut s = start;
            for len in parts {
                push(TokenKind::CellRef, s, s + len);
                s += len;
            }
            return;
        }
        if is_dollar_row(word) {
            return push(TokenKind::Number, start, end);
        }
        push(TokenKind::Identifier, start, end)
    }

    /// Replaces cell references, numbers and strings by their type names and
    /// drops whitespace.
    pub fn sketch(&self, formula: &str) -> String {
        let mut out = String::with_capacity(formula.len());
        for tok in self.lex(formula) {
            match tok.kind {
                TokenKind::Whitespace => {}
                TokenKind::CellRef => out.push_str(SKETCH_CELL),
                TokenKind::Number => out.push_str(SKETCH_NUMBER),
                TokenKind::StringLit => out.push_str(SKETCH_STRING),
                _ => out.push_str(tok.text),
            }
        }
        out
    }

    /// Removes whitespace and upper-cases references and names. String
    /// literal contents keep their case.
    pub fn normalize(&self, formula: &str) -> String {
        let mut current = self.normalize_once(formula);
        // Joining tokens can re-lex into different kinds; iterate to a fixpoint
        // so normalize is idempotent on every input.
        loop {
            let next = self.normalize_once(&current);
            if next == current {
                return current;
            }
            current = next;
        }
    }

    fn normalize_once(&self, formula: &str) -> String {
        let mut out = String::with_capacity(formula.len());
        for tok in self.lex(formula) {
            match tok.kind {
                TokenKind::Whitespace => {}
                TokenKind::CellRef | TokenKind::FuncName | TokenKind::Identifier | TokenKind::SheetName => {
                    out.push_str(&tok.text.to_uppercase())
                }
                _ => out.push_str(tok.text),
            }
        }
        out
    }

    pub fn check(&self, formula: &str) -> Vec<Diagnostic> {
        check::check(self, formula)
    }
}

pub fn lex(formula: &str) -> Vec<Token<'_>> {
    Lexer::default().lex(formula)
}

pub fn sketch(formula: &str) -> String {
    Lexer::default().sketch(formula)
}

pub fn normalize(formula: &str) -> String {
    Lexer::default().normalize(formula)
}

pub fn check(formula: &str, catalog: &FunctionCatalog) -> Vec<Diagnostic> {
    Lexer::new(catalog).check(formula)
}

/// Key under which formulas are deduplicated and indexed.
pub fn sketch_key(lexer: &Lexer<'_>, formula: &str) -> String {
    lexer.sketch(&lexer.normalize(formula))
}

fn is_word_start(c: char) -> bool {
    c == '$' || c == '_' || c == '\\' || c.is_alphabetic()
}

fn is_word_char(c: char) -> bool {
    c == '$' || c == '_' || c == '\\' || c == '.' || c.is_alphanumeric()
}

fn scan_while(src: &str, start: usize, pred: impl Fn(char) -> bool) -> usize {
    src[start..]
        .char_indices()
        .find(|&(_, c)| !pred(c))
        .map_or(src.len(), |(i, _)| start + i)
}

fn next_non_whitespace(src: &str, from: usize) -> Option<char> {
    src[from..].chars().find(|c| !c.is_whitespace())
}

fn starts_with_ignore_ascii_case(haystack: &str, needle: &str) -> bool {
    haystack.len() >= needle.len() && haystack.as_bytes()[..needle.len()].eq_ignore_ascii_case(needle.as_bytes())
}

/// String literal with `""` escapes; an unterminated literal runs to the end.
fn scan_string(src: &str, start: usize) -> usize {
    let bytes = src.as_bytes();
    let mut i = start + 1;
    while i < bytes.len() {
        if bytes[i] == b'"' {
            if bytes.get(i + 1) == Some(&b'"') {
                i += 2;
                continue;
            }
            return i + 1;
        }
        i += 1;
    }
    src.len()
}

/// Quoted sheet name with `''` escapes. `None` if the quote never closes.
fn scan_quoted_name(src: &str, start: usize) -> Option<usize> {
    let bytes = src.as_bytes();
    let mut i = start + 1;
    while i < bytes.len() {
        if bytes[i] == b'\'' {
            if bytes.get(i + 1) == Some(&b'\'') {
                i += 2;
                continue;
            }
            return Some(i + 1);
        }
        i += 1;
    }
    None
}

/// `\d*(\.\d*)?([eE][+-]?\d+)?`, starting on a digit or on `.` + digit.
fn scan_number(src: &str, start: usize) -> usize {
    let bytes = src.as_bytes();
    let digits = |mut i: usize| {
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        i
    };
    let mut i = digits(start);
    if i < bytes.len() && bytes[i] == b'.' {
        i = digits(i + 1);
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = digits(j);
        }
    }
    i
}

/// Length of the leading `$?[A-Za-z]{1,3}$?[0-9]+` match, if any.
fn cell_ref_prefix(s: &str) -> Option<usize> {
    let b = s.as_bytes();
    let mut i = 0;
    if b.first() == Some(&b'$') {
        i += 1;
    }
    let letters = b[i..].iter().take_while(|c| c.is_ascii_alphabetic()).count();
    if !(1..=3).contains(&letters) {
        return None;
    }
    i += letters;
    if b.get(i) == Some(&b'$') {
        i += 1;
    }
    let digits = b[i..].iter().take_while(|c| c.is_ascii_digit()).count();
    if digits == 0 {
        return None;
    }
    Some(i + digits)
}

/// Column letters plus row digits, each optionally `$`-anchored (`BC18`, `$A$1`).
pub fn is_cell_ref(word: &str) -> bool {
    cell_ref_prefix(word) == Some(word.len())
}

/// A word made of two or more back-to-back cell references (`A1A10`) splits
/// into them, so a deleted range colon surfaces as adjacent operands.
fn split_cell_refs(word: &str) -> Option<Vec<usize>> {
    let mut parts = Vec::new();
    let mut rest = word;
    while !rest.is_empty() {
        let len = cell_ref_prefix(rest)?;
        parts.push(len);
        rest = &rest[len..];
    }
    (parts.len() >= 2).then_some(parts)
}

fn is_dollar_row(word: &str) -> bool {
    word.strip_prefix('$')
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

/// Bare column reference such as `A` or `$XF` (one to three letters).
pub fn is_column_only(word: &str) -> bool {
    let w = word.strip_prefix('$').unwrap_or(word);
    (1..=3).contains(&w.len()) && w.bytes().all(|b| b.is_ascii_alphabetic())
}

/// Bare row reference such as `5` or `$12`.
pub fn is_row_only(word: &str) -> bool {
    let w = word.strip_prefix('$').unwrap_or(word);
    !w.is_empty() && w.bytes().all(|b| b.is_ascii_digit())
}
