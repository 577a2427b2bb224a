//! Formula-aware tokenization.
//!
//! Pre-tokenization isolates punctuation, whitespace, built-in function names
//! and single digits as atomic pieces; byte-pair merges are learned and
//! applied only inside the remaining letter runs (string contents,
//! identifiers, sheet names, column letters). Everything is lower-cased.

mod bpe;
mod model;

use thiserror::Error;

use crate::lexer::{Lexer, TokenKind};

pub use bpe::{train_bpe, BpeTrainer};
pub use model::{Specials, TokenizerModel};

/// Printable stand-in for one space character.
pub const SPACE_MARKER: &str = "\u{2423}";
pub const MASK_TOKEN: &str = "<mask>";
pub const PAD_TOKEN: &str = "<pad>";
pub const UNKNOWN_TOKEN: &str = "<unk>";
/// Production vocabulary size; desk-scale runs usually pick 512..2048.
pub const DEFAULT_VOCAB_BUDGET: usize = 16_000;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("vocabulary budget {budget} is below the minimum of {floor} (specials, alphabet and atomic tokens)")]
    BudgetTooSmall { budget: usize, floor: usize },
    #[error("token id {id} at position {position} is outside the vocabulary (size {vocab_size})")]
    IdOutOfRange {
        position: usize,
        id: u32,
        vocab_size: usize,
    },
    #[error("invalid tokenizer model: {0}")]
    InvalidModel(String),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PreToken {
    pub text: String,
    /// BPE never merges into or through an atomic piece.
    pub atomic: bool,
}

impl PreToken {
    fn atomic(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            atomic: true,
        }
    }

    fn segment(text: String) -> Self {
        Self { text, atomic: false }
    }
}

/// Pre-tokenizes with the built-in function catalog.
pub fn pretokenize(formula: &str) -> Vec<PreToken> {
    pretokenize_with(&Lexer::default(), formula)
}

pub fn pretokenize_with(lexer: &Lexer<'_>, formula: &str) -> Vec<PreToken> {
    let mut out = Vec::new();
    for tok in lexer.lex(formula) {
        match tok.kind {
            TokenKind::Whitespace => {
                out.extend(tok.text.chars().map(|_| PreToken::atomic(SPACE_MARKER)));
            }
            TokenKind::FuncName => out.push(PreToken::atomic(tok.text.to_lowercase())),
            TokenKind::Operator | TokenKind::Punct => out.push(PreToken::atomic(tok.text)),
            _ => split_residual(tok.text, &mut out),
        }
    }
    out
}

fn split_residual(text: &str, out: &mut Vec<PreToken>) {
    let mut run = String::new();
    let flush = |run: &mut String, out: &mut Vec<PreToken>| {
        if !run.is_empty() {
            out.push(PreToken::segment(std::mem::take(run)));
        }
    };
    for c in text.chars() {
        if c.is_alphabetic() {
            run.extend(c.to_lowercase());
            continue;
        }
        flush(&mut run, out);
        if c.is_whitespace() {
            out.push(PreToken::atomic(SPACE_MARKER));
        } else {
            out.push(PreToken::atomic(c.to_lowercase().collect::<String>()));
        }
    }
    flush(&mut run, out);
}
