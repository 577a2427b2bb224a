use crate::lexer::{Lexer, TokenKind, SKETCH_NUMBER, SKETCH_STRING};

/// Edit distance with unit insert, delete and substitute costs.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    // a shared prefix or suffix never changes the distance
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    // a single row over the shorter input; short rows live on the stack
    let mut stack = [0usize; 32];
    let mut heap = Vec::new();
    let row: &mut [usize] = if b.len() < stack.len() {
        &mut stack[..=b.len()]
    } else {
        heap.resize(b.len() + 1, 0);
        &mut heap
    };
    for (j, r) in row.iter_mut().enumerate() {
        *r = j;
    }
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (diag + usize::from(x != y)).min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[b.len()]
}

/// `1 - d / max(len)` over the non-whitespace lexer tokens of both formulas.
/// Two empty formulas are identical.
pub fn token_edit_similarity(a: &str, b: &str) -> f64 {
    token_edit_similarity_with(&Lexer::default(), a, b)
}

pub fn token_edit_similarity_with(lexer: &Lexer<'_>, a: &str, b: &str) -> f64 {
    let ta = solid_texts(lexer, a);
    let tb = solid_texts(lexer, b);
    sequence_similarity(&ta, &tb)
}

pub fn sequence_similarity<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

fn solid_texts<'a>(lexer: &Lexer<'_>, formula: &'a str) -> Vec<&'a str> {
    lexer
        .lex(formula)
        .into_iter()
        .filter(|t| !t.is_whitespace())
        .map(|t| t.text)
        .collect()
}

/// Replaces numbers and strings with placeholders, keeping references.
pub fn mask_constants(formula: &str) -> String {
    mask_constants_with(&Lexer::default(), formula)
}

pub fn mask_constants_with(lexer: &Lexer<'_>, formula: &str) -> String {
    let mut out = String::with_capacity(formula.len());
    for t in lexer.lex(formula) {
        out.push_str(match t.kind {
            TokenKind::Number => SKETCH_NUMBER,
            TokenKind::StringLit => SKETCH_STRING,
            _ => t.text,
        });
    }
    out
}
