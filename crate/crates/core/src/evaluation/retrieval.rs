use std::collections::HashMap;
use std::io::BufRead;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::similarity::{mask_constants_with, token_edit_similarity_with};
use crate::lexer::Lexer;
use crate::seed::rng_from;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalPair {
    pub formula_a: String,
    pub formula_b: String,
    pub target_similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRow {
    pub formula: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("no embedding for formula `{0}`")]
    MissingEmbedding(String),
    #[error("embedding for `{formula}` has dimension {got}, expected {expected}")]
    DimensionMismatch {
        formula: String,
        expected: usize,
        got: usize,
    },
    #[error("embedding for `{0}` has zero norm; cosine similarity is undefined")]
    ZeroNorm(String),
    #[error("need at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("{0} values are constant; correlation is undefined")]
    ZeroVariance(&'static str),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate embedding for formula `{0}`")]
    DuplicateEmbedding(String),
}

/// Builds `count` random pairs over the constant-masked formulas, labelled
/// with their token edit similarity.
pub fn make_retrieval_pairs(formulas: &[String], count: usize, seed: u64, lexer: &Lexer<'_>) -> Vec<RetrievalPair> {
    if formulas.len() < 2 {
        return Vec::new();
    }
    let masked: Vec<String> = formulas.iter().map(|f| mask_constants_with(lexer, f)).collect();
    let mut rng = rng_from(seed);
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..masked.len());
            let mut j = rng.random_range(0..masked.len() - 1);
            if j >= i {
                j += 1;
            }
            RetrievalPair {
                target_similarity: token_edit_similarity_with(lexer, &masked[i], &masked[j]),
                formula_a: masked[i].clone(),
                formula_b: masked[j].clone(),
            }
        })
        .collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Pearson correlation. Errors when either axis is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, RetrievalError> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return Err(RetrievalError::TooFewPairs(xs.len()));
    }
    // tested on the values: the float mean of equal values can be off by
    // an ulp, leaving a spurious non-zero variance
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) {
        return Err(RetrievalError::ZeroVariance("cosine"));
    }
    if constant(ys) {
        return Err(RetrievalError::ZeroVariance("target"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson r between embedding cosine similarity and the target similarity.
pub fn retrieval_eval(pairs: &[RetrievalPair], embeddings: &HashMap<String, Vec<f64>>) -> Result<f64, RetrievalError> {
    if pairs.len() < 2 {
        return Err(RetrievalError::TooFewPairs(pairs.len()));
    }
    let mut dim = None;
    let mut lookup = |f: &str| -> Result<&Vec<f64>, RetrievalError> {
        let v = embeddings
            .get(f)
            .ok_or_else(|| RetrievalError::MissingEmbedding(f.to_owned()))?;
        let expected = *dim.get_or_insert(v.len());
        if v.len() != expected {
            return Err(RetrievalError::DimensionMismatch {
                formula: f.to_owned(),
                expected,
                got: v.len(),
            });
        }
        if norm(v) == 0.0 {
            return Err(RetrievalError::ZeroNorm(f.to_owned()));
        }
        Ok(v)
    };
    let mut cos = Vec::with_capacity(pairs.len());
    for p in pairs {
        let a = lookup(&p.formula_a)?;
        let b = lookup(&p.formula_b)?;
        cos.push(cosine(a, b));
    }
    let targets: Vec<f64> = pairs.iter().map(|p| p.target_similarity).collect();
    pearson(&cos, &targets)
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<HashMap<String, Vec<f64>>, RetrievalError> {
    let mut out = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| RetrievalError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: EmbeddingRow = serde_json::from_str(&line).map_err(|e| RetrievalError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if out.insert(row.formula.clone(), row.vector).is_some() {
            return Err(RetrievalError::DuplicateEmbedding(row.formula));
        }
    }
    Ok(out)
}
