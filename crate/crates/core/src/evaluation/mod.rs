//! Repair, completion and retrieval metrics, the benchmark harness and
//! fine-tuning data synthesis.

mod finetune;
mod harness;
mod retrieval;
mod similarity;

use thiserror::Error;

use crate::lexer::{sketch_key, Lexer};

pub use finetune::{
    completion_benchmark, completion_finetune_task, completion_prefix_tokens, completion_tasks_for,
    gen_completion_finetune, gen_repair_finetune, make_completion_prefix, repair_outcome, reserve_split, reserved_mask,
    source_id, CompletionTask, RepairOutcome, RepairReport, RepairTask, BENCHMARK_PREFIX_FRACTIONS,
    FINETUNE_PREFIX_FRACTIONS, RESERVED_REPAIR_TASKS,
};
pub use harness::{
    evaluate, CandidateProvider, EchoProvider, EmptyProvider, EvalReport, EvalTask, Metric, MetricValue, PredictionRow,
    ReplayProvider, TaskKind, TaskResult,
};
pub use retrieval::{
    cosine, make_retrieval_pairs, pearson, read_embeddings, retrieval_eval, EmbeddingRow, RetrievalError, RetrievalPair,
};
pub use similarity::{
    levenshtein, mask_constants, mask_constants_with, sequence_similarity, token_edit_similarity,
    token_edit_similarity_with,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("prefix fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("formula encodes to {tokens} token(s); a prefix needs at least 2")]
    TooFewTokens { tokens: usize },
    #[error("tokenizer: {0}")]
    Tokenizer(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// True if one of the first `k` candidates equals the truth after
/// normalization. `k = 0` considers no candidates.
pub fn exact_match_at_k<S: AsRef<str>>(candidates: &[S], ground_truth: &str, k: usize) -> bool {
    hit_at_k(Metric::ExactMatch, &Lexer::default(), candidates, ground_truth, k)
}

/// Like [`exact_match_at_k`] but compares sketches, so constants and
/// references only need to agree in type.
pub fn sketch_match_at_k<S: AsRef<str>>(candidates: &[S], ground_truth: &str, k: usize) -> bool {
    hit_at_k(Metric::SketchMatch, &Lexer::default(), candidates, ground_truth, k)
}

pub fn hit_at_k<S: AsRef<str>>(
    metric: Metric,
    lexer: &Lexer<'_>,
    candidates: &[S],
    ground_truth: &str,
    k: usize,
) -> bool {
    let key = |f: &str| match metric {
        Metric::ExactMatch => lexer.normalize(f),
        Metric::SketchMatch => sketch_key(lexer, f),
    };
    let truth = key(ground_truth);
    candidates.iter().take(k).any(|c| key(c.as_ref()) == truth)
}
