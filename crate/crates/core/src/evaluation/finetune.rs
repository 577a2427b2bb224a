use rand::seq::{index, IndexedRandom};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::curation::FormulaRecord;
use crate::exec::Execution;
use crate::lexer::{Diagnostic, Lexer};
use crate::objectives::user_noise;
use crate::seed::{record_seed, rng_from};
use crate::tokenizer::TokenizerModel;

/// Prefix fractions sampled for completion fine-tuning data.
pub const FINETUNE_PREFIX_FRACTIONS: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
/// Prefix fractions of the completion benchmark.
pub const BENCHMARK_PREFIX_FRACTIONS: [f64; 3] = [0.5, 0.75, 0.90];
/// Size of the held-out synthetic repair benchmark.
pub const RESERVED_REPAIR_TASKS: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairTask {
    pub buggy: String,
    pub ground_truth: String,
    pub source_id: String,
    /// Noise that produced `buggy`, when synthesized.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub noise: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionTask {
    pub source_id: String,
    pub formula: String,
    pub prefix_fraction: f64,
    pub prefix: String,
}

/// `round_half_up(fraction * n)` clamped to `[1, n - 1]`.
pub fn completion_prefix_tokens(n: usize, fraction: f64) -> usize {
    let scaled = (fraction * 1000.0).round() as usize * n;
    ((scaled + 500) / 1000).clamp(1, n.saturating_sub(1).max(1))
}

/// Cuts a formula after whole tokenizer tokens. The prefix is the decoded
/// form, so it is lower-cased like everything the tokenizer produces.
pub fn make_completion_prefix(
    source_id: &str,
    formula: &str,
    fraction: f64,
    model: &TokenizerModel,
) -> Result<CompletionTask, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidFraction(fraction));
    }
    let ids = model.encode(formula);
    if ids.len() < 2 {
        return Err(EvalError::TooFewTokens { tokens: ids.len() });
    }
    let keep = completion_prefix_tokens(ids.len(), fraction);
    let prefix = model
        .decode(&ids[..keep])
        .map_err(|e| EvalError::Tokenizer(e.to_string()))?;
    Ok(CompletionTask {
        source_id: source_id.to_owned(),
        formula: formula.to_owned(),
        prefix_fraction: fraction,
        prefix,
    })
}

pub fn source_id(record: &FormulaRecord, ordinal: u64) -> String {
    match &record.cell {
        Some(cell) => format!("{}/{}/{}#{ordinal}", record.workbook_id, record.sheet_id, cell),
        None => format!("{}/{}#{ordinal}", record.workbook_id, record.sheet_id),
    }
}

/// Splits off `reserved` records chosen uniformly at random. Both halves
/// keep input order and are disjoint by position.
pub fn reserve_split<T: Clone>(items: &[T], reserved: usize, seed: u64) -> (Vec<T>, Vec<T>) {
    let held = reserved_mask(items.len(), reserved, seed);
    let mut train = Vec::with_capacity(items.len());
    let mut test = Vec::new();
    for (item, h) in items.iter().zip(held) {
        if h {
            test.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    (train, test)
}

/// The positions [`reserve_split`] holds out, for callers that stream.
pub fn reserved_mask(n: usize, reserved: usize, seed: u64) -> Vec<bool> {
    let mut rng = rng_from(seed);
    let mut held = vec![false; n];
    for i in index::sample(&mut rng, n, reserved.min(n)) {
        held[i] = true;
    }
    held
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RepairReport {
    pub inputs: usize,
    pub produced: usize,
    /// Inputs with diagnostics: (ordinal, first diagnostic).
    pub ill_formed: Vec<(u64, Diagnostic)>,
    /// Corruptions that vanished under normalization.
    pub unchanged: usize,
}

/// What became of one record in repair data synthesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RepairOutcome {
    Task(RepairTask),
    /// The input already fails a check.
    IllFormed(Diagnostic),
    /// No operator applied, or the corruption vanished under normalization.
    Unchanged,
}

/// Corrupts one record with a user-inspired noise operator. `ordinal` is
/// the record's stream position and feeds its seed.
pub fn repair_outcome(record: &FormulaRecord, ordinal: u64, seed: u64, lexer: &Lexer<'_>) -> RepairOutcome {
    if let Some(d) = lexer.check(&record.formula).into_iter().next() {
        return RepairOutcome::IllFormed(d);
    }
    let mut rng = rng_from(record_seed(seed, &record.workbook_id, &record.sheet_id, ordinal));
    let Ok(ex) = user_noise(&record.formula, lexer, &mut rng) else {
        return RepairOutcome::Unchanged;
    };
    if lexer.normalize(&ex.input) == lexer.normalize(&record.formula) {
        return RepairOutcome::Unchanged;
    }
    RepairOutcome::Task(RepairTask {
        buggy: ex.input,
        ground_truth: record.formula.clone(),
        source_id: source_id(record, ordinal),
        noise: ex.detail,
    })
}

/// Corrupts each well-formed formula with one user-inspired noise operator.
pub fn gen_repair_finetune(
    records: &[FormulaRecord],
    seed: u64,
    lexer: &Lexer<'_>,
    exec: Execution,
) -> (Vec<RepairTask>, RepairReport) {
    let outcomes = exec.map(records, |i, r| repair_outcome(r, i as u64, seed, lexer));
    let mut report = RepairReport {
        inputs: records.len(),
        ..RepairReport::default()
    };
    let mut tasks = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            RepairOutcome::Task(t) => tasks.push(t),
            RepairOutcome::IllFormed(d) => report.ill_formed.push((i as u64, d)),
            RepairOutcome::Unchanged => report.unchanged += 1,
        }
    }
    report.produced = tasks.len();
    (tasks, report)
}

/// A completion fine-tuning task at a prefix fraction drawn from
/// [`FINETUNE_PREFIX_FRACTIONS`]; `None` for formulas under two tokens.
pub fn completion_finetune_task(
    record: &FormulaRecord,
    ordinal: u64,
    model: &TokenizerModel,
    seed: u64,
) -> Option<CompletionTask> {
    let mut rng = rng_from(record_seed(seed, &record.workbook_id, &record.sheet_id, ordinal));
    let fraction = *FINETUNE_PREFIX_FRACTIONS.choose(&mut rng).expect("non-empty");
    make_completion_prefix(&source_id(record, ordinal), &record.formula, fraction, model).ok()
}

pub fn gen_completion_finetune(
    records: &[FormulaRecord],
    model: &TokenizerModel,
    seed: u64,
    exec: Execution,
) -> Vec<CompletionTask> {
    exec.map(records, |i, r| completion_finetune_task(r, i as u64, model, seed))
        .into_iter()
        .flatten()
        .collect()
}

/// Completion benchmark: each formula at each fraction.
pub fn completion_benchmark(
    records: &[FormulaRecord],
    fractions: &[f64],
    model: &TokenizerModel,
) -> Vec<CompletionTask> {
    records
        .iter()
        .enumerate()
        .flat_map(|(i, r)| completion_tasks_for(r, i as u64, fractions, model))
        .collect()
}

/// Benchmark tasks for one record; fractions that cannot be met are skipped.
pub fn completion_tasks_for(
    record: &FormulaRecord,
    ordinal: u64,
    fractions: &[f64],
    model: &TokenizerModel,
) -> Vec<CompletionTask> {
    let id = source_id(record, ordinal);
    fractions
        .iter()
        .filter_map(|&f| make_completion_prefix(&id, &record.formula, f, model).ok())
        .collect()
}
