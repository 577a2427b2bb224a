//! Non-neural candidate providers over a sketch index.
//!
//! These exist so the evaluation harness has something deterministic to
//! score end to end. They are not meant to be competitive with a model.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{levenshtein, sequence_similarity, CandidateProvider, EvalTask, TaskKind};
use crate::exec::Execution;
use crate::lexer::{sketch_key, Lexer, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub formula: String,
    pub frequency: u64,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("invalid index: {0}")]
    Invalid(String),
    #[error("malformed index file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    total_formulas: u64,
    buckets: BTreeMap<String, Vec<IndexEntry>>,
}

/// Per-formula data derived on build or load, never persisted.
#[derive(Debug, Clone)]
struct Cached {
    bucket: usize,
    formula: String,
    lower: String,
    frequency: u64,
    tokens: Vec<String>,
    valid: bool,
}

/// Distinct formulas grouped by sketch, each bucket sorted by frequency
/// (descending) then text.
#[derive(Debug, Clone)]
pub struct SketchIndex {
    total: u64,
    buckets: BTreeMap<String, Vec<IndexEntry>>,
    sketches: Vec<String>,
    sketch_tokens: Vec<Vec<String>>,
    cache: Vec<Cached>,
}

impl PartialEq for SketchIndex {
    fn eq(&self, other: &Self) -> bool {
        self.total == other.total && self.buckets == other.buckets
    }
}

fn solid_tokens(lexer: &Lexer<'_>, s: &str) -> Vec<String> {
    lexer
        .lex(s)
        .into_iter()
        .filter(|t| !t.is_whitespace())
        .map(|t| t.text.to_owned())
        .collect()
}

fn rank(a: &IndexEntry, b: &IndexEntry) -> Ordering {
    b.frequency.cmp(&a.frequency).then_with(|| a.formula.cmp(&b.formula))
}

impl SketchIndex {
    pub fn empty() -> Self {
        Self::from_buckets(0, BTreeMap::new(), &Lexer::default())
    }

    fn from_buckets(total: u64, buckets: BTreeMap<String, Vec<IndexEntry>>, lexer: &Lexer<'_>) -> Self {
        let sketches: Vec<String> = buckets.keys().cloned().collect();
        let sketch_tokens = sketches.iter().map(|s| solid_tokens(lexer, s)).collect();
        let mut cache = Vec::new();
        for (b, entries) in buckets.values().enumerate() {
            for e in entries {
                cache.push(Cached {
                    bucket: b,
                    formula: e.formula.clone(),
                    lower: e.formula.to_lowercase(),
                    frequency: e.frequency,
                    tokens: solid_tokens(lexer, &e.formula),
                    valid: lexer.check(&e.formula).is_empty(),
                });
            }
        }
        Self {
            total,
            buckets,
            sketches,
            sketch_tokens,
            cache,
        }
    }

    pub fn build<S: AsRef<str> + Sync>(corpus: &[S], lexer: &Lexer<'_>, exec: Execution) -> Self {
        let keys = exec.map(corpus, |_, f| sketch_key(lexer, f.as_ref()));
        let mut counts: HashMap<(&str, &str), u64> = HashMap::new();
        for (f, k) in corpus.iter().zip(&keys) {
            *counts.entry((k.as_str(), f.as_ref())).or_default() += 1;
        }
        let mut buckets: BTreeMap<String, Vec<IndexEntry>> = BTreeMap::new();
        for ((k, f), n) in counts {
            buckets.entry(k.to_owned()).or_default().push(IndexEntry {
                formula: f.to_owned(),
                frequency: n,
            });
        }
        for entries in buckets.values_mut() {
            entries.sort_by(rank);
        }
        Self::from_buckets(corpus.len() as u64, buckets, lexer)
    }

    pub fn total_formulas(&self) -> u64 {
        self.total
    }

    pub fn distinct_formulas(&self) -> usize {
        self.cache.len()
    }

    pub fn buckets(&self) -> &BTreeMap<String, Vec<IndexEntry>> {
        &self.buckets
    }

    pub fn bucket(&self, sketch: &str) -> &[IndexEntry] {
        self.buckets.get(sketch).map_or(&[], Vec::as_slice)
    }

    pub fn to_json(&self) -> String {
        let file = IndexFile {
            total_formulas: self.total,
            buckets: self.buckets.clone(),
        };
        serde_json::to_string(&file).expect("index serializes") + "\n"
    }

    pub fn from_json(text: &str, lexer: &Lexer<'_>) -> Result<Self, IndexError> {
        let file: IndexFile = serde_json::from_str(text)?;
        let mut sum = 0u64;
        for (sketch, entries) in &file.buckets {
            if entries.is_empty() {
                return Err(IndexError::Invalid(format!("empty bucket `{sketch}`")));
            }
            if let Some(e) = entries.iter().find(|e| e.frequency == 0) {
                return Err(IndexError::Invalid(format!("`{}` has frequency 0", e.formula)));
            }
            if entries.windows(2).any(|w| rank(&w[0], &w[1]) != Ordering::Less) {
                return Err(IndexError::Invalid(format!("bucket `{sketch}` is not sorted")));
            }
            sum += entries.iter().map(|e| e.frequency).sum::<u64>();
        }
        if sum != file.total_formulas {
            return Err(IndexError::Invalid(format!(
                "frequencies sum to {sum} but total_formulas is {}",
                file.total_formulas
            )));
        }
        Ok(Self::from_buckets(file.total_formulas, file.buckets, lexer))
    }

    pub fn load(path: impl AsRef<Path>, lexer: &Lexer<'_>) -> Result<Self, IndexError> {
        Self::from_json(&fs::read_to_string(path)?, lexer)
    }
}

pub fn build_index<S: AsRef<str> + Sync>(corpus: &[S]) -> SketchIndex {
    SketchIndex::build(corpus, &Lexer::default(), Execution::Sequential)
}

/// Nearest-neighbour repair search.
#[derive(Debug, Clone, Copy)]
pub struct RepairSearch<'i, 'c> {
    index: &'i SketchIndex,
    lexer: Lexer<'c>,
    exec: Execution,
    max_buckets: Option<usize>,
}

impl<'i, 'c> RepairSearch<'i, 'c> {
    pub fn new(index: &'i SketchIndex, lexer: Lexer<'c>) -> Self {
        Self {
            index,
            lexer,
            exec: Execution::Sequential,
            max_buckets: None,
        }
    }

    pub fn execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    /// Only scan formulas in the `n` buckets whose sketches are closest to
    /// the query's sketch. `None` (the default) scans everything.
    pub fn max_buckets(mut self, n: Option<usize>) -> Self {
        self.max_buckets = n;
        self
    }

    /// The `k` well-formed formulas most similar to `buggy` by token edit
    /// similarity; ties go to higher frequency, then lexicographic order.
    pub fn candidates(&self, buggy: &str, k: usize) -> Vec<String> {
        let query = solid_tokens(&self.lexer, buggy);
        let allowed = self.max_buckets.map(|n| self.nearest_buckets(buggy, n));
        let scores = self.exec.map(&self.index.cache, |_, c| {
            let in_scope = allowed.as_ref().is_none_or(|a| a[c.bucket]);
            (c.valid && in_scope).then(|| sequence_similarity(&query, &c.tokens))
        });
        let mut hits: Vec<(f64, &Cached)> = scores
            .into_iter()
            .zip(&self.index.cache)
            .filter_map(|(s, c)| Some((s?, c)))
            .collect();
        hits.sort_by(|(sa, a), (sb, b)| {
            sb.total_cmp(sa)
                .then_with(|| b.frequency.cmp(&a.frequency))
                .then_with(|| a.formula.cmp(&b.formula))
        });
        hits.into_iter().take(k).map(|(_, c)| c.formula.clone()).collect()
    }

    fn nearest_buckets(&self, buggy: &str, n: usize) -> Vec<bool> {
        let q = solid_tokens(&self.lexer, &sketch_key(&self.lexer, buggy));
        let mut order: Vec<(usize, usize)> = self
            .index
            .sketch_tokens
            .iter()
            .enumerate()
            .map(|(i, s)| (levenshtein(&q, s), i))
            .collect();
        order.sort_unstable();
        let mut allowed = vec![false; self.index.sketches.len()];
        for &(_, i) in order.iter().take(n) {
            allowed[i] = true;
        }
        allowed
    }
}

pub fn repair_candidates(index: &SketchIndex, buggy: &str, k: usize) -> Vec<String> {
    RepairSearch::new(index, Lexer::default()).candidates(buggy, k)
}

/// Formulas extending `prefix` (case-insensitively), most frequent first.
/// Without any such formula, falls back to formulas whose sketch extends
/// the prefix's sketch, ignoring a trailing partial operand.
pub fn completion_candidates_with(index: &SketchIndex, lexer: &Lexer<'_>, prefix: &str, k: usize) -> Vec<String> {
    let lower = prefix.to_lowercase();
    let mut hits: Vec<&Cached> = index.cache.iter().filter(|c| c.lower.starts_with(&lower)).collect();
    if hits.is_empty() {
        let stem = sketch_stem(lexer, prefix);
        hits = index
            .cache
            .iter()
            .filter(|c| index.sketches[c.bucket].starts_with(&stem))
            .collect();
    }
    hits.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.formula.cmp(&b.formula)));
    hits.into_iter().take(k).map(|c| c.formula.clone()).collect()
}

pub fn completion_candidates(index: &SketchIndex, prefix: &str, k: usize) -> Vec<String> {
    completion_candidates_with(index, &Lexer::default(), prefix, k)
}

fn sketch_stem(lexer: &Lexer<'_>, prefix: &str) -> String {
    let toks = lexer.lex(prefix);
    let keep = match toks.iter().rposition(|t| !t.is_whitespace()) {
        Some(i) if !matches!(toks[i].kind, TokenKind::Punct | TokenKind::Operator) => toks[i].span.start,
        _ => prefix.len(),
    };
    sketch_key(lexer, &prefix[..keep])
}

/// Baseline answers for harness tasks: nearest neighbours for repair,
/// prefix lookup for completion.
pub struct BaselineProvider<'i, 'c> {
    search: RepairSearch<'i, 'c>,
}

impl<'i, 'c> BaselineProvider<'i, 'c> {
    pub fn new(index: &'i SketchIndex, lexer: Lexer<'c>) -> Self {
        Self {
            search: RepairSearch::new(index, lexer),
        }
    }

    pub fn with_search(search: RepairSearch<'i, 'c>) -> Self {
        Self { search }
    }
}

impl CandidateProvider for BaselineProvider<'_, '_> {
    fn candidates(&self, task: &EvalTask, k: usize) -> Result<Vec<String>, String> {
        Ok(match task.kind {
            TaskKind::Repair => self.search.candidates(&task.input, k),
            TaskKind::Completion => completion_candidates_with(self.search.index, &self.search.lexer, &task.input, k),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_bucket_frequency() {
        let idx = build_index(&["=SUM(A1:A2)", "=SUM(B1:B9)", "=TODAY()"]);
        let b = idx.bucket("=SUM(cell:cell)");
        assert_eq!(b.iter().map(|e| e.frequency).sum::<u64>(), 2);
        assert_eq!(idx.total_formulas(), 3);
        assert_eq!(idx.bucket("=TODAY()").len(), 1);
    }

    #[test]
    fn empty_and_duplicates() {
        let idx = build_index::<&str>(&[]);
        assert!(idx.buckets().is_empty());
        assert!(repair_candidates(&idx, "=A1", 3).is_empty());
        let idx = build_index(&["=A1", "=A1", "=A1", "=B1"]);
        let b = idx.bucket("=cell");
        assert_eq!(b.len(), 2);
        assert_eq!(
            b[0],
            IndexEntry {
                formula: "=A1".into(),
                frequency: 3
            }
        );
    }

    #[test]
    fn repair_ranking() {
        let corpus = [
            "=SUM(A1:A10)",
            "=SUM(A1:A9)+1",
            "=AVERAGE(B1:B3)",
            "=SUM(A1:A10",
            "=MAX(1,2)",
        ];
        let idx = build_index(&corpus);
        assert_eq!(repair_candidates(&idx, "=AVERAGE(B1:B3)", 1), vec!["=AVERAGE(B1:B3)"]);
        let top = repair_candidates(&idx, "=SUM(A1:A10", 2);
        assert_eq!(top[0], "=SUM(A1:A10)");
        // the ill-formed corpus entry is never offered
        let all = repair_candidates(&idx, "=SUM(A1:A10", 100);
        assert_eq!(all.len(), 4);
        assert!(!all.contains(&"=SUM(A1:A10".to_string()));
    }

    #[test]
    fn frequency_breaks_similarity_ties() {
        let idx = build_index(&["=B1", "=C1", "=C1"]);
        assert_eq!(repair_candidates(&idx, "=A1", 2), vec!["=C1", "=B1"]);
    }

    #[test]
    fn completion_ranking() {
        let mut corpus = vec!["=B2<=EDATE(TODAY(),-33)"; 2];
        corpus.extend(vec!["=B2<=EDATE(TODAY(),-5)"; 5]);
        corpus.push("=SUM(A1)");
        let idx = build_index(&corpus);
        assert_eq!(
            completion_candidates(&idx, "=B2<=EDATE(", 5),
            vec!["=B2<=EDATE(TODAY(),-5)", "=B2<=EDATE(TODAY(),-33)"]
        );
        assert!(completion_candidates(&idx, "=VLOOKUP(", 5).is_empty());
        assert_eq!(completion_candidates(&idx, "=sum(a", 5), vec!["=SUM(A1)"]);
        // sketch backoff: no literal match, same shape
        assert_eq!(completion_candidates(&idx, "=SUM(Q7", 5), vec!["=SUM(A1)"]);
        assert_eq!(
            completion_candidates(&idx, "=C9<=EDATE(", 1),
            vec!["=B2<=EDATE(TODAY(),-5)"]
        );
    }

    #[test]
    fn json_round_trip_and_validation() {
        let idx = build_index(&["=SUM(A1:A2)", "=SUM(B1:B9)", "=SUM(B1:B9)", "=TODAY()"]);
        let json = idx.to_json();
        let back = SketchIndex::from_json(&json, &Lexer::default()).unwrap();
        assert_eq!(back, idx);
        assert_eq!(repair_candidates(&back, "=TODAY(", 1), vec!["=TODAY()"]);
        let bad = json.replace("\"total_formulas\":4", "\"total_formulas\":5");
        assert!(SketchIndex::from_json(&bad, &Lexer::default()).is_err());
    }

    #[test]
    fn bucket_prefilter_limits_scope() {
        let idx = build_index(&["=SUM(A1:A2)", "=TODAY()", "=A1+B1"]);
        let lexer = Lexer::default();
        let s = RepairSearch::new(&idx, lexer).max_buckets(Some(1));
        assert_eq!(s.candidates("=SUM(C1:C2", 5), vec!["=SUM(A1:A2)"]);
        let par = RepairSearch::new(&idx, lexer).execution(Execution::Workers(2));
        assert_eq!(
            par.candidates("=SUM(C1:C2", 5),
            RepairSearch::new(&idx, lexer).candidates("=SUM(C1:C2", 5)
        );
    }
}
