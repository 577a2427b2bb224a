//! Corpus ingestion and sketch-based deduplication.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::lexer::{sketch_key, Lexer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaRecord {
    pub workbook_id: String,
    pub sheet_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<String>,
    pub formula: String,
}

impl FormulaRecord {
    pub fn new(workbook_id: &str, sheet_id: &str, formula: &str) -> Self {
        Self {
            workbook_id: workbook_id.into(),
            sheet_id: sheet_id.into(),
            cell: None,
            formula: formula.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// Not a JSON object with the expected fields.
    Malformed,
    EmptyWorkbookId,
    EmptySheetId,
    EmptyFormula,
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SkipReason::Malformed => "malformed JSON record",
            SkipReason::EmptyWorkbookId => "empty workbook_id",
            SkipReason::EmptySheetId => "empty sheet_id",
            SkipReason::EmptyFormula => "empty formula",
        })
    }
}

/// Skipped-line summary. Blank lines are ignored and not counted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub lines: usize,
    pub accepted: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
    /// 1-based line numbers of the first few skipped lines.
    pub first_skipped: Vec<(usize, SkipReason)>,
}

const SKIP_SAMPLES: usize = 10;

impl IngestReport {
    pub fn skipped_total(&self) -> usize {
        self.skipped.values().sum()
    }
}

/// Incremental line parser; [`ingest`] drives it over a reader.
#[derive(Debug, Default)]
pub struct Ingester {
    report: IngestReport,
}

impl Ingester {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_line(&mut self, line: &str) -> Option<FormulaRecord> {
        self.report.lines += 1;
        if line.trim().is_empty() {
            return None;
        }
        match parse_record(line) {
            Ok(rec) => {
                self.report.accepted += 1;
                Some(rec)
            }
            Err(reason) => {
                *self.report.skipped.entry(reason).or_default() += 1;
                if self.report.first_skipped.len() < SKIP_SAMPLES {
                    self.report.first_skipped.push((self.report.lines, reason));
                }
                None
            }
        }
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    pub fn finish(self) -> IngestReport {
        self.report
    }
}

pub fn parse_record(line: &str) -> Result<FormulaRecord, SkipReason> {
    let rec: FormulaRecord = serde_json::from_str(line).map_err(|_| SkipReason::Malformed)?;
    if rec.workbook_id.is_empty() {
        Err(SkipReason::EmptyWorkbookId)
    } else if rec.sheet_id.is_empty() {
        Err(SkipReason::EmptySheetId)
    } else if rec.formula.is_empty() {
        Err(SkipReason::EmptyFormula)
    } else {
        Ok(rec)
    }
}

/// Reads JSONL records. Only I/O errors (including invalid UTF-8) are fatal.
pub fn ingest<R: BufRead>(reader: R) -> io::Result<(Vec<FormulaRecord>, IngestReport)> {
    let mut ingester = Ingester::new();
    let mut records = Vec::new();
    for line in reader.lines() {
        if let Some(rec) = ingester.push_line(&line?) {
            records.push(rec);
        }
    }
    Ok((records, ingester.finish()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupMode {
    #[default]
    PerWorkbook,
    Global,
}

impl fmt::Display for DedupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DedupMode::PerWorkbook => "per-workbook",
            DedupMode::Global => "global",
        })
    }
}

/// First-wins filter over a stream of (workbook, key) pairs. Memory grows
/// with the number of distinct keys seen (per workbook in per-workbook mode).
#[derive(Debug, Default)]
pub struct Deduper {
    mode: DedupMode,
    global: HashSet<String>,
    per_workbook: HashMap<String, HashSet<String>>,
}

impl Deduper {
    pub fn new(mode: DedupMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    /// True if this is the first occurrence of `key` in scope.
    pub fn admit(&mut self, workbook_id: &str, key: String) -> bool {
        match self.mode {
            DedupMode::Global => self.global.insert(key),
            DedupMode::PerWorkbook => match self.per_workbook.get_mut(workbook_id) {
                Some(seen) => seen.insert(key),
                None => {
                    self.per_workbook.insert(workbook_id.to_owned(), HashSet::from([key]));
                    true
                }
            },
        }
    }

    /// Keys are computed with `exec`; admission is sequential, so the
    /// result does not depend on the worker count.
    pub fn filter_batch(
        &mut self,
        lexer: &Lexer<'_>,
        exec: Execution,
        records: Vec<FormulaRecord>,
    ) -> Vec<FormulaRecord> {
        let keys = exec.map(&records, |_, r| sketch_key(lexer, &r.formula));
        records
            .into_iter()
            .zip(keys)
            .filter_map(|(r, k)| self.admit(&r.workbook_id, k).then_some(r))
            .collect()
    }
}

pub fn dedup(records: &[FormulaRecord], mode: DedupMode, lexer: &Lexer<'_>, exec: Execution) -> Vec<FormulaRecord> {
    Deduper::new(mode).filter_batch(lexer, exec, records.to_vec())
}

pub fn dedup_per_workbook(records: &[FormulaRecord]) -> Vec<FormulaRecord> {
    dedup(
        records,
        DedupMode::PerWorkbook,
        &Lexer::default(),
        Execution::Sequential,
    )
}

pub fn dedup_global(records: &[FormulaRecord]) -> Vec<FormulaRecord> {
    dedup(records, DedupMode::Global, &Lexer::default(), Execution::Sequential)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_formulas: usize,
    pub unique_sketches_global: usize,
    pub retained_per_workbook: usize,
    pub retained_global: usize,
    pub workbooks: usize,
    /// workbook_id -> number of formulas in the input.
    pub formulas_per_workbook: BTreeMap<String, usize>,
    /// formulas-in-workbook -> number of workbooks of that size.
    pub workbook_size_histogram: BTreeMap<usize, usize>,
}

pub fn stats(records: &[FormulaRecord]) -> CorpusStats {
    stats_with(records, &Lexer::default(), Execution::Sequential)
}

pub fn stats_with(records: &[FormulaRecord], lexer: &Lexer<'_>, exec: Execution) -> CorpusStats {
    let mut acc = StatsAccumulator::new();
    acc.push_batch(lexer, exec, records);
    acc.finish()
}

/// Builds [`CorpusStats`] one batch at a time.
#[derive(Debug)]
pub struct StatsAccumulator {
    stats: CorpusStats,
    global: Deduper,
    per_workbook: Deduper,
}

impl Default for StatsAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl StatsAccumulator {
    pub fn new() -> Self {
        Self {
            stats: CorpusStats::default(),
            global: Deduper::new(DedupMode::Global),
            per_workbook: Deduper::new(DedupMode::PerWorkbook),
        }
    }

    pub fn push_batch(&mut self, lexer: &Lexer<'_>, exec: Execution, records: &[FormulaRecord]) {
        let keys = exec.map(records, |_, r| sketch_key(lexer, &r.formula));
        let s = &mut self.stats;
        s.total_formulas += records.len();
        for (r, k) in records.iter().zip(keys) {
            *s.formulas_per_workbook.entry(r.workbook_id.clone()).or_default() += 1;
            s.retained_per_workbook += usize::from(self.per_workbook.admit(&r.workbook_id, k.clone()));
            s.retained_global += usize::from(self.global.admit(&r.workbook_id, k));
        }
    }

    pub fn finish(mut self) -> CorpusStats {
        let s = &mut self.stats;
        s.unique_sketches_global = self.global.global.len();
        s.workbooks = s.formulas_per_workbook.len();
        for &n in s.formulas_per_workbook.values() {
            *s.workbook_size_histogram.entry(n).or_default() += 1;
        }
        self.stats
    }
}
