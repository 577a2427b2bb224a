use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::finetune::{CompletionTask, RepairTask};
use super::{hit_at_k, EvalError};
use crate::exec::Execution;
use crate::lexer::Lexer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ExactMatch,
    SketchMatch,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::ExactMatch => "exact_match",
            Metric::SketchMatch => "sketch_match",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Repair,
    Completion,
}

/// What a candidate provider sees: the model input plus the expected output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalTask {
    pub source_id: String,
    pub kind: TaskKind,
    pub input: String,
    pub ground_truth: String,
}

impl From<&RepairTask> for EvalTask {
    fn from(t: &RepairTask) -> Self {
        Self {
            source_id: t.source_id.clone(),
            kind: TaskKind::Repair,
            input: t.buggy.clone(),
            ground_truth: t.ground_truth.clone(),
        }
    }
}

impl From<&CompletionTask> for EvalTask {
    fn from(t: &CompletionTask) -> Self {
        Self {
            source_id: t.source_id.clone(),
            kind: TaskKind::Completion,
            input: t.prefix.clone(),
            ground_truth: t.formula.clone(),
        }
    }
}

/// Ranked candidates, best first. Implementations must not look at
/// `ground_truth` unless they exist to test the harness.
pub trait CandidateProvider: Sync {
    fn candidates(&self, task: &EvalTask, k: usize) -> Result<Vec<String>, String>;
}

/// Returns the ground truth; every metric scores 1.
pub struct EchoProvider;

impl CandidateProvider for EchoProvider {
    fn candidates(&self, task: &EvalTask, _k: usize) -> Result<Vec<String>, String> {
        Ok(vec![task.ground_truth.clone()])
    }
}

/// Returns nothing; every metric scores 0.
pub struct EmptyProvider;

impl CandidateProvider for EmptyProvider {
    fn candidates(&self, _task: &EvalTask, _k: usize) -> Result<Vec<String>, String> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub source_id: String,
    pub candidates: Vec<String>,
}

/// Candidates read from a predictions file, keyed by `source_id`.
#[derive(Debug, Clone, Default)]
pub struct ReplayProvider {
    rows: HashMap<String, Vec<String>>,
}

impl ReplayProvider {
    pub fn from_rows(rows: impl IntoIterator<Item = PredictionRow>) -> Self {
        Self {
            rows: rows.into_iter().map(|r| (r.source_id, r.candidates)).collect(),
        }
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut rows = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| EvalError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let row: PredictionRow = serde_json::from_str(&line).map_err(|e| EvalError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if rows.insert(row.source_id.clone(), row.candidates).is_some() {
                return Err(EvalError::Parse {
                    line: i + 1,
                    message: format!("duplicate source_id `{}`", row.source_id),
                });
            }
        }
        Ok(Self { rows })
    }
}

impl CandidateProvider for ReplayProvider {
    fn candidates(&self, task: &EvalTask, k: usize) -> Result<Vec<String>, String> {
        match self.rows.get(&task.source_id) {
            Some(c) => Ok(c.iter().take(k).cloned().collect()),
            None => Err(format!("no predictions for `{}`", task.source_id)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: Metric,
    pub k: usize,
    pub value: f64,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub source_id: String,
    /// `"exact_match@5" -> true`.
    pub hits: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: usize,
    pub results: Vec<MetricValue>,
    pub per_task: Vec<TaskResult>,
}

impl EvalReport {
    pub fn value(&self, metric: Metric, k: usize) -> Option<f64> {
        self.results
            .iter()
            .find(|r| r.metric == metric && r.k == k)
            .map(|r| r.value)
    }
}

/// Scores every task at every (metric, k). A provider error counts as a
/// miss. Values over zero tasks are 0.
pub fn evaluate(
    tasks: &[EvalTask],
    provider: &dyn CandidateProvider,
    metrics: &[Metric],
    ks: &[usize],
    lexer: &Lexer<'_>,
    exec: Execution,
) -> EvalReport {
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let per_task = exec.map(tasks, |_, task| {
        let (candidates, error) = match provider.candidates(task, max_k) {
            Ok(c) => (c, None),
            Err(e) => (Vec::new(), Some(e)),
        };
        let mut hits = BTreeMap::new();
        for &m in metrics {
            for &k in ks {
                hits.insert(
                    format!("{m}@{k}"),
                    hit_at_k(m, lexer, &candidates, &task.ground_truth, k),
                );
            }
        }
        TaskResult {
            source_id: task.source_id.clone(),
            hits,
            candidates: candidates.into_iter().take(max_k).collect(),
            error,
        }
    });
    let mut results = Vec::new();
    for &metric in metrics {
        for &k in ks {
            let key = format!("{metric}@{k}");
            let hits = per_task.iter().filter(|t| t.hits[&key]).count();
            let value = if tasks.is_empty() {
                0.0
            } else {
                hits as f64 / tasks.len() as f64
            };
            results.push(MetricValue { metric, k, value, hits });
        }
    }
    EvalReport {
        tasks: tasks.len(),
        results,
        per_task,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasks() -> Vec<EvalTask> {
        ["=SUM(A1:A3)", "=A1+B1", "=IF(A1>0,1,0)", "=MAX(C1:C9)"]
            .iter()
            .enumerate()
            .map(|(i, f)| EvalTask {
                source_id: format!("t{i}"),
                kind: TaskKind::Repair,
                input: f.to_lowercase(),
                ground_truth: f.to_string(),
            })
            .collect()
    }

    const BOTH: [Metric; 2] = [Metric::ExactMatch, Metric::SketchMatch];

    #[test]
    fn echo_and_empty() {
        let lexer = Lexer::default();
        let r = evaluate(&tasks(), &EchoProvider, &BOTH, &[1, 5], &lexer, Execution::Sequential);
        assert!(r.results.iter().all(|m| m.value == 1.0));
        let r = evaluate(&tasks(), &EmptyProvider, &BOTH, &[1, 5], &lexer, Execution::Sequential);
        assert!(r.results.iter().all(|m| m.value == 0.0));
    }

    #[test]
    fn three_of_four_at_five() {
        let lexer = Lexer::default();
        let filler = |n: usize| (0..n).map(|i| format!("=Z{i}*0")).collect::<Vec<_>>();
        let mut rows = Vec::new();
        for (i, t) in tasks().iter().enumerate() {
            let mut c = filler(4);
            match i {
                0 => c.insert(0, t.ground_truth.clone()),
                1 => c.insert(2, t.ground_truth.clone()),
                2 => c.push(t.ground_truth.clone()),
                _ => c.push("=MIN(C1:C9)".into()),
            }
            rows.push(PredictionRow {
                source_id: t.source_id.clone(),
                candidates: c,
            });
        }
        let r = evaluate(
            &tasks(),
            &ReplayProvider::from_rows(rows),
            &[Metric::ExactMatch],
            &[1, 5],
            &lexer,
            Execution::Workers(2),
        );
        assert_eq!(r.value(Metric::ExactMatch, 5), Some(0.75));
        assert_eq!(r.value(Metric::ExactMatch, 1), Some(0.25));
        assert!(!r.per_task[3].hits["exact_match@5"]);
    }

    #[test]
    fn missing_predictions_are_misses() {
        let lexer = Lexer::default();
        let provider = ReplayProvider::default();
        let r = evaluate(&tasks(), &provider, &BOTH, &[1], &lexer, Execution::Sequential);
        assert_eq!(r.value(Metric::SketchMatch, 1), Some(0.0));
        assert!(r.per_task.iter().all(|t| t.error.is_some()));
    }

    #[test]
    fn replay_file() {
        let text = "{\"source_id\":\"t0\",\"candidates\":[\"=SUM(A1:A3)\"]}\n";
        let p = ReplayProvider::read(text.as_bytes()).unwrap();
        let r = evaluate(&tasks()[..1], &p, &BOTH, &[1], &Lexer::default(), Execution::Sequential);
        assert_eq!(r.value(Metric::ExactMatch, 1), Some(1.0));
        let dup = format!("{text}{text}");
        assert!(matches!(
            ReplayProvider::read(dup.as_bytes()),
            Err(EvalError::Parse { line: 2, .. })
        ));
    }
}
