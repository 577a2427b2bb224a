//! Pipeline configuration: built-in defaults, then the `--config` file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use formulakit::curation::DedupMode;
use formulakit::evaluation::RESERVED_REPAIR_TASKS;
use formulakit::objectives::ObjectiveConfig;
use formulakit::tokenizer::DEFAULT_VOCAB_BUDGET;
use serde::{Deserialize, Serialize};

use crate::files::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dedup_mode: DedupMode,
    pub tokenizer_budget: usize,
    /// Held-out benchmark size for the fine-tuning generators.
    pub reserve: usize,
    /// 0 uses every core; 1 runs sequentially.
    pub workers: usize,
    /// Function catalog file; the built-in catalog when absent.
    pub catalog: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub index: Option<PathBuf>,
    /// `objectives.seed` is ignored; the top-level `seed` governs everything.
    pub objectives: ObjectiveConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dedup_mode: DedupMode::PerWorkbook,
            tokenizer_budget: DEFAULT_VOCAB_BUDGET,
            reserve: RESERVED_REPAIR_TASKS,
            workers: 0,
            catalog: None,
            model: None,
            index: None,
            objectives: ObjectiveConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Syncs derived fields and checks every value. Runs before any stage.
    pub fn finalize(mut self) -> Result<Self, CliError> {
        self.objectives.seed = self.seed;
        if self.tokenizer_budget == 0 {
            return Err(CliError::Usage(
                "config field `tokenizer_budget`: must be positive".into(),
            ));
        }
        self.objectives
            .validate()
            .map_err(|e| CliError::Usage(format!("config field `objectives`: {e}")))?;
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"seed": 3, "dedup_mode": "global"}"#).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.dedup_mode, DedupMode::Global);
        assert_eq!(c.tokenizer_budget, 16_000);
        assert_eq!(c.finalize().unwrap().objectives.seed, 3);
    }

    #[test]
    fn field_level_errors() {
        let e = serde_json::from_str::<PipelineConfig>(r#"{"sead": 3}"#).unwrap_err();
        assert!(e.to_string().contains("sead"));
        let mut c = PipelineConfig::default();
        c.objectives.weights.tm = 0.9;
        let CliError::Usage(m) = c.finalize().unwrap_err() else {
            panic!()
        };
        assert!(m.contains("objectives"), "{m}");
    }
}
