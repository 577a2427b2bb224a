//! Pre-training example generators.
//!
//! Four corruption objectives plus identity: tail masking (TM), masked span
//! prediction over whole lexer tokens (laMSP), random token noise (RN) and
//! the user-inspired noise operators (UN). Every generator is a pure function
//! of the formula, the config and a per-record seed.

mod masking;
mod noise;
mod random;

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::FormulaRecord;
use crate::exec::Execution;
use crate::lexer::Lexer;
use crate::seed::{record_seed, rng_from, Rng};

pub use masking::{la_msp, lamsp_spans, render_masked, tail_mask, tail_prefix_len};
pub use noise::{apply_noise_operator, user_noise, NoiseOperator, Noised, OPERATOR_POOL};
pub use random::{apply_events, random_noise, RnEvent, RN_POOL};

pub use crate::tokenizer::MASK_TOKEN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "TM")]
    TailMask,
    #[serde(rename = "laMSP")]
    MaskedSpan,
    #[serde(rename = "RN")]
    RandomNoise,
    #[serde(rename = "UN")]
    UserNoise,
    #[serde(rename = "ID")]
    Identity,
}

impl Objective {
    /// Order used for weights and for the fallback sequence.
    pub const ALL: [Objective; 5] = [
        Objective::MaskedSpan,
        Objective::TailMask,
        Objective::UserNoise,
        Objective::RandomNoise,
        Objective::Identity,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Objective::TailMask => "TM",
            Objective::MaskedSpan => "laMSP",
            Objective::RandomNoise => "RN",
            Objective::UserNoise => "UN",
            Objective::Identity => "ID",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObjectiveError {
    #[error("formula has {len} character(s); tail masking needs at least 2")]
    TooShort { len: usize },
    #[error("formula has no tokens")]
    Empty,
    #[error("noise operator {op} does not apply to this formula")]
    NotApplicable { op: NoiseOperator },
    #[error("invalid objective config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    #[serde(rename = "laMSP")]
    pub lamsp: f64,
    #[serde(rename = "TM")]
    pub tm: f64,
    #[serde(rename = "UN")]
    pub un: f64,
    #[serde(rename = "RN")]
    pub rn: f64,
    pub identity: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            lamsp: 0.50,
            tm: 0.20,
            un: 0.20,
            rn: 0.05,
            identity: 0.05,
        }
    }
}

impl ObjectiveWeights {
    /// Weights in [`Objective::ALL`] order.
    pub fn as_array(&self) -> [f64; 5] {
        [self.lamsp, self.tm, self.un, self.rn, self.identity]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LamspRates {
    pub high: f64,
    pub low: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LamspSpans {
    pub long: usize,
    pub short: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub weights: ObjectiveWeights,
    pub tm_fractions: Vec<f64>,
    pub lamsp_rates: LamspRates,
    pub lamsp_mean_spans: LamspSpans,
    pub rn_rate: f64,
    pub seed: u64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            weights: ObjectiveWeights::default(),
            tm_fractions: vec![0.30, 0.40, 0.50, 0.60, 0.70],
            lamsp_rates: LamspRates { high: 0.35, low: 0.15 },
            lamsp_mean_spans: LamspSpans { long: 6, short: 2 },
            rn_rate: 0.10,
            seed: 0,
        }
    }
}

impl ObjectiveConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        let bad = |m: String| Err(ObjectiveError::InvalidConfig(m));
        let w = self.weights.as_array();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad(format!("weights must be non-negative, got {w:?}"));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("weights must sum to 1, got {sum}"));
        }
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if self.tm_fractions.is_empty() || !self.tm_fractions.iter().all(|&p| in_unit(p)) {
            return bad(format!(
                "tm_fractions must be non-empty and within (0, 1), got {:?}",
                self.tm_fractions
            ));
        }
        for (name, r) in [
            ("lamsp_rates.high", self.lamsp_rates.high),
            ("lamsp_rates.low", self.lamsp_rates.low),
            ("rn_rate", self.rn_rate),
        ] {
            if !in_unit(r) {
                return bad(format!("{name} must be within (0, 1), got {r}"));
            }
        }
        if self.lamsp_mean_spans.long == 0 || self.lamsp_mean_spans.short == 0 {
            return bad("mean span lengths must be at least 1".into());
        }
        Ok(())
    }

    /// The four laMSP (rate, mean span) combinations.
    pub fn lamsp_combos(&self) -> [(f64, usize); 4] {
        let r = self.lamsp_rates;
        let s = self.lamsp_mean_spans;
        [(r.high, s.long), (r.high, s.short), (r.low, s.long), (r.low, s.short)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainExample {
    pub input: String,
    /// Always the original formula.
    pub target: String,
    pub objective: Objective,
    pub detail: String,
    pub record_seed: u64,
}

impl PretrainExample {
    fn new(original: &str, input: String, objective: Objective, detail: String) -> Self {
        Self {
            input,
            target: original.to_owned(),
            objective,
            detail,
            record_seed: 0,
        }
    }

    pub fn identity(formula: &str) -> Self {
        Self::new(formula, formula.to_owned(), Objective::Identity, String::new())
    }
}

/// Draws objectives by weight; a failed objective is removed and the draw
/// repeated over the rest.
#[derive(Debug, Clone)]
pub struct ObjectiveSampler {
    weights: [f64; 5],
}

impl ObjectiveSampler {
    pub fn new(weights: &ObjectiveWeights) -> Self {
        Self {
            weights: weights.as_array(),
        }
    }

    pub fn draw(&self, rng: &mut Rng) -> Objective {
        self.draw_excluding(rng, &[]).expect("weights are not all zero")
    }

    pub fn draw_excluding(&self, rng: &mut Rng, excluded: &[Objective]) -> Option<Objective> {
        let mut w = self.weights;
        for (slot, obj) in w.iter_mut().zip(Objective::ALL) {
            if excluded.contains(&obj) {
                *slot = 0.0;
            }
        }
        match WeightedIndex::new(w) {
            Ok(dist) => Some(Objective::ALL[dist.sample(rng)]),
            // All remaining weights are zero: fall back to declaration order.
            Err(_) => Objective::ALL.into_iter().find(|o| !excluded.contains(o)),
        }
    }
}

/// Runs one objective on a formula.
pub fn apply_objective(
    objective: Objective,
    formula: &str,
    config: &ObjectiveConfig,
    lexer: &Lexer<'_>,
    rng: &mut Rng,
) -> Result<PretrainExample, ObjectiveError> {
    match objective {
        Objective::TailMask => tail_mask(formula, &config.tm_fractions, rng),
        Objective::MaskedSpan => {
            let combos = config.lamsp_combos();
            let (rate, span) = combos[rng.random_range(0..combos.len())];
            la_msp(formula, rate, span, lexer, rng)
        }
        Objective::RandomNoise => random_noise(formula, config.rn_rate, lexer, rng),
        Objective::UserNoise => user_noise(formula, lexer, rng),
        Objective::Identity => {
            if formula.is_empty() {
                Err(ObjectiveError::Empty)
            } else {
                Ok(PretrainExample::identity(formula))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRecord {
    pub ordinal: u64,
    pub errors: Vec<(Objective, String)>,
}

/// Per-record generation with derived seeds.
#[derive(Debug, Clone)]
pub struct PretrainGenerator<'c> {
    config: ObjectiveConfig,
    sampler: ObjectiveSampler,
    lexer: Lexer<'c>,
    exec: Execution,
}

impl<'c> PretrainGenerator<'c> {
    pub fn new(config: ObjectiveConfig, lexer: Lexer<'c>) -> Result<Self, ObjectiveError> {
        config.validate()?;
        Ok(Self {
            sampler: ObjectiveSampler::new(&config.weights),
            config,
            lexer,
            exec: Execution::Sequential,
        })
    }

    pub fn execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.config
    }

    pub fn generate_one(&self, record: &FormulaRecord, ordinal: u64) -> Result<PretrainExample, SkippedRecord> {
        let seed = record_seed(self.config.seed, &record.workbook_id, &record.sheet_id, ordinal);
        let mut rng = rng_from(seed);
        let mut failed: Vec<Objective> = Vec::new();
        let mut errors = Vec::new();
        while let Some(obj) = self.sampler.draw_excluding(&mut rng, &failed) {
            match apply_objective(obj, &record.formula, &self.config, &self.lexer, &mut rng) {
                Ok(mut ex) => {
                    ex.record_seed = seed;
                    return Ok(ex);
                }
                Err(e) => {
                    failed.push(obj);
                    errors.push((obj, e.to_string()));
                }
            }
        }
        Err(SkippedRecord { ordinal, errors })
    }

    /// `first_ordinal` is the stream position of `records[0]`, so a corpus
    /// processed in chunks yields the same seeds as one processed whole.
    pub fn generate(
        &self,
        records: &[FormulaRecord],
        first_ordinal: u64,
    ) -> Vec<Result<PretrainExample, SkippedRecord>> {
        self.exec
            .map(records, |i, r| self.generate_one(r, first_ordinal + i as u64))
    }
}

/// Generates one example per record (skipping records every objective
/// rejects) with the built-in catalog.
pub fn generate_pretrain(
    records: &[FormulaRecord],
    config: &ObjectiveConfig,
    exec: Execution,
) -> Result<(Vec<PretrainExample>, Vec<SkippedRecord>), ObjectiveError> {
    let generator = PretrainGenerator::new(config.clone(), Lexer::default())?.execution(exec);
    let mut examples = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for r in generator.generate(records, 0) {
        match r {
            Ok(ex) => examples.push(ex),
            Err(s) => skipped.push(s),
        }
    }
    Ok((examples, skipped))
}

/// Fractions are resolved to thousandths so integer arithmetic decides
/// rounding (`0.7 * 10` is not exactly 7 in floating point).
pub(crate) fn permille(x: f64) -> usize {
    (x * 1000.0).round().max(0.0) as usize
}
