//! Data-side toolkit for small spreadsheet-formula language models.
//!
//! * [`lexer`]: Excel formula lexing, sketching, normalization and checks.
//! * [`curation`]: JSONL corpus ingestion and sketch-based deduplication.
//! * [`tokenizer`]: formula-aware pre-tokenization and BPE.
//! * [`objectives`]: pre-training example generators and noise operators.
//! * [`evaluation`]: repair/completion/retrieval metrics and harness.
//! * [`baseline`]: non-neural candidate providers over a sketch index.
//! * [`exec`]: sequential or rayon-backed ordered mapping.

pub mod baseline;
pub mod curation;
pub mod evaluation;
pub mod exec;
pub mod lexer;
pub mod objectives;
pub mod seed;
pub mod tokenizer;

pub use exec::Execution;
pub use lexer::{FunctionCatalog, Lexer, Token, TokenKind};
