mod commands;
mod config;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use formulakit::curation::DedupMode;

use config::PipelineConfig;
use files::CliError;

const FORMATS: &str = "\
Formats (one example line each):
  corpus record     {\"workbook_id\":\"wb1\",\"sheet_id\":\"Sheet1\",\"cell\":\"B2\",\"formula\":\"=SUM(A1:A10)\"}
  pretrain example  {\"input\":\"=SUM(A1:<mask>\",\"target\":\"=SUM(A1:A10)\",\"objective\":\"TM\",\"detail\":\"p=0.30\",\"record_seed\":42}
  repair task       {\"buggy\":\"=SUM(A1:A10\",\"ground_truth\":\"=SUM(A1:A10)\",\"source_id\":\"wb1/Sheet1/B2#0\",\"noise\":\"17:delete ) at 11\"}
  completion task   {\"source_id\":\"wb1/Sheet1#3\",\"formula\":\"=B2<=EDATE(TODAY(),-33)\",\"prefix_fraction\":0.5,\"prefix\":\"=b2<=edate(\"}
  predictions       {\"source_id\":\"wb1/Sheet1#3\",\"candidates\":[\"=B2<=EDATE(TODAY(),-33)\",\"=B2<=EDATE(TODAY(),-5)\"]}
  retrieval pair    {\"formula_a\":\"=SUM(A1:A3)*number\",\"formula_b\":\"=SUM(B1:B3)\",\"target_similarity\":0.75}
  embedding         {\"formula\":\"=SUM(A1:A3)*number\",\"vector\":[0.12,-0.4,0.9]}
  catalog line      sumif,2,3
  tokenizer model   {\"vocab\":[\"<pad>\",\"<unk>\",\"<mask>\",...],\"merges\":[[\"a\",\"1\"]],\"specials\":{...},\"budget\":16000,\"functions\":[...]}
  baseline index    {\"total_formulas\":2,\"buckets\":{\"=SUM(cell:cell)\":[{\"formula\":\"=SUM(A1:A2)\",\"frequency\":2}]}}
  eval report       {\"tasks\":4,\"results\":[{\"metric\":\"exact_match\",\"k\":5,\"value\":0.75,\"hits\":3}],\"per_task\":[...]}
  config            {\"seed\":7,\"dedup_mode\":\"global\",\"tokenizer_budget\":16000,\"reserve\":500,\"objectives\":{\"rn_rate\":0.1}}

Precedence: built-in defaults, then --config FILE, then flags.
Exit status: 0 success, 1 usage or configuration error, 2 data error (file:line), 3 internal error.";

#[derive(Parser)]
#[command(
    name = "formulakit",
    version,
    about = "Excel formula corpus, tokenizer, dataset and evaluation pipeline"
)]
#[command(after_help = FORMATS)]
struct Cli {
    /// Pipeline configuration JSON.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for data-parallel stages (0 = all cores, 1 = sequential).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Function catalog (`name,min_arity,max_arity` lines).
    #[arg(long, global = true, value_name = "FILE")]
    catalog: Option<PathBuf>,
    /// Write a run manifest with config, input and artifact hashes.
    #[arg(long, global = true, value_name = "FILE")]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct Formulas {
    /// Formulas to process; read one per line from --input or stdin if none.
    pub formulas: Vec<String>,
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Benchmark tasks (JSONL).
    #[arg(long, value_name = "FILE")]
    pub benchmark: PathBuf,
    /// Ranked candidates per task (JSONL).
    #[arg(long, value_name = "FILE", conflicts_with = "index")]
    pub predictions: Option<PathBuf>,
    /// Score the baseline over this index instead of a predictions file.
    #[arg(long, value_name = "FILE")]
    pub index: Option<PathBuf>,
    /// Cutoffs; repeat for several.
    #[arg(short, value_name = "K", default_values_t = [1usize, 5])]
    pub k: Vec<usize>,
    /// exact_match or sketch_match; repeat for several.
    #[arg(long, value_name = "METRIC", value_parser = parse_metric)]
    pub metric: Vec<formulakit::evaluation::Metric>,
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print lexer tokens, one JSON array per formula.
    #[command(after_help = "Output: [{\"kind\":\"FuncName\",\"text\":\"SUM\",\"span\":{\"start\":1,\"end\":4}},...]")]
    Lex(Formulas),
    /// Print formula sketches, one per line.
    #[command(after_help = "Example: =SUM(A1:A10) -> =SUM(cell:cell)")]
    Sketch(Formulas),
    /// Report well-formedness diagnostics.
    #[command(
        after_help = "Output: {\"formula\":\"=SUM(A1\",\"ok\":false,\"diagnostics\":[{\"code\":\"UnbalancedParens\",...}]}"
    )]
    Check(Formulas),
    /// Drop repeated sketches, keeping first occurrences.
    #[command(
        after_help = "Input and output: {\"workbook_id\":\"wb1\",\"sheet_id\":\"Sheet1\",\"formula\":\"=SUM(A1:A10)\"}"
    )]
    Dedup {
        input: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<DedupMode>,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Corpus statistics as JSON.
    #[command(after_help = "Output: {\"total_formulas\":3,\"unique_sketches_global\":2,...}")]
    Stats {
        input: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Train a BPE tokenizer on a corpus.
    #[command(
        after_help = "Output: {\"vocab\":[...],\"merges\":[[\"a\",\"1\"]],\"specials\":{...},\"budget\":16000,\"functions\":[...]}"
    )]
    TrainTokenizer {
        input: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Encode formulas with a trained tokenizer.
    #[command(after_help = "Output: {\"formula\":\"=A1\",\"ids\":[40,61],\"tokens\":[\"=\",\"a1\"]}")]
    Tokenize {
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[command(flatten)]
        formulas: Formulas,
    },
    /// Generate pre-training examples, one per record.
    #[command(
        after_help = "Output: {\"input\":\"=SUM(A1:<mask>\",\"target\":\"=SUM(A1:A10)\",\"objective\":\"TM\",\"detail\":\"p=0.30\",\"record_seed\":42}"
    )]
    GenPretrain {
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Synthesize repair tasks; reserved records go to the benchmark.
    #[command(
        after_help = "Output: {\"buggy\":\"=SUM(A1:A10\",\"ground_truth\":\"=SUM(A1:A10)\",\"source_id\":\"wb1/Sheet1#0\",\"noise\":\"17:delete ) at 11\"}"
    )]
    GenFinetuneRepair {
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of records held out for the benchmark.
        #[arg(long)]
        reserve: Option<usize>,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        benchmark_out: Option<PathBuf>,
    },
    /// Synthesize completion tasks; reserved records go to the benchmark.
    #[command(
        after_help = "Output: {\"source_id\":\"wb1/Sheet1#3\",\"formula\":\"=B2<=EDATE(TODAY(),-33)\",\"prefix_fraction\":0.5,\"prefix\":\"=b2<=edate(\"}"
    )]
    GenFinetuneComplete {
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reserve: Option<usize>,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        benchmark_out: Option<PathBuf>,
    },
    /// Score repair predictions against a benchmark.
    #[command(after_help = "Predictions: {\"source_id\":\"wb1/Sheet1#0\",\"candidates\":[\"=SUM(A1:A10)\"]}")]
    EvalRepair(EvalArgs),
    /// Score completion predictions against a benchmark.
    #[command(
        after_help = "Predictions: {\"source_id\":\"wb1/Sheet1#3\",\"candidates\":[\"=B2<=EDATE(TODAY(),-5)\"]}"
    )]
    EvalComplete(EvalArgs),
    /// Correlate embedding cosine similarity with token edit similarity.
    #[command(after_help = "Embeddings: {\"formula\":\"=SUM(A1:A3)*number\",\"vector\":[0.12,-0.4,0.9]}")]
    EvalRetrieval {
        /// Retrieval pairs (JSONL).
        #[arg(long, value_name = "FILE", conflicts_with = "corpus")]
        pairs: Option<PathBuf>,
        /// Build pairs from this corpus instead.
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Save the pairs built from --corpus.
        #[arg(long, value_name = "FILE")]
        pairs_out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        embeddings: Option<PathBuf>,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Sketch-index baseline providers.
    #[command(subcommand)]
    Baseline(BaselineCommand),
}

#[derive(Subcommand)]
pub enum BaselineCommand {
    /// Build an index from a corpus.
    #[command(
        after_help = "Output: {\"total_formulas\":2,\"buckets\":{\"=SUM(cell:cell)\":[{\"formula\":\"=SUM(A1:A2)\",\"frequency\":2}]}}"
    )]
    Index {
        input: PathBuf,
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Nearest well-formed corpus formulas for each buggy formula.
    #[command(after_help = "Output: {\"query\":\"=SUM(A1:A10\",\"candidates\":[\"=SUM(A1:A10)\"]}")]
    Repair {
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
        #[arg(short, default_value_t = 5)]
        k: usize,
        #[command(flatten)]
        formulas: Formulas,
    },
    /// Most frequent corpus formulas extending each prefix.
    #[command(after_help = "Output: {\"query\":\"=b2<=edate(\",\"candidates\":[\"=B2<=EDATE(TODAY(),-33)\"]}")]
    Complete {
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
        #[arg(short, default_value_t = 5)]
        k: usize,
        #[command(flatten)]
        formulas: Formulas,
    },
}

fn parse_mode(s: &str) -> Result<DedupMode, String> {
    match s {
        "per-workbook" => Ok(DedupMode::PerWorkbook),
        "global" => Ok(DedupMode::Global),
        _ => Err("expected `per-workbook` or `global`".into()),
    }
}

fn parse_metric(s: &str) -> Result<formulakit::evaluation::Metric, String> {
    use formulakit::evaluation::Metric;
    match s {
        "exact_match" => Ok(Metric::ExactMatch),
        "sketch_match" => Ok(Metric::SketchMatch),
        _ => Err("expected `exact_match` or `sketch_match`".into()),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Lex(_) => "lex",
            Command::Sketch(_) => "sketch",
            Command::Check(_) => "check",
            Command::Dedup { .. } => "dedup",
            Command::Stats { .. } => "stats",
            Command::TrainTokenizer { .. } => "train-tokenizer",
            Command::Tokenize { .. } => "tokenize",
            Command::GenPretrain { .. } => "gen-pretrain",
            Command::GenFinetuneRepair { .. } => "gen-finetune-repair",
            Command::GenFinetuneComplete { .. } => "gen-finetune-complete",
            Command::EvalRepair(_) => "eval-repair",
            Command::EvalComplete(_) => "eval-complete",
            Command::EvalRetrieval { .. } => "eval-retrieval",
            Command::Baseline(BaselineCommand::Index { .. }) => "baseline index",
            Command::Baseline(BaselineCommand::Repair { .. }) => "baseline repair",
            Command::Baseline(BaselineCommand::Complete { .. }) => "baseline complete",
        }
    }

    /// Copies flags that shadow config fields into `cfg`.
    fn apply(&self, cfg: &mut PipelineConfig) {
        fn set<T: Clone>(slot: &mut T, flag: &Option<T>) {
            if let Some(v) = flag {
                *slot = v.clone();
            }
        }
        fn set_path(slot: &mut Option<PathBuf>, flag: &Option<PathBuf>) {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        match self {
            Command::Dedup { mode, .. } => set(&mut cfg.dedup_mode, mode),
            Command::TrainTokenizer { budget, .. } => set(&mut cfg.tokenizer_budget, budget),
            Command::Tokenize { model, .. } => set_path(&mut cfg.model, model),
            Command::GenPretrain { seed, .. } => set(&mut cfg.seed, seed),
            Command::GenFinetuneRepair { seed, reserve, .. } => {
                set(&mut cfg.seed, seed);
                set(&mut cfg.reserve, reserve);
            }
            Command::GenFinetuneComplete {
                model, seed, reserve, ..
            } => {
                set_path(&mut cfg.model, model);
                set(&mut cfg.seed, seed);
                set(&mut cfg.reserve, reserve);
            }
            Command::EvalRepair(a) | Command::EvalComplete(a) => set_path(&mut cfg.index, &a.index),
            Command::EvalRetrieval { seed, .. } => set(&mut cfg.seed, seed),
            Command::Baseline(BaselineCommand::Repair { index, .. } | BaselineCommand::Complete { index, .. }) => {
                set_path(&mut cfg.index, index)
            }
            _ => {}
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if cli.catalog.is_some() {
        cfg.catalog.clone_from(&cli.catalog);
    }
    cli.command.apply(&mut cfg);
    let cfg = cfg.finalize()?;
    let mut ctx = commands::Context::new(cli.command.name(), cfg)?;
    commands::dispatch(&mut ctx, cli.command)?;
    if let Some(path) = &cli.manifest {
        ctx.manifest.write(path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) | Err(CliError::StdoutClosed) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
