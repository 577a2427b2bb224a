use std::collections::HashMap;
use std::io::{self, BufRead};
use std::path::{Path, PathBuf};

use formulakit::baseline::{completion_candidates_with, BaselineProvider, RepairSearch, SketchIndex};
use formulakit::curation::{Deduper, StatsAccumulator};
use formulakit::evaluation::{
    completion_finetune_task, completion_tasks_for, evaluate, make_retrieval_pairs, read_embeddings, repair_outcome,
    reserved_mask, retrieval_eval, CandidateProvider, CompletionTask, EvalTask, Metric, RepairOutcome, RepairTask,
    ReplayProvider, RetrievalError, RetrievalPair, BENCHMARK_PREFIX_FRACTIONS,
};
use formulakit::lexer::{CatalogError, FunctionCatalog};
use formulakit::objectives::PretrainGenerator;
use formulakit::tokenizer::{BpeTrainer, TokenizerModel};
use formulakit::{Execution, Lexer};
use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;
use crate::files::{
    for_each_chunk, open_input, read_input_to_string, read_jsonl, CliError, CorpusReader, Manifest, Output, Result,
    CHUNK,
};
use crate::{BaselineCommand, Command, EvalArgs, Formulas};

pub struct Context {
    pub cfg: PipelineConfig,
    pub catalog: FunctionCatalog,
    pub exec: Execution,
    pub manifest: Manifest,
}

impl Context {
    pub fn new(command: &str, cfg: PipelineConfig) -> Result<Self> {
        let mut manifest = Manifest::new(command, &cfg);
        let catalog = match &cfg.catalog {
            None => FunctionCatalog::builtin().clone(),
            Some(path) => {
                let text = read_input_to_string(path, &mut manifest)?;
                FunctionCatalog::parse(&text).map_err(|e| match e {
                    CatalogError::Parse { line, message } => CliError::data(path.display(), Some(line), message),
                    other => CliError::data(path.display(), None, other),
                })?
            }
        };
        Ok(Self {
            exec: Execution::from_workers(cfg.workers),
            cfg,
            catalog,
            manifest,
        })
    }

    fn required(&self, path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
        path.clone()
            .ok_or_else(|| CliError::Usage(format!("--{what} is required (or set `{what}` in the config file)")))
    }

    fn load_model(&mut self) -> Result<TokenizerModel> {
        let path = self.required(&self.cfg.model, "model")?;
        let text = read_input_to_string(&path, &mut self.manifest)?;
        TokenizerModel::from_json(&text).map_err(|e| CliError::data(path.display(), None, e))
    }

    fn load_index(&mut self) -> Result<SketchIndex> {
        let path = self.required(&self.cfg.index, "index")?;
        let text = read_input_to_string(&path, &mut self.manifest)?;
        SketchIndex::from_json(&text, &Lexer::new(&self.catalog)).map_err(|e| CliError::data(path.display(), None, e))
    }
}

pub fn dispatch(ctx: &mut Context, command: Command) -> Result<()> {
    match command {
        Command::Lex(f) => lex(ctx, &f),
        Command::Sketch(f) => sketch(ctx, &f),
        Command::Check(f) => check(ctx, &f),
        Command::Dedup { input, output, .. } => dedup(ctx, &input, output.as_deref()),
        Command::Stats { input, output } => stats(ctx, &input, output.as_deref()),
        Command::TrainTokenizer { input, output, .. } => train_tokenizer(ctx, &input, output.as_deref()),
        Command::Tokenize { formulas, .. } => tokenize(ctx, &formulas),
        Command::GenPretrain { input, output, .. } => gen_pretrain(ctx, &input, output.as_deref()),
        Command::GenFinetuneRepair {
            input,
            output,
            benchmark_out,
            ..
        } => gen_finetune_repair(ctx, &input, output.as_deref(), benchmark_out.as_deref()),
        Command::GenFinetuneComplete {
            input,
            output,
            benchmark_out,
            ..
        } => gen_finetune_complete(ctx, &input, output.as_deref(), benchmark_out.as_deref()),
        Command::EvalRepair(args) => eval_tasks::<RepairTask>(ctx, &args, &[Metric::ExactMatch]),
        Command::EvalComplete(args) => {
            eval_tasks::<CompletionTask>(ctx, &args, &[Metric::ExactMatch, Metric::SketchMatch])
        }
        Command::EvalRetrieval {
            pairs,
            corpus,
            count,
            pairs_out,
            embeddings,
            output,
            ..
        } => eval_retrieval(ctx, pairs, corpus, count, pairs_out, embeddings, output),
        Command::Baseline(BaselineCommand::Index { input, output }) => baseline_index(ctx, &input, output.as_deref()),
        Command::Baseline(BaselineCommand::Repair { k, formulas, .. }) => baseline_query(ctx, &formulas, k, false),
        Command::Baseline(BaselineCommand::Complete { k, formulas, .. }) => baseline_query(ctx, &formulas, k, true),
    }
}

/// Calls `f` on each formula from the arguments, `--input`, or stdin.
fn each_formula(ctx: &mut Context, src: &Formulas, mut f: impl FnMut(&str) -> Result<()>) -> Result<()> {
    if !src.formulas.is_empty() {
        return src.formulas.iter().try_for_each(|s| f(s));
    }
    let (name, reader): (String, Box<dyn BufRead>) = match &src.input {
        Some(path) => (
            path.display().to_string(),
            Box::new(open_input(path, &mut ctx.manifest)?),
        ),
        None => ("<stdin>".into(), Box::new(io::stdin().lock())),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::data(&name, Some(i + 1), e))?;
        let line = line.trim_end_matches('\r');
        if !line.trim().is_empty() {
            f(line)?;
        }
    }
    Ok(())
}

fn per_formula(ctx: &mut Context, src: &Formulas, f: impl Fn(&Lexer<'_>, &str) -> serde_json::Value) -> Result<()> {
    let mut out = Output::create(src.output.as_deref())?;
    let catalog = ctx.catalog.clone();
    let lexer = Lexer::new(&catalog);
    each_formula(ctx, src, |formula| match f(&lexer, formula) {
        serde_json::Value::String(s) => out.text_line(&s),
        v => out.json_line(&v),
    })?;
    out.commit_into(&mut ctx.manifest)
}

fn lex(ctx: &mut Context, src: &Formulas) -> Result<()> {
    per_formula(ctx, src, |lexer, formula| {
        let toks: Vec<_> = lexer
            .lex(formula)
            .iter()
            .map(|t| json!({"kind": t.kind, "text": t.text, "span": t.span}))
            .collect();
        serde_json::Value::Array(toks)
    })
}

fn sketch(ctx: &mut Context, src: &Formulas) -> Result<()> {
    per_formula(ctx, src, |lexer, formula| lexer.sketch(formula).into())
}

fn check(ctx: &mut Context, src: &Formulas) -> Result<()> {
    per_formula(ctx, src, |lexer, formula| {
        let diags = lexer.check(formula);
        json!({"formula": formula, "ok": diags.is_empty(), "diagnostics": diags})
    })
}

fn dedup(ctx: &mut Context, input: &Path, output: Option<&Path>) -> Result<()> {
    let mode = ctx.cfg.dedup_mode;
    let mut out = Output::create(output)?;
    let mut deduper = Deduper::new(mode);
    let (catalog, exec) = (ctx.catalog.clone(), ctx.exec);
    let lexer = Lexer::new(&catalog);
    let mut retained = 0usize;
    let report = for_each_chunk(input, &mut ctx.manifest, |_, chunk| {
        for r in deduper.filter_batch(&lexer, exec, chunk) {
            out.json_line(&r)?;
            retained += 1;
        }
        Ok(())
    })?;
    out.commit_into(&mut ctx.manifest)?;
    eprintln!("dedup ({mode}): {} -> {retained} records", report.accepted);
    Ok(())
}

#[derive(Serialize)]
struct StatsReport {
    #[serde(flatten)]
    stats: formulakit::curation::CorpusStats,
    skipped_lines: usize,
}

fn stats(ctx: &mut Context, input: &Path, output: Option<&Path>) -> Result<()> {
    let mut acc = StatsAccumulator::new();
    let (catalog, exec) = (ctx.catalog.clone(), ctx.exec);
    let lexer = Lexer::new(&catalog);
    let report = for_each_chunk(input, &mut ctx.manifest, |_, chunk| {
        acc.push_batch(&lexer, exec, &chunk);
        Ok(())
    })?;
    let mut out = Output::create(output)?;
    out.json_pretty(&StatsReport {
        stats: acc.finish(),
        skipped_lines: report.skipped_total(),
    })?;
    out.commit_into(&mut ctx.manifest)
}

fn train_tokenizer(ctx: &mut Context, input: &Path, output: Option<&Path>) -> Result<()> {
    let mut reader = CorpusReader::new(input.display(), open_input(input, &mut ctx.manifest)?);
    let mut failure = None;
    let formulas = std::iter::from_fn(|| match reader.next_chunk(1) {
        Ok(mut v) => v.pop().map(|r| r.formula),
        Err(e) => {
            failure = Some(e);
            None
        }
    });
    let trained = BpeTrainer::new(&ctx.catalog, ctx.cfg.tokenizer_budget)
        .execution(ctx.exec)
        .train(formulas);
    if let Some(e) = failure {
        return Err(e);
    }
    reader.finish();
    let model = trained.map_err(|e| CliError::Usage(format!("config field `tokenizer_budget`: {e}")))?;
    let mut out = Output::create(output)?;
    out.text_line(model.to_json().trim_end())?;
    out.commit_into(&mut ctx.manifest)?;
    eprintln!(
        "train-tokenizer: {} tokens, {} merges",
        model.vocab().len(),
        model.merges().len()
    );
    Ok(())
}

fn tokenize(ctx: &mut Context, src: &Formulas) -> Result<()> {
    let model = ctx.load_model()?;
    let mut out = Output::create(src.output.as_deref())?;
    each_formula(ctx, src, |formula| {
        let ids = model.encode(formula);
        let tokens: Vec<&str> = ids.iter().map(|&i| model.vocab()[i as usize].as_str()).collect();
        out.json_line(&json!({"formula": formula, "ids": ids, "tokens": tokens}))
    })?;
    out.commit_into(&mut ctx.manifest)
}

fn gen_pretrain(ctx: &mut Context, input: &Path, output: Option<&Path>) -> Result<()> {
    let catalog = ctx.catalog.clone();
    let generator = PretrainGenerator::new(ctx.cfg.objectives.clone(), Lexer::new(&catalog))
        .map_err(|e| CliError::Usage(format!("config field `objectives`: {e}")))?
        .execution(ctx.exec);
    let mut out = Output::create(output)?;
    let (mut written, mut skipped) = (0usize, 0usize);
    for_each_chunk(input, &mut ctx.manifest, |first, chunk| {
        for r in generator.generate(&chunk, first) {
            match r {
                Ok(ex) => {
                    out.json_line(&ex)?;
                    written += 1;
                }
                Err(_) => skipped += 1,
            }
        }
        Ok(())
    })?;
    out.commit_into(&mut ctx.manifest)?;
    eprintln!("gen-pretrain: {written} examples, {skipped} records rejected by every objective");
    Ok(())
}

/// Counts accepted corpus records without recording the file as an input.
fn count_records(path: &Path) -> Result<usize> {
    let file = std::fs::File::open(path).map_err(|e| CliError::data(path.display(), None, e))?;
    let mut reader = CorpusReader::new(path.display(), io::BufReader::new(file));
    let mut n = 0;
    loop {
        let chunk = reader.next_chunk(CHUNK)?;
        if chunk.is_empty() {
            return Ok(n);
        }
        n += chunk.len();
    }
}

/// Training tasks go to `output` (stdout by default); benchmark tasks are
/// only written when a path is given.
fn split_outputs(output: Option<&Path>, benchmark: Option<&Path>) -> Result<(Output, Option<Output>)> {
    Ok((
        Output::create(output)?,
        benchmark.map(|p| Output::create(Some(p))).transpose()?,
    ))
}

fn gen_finetune_repair(ctx: &mut Context, input: &Path, output: Option<&Path>, benchmark: Option<&Path>) -> Result<()> {
    let seed = ctx.cfg.seed;
    let held = reserved_mask(count_records(input)?, ctx.cfg.reserve, seed);
    let (mut train, mut bench) = split_outputs(output, benchmark)?;
    let (catalog, exec) = (ctx.catalog.clone(), ctx.exec);
    let lexer = Lexer::new(&catalog);
    let (mut produced, mut held_out, mut ill_formed, mut unchanged) = (0usize, 0usize, 0usize, 0usize);
    for_each_chunk(input, &mut ctx.manifest, |first, chunk| {
        let outcomes = exec.map(&chunk, |i, r| repair_outcome(r, first + i as u64, seed, &lexer));
        for (i, o) in outcomes.into_iter().enumerate() {
            let reserved = held.get(first as usize + i).copied().unwrap_or(false);
            match o {
                RepairOutcome::Task(t) if reserved => {
                    held_out += 1;
                    if let Some(b) = bench.as_mut() {
                        b.json_line(&t)?;
                    }
                }
                RepairOutcome::Task(t) => {
                    produced += 1;
                    train.json_line(&t)?;
                }
                RepairOutcome::IllFormed(_) => ill_formed += 1,
                RepairOutcome::Unchanged => unchanged += 1,
            }
        }
        Ok(())
    })?;
    train.commit_into(&mut ctx.manifest)?;
    if let Some(b) = bench {
        b.commit_into(&mut ctx.manifest)?;
    }
    eprintln!(
        "gen-finetune-repair: {produced} training tasks, {held_out} benchmark tasks, \
         {ill_formed} ill-formed inputs skipped, {unchanged} unchanged"
    );
    Ok(())
}

fn gen_finetune_complete(
    ctx: &mut Context,
    input: &Path,
    output: Option<&Path>,
    benchmark: Option<&Path>,
) -> Result<()> {
    let model = ctx.load_model()?;
    let seed = ctx.cfg.seed;
    let held = reserved_mask(count_records(input)?, ctx.cfg.reserve, seed);
    let (mut train, mut bench) = split_outputs(output, benchmark)?;
    let exec = ctx.exec;
    let (mut produced, mut held_out, mut too_short) = (0usize, 0usize, 0usize);
    for_each_chunk(input, &mut ctx.manifest, |first, chunk| {
        let tasks = exec.map(&chunk, |i, r| {
            let ordinal = first + i as u64;
            if held.get(ordinal as usize).copied().unwrap_or(false) {
                Err(completion_tasks_for(r, ordinal, &BENCHMARK_PREFIX_FRACTIONS, &model))
            } else {
                Ok(completion_finetune_task(r, ordinal, &model, seed))
            }
        });
        for t in tasks {
            match t {
                Ok(Some(t)) => {
                    produced += 1;
                    train.json_line(&t)?;
                }
                Ok(None) => too_short += 1,
                Err(ts) => {
                    for t in ts {
                        held_out += 1;
                        if let Some(b) = bench.as_mut() {
                            b.json_line(&t)?;
                        }
                    }
                }
            }
        }
        Ok(())
    })?;
    train.commit_into(&mut ctx.manifest)?;
    if let Some(b) = bench {
        b.commit_into(&mut ctx.manifest)?;
    }
    eprintln!(
        "gen-finetune-complete: {produced} training tasks, {held_out} benchmark tasks, {too_short} formulas too short"
    );
    Ok(())
}

fn eval_tasks<T>(ctx: &mut Context, args: &EvalArgs, default_metrics: &[Metric]) -> Result<()>
where
    T: serde::de::DeserializeOwned,
    for<'a> &'a T: Into<EvalTask>,
{
    if args.k.contains(&0) {
        return Err(CliError::Usage("-k must be at least 1".into()));
    }
    let tasks: Vec<T> = read_jsonl(&args.benchmark, &mut ctx.manifest)?;
    let tasks: Vec<EvalTask> = tasks.iter().map(Into::into).collect();
    let metrics = if args.metric.is_empty() {
        default_metrics.to_vec()
    } else {
        args.metric.clone()
    };
    let catalog = ctx.catalog.clone();
    let lexer = Lexer::new(&catalog);
    let index;
    let replay;
    let baseline;
    let provider: &dyn CandidateProvider = match &args.predictions {
        Some(path) => {
            let reader = open_input(path, &mut ctx.manifest)?;
            replay = ReplayProvider::read(reader).map_err(|e| match e {
                formulakit::evaluation::EvalError::Parse { line, message } => {
                    CliError::data(path.display(), Some(line), message)
                }
                other => CliError::data(path.display(), None, other),
            })?;
            &replay
        }
        None if ctx.cfg.index.is_some() => {
            index = ctx.load_index()?;
            baseline = BaselineProvider::new(&index, lexer);
            &baseline
        }
        None => return Err(CliError::Usage("one of --predictions or --index is required".into())),
    };
    let report = evaluate(&tasks, provider, &metrics, &args.k, &lexer, ctx.exec);
    for m in &report.results {
        eprintln!("{}@{}: {:.4} ({}/{})", m.metric, m.k, m.value, m.hits, report.tasks);
    }
    let mut out = Output::create(args.output.as_deref())?;
    out.json_pretty(&report)?;
    out.commit_into(&mut ctx.manifest)
}

fn retrieval_error(path: &Path, e: RetrievalError) -> CliError {
    match e {
        RetrievalError::Parse { line, message } => CliError::data(path.display(), Some(line), message),
        other => CliError::data(path.display(), None, other),
    }
}

fn eval_retrieval(
    ctx: &mut Context,
    pairs: Option<PathBuf>,
    corpus: Option<PathBuf>,
    count: usize,
    pairs_out: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    output: Option<PathBuf>,
) -> Result<()> {
    let catalog = ctx.catalog.clone();
    let lexer = Lexer::new(&catalog);
    let pairs: Vec<RetrievalPair> = match (&pairs, &corpus) {
        (Some(path), _) => read_jsonl(path, &mut ctx.manifest)?,
        (None, Some(path)) => {
            let mut formulas = Vec::new();
            for_each_chunk(path, &mut ctx.manifest, |_, chunk| {
                formulas.extend(chunk.into_iter().map(|r| r.formula));
                Ok(())
            })?;
            make_retrieval_pairs(&formulas, count, ctx.cfg.seed, &lexer)
        }
        (None, None) => return Err(CliError::Usage("one of --pairs or --corpus is required".into())),
    };
    if let Some(path) = &pairs_out {
        let mut out = Output::create(Some(path))?;
        for p in &pairs {
            out.json_line(p)?;
        }
        out.commit_into(&mut ctx.manifest)?;
    }
    let Some(emb_path) = embeddings else {
        if pairs_out.is_none() {
            return Err(CliError::Usage(
                "--embeddings is required unless --pairs-out is given".into(),
            ));
        }
        return Ok(());
    };
    let table: HashMap<String, Vec<f64>> =
        read_embeddings(open_input(&emb_path, &mut ctx.manifest)?).map_err(|e| retrieval_error(&emb_path, e))?;
    let r = retrieval_eval(&pairs, &table).map_err(|e| retrieval_error(&emb_path, e))?;
    eprintln!("eval-retrieval: pearson r = {r:.6} over {} pairs", pairs.len());
    let mut out = Output::create(output.as_deref())?;
    out.json_pretty(&json!({"metric": "pearson", "pairs": pairs.len(), "value": r}))?;
    out.commit_into(&mut ctx.manifest)
}

fn baseline_index(ctx: &mut Context, input: &Path, output: Option<&Path>) -> Result<()> {
    let mut formulas = Vec::new();
    for_each_chunk(input, &mut ctx.manifest, |_, chunk| {
        formulas.extend(chunk.into_iter().map(|r| r.formula));
        Ok(())
    })?;
    let index = SketchIndex::build(&formulas, &Lexer::new(&ctx.catalog), ctx.exec);
    let mut out = Output::create(output)?;
    out.text_line(index.to_json().trim_end())?;
    out.commit_into(&mut ctx.manifest)?;
    eprintln!(
        "baseline index: {} formulas, {} distinct, {} sketches",
        index.total_formulas(),
        index.distinct_formulas(),
        index.buckets().len()
    );
    Ok(())
}

fn baseline_query(ctx: &mut Context, src: &Formulas, k: usize, complete: bool) -> Result<()> {
    if k == 0 {
        return Err(CliError::Usage("-k must be at least 1".into()));
    }
    let index = ctx.load_index()?;
    let catalog = ctx.catalog.clone();
    let lexer = Lexer::new(&catalog);
    let search = RepairSearch::new(&index, lexer).execution(ctx.exec);
    let mut out = Output::create(src.output.as_deref())?;
    each_formula(ctx, src, |query| {
        let candidates = if complete {
            completion_candidates_with(&index, &lexer, query, k)
        } else {
            search.candidates(query, k)
        };
        out.json_line(&json!({"query": query, "candidates": candidates}))
    })?;
    out.commit_into(&mut ctx.manifest)
}
