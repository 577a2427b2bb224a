use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use crate::exec::Execution;
use crate::lexer::{FunctionCatalog, Lexer};

use super::model::{Specials, TokenizerModel};
use super::{pretokenize_with, TokenizerError};

const CORPUS_CHUNK: usize = 4096;

/// Operators that lex as one two-character token.
const MULTI_CHAR_OPERATORS: [&str; 3] = ["<=", ">=", "<>"];

type Pair = (u32, u32);

/// Trains a model with default execution.
pub fn train_bpe<I, S>(corpus: I, budget: usize, catalog: &FunctionCatalog) -> Result<TokenizerModel, TokenizerError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    BpeTrainer::new(catalog, budget).train(corpus)
}

#[derive(Debug, Clone)]
pub struct BpeTrainer<'c> {
    catalog: &'c FunctionCatalog,
    budget: usize,
    exec: Execution,
}

#[derive(Default)]
struct Inventory {
    segments: HashMap<String, u64>,
    atomics: BTreeSet<String>,
}

impl Inventory {
    fn absorb(&mut self, other: Inventory) {
        for (seg, n) in other.segments {
            *self.segments.entry(seg).or_default() += n;
        }
        self.atomics.extend(other.atomics);
    }
}

impl<'c> BpeTrainer<'c> {
    pub fn new(catalog: &'c FunctionCatalog, budget: usize) -> Self {
        Self {
            catalog,
            budget,
            exec: Execution::default(),
        }
    }

    pub fn execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn train<I, S>(&self, corpus: I) -> Result<TokenizerModel, TokenizerError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let inventory = self.inventory(corpus);
        let specials = Specials::default();
        let base = base_vocab(&specials, self.catalog, &inventory);
        if self.budget < base.len() {
            return Err(TokenizerError::BudgetTooSmall {
                budget: self.budget,
                floor: base.len(),
            });
        }

        let mut words: Vec<(&str, u64)> = inventory.segments.iter().map(|(s, n)| (s.as_str(), *n)).collect();
        // HashMap order is random; the merge loop itself is order-independent,
        // but sorting keeps symbol ids (and debugging) reproducible.
        words.sort_unstable();
        let merges = learn_merges(&words, base.clone(), self.budget);

        let mut vocab = base;
        let mut seen: HashSet<String> = vocab.iter().cloned().collect();
        for (l, r) in &merges {
            let merged = format!("{l}{r}");
            if seen.insert(merged.clone()) {
                vocab.push(merged);
            }
        }
        let functions = self.catalog.names().map(str::to_owned).collect();
        TokenizerModel::from_parts(vocab, merges, specials, self.budget, functions)
    }

    /// Counts non-atomic segments and collects atomic pieces, chunk by chunk.
    fn inventory<I, S>(&self, corpus: I) -> Inventory
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let lexer = Lexer::new(self.catalog);
        let mut total = Inventory::default();
        let mut chunk: Vec<String> = Vec::with_capacity(CORPUS_CHUNK);
        let flush = |chunk: &mut Vec<String>, total: &mut Inventory| {
            let parts = self.exec.map(chunk, |_, formula| {
                let mut inv = Inventory::default();
                for p in pretokenize_with(&lexer, formula) {
                    if p.atomic {
                        inv.atomics.insert(p.text);
                    } else {
                        *inv.segments.entry(p.text).or_default() += 1;
                    }
                }
                inv
            });
            for part in parts {
                total.absorb(part);
            }
            chunk.clear();
        };
        for formula in corpus {
            chunk.push(formula.as_ref().to_owned());
            if chunk.len() == CORPUS_CHUNK {
                flush(&mut chunk, &mut total);
            }
        }
        flush(&mut chunk, &mut total);
        total
    }
}

/// Specials, then single characters, then multi-character atomic pieces.
fn base_vocab(specials: &Specials, catalog: &FunctionCatalog, inv: &Inventory) -> Vec<String> {
    let mut singles: BTreeSet<String> = BTreeSet::new();
    singles.extend(('a'..='z').map(String::from));
    singles.extend(('0'..='9').map(String::from));
    singles.extend(
        (b'!'..=b'~')
            .filter(|b| b.is_ascii_punctuation())
            .map(|b| (b as char).to_string()),
    );
    for seg in inv.segments.keys() {
        singles.extend(seg.chars().map(String::from));
    }
    let mut multis: BTreeSet<String> = BTreeSet::new();
    multis.extend(catalog.names().map(str::to_owned));
    multis.extend(MULTI_CHAR_OPERATORS.iter().map(|s| s.to_string()));
    for a in &inv.atomics {
        if a.chars().count() == 1 {
            singles.insert(a.clone());
        } else {
            multis.insert(a.clone());
        }
    }

    let mut vocab: Vec<String> = specials.in_id_order().iter().map(|s| s.to_string()).collect();
    let reserved: HashSet<String> = vocab.iter().cloned().collect();
    vocab.extend(singles.into_iter().filter(|s| !reserved.contains(s)));
    vocab.extend(multis.into_iter().filter(|s| !reserved.contains(s)));
    vocab
}

#[derive(Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    merged: String,
    left: String,
    pair: Pair,
}

impl Ord for Candidate {
    // Max-heap: highest count, then lexicographically smallest merged
    // string, then smallest left part.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.merged.cmp(&self.merged))
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.pair.cmp(&self.pair))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Symbols {
    strings: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Symbols {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(s.to_owned());
        self.ids.insert(s.to_owned(), id);
        id
    }
}

fn pairs_of(symbols: &[u32]) -> impl Iterator<Item = Pair> + '_ {
    symbols.windows(2).map(|w| (w[0], w[1]))
}

fn merge_word(symbols: &mut Vec<u32>, pair: Pair, into: u32) {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && (symbols[i], symbols[i + 1]) == pair {
            out.push(into);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    *symbols = out;
}

/// Greedy most-frequent-pair merging over weighted words until the vocabulary
/// reaches `budget` or no adjacent pair occurs at least twice.
fn learn_merges(words: &[(&str, u64)], base: Vec<String>, budget: usize) -> Vec<(String, String)> {
    let mut syms = Symbols {
        strings: Vec::new(),
        ids: HashMap::new(),
    };
    let mut vocab_size = base.len();
    let mut in_vocab: HashSet<String> = base.into_iter().collect();

    let mut corpus: Vec<(Vec<u32>, u64)> = words
        .iter()
        .map(|(w, n)| {
            let symbols = w.chars().map(|c| syms.intern(c.encode_utf8(&mut [0; 4]))).collect();
            (symbols, *n)
        })
        .collect();

    let mut counts: HashMap<Pair, u64> = HashMap::new();
    let mut where_: HashMap<Pair, HashSet<usize>> = HashMap::new();
    for (idx, (symbols, n)) in corpus.iter().enumerate() {
        for p in pairs_of(symbols) {
            *counts.entry(p).or_default() += n;
            where_.entry(p).or_default().insert(idx);
        }
    }
    let candidate = |syms: &Symbols, pair: Pair, count: u64| Candidate {
        count,
        merged: format!("{}{}", syms.strings[pair.0 as usize], syms.strings[pair.1 as usize]),
        left: syms.strings[pair.0 as usize].clone(),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = counts.iter().map(|(&p, &c)| candidate(&syms, p, c)).collect();

    let mut merges = Vec::new();
    while vocab_size < budget {
        let Some(top) = heap.pop() else { break };
        if counts.get(&top.pair).copied().unwrap_or(0) != top.count {
            continue;
        }
        if top.count < 2 {
            break;
        }
        let new_id = syms.intern(&top.merged);
        if in_vocab.insert(top.merged.clone()) {
            vocab_size += 1;
        }
        merges.push((top.left.clone(), syms.strings[top.pair.1 as usize].clone()));

        let mut touched: HashSet<Pair> = HashSet::new();
        let affected: Vec<usize> = where_.remove(&top.pair).into_iter().flatten().collect();
        for idx in affected {
            let (symbols, n) = &mut corpus[idx];
            for p in pairs_of(symbols) {
                if let Some(c) = counts.get_mut(&p) {
                    *c -= *n;
                }
                touched.insert(p);
            }
            merge_word(symbols, top.pair, new_id);
            for p in pairs_of(symbols) {
                *counts.entry(p).or_default() += *n;
                where_.entry(p).or_default().insert(idx);
                touched.insert(p);
            }
        }
        for p in touched {
            let c = counts.get(&p).copied().unwrap_or(0);
            if c == 0 {
                counts.remove(&p);
            } else {
                heap.push(candidate(&syms, p, c));
            }
        }
    }
    merges
}
