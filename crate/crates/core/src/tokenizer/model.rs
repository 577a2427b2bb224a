use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lexer::{Arity, FunctionCatalog, Lexer};

use super::{pretokenize_with, TokenizerError, MASK_TOKEN, PAD_TOKEN, SPACE_MARKER, UNKNOWN_TOKEN};

/// Reserved vocabulary entries. They always occupy ids 0..=3 in this order:
/// pad, unknown, mask, space marker.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specials {
    pub mask_token: String,
    pub pad: String,
    pub unknown: String,
    pub space_marker: String,
}

impl Default for Specials {
    fn default() -> Self {
        Self {
            mask_token: MASK_TOKEN.into(),
            pad: PAD_TOKEN.into(),
            unknown: UNKNOWN_TOKEN.into(),
            space_marker: SPACE_MARKER.into(),
        }
    }
}

impl Specials {
    pub fn in_id_order(&self) -> [&str; 4] {
        [&self.pad, &self.unknown, &self.mask_token, &self.space_marker]
    }
}

/// On-disk layout. Field order is the key order in the JSON file.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    vocab: Vec<String>,
    merges: Vec<(String, String)>,
    specials: Specials,
    budget: usize,
    /// Built-in function names treated as atomic during pre-tokenization.
    functions: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TokenizerModel {
    vocab: Vec<String>,
    merges: Vec<(String, String)>,
    specials: Specials,
    budget: usize,
    functions: FunctionCatalog,
    ids: HashMap<String, u32>,
    /// (left id, right id) -> (rank, merged id)
    ranks: HashMap<(u32, u32), (u32, u32)>,
    pad_id: u32,
    unk_id: u32,
    mask_id: u32,
    space_id: u32,
}

impl PartialEq for TokenizerModel {
    fn eq(&self, other: &Self) -> bool {
        self.vocab == other.vocab
            && self.merges == other.merges
            && self.specials == other.specials
            && self.budget == other.budget
            && self.functions == other.functions
    }
}

impl TokenizerModel {
    pub fn from_parts(
        vocab: Vec<String>,
        merges: Vec<(String, String)>,
        specials: Specials,
        budget: usize,
        functions: Vec<String>,
    ) -> Result<Self, TokenizerError> {
        let invalid = |msg: String| Err(TokenizerError::InvalidModel(msg));
        if vocab.len() > budget {
            return invalid(format!(
                "vocabulary has {} entries but the budget is {budget}",
                vocab.len()
            ));
        }
        let mut ids = HashMap::with_capacity(vocab.len());
        for (i, v) in vocab.iter().enumerate() {
            if ids.insert(v.clone(), i as u32).is_some() {
                return invalid(format!("duplicate vocabulary entry `{v}`"));
            }
        }
        let id_of = |s: &str| ids.get(s).copied();
        let mut special_ids = [0u32; 4];
        for (slot, s) in special_ids.iter_mut().zip(specials.in_id_order()) {
            match id_of(s) {
                Some(id) => *slot = id,
                None => return invalid(format!("special token `{s}` missing from vocabulary")),
            }
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, (l, r)) in merges.iter().enumerate() {
            let merged = format!("{l}{r}");
            let (Some(li), Some(ri), Some(mi)) = (id_of(l), id_of(r), id_of(&merged)) else {
                return invalid(format!("merge ({l:?}, {r:?}) refers to tokens outside the vocabulary"));
            };
            ranks.entry((li, ri)).or_insert((rank as u32, mi));
        }
        let mut catalog = FunctionCatalog::empty();
        for f in &functions {
            catalog.insert(f, Arity::new(0, None));
        }
        let [pad_id, unk_id, mask_id, space_id] = special_ids;
        Ok(Self {
            vocab,
            merges,
            specials,
            budget,
            functions: catalog,
            ids,
            ranks,
            pad_id,
            unk_id,
            mask_id,
            space_id,
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn specials(&self) -> &Specials {
        &self.specials
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn token_id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn mask_id(&self) -> u32 {
        self.mask_id
    }

    pub fn unknown_id(&self) -> u32 {
        self.unk_id
    }

    pub fn lexer(&self) -> Lexer<'_> {
        Lexer::new(&self.functions)
    }

    /// Encodes a formula. Atomic pieces map straight to ids; letter runs go
    /// through the merge table in learned order. Unknown pieces map to the
    /// unknown id.
    pub fn encode(&self, formula: &str) -> Vec<u32> {
        let mut out = Vec::new();
        self.encode_into(formula, &mut out);
        out
    }

    /// Like [`encode`](Self::encode) but maps each literal `<mask>` in the
    /// text to the mask id.
    pub fn encode_with_masks(&self, text: &str) -> Vec<u32> {
        let mut out = Vec::new();
        for (i, part) in text.split(self.specials.mask_token.as_str()).enumerate() {
            if i > 0 {
                out.push(self.mask_id);
            }
            self.encode_into(part, &mut out);
        }
        out
    }

    fn encode_into(&self, formula: &str, out: &mut Vec<u32>) {
        for piece in pretokenize_with(&self.lexer(), formula) {
            if piece.atomic {
                out.push(self.token_id(&piece.text).unwrap_or(self.unk_id));
            } else {
                self.encode_segment(&piece.text, out);
            }
        }
    }

    fn encode_segment(&self, segment: &str, out: &mut Vec<u32>) {
        let mut buf = [0u8; 4];
        let mut symbols: Vec<u32> = segment
            .chars()
            .map(|c| self.token_id(c.encode_utf8(&mut buf)).unwrap_or(self.unk_id))
            .collect();
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| {
                    self.ranks
                        .get(&(w[0], w[1]))
                        .map(|&(rank, merged)| (rank, (w[0], w[1]), merged))
                })
                .min_by_key(|&(rank, _, _)| rank);
            let Some((_, pair, merged)) = best else { break };
            let mut next = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && (symbols[i], symbols[i + 1]) == pair {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(symbols[i]);
                    i += 1;
                }
            }
            symbols = next;
        }
        out.extend(symbols);
    }

    /// Renders ids back to text. Space markers become spaces, padding is
    /// dropped and unknown ids render as U+FFFD. Case is not recoverable.
    pub fn decode(&self, ids: &[u32]) -> Result<String, TokenizerError> {
        let mut out = String::new();
        for (position, &id) in ids.iter().enumerate() {
            let Some(tok) = self.vocab.get(id as usize) else {
                return Err(TokenizerError::IdOutOfRange {
                    position,
                    id,
                    vocab_size: self.vocab.len(),
                });
            };
            match id {
                _ if id == self.space_id => out.push(' '),
                _ if id == self.pad_id => {}
                _ if id == self.unk_id => out.push(char::REPLACEMENT_CHARACTER),
                _ => out.push_str(tok),
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let mut functions: Vec<String> = self.functions.names().map(str::to_owned).collect();
        functions.sort();
        let file = ModelFile {
            vocab: self.vocab.clone(),
            merges: self.merges.clone(),
            specials: self.specials.clone(),
            budget: self.budget,
            functions,
        };
        serde_json::to_string_pretty(&file).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, TokenizerError> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_parts(file.vocab, file.merges, file.specials, file.budget, file.functions)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Vocabulary entries a merge produced, for boundary audits.
    pub fn merged_tokens(&self) -> HashSet<String> {
        self.merges.iter().map(|(l, r)| format!("{l}{r}")).collect()
    }
}
