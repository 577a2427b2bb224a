use rand::seq::IndexedRandom;
use rand::Rng as _;

use super::{permille, Objective, ObjectiveError, PretrainExample};
use crate::lexer::Lexer;
use crate::seed::Rng;

/// Replacement and insertion pool: the random-operator set, `,`, digits
/// and upper-case letters.
pub const RN_POOL: &[&str] = &[
    "+", "-", "*", "/", "^", "&", "<", ">", "=", ".", ")", "#", ",", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    "A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M", "N", "O", "P", "Q", "R", "S", "T", "U", "V", "W",
    "X", "Y", "Z",
];

/// One corruption over a token-text list. Indices refer to the list as it
/// is when the event applies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RnEvent {
    Insert { at: usize, text: String },
    Delete { at: usize },
    Update { at: usize, text: String },
}

impl RnEvent {
    fn kind(&self) -> &'static str {
        match self {
            RnEvent::Insert { .. } => "insert",
            RnEvent::Delete { .. } => "delete",
            RnEvent::Update { .. } => "update",
        }
    }
}

pub fn apply_events(tokens: &mut Vec<String>, events: &[RnEvent]) {
    for e in events {
        match e {
            RnEvent::Insert { at, text } => tokens.insert(*at, text.clone()),
            RnEvent::Delete { at } => {
                tokens.remove(*at);
            }
            RnEvent::Update { at, text } => tokens[*at] = text.clone(),
        }
    }
}

/// Applies `ceil(rate * n)` insert/delete/update events, `n` being the
/// number of non-whitespace lexer tokens. Delete and update only target
/// non-whitespace tokens; an update always changes the token.
pub fn random_noise(
    formula: &str,
    rate: f64,
    lexer: &Lexer<'_>,
    rng: &mut Rng,
) -> Result<PretrainExample, ObjectiveError> {
    let toks = lexer.lex(formula);
    let mut texts: Vec<String> = toks.iter().map(|t| t.text.to_owned()).collect();
    let mut solid: Vec<bool> = toks.iter().map(|t| !t.is_whitespace()).collect();
    let n = solid.iter().filter(|&&s| s).count();
    if n == 0 {
        return Err(ObjectiveError::Empty);
    }
    let count = (n * permille(rate)).div_ceil(1000);
    let mut kinds = Vec::with_capacity(count);
    for _ in 0..count {
        let targets: Vec<usize> = (0..texts.len()).filter(|&i| solid[i]).collect();
        let choice = if targets.is_empty() { 0 } else { rng.random_range(0..3) };
        let event = match choice {
            0 => {
                let at = rng.random_range(0..=texts.len());
                solid.insert(at, true);
                RnEvent::Insert {
                    at,
                    text: pick(rng, None),
                }
            }
            1 => {
                let at = *targets.choose(rng).expect("non-empty");
                solid.remove(at);
                RnEvent::Delete { at }
            }
            _ => {
                let at = *targets.choose(rng).expect("non-empty");
                RnEvent::Update {
                    at,
                    text: pick(rng, Some(&texts[at])),
                }
            }
        };
        kinds.push(event.kind());
        apply_events(&mut texts, std::slice::from_ref(&event));
    }
    Ok(PretrainExample::new(
        formula,
        texts.concat(),
        Objective::RandomNoise,
        kinds.join(","),
    ))
}

fn pick(rng: &mut Rng, avoid: Option<&str>) -> String {
    loop {
        let t = *RN_POOL.choose(rng).expect("pool is non-empty");
        if Some(t) != avoid {
            return t.to_owned();
        }
    }
}
