use std::ops::Range;

use rand::seq::index;
use rand::Rng as _;

use super::{permille, Objective, ObjectiveError, PretrainExample, MASK_TOKEN};
use crate::lexer::{Lexer, Token};
use crate::seed::Rng;

/// Number of leading characters kept when the trailing fraction `p` is
/// hidden: `ceil((1 - p) * len)`, clamped so that at least one character
/// is kept and at least one is masked.
pub fn tail_prefix_len(len: usize, p: f64) -> usize {
    let keep = 1000usize.saturating_sub(permille(p));
    (keep * len).div_ceil(1000).clamp(1, len.saturating_sub(1).max(1))
}

pub fn tail_mask(formula: &str, fractions: &[f64], rng: &mut Rng) -> Result<PretrainExample, ObjectiveError> {
    let len = formula.chars().count();
    if len < 2 {
        return Err(ObjectiveError::TooShort { len });
    }
    let p = fractions[rng.random_range(0..fractions.len())];
    let keep = tail_prefix_len(len, p);
    let mut input: String = formula.chars().take(keep).collect();
    input.push_str(MASK_TOKEN);
    Ok(PretrainExample::new(
        formula,
        input,
        Objective::TailMask,
        format!("p={p:.2}"),
    ))
}

/// Masks whole lexer tokens. Whitespace tokens count as tokens.
pub fn la_msp(
    formula: &str,
    rate: f64,
    mean_span: usize,
    lexer: &Lexer<'_>,
    rng: &mut Rng,
) -> Result<PretrainExample, ObjectiveError> {
    let toks = lexer.lex(formula);
    if toks.is_empty() {
        return Err(ObjectiveError::Empty);
    }
    let spans = lamsp_spans(toks.len(), rate, mean_span, rng);
    let input = render_masked(&toks, &spans);
    Ok(PretrainExample::new(
        formula,
        input,
        Objective::MaskedSpan,
        format!("rate={rate:.2},span={mean_span}"),
    ))
}

/// Chooses masked token ranges over `n` tokens.
///
/// The masked count is `n * rate` rounded up or down at random so its
/// expectation is exact (but at least one token). Those tokens are split
/// into `round(count / mean_span)` spans of random positive lengths, laid
/// out between random gaps of at least one unmasked token.
pub fn lamsp_spans(n: usize, rate: f64, mean_span: usize, rng: &mut Rng) -> Vec<Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let scaled = n * permille(rate);
    let bump = rng.random_range(0..1000) < scaled % 1000;
    let noise = (scaled / 1000 + usize::from(bump)).clamp(1, n);
    let clean = n - noise;
    let spans = ((noise as f64 / mean_span.max(1) as f64).round() as usize).clamp(1, noise.min(clean + 1));

    let noise_lens = positive_composition(noise, spans, rng);
    // k+1 gaps, inner ones at least 1: distribute the slack freely, then pad.
    let mut gaps: Vec<usize> = positive_composition(clean - (spans - 1) + spans + 1, spans + 1, rng)
        .into_iter()
        .map(|g| g - 1)
        .collect();
    for g in &mut gaps[1..spans] {
        *g += 1;
    }

    let mut out = Vec::with_capacity(spans);
    let mut pos = gaps[0];
    for (len, gap) in noise_lens.into_iter().zip(&gaps[1..]) {
        out.push(pos..pos + len);
        pos += len + gap;
    }
    debug_assert_eq!(pos, n);
    out
}

/// Uniformly random composition of `total` into `parts` positive summands.
fn positive_composition(total: usize, parts: usize, rng: &mut Rng) -> Vec<usize> {
    debug_assert!(parts >= 1 && parts <= total);
    let mut cuts: Vec<usize> = index::sample(rng, total - 1, parts - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    cuts.push(total);
    let mut prev = 0;
    cuts.into_iter()
        .map(|c| {
            let len = c - prev;
            prev = c;
            len
        })
        .collect()
}

/// Concatenates token texts, replacing each maximal masked run with one
/// mask token.
pub fn render_masked(toks: &[Token<'_>], spans: &[Range<usize>]) -> String {
    let mut masked = vec![false; toks.len()];
    for s in spans {
        masked[s.clone()].fill(true);
    }
    let mut out = String::new();
    for (i, t) in toks.iter().enumerate() {
        if !masked[i] {
            out.push_str(t.text);
        } else if i == 0 || !masked[i - 1] {
            out.push_str(MASK_TOKEN);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn tail_prefix_examples() {
        assert_eq!(tail_prefix_len(12, 0.5), 6);
        assert_eq!(tail_prefix_len(2, 0.5), 1);
        assert_eq!(tail_prefix_len(10, 0.3), 7);
        assert_eq!(tail_prefix_len(10, 0.7), 3);
        // ceil(0.7 * 2) = 2 would keep everything.
        assert_eq!(tail_prefix_len(2, 0.3), 1);
    }

    #[test]
    fn tail_mask_sum() {
        let mut rng = rng_from(0);
        let ex = tail_mask("=SUM(A1:A10)", &[0.5], &mut rng).unwrap();
        assert_eq!(ex.input, "=SUM(A<mask>");
        assert_eq!(ex.target, "=SUM(A1:A10)");
        assert_eq!(ex.detail, "p=0.50");
        assert_eq!(tail_mask("=A", &[0.5], &mut rng).unwrap().input, "=<mask>");
        assert_eq!(
            tail_mask("=", &[0.5], &mut rng),
            Err(ObjectiveError::TooShort { len: 1 })
        );
    }

    #[test]
    fn tail_mask_counts_chars_not_bytes() {
        let mut rng = rng_from(0);
        let ex = tail_mask("=\"ééé\"", &[0.5], &mut rng).unwrap();
        assert_eq!(ex.input, "=\"é<mask>");
    }

    #[test]
    fn full_mask_is_single_token() {
        let lexer = Lexer::default();
        let mut rng = rng_from(4);
        let ex = la_msp("=SUM(A1:A10, 3)", 1.0, 3, &lexer, &mut rng).unwrap();
        assert_eq!(ex.input, MASK_TOKEN);
        assert_eq!(ex.target, "=SUM(A1:A10, 3)");
    }

    #[test]
    #[allow(clippy::single_range_in_vec_init)] // a list holding one span
    fn range_span_example() {
        let lexer = Lexer::default();
        let f = r#"=SUMIF(B1:B5,"x",A1:A5)"#;
        let toks = lexer.lex(f);
        assert_eq!(render_masked(&toks, &[3..6]), r#"=SUMIF(<mask>,"x",A1:A5)"#);
        let seed = (0..10_000)
            .find(|&s| lamsp_spans(toks.len(), 0.25, 3, &mut rng_from(s)) == [3..6])
            .expect("some seed masks exactly the first range");
        let ex = la_msp(f, 0.25, 3, &lexer, &mut rng_from(seed)).unwrap();
        assert_eq!(ex.input, r#"=SUMIF(<mask>,"x",A1:A5)"#);
    }

    #[test]
    fn spans_are_separated_and_in_bounds() {
        let mut rng = rng_from(9);
        for n in 1..60 {
            for (rate, span) in [(0.35, 6), (0.35, 2), (0.15, 6), (0.15, 2), (0.9, 1)] {
                let spans = lamsp_spans(n, rate, span, &mut rng);
                assert!(!spans.is_empty());
                assert!(spans.iter().all(|s| !s.is_empty() && s.end <= n));
                assert!(spans.windows(2).all(|w| w[0].end < w[1].start));
            }
        }
    }

    #[test]
    fn expected_rate_is_exact_for_long_inputs() {
        let mut rng = rng_from(2);
        let n = 40;
        let trials = 4000;
        let masked: usize = (0..trials)
            .map(|_| lamsp_spans(n, 0.15, 2, &mut rng).iter().map(|s| s.len()).sum::<usize>())
            .sum();
        let rate = masked as f64 / (n * trials) as f64;
        assert!((rate - 0.15).abs() < 0.005, "{rate}");
    }

    #[test]
    fn composition_sums() {
        let mut rng = rng_from(1);
        for total in 1..20 {
            for parts in 1..=total {
                let c = positive_composition(total, parts, &mut rng);
                assert_eq!(c.len(), parts);
                assert_eq!(c.iter().sum::<usize>(), total);
                assert!(c.iter().all(|&x| x >= 1));
            }
        }
    }
}
