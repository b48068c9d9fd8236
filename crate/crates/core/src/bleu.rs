//! Multi-reference BLEU-1/BLEU-2 with clipped n-gram precision and the
//! brevity penalty, at sentence and corpus level.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textprep::{prepare, CleanConfig};

/// Added to zero match counts when smoothing is on.
pub const SMOOTHING_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BleuError {
    #[error("max_order must be 1 or 2, got {0}")]
    BadOrder(usize),
    #[error("no references supplied")]
    NoReferences,
    #[error("every reference is empty")]
    EmptyReferences,
    #[error("corpus has no candidate/reference pairs")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuOptions {
    pub smooth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub max_order: usize,
    pub bleu1: f64,
    /// Present when `max_order == 2`.
    pub bleu2: Option<f64>,
    /// Clipped n-gram matches, index 0 = unigrams.
    pub matches: Vec<u64>,
    /// Candidate n-gram totals, index 0 = unigrams.
    pub totals: Vec<u64>,
    pub precisions: Vec<f64>,
    /// `exp(1 - r/c)` when `c <= r`, else 1. Reported as 0 when the
    /// candidate side is empty (the limit as `c -> 0`).
    pub brevity_penalty: f64,
    pub candidate_length: u64,
    pub reference_length: u64,
    pub smoothed: bool,
}

#[derive(Debug, Clone, Default)]
struct Stats {
    matches: Vec<u64>,
    totals: Vec<u64>,
    cand_len: u64,
    ref_len: u64,
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts
                .entry(w.iter().map(AsRef::as_ref).collect())
                .or_insert(0) += 1;
        }
    }
    counts
}

/// Reference length closest to `c`; ties go to the shorter reference.
fn closest_ref_len<T: AsRef<str>>(c: usize, references: &[Vec<T>]) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

fn pair_stats<T: AsRef<str>>(
    candidate: &[T],
    references: &[Vec<T>],
    max_order: usize,
) -> Result<Stats, BleuError> {
    if references.is_empty() {
        return Err(BleuError::NoReferences);
    }
    if references.iter().all(Vec::is_empty) {
        return Err(BleuError::EmptyReferences);
    }
    let mut stats = Stats {
        matches: vec![0; max_order],
        totals: vec![0; max_order],
        cand_len: candidate.len() as u64,
        ref_len: closest_ref_len(candidate.len(), references) as u64,
    };
    for n in 1..=max_order {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<Vec<&str>, u64> = HashMap::new();
        for r in references {
            for (g, k) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(k);
            }
        }
        stats.matches[n - 1] = cand
            .iter()
            .map(|(g, &k)| k.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        stats.totals[n - 1] = cand.values().sum();
    }
    Ok(stats)
}

fn report(stats: &Stats, max_order: usize, opts: BleuOptions) -> BleuReport {
    let precisions: Vec<f64> = stats
        .matches
        .iter()
        .zip(&stats.totals)
        .map(|(&m, &t)| {
            if opts.smooth && m == 0 {
                SMOOTHING_EPSILON / t.max(1) as f64
            } else if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            }
        })
        .collect();
    let (c, r) = (stats.cand_len as f64, stats.ref_len as f64);
    let bp = if stats.cand_len == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r / c).exp()
    };
    // geometric mean written out per order so that exact ratios stay exact
    let score = |order: usize| match order {
        1 => bp * precisions[0],
        _ => bp * (precisions[0] * precisions[1]).sqrt(),
    };
    BleuReport {
        max_order,
        bleu1: score(1),
        bleu2: (max_order >= 2).then(|| score(2)),
        matches: stats.matches.clone(),
        totals: stats.totals.clone(),
        precisions,
        brevity_penalty: bp,
        candidate_length: stats.cand_len,
        reference_length: stats.ref_len,
        smoothed: opts.smooth,
    }
}

fn check_order(max_order: usize) -> Result<(), BleuError> {
    if matches!(max_order, 1 | 2) {
        Ok(())
    } else {
        Err(BleuError::BadOrder(max_order))
    }
}

pub fn sentence_bleu<T: AsRef<str>>(
    candidate: &[T],
    references: &[Vec<T>],
    max_order: usize,
) -> Result<BleuReport, BleuError> {
    sentence_bleu_with(candidate, references, max_order, BleuOptions::default())
}

pub fn sentence_bleu_with<T: AsRef<str>>(
    candidate: &[T],
    references: &[Vec<T>],
    max_order: usize,
    opts: BleuOptions,
) -> Result<BleuReport, BleuError> {
    check_order(max_order)?;
    Ok(report(
        &pair_stats(candidate, references, max_order)?,
        max_order,
        opts,
    ))
}

/// A candidate and its references, already tokenized.
pub type BleuPair<T> = (Vec<T>, Vec<Vec<T>>);

/// Sums matches, totals and lengths over every pair before forming
/// precisions and the brevity penalty.
pub fn corpus_bleu<T: AsRef<str>>(
    pairs: &[BleuPair<T>],
    max_order: usize,
) -> Result<BleuReport, BleuError> {
    corpus_bleu_with(pairs, max_order, BleuOptions::default())
}

pub fn corpus_bleu_with<T: AsRef<str>>(
    pairs: &[BleuPair<T>],
    max_order: usize,
    opts: BleuOptions,
) -> Result<BleuReport, BleuError> {
    check_order(max_order)?;
    if pairs.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    let mut acc = Stats {
        matches: vec![0; max_order],
        totals: vec![0; max_order],
        ..Stats::default()
    };
    for (cand, refs) in pairs {
        let s = pair_stats(cand, refs, max_order)?;
        for n in 0..max_order {
            acc.matches[n] += s.matches[n];
            acc.totals[n] += s.totals[n];
        }
        acc.cand_len += s.cand_len;
        acc.ref_len += s.ref_len;
    }
    Ok(report(&acc, max_order, opts))
}

/// Mean of per-pair sentence scores, `(bleu1, bleu2)`.
pub fn mean_sentence_bleu<T: AsRef<str>>(pairs: &[BleuPair<T>]) -> Result<(f64, f64), BleuError> {
    if pairs.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    let mut sum = (0.0, 0.0);
    for (cand, refs) in pairs {
        let r = sentence_bleu(cand, refs, 2)?;
        sum.0 += r.bleu1;
        sum.1 += r.bleu2.unwrap_or(0.0);
    }
    let n = pairs.len() as f64;
    Ok((sum.0 / n, sum.1 / n))
}

/// Caption-preset cleaning followed by tokenization.
pub fn bleu_tokens(text: &str) -> Vec<String> {
    prepare(text, &CleanConfig::CAPTION)
}

/// `BLEU-1 x.xxxx BLEU-2 x.xxxx`
pub fn format_scores(report: &BleuReport) -> String {
    format!(
        "BLEU-1 {:.4} BLEU-2 {:.4}",
        report.bleu1,
        report.bleu2.unwrap_or(0.0)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn perfect_match() {
        let r = sentence_bleu(&t("the cat sat"), &[t("the cat sat")], 2).unwrap();
        assert_eq!(r.bleu1, 1.0);
        assert_eq!(r.bleu2, Some(1.0));
        assert_eq!(format_scores(&r), "BLEU-1 1.0000 BLEU-2 1.0000");
    }

    #[test]
    fn clipping() {
        let r = sentence_bleu(&t("the the the"), &[t("the cat")], 1).unwrap();
        assert_eq!((r.matches[0], r.totals[0]), (1, 3));
        assert_eq!(r.brevity_penalty, 1.0);
        assert_eq!(r.bleu1, 1.0 / 3.0);
        assert_eq!(r.bleu2, None);
    }

    #[test]
    fn brevity_penalty() {
        let r = sentence_bleu(&t("the cat"), &[t("the cat sat")], 1).unwrap();
        assert_eq!(r.bleu1, (1.0f64 - 1.5).exp());
        assert!((r.bleu1 - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn closest_reference_length_ties_to_shorter() {
        // c = 3, refs of length 2 and 4 are equally close
        let r = sentence_bleu(&t("a b c"), &[t("a b c d"), t("a b")], 1).unwrap();
        assert_eq!(r.reference_length, 2);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn errors_and_empty_candidate() {
        let none: Vec<Vec<&str>> = vec![];
        assert_eq!(
            sentence_bleu(&t("a"), &none, 1).unwrap_err(),
            BleuError::NoReferences
        );
        assert_eq!(
            sentence_bleu(&t("a"), &[vec![]], 1).unwrap_err(),
            BleuError::EmptyReferences
        );
        assert_eq!(
            sentence_bleu(&t("a"), &[t("a")], 3).unwrap_err(),
            BleuError::BadOrder(3)
        );
        let r = sentence_bleu(&[] as &[&str], &[t("a b")], 2).unwrap();
        assert_eq!((r.bleu1, r.bleu2, r.brevity_penalty), (0.0, Some(0.0), 0.0));
        let empty: Vec<BleuPair<&str>> = vec![];
        assert_eq!(corpus_bleu(&empty, 2).unwrap_err(), BleuError::EmptyCorpus);
    }

    #[test]
    fn corpus_of_one_equals_sentence() {
        let pair = (
            t("there is a gun on the bed"),
            vec![t("a gun lies on the bed"), t("there is a gun")],
        );
        let s = sentence_bleu(&pair.0, &pair.1, 2).unwrap();
        let c = corpus_bleu(&[pair], 2).unwrap();
        assert_eq!(s, c);
    }

    #[test]
    fn disjoint_vocabularies_score_zero() {
        let pairs = vec![(t("a b"), vec![t("c d")]), (t("e f g"), vec![t("h i")])];
        let r = corpus_bleu(&pairs, 2).unwrap();
        assert_eq!(r.bleu1, 0.0);
        assert_eq!(r.bleu2, Some(0.0));
        let smoothed = corpus_bleu_with(&pairs, 2, BleuOptions { smooth: true }).unwrap();
        assert!(smoothed.bleu1 > 0.0 && smoothed.bleu1 < 1e-8);
    }

    #[test]
    fn unigram_only_candidate_has_zero_bigram_score() {
        let r = sentence_bleu(&t("cat"), &[t("cat")], 2).unwrap();
        assert_eq!(r.bleu1, 1.0);
        assert_eq!(r.totals[1], 0);
        assert_eq!(r.bleu2, Some(0.0));
    }

    #[test]
    fn mean_sentence_scores() {
        let pairs = vec![(t("a b"), vec![t("a b")]), (t("x y"), vec![t("p q")])];
        assert_eq!(mean_sentence_bleu(&pairs).unwrap(), (0.5, 0.5));
    }

    #[test]
    fn tokens_are_caption_cleaned() {
        assert_eq!(
            bleu_tokens("There's a Gun, 2 of them!"),
            vec!["theres", "a", "gun", "of", "them"]
        );
    }
}
