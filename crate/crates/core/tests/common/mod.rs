//! Reference implementations written without touching the library's
//! internals, plus small fixture builders shared by the test targets.

#![allow(dead_code)]

use std::collections::BTreeSet;

use postscreen::corpus::{CaptionedImage, Category, Label};
use postscreen::nbayes::Variant;
use postscreen::ImageBuffer;
use rand::Rng;

/// Per-class log scores `[benign, concerning]` recomputed straight from the
/// smoothing formulas with plain loops.
pub fn nb_log_scores(
    docs: &[(Vec<String>, Label)],
    variant: Variant,
    alpha: f64,
    query: &[String],
) -> [f64; 2] {
    let vocab: Vec<String> = docs
        .iter()
        .flat_map(|(d, _)| d.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let v = vocab.len() as f64;
    let n_docs = docs.len() as f64;
    let class_of = |c: usize| {
        if c == 0 {
            Label::Benign
        } else {
            Label::Concerning
        }
    };

    // token count of `t` in class c, and total tokens in class c
    let count = |c: usize, t: &str| -> f64 {
        docs.iter()
            .filter(|(_, l)| *l == class_of(c))
            .map(|(d, _)| d.iter().filter(|w| *w == t).count())
            .sum::<usize>() as f64
    };
    let total = |c: usize| -> f64 {
        docs.iter()
            .filter(|(_, l)| *l == class_of(c))
            .map(|(d, _)| d.len())
            .sum::<usize>() as f64
    };
    let docs_in = |c: usize| docs.iter().filter(|(_, l)| *l == class_of(c)).count() as f64;
    let docs_with = |c: usize, t: &str| {
        docs.iter()
            .filter(|(d, l)| *l == class_of(c) && d.iter().any(|w| w == t))
            .count() as f64
    };

    let mut out = [0.0; 2];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut s = (docs_in(c) / n_docs).ln();
        match variant {
            Variant::Multinomial => {
                for t in query.iter().filter(|t| vocab.contains(t)) {
                    s += ((count(c, t) + alpha) / (total(c) + alpha * v)).ln();
                }
            }
            Variant::Complement => {
                let o = 1 - c;
                for t in query.iter().filter(|t| vocab.contains(t)) {
                    s -= ((count(o, t) + alpha) / (total(o) + alpha * v)).ln();
                }
            }
            Variant::Bernoulli => {
                for t in &vocab {
                    let p = (docs_with(c, t) + alpha) / (docs_in(c) + 2.0 * alpha);
                    s += if query.contains(t) {
                        p.ln()
                    } else {
                        (1.0 - p).ln()
                    };
                }
            }
        }
        *slot = s;
    }
    out
}

/// Occurrences of `gram` in `tokens` by sliding comparison.
fn occurrences(tokens: &[String], gram: &[String]) -> u64 {
    if gram.len() > tokens.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len())
        .filter(|&i| tokens[i..i + gram.len()] == *gram)
        .count() as u64
}

/// Corpus BLEU-1 and BLEU-2 (unsmoothed) by brute-force recounting.
pub fn corpus_bleu(pairs: &[(Vec<String>, Vec<Vec<String>>)]) -> (f64, f64) {
    let mut matches = [0u64; 2];
    let mut totals = [0u64; 2];
    let (mut c, mut r) = (0u64, 0u64);
    for (cand, refs) in pairs {
        c += cand.len() as u64;
        let mut best = refs[0].len();
        for x in refs {
            let (dx, db) = (x.len().abs_diff(cand.len()), best.abs_diff(cand.len()));
            if dx < db || (dx == db && x.len() < best) {
                best = x.len();
            }
        }
        r += best as u64;
        for n in 1..=2 {
            if cand.len() < n {
                continue;
            }
            let windows: Vec<&[String]> = cand.windows(n).collect();
            totals[n - 1] += windows.len() as u64;
            let mut seen: Vec<&[String]> = Vec::new();
            for g in windows {
                if seen.contains(&g) {
                    continue;
                }
                seen.push(g);
                let in_cand = occurrences(cand, g);
                let in_refs = refs.iter().map(|x| occurrences(x, g)).max().unwrap_or(0);
                matches[n - 1] += in_cand.min(in_refs);
            }
        }
    }
    let p = |i: usize| {
        if totals[i] == 0 {
            0.0
        } else {
            matches[i] as f64 / totals[i] as f64
        }
    };
    let bp = if c == 0 {
        0.0
    } else if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    (bp * p(0), bp * (p(0) * p(1)).sqrt())
}

/// Fraction of (positive, negative) pairs ranked correctly, ties worth half.
pub fn mann_whitney(gold: &[Label], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, gi) in gold.iter().enumerate() {
        for (j, gj) in gold.iter().enumerate() {
            if *gi == Label::Concerning && *gj == Label::Benign {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn random_image(rng: &mut impl Rng, max_side: u32) -> ImageBuffer {
    let w = rng.gen_range(1..=max_side);
    let h = rng.gen_range(1..=max_side);
    let pixels = (0..w * h * 3).map(|_| rng.gen()).collect();
    ImageBuffer::new(w, h, pixels).unwrap()
}

/// An image item whose five captions are `"{stem} one"` .. `"{stem} five"`.
pub fn item(image: ImageBuffer, stem: &str, category: Category, augmented: bool) -> CaptionedImage {
    let captions = ["one", "two", "three", "four", "five"].map(|n| format!("{stem} {n}"));
    CaptionedImage::new(image, captions, category, augmented).unwrap()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
