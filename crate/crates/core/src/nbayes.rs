//! Multinomial, Complement and Bernoulli Naive Bayes over token lists.
//!
//! All three variants share the same count tables:
//!
//! * Multinomial: `theta[c][t] = (N_ct + a) / (N_c + a|V|)`, where `N_ct` is
//!   the number of times token `t` occurs in class `c` documents. A
//!   document scores `log P(c) + sum_t f_t log theta[c][t]`.
//! * Complement: the same estimate computed from every class except `c`.
//!   A document scores `log P(c) - sum_t f_t log theta~[c][t]`.
//! * Bernoulli: `theta[c][t] = (D_ct + a) / (D_c + 2a)`, where `D_ct` counts
//!   class `c` documents containing `t`. Every vocabulary token contributes,
//!   present ones with `log theta` and absent ones with `log(1 - theta)`.
//!
//! Out-of-vocabulary tokens are ignored. Priors are class document fractions.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::textprep::{TextError, Vocabulary};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum NbError {
    #[error("training data must contain both classes (found only {0})")]
    SingleClass(Label),
    #[error("no training documents")]
    Empty,
    #[error("smoothing alpha must be finite and > 0, got {0}")]
    BadAlpha(f64),
    #[error("decision threshold must lie in [0, 1], got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Vocabulary(#[from] TextError),
    #[error("model file: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[serde(alias = "mnb")]
    Multinomial,
    #[serde(alias = "cnb")]
    Complement,
    #[serde(alias = "bnb")]
    Bernoulli,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::Multinomial,
        Variant::Complement,
        Variant::Bernoulli,
    ];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Multinomial => "mnb",
            Variant::Complement => "cnb",
            Variant::Bernoulli => "bnb",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mnb" | "multinomial" => Ok(Variant::Multinomial),
            "cnb" | "complement" => Ok(Variant::Complement),
            "bnb" | "bernoulli" => Ok(Variant::Bernoulli),
            other => Err(format!(
                "unknown variant {other:?} (expected mnb, cnb or bnb)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NbConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub threshold: f64,
    /// Normalize complement weights by their L1 norm per class.
    #[serde(default)]
    pub cnb_weight_norm: bool,
}

impl NbConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            alpha: 1.0,
            threshold: DEFAULT_THRESHOLD,
            cnb_weight_norm: false,
        }
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    fn validate(&self) -> Result<(), NbError> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(NbError::BadAlpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(NbError::BadThreshold(self.threshold));
        }
        Ok(())
    }
}

/// A classifier's verdict on one document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Probability of the concerning class.
    pub score: f64,
    /// Per-class decision scores, indexed by [`Label::index`].
    pub log_scores: [f64; 2],
}

impl Prediction {
    /// Normalizes two class scores into a prediction. The label is
    /// `Concerning` only when the score strictly exceeds `threshold`, so an
    /// exact tie at 0.5 stays `Benign`.
    pub fn from_log_scores(log_scores: [f64; 2], threshold: f64) -> Self {
        let [neg, pos] = log_scores;
        let score = 1.0 / (1.0 + (neg - pos).exp());
        Self {
            label: label_for(score, threshold),
            score,
            log_scores,
        }
    }

    pub fn probabilities(&self) -> [f64; 2] {
        [1.0 - self.score, self.score]
    }
}

pub fn label_for(score: f64, threshold: f64) -> Label {
    if score > threshold {
        Label::Concerning
    } else {
        Label::Benign
    }
}

/// Anything that maps a token list to a two-class prediction.
pub trait TextClassifier: Send + Sync {
    fn predict(&self, doc: &[String]) -> Prediction;

    fn threshold(&self) -> f64 {
        DEFAULT_THRESHOLD
    }

    /// Prediction from class priors alone, for inputs with no usable tokens.
    fn predict_prior(&self) -> Prediction {
        self.predict(&[])
    }

    fn predict_batch(&self, docs: &[Vec<String>]) -> Vec<Prediction> {
        docs.iter().map(|d| self.predict(d)).collect()
    }
}

/// Trained parameters. Only counts and configuration are serialized; the
/// log-probability tables are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NbModel {
    pub format_version: u32,
    pub config: NbConfig,
    pub vocabulary: Vocabulary,
    /// Training documents per class.
    pub class_docs: [u64; 2],
    /// Natural-log class priors.
    pub log_priors: [f64; 2],
    /// Token counts (MNB/CNB) or document-occurrence counts (BNB), per class
    /// per vocabulary index.
    pub counts: [Vec<u64>; 2],
    #[serde(skip)]
    weights: Weights,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Weights {
    /// log theta per class and token (complement estimate for CNB, possibly
    /// normalized).
    present: [Vec<f64>; 2],
    /// log(1 - theta), BNB only.
    absent: [Vec<f64>; 2],
    /// sum over vocabulary of `absent`, BNB only.
    absent_total: [f64; 2],
}

impl NbModel {
    /// Trains on `docs`, building the vocabulary from them (min_df = 1).
    pub fn train<D: AsRef<[String]>>(
        docs: &[(D, Label)],
        config: NbConfig,
    ) -> Result<Self, NbError> {
        config.validate()?;
        if docs.is_empty() {
            return Err(NbError::Empty);
        }
        let token_lists: Vec<&[String]> = docs.iter().map(|(d, _)| d.as_ref()).collect();
        let vocabulary = Vocabulary::build(&token_lists, 1)?;
        Self::train_with_vocabulary(docs, vocabulary, config)
    }

    pub fn train_with_vocabulary<D: AsRef<[String]>>(
        docs: &[(D, Label)],
        vocabulary: Vocabulary,
        config: NbConfig,
    ) -> Result<Self, NbError> {
        config.validate()?;
        let mut class_docs = [0u64; 2];
        for (_, label) in docs {
            class_docs[label.index()] += 1;
        }
        match class_docs {
            [0, 0] => return Err(NbError::Empty),
            [0, _] => return Err(NbError::SingleClass(Label::Concerning)),
            [_, 0] => return Err(NbError::SingleClass(Label::Benign)),
            _ => {}
        }
        let v = vocabulary.len();
        let mut counts = [vec![0u64; v], vec![0u64; v]];
        let mut seen = vec![usize::MAX; v];
        for (doc_id, (doc, label)) in docs.iter().enumerate() {
            let row = &mut counts[label.index()];
            for tok in doc.as_ref() {
                let Some(i) = vocabulary.index_of(tok) else {
                    continue;
                };
                match config.variant {
                    Variant::Bernoulli => {
                        if seen[i] != doc_id {
                            seen[i] = doc_id;
                            row[i] += 1;
                        }
                    }
                    _ => row[i] += 1,
                }
            }
        }
        let total = (class_docs[0] + class_docs[1]) as f64;
        let log_priors = class_docs.map(|n| (n as f64 / total).ln());
        let mut model = Self {
            format_version: MODEL_FORMAT_VERSION,
            config,
            vocabulary,
            class_docs,
            log_priors,
            counts,
            weights: Weights::default(),
        };
        model.weights = model.compute_weights();
        Ok(model)
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<(), NbError> {
        let cfg = self.config.threshold(threshold);
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    /// Smoothed per-token probabilities for `label`. For CNB this is the
    /// complement estimate (drawn from the other class).
    pub fn token_probabilities(&self, label: Label) -> Vec<f64> {
        let a = self.config.alpha;
        let v = self.vocabulary.len() as f64;
        let c = label.index();
        match self.config.variant {
            Variant::Multinomial => multinomial_theta(&self.counts[c], a, v),
            Variant::Complement => multinomial_theta(&self.counts[1 - c], a, v),
            Variant::Bernoulli => {
                let d = self.class_docs[c] as f64;
                self.counts[c]
                    .iter()
                    .map(|&n| (n as f64 + a) / (d + 2.0 * a))
                    .collect()
            }
        }
    }

    fn compute_weights(&self) -> Weights {
        let mut w = Weights::default();
        for label in Label::ALL {
            let c = label.index();
            let theta = self.token_probabilities(label);
            let mut logs: Vec<f64> = theta.iter().map(|p| p.ln()).collect();
            if self.config.variant == Variant::Complement && self.config.cnb_weight_norm {
                let norm: f64 = logs.iter().map(|x| x.abs()).sum();
                logs.iter_mut().for_each(|x| *x /= norm);
            }
            if self.config.variant == Variant::Bernoulli {
                w.absent[c] = theta.iter().map(|p| (1.0 - p).ln()).collect();
                w.absent_total[c] = w.absent[c].iter().sum();
            }
            w.present[c] = logs;
        }
        w
    }

    /// Per-class decision scores for `doc`.
    pub fn log_scores(&self, doc: &[String]) -> [f64; 2] {
        let w = &self.weights;
        let mut scores = self.log_priors;
        match self.config.variant {
            Variant::Multinomial | Variant::Complement => {
                let sign = if self.config.variant == Variant::Complement {
                    -1.0
                } else {
                    1.0
                };
                for tok in doc {
                    if let Some(i) = self.vocabulary.index_of(tok) {
                        for (c, s) in scores.iter_mut().enumerate() {
                            *s += sign * w.present[c][i];
                        }
                    }
                }
            }
            Variant::Bernoulli => {
                let mut present = vec![false; self.vocabulary.len()];
                for tok in doc {
                    if let Some(i) = self.vocabulary.index_of(tok) {
                        present[i] = true;
                    }
                }
                for (c, s) in scores.iter_mut().enumerate() {
                    *s += w.absent_total[c];
                    for (i, _) in present.iter().enumerate().filter(|(_, &p)| p) {
                        *s += w.present[c][i] - w.absent[c][i];
                    }
                }
            }
        }
        scores
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, NbError> {
        let mut model: Self =
            serde_json::from_str(s).map_err(|e| NbError::Format(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(NbError::Format(format!(
                "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        model.config.validate()?;
        model.vocabulary.validate().map_err(NbError::Format)?;
        let v = model.vocabulary.len();
        if model.counts.iter().any(|c| c.len() != v) {
            return Err(NbError::Format(
                "count tables do not match vocabulary size".into(),
            ));
        }
        if model.class_docs.contains(&0) {
            return Err(NbError::Format("model lacks documents for a class".into()));
        }
        model.vocabulary.reindex();
        model.weights = model.compute_weights();
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), NbError> {
        fs::write(path, self.to_json()).map_err(|source| NbError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, NbError> {
        let s = fs::read_to_string(path).map_err(|source| NbError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&s)
    }
}

fn multinomial_theta(counts: &[u64], alpha: f64, v: f64) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + alpha * v;
    counts.iter().map(|&n| (n as f64 + alpha) / denom).collect()
}

impl TextClassifier for NbModel {
    fn predict(&self, doc: &[String]) -> Prediction {
        Prediction::from_log_scores(self.log_scores(doc), self.config.threshold)
    }

    fn threshold(&self) -> f64 {
        self.config.threshold
    }

    fn predict_prior(&self) -> Prediction {
        Prediction::from_log_scores(self.log_priors, self.config.threshold)
    }
}
