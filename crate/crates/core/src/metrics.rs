//! Binary classification metrics: confusion matrix, per-class
//! precision/recall/F1, averages, ROC and AUC.
//!
//! The positive class is [`Label::Concerning`]. Scores are oriented so that
//! higher means more concerning.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("gold has {gold} labels but predictions have {predicted}")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("ROC needs both classes in gold labels")]
    SingleClass,
    #[error("score {0} at position {1} is outside [0, 1]")]
    BadScore(f64, usize),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_labels(gold: &[Label], predicted: &[Label]) -> Result<Self, MetricsError> {
        if gold.len() != predicted.len() {
            return Err(MetricsError::LengthMismatch {
                gold: gold.len(),
                predicted: predicted.len(),
            });
        }
        let mut m = Self::default();
        for (&g, &p) in gold.iter().zip(predicted) {
            match (g, p) {
                (Label::Concerning, Label::Concerning) => m.tp += 1,
                (Label::Benign, Label::Concerning) => m.fp += 1,
                (Label::Benign, Label::Benign) => m.tn += 1,
                (Label::Concerning, Label::Benign) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score threshold producing this point; `None` for the origin.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// `fpr,tpr` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{}", p.fpr, p.tpr);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format_version: u32,
    pub negative: ClassMetrics,
    pub positive: ClassMetrics,
    pub accuracy: f64,
    pub macro_avg: AverageMetrics,
    pub weighted_avg: AverageMetrics,
    pub confusion: ConfusionMatrix,
    pub total: u64,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roc: Option<RocCurve>,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self, MetricsError> {
        let total = cm.total();
        if total == 0 {
            return Err(MetricsError::Empty);
        }
        let mut zero = false;
        let class = |tp: u64, fp: u64, fn_: u64, zero: &mut bool| {
            let precision = ratio(tp, tp + fp, zero);
            let recall = ratio(tp, tp + fn_, zero);
            ClassMetrics {
                precision,
                recall,
                f1: f1(precision, recall),
                support: tp + fn_,
            }
        };
        let positive = class(cm.tp, cm.fp, cm.fn_, &mut zero);
        let negative = class(cm.tn, cm.fn_, cm.fp, &mut zero);
        let accuracy = (cm.tp + cm.tn) as f64 / total as f64;
        let avg = |w: [f64; 2]| AverageMetrics {
            precision: w[0] * negative.precision + w[1] * positive.precision,
            recall: w[0] * negative.recall + w[1] * positive.recall,
            f1: w[0] * negative.f1 + w[1] * positive.f1,
        };
        let mut weighted_avg = avg([
            negative.support as f64 / total as f64,
            positive.support as f64 / total as f64,
        ]);
        // sum of support_c * tp_c / support_c collapses to the hit count
        weighted_avg.recall = (cm.tp + cm.tn) as f64 / total as f64;
        Ok(Self {
            format_version: REPORT_FORMAT_VERSION,
            negative,
            positive,
            accuracy,
            macro_avg: avg([0.5, 0.5]),
            weighted_avg,
            confusion: cm,
            total,
            zero_division: zero,
            roc: None,
        })
    }

    pub fn class(&self, label: Label) -> &ClassMetrics {
        match label {
            Label::Benign => &self.negative,
            Label::Concerning => &self.positive,
        }
    }

    pub fn with_roc(mut self, roc: RocCurve) -> Self {
        self.roc = Some(roc);
        self
    }

    /// Fixed-width text table with two-decimal values.
    pub fn to_table(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<14}{:>10}{:>10}{:>10}{:>10}",
            title, "Precision", "Recall", "F1-score", "Support"
        );
        let row = |s: &mut String, name: &str, p: f64, r: f64, f: f64| {
            let _ = writeln!(
                s,
                "{:<14}{:>10}{:>10}{:>10}{:>10}",
                name,
                fmt2(p),
                fmt2(r),
                fmt2(f),
                self.total
            );
        };
        for (name, c) in [
            ("Negative (0)", &self.negative),
            ("Positive (1)", &self.positive),
        ] {
            let _ = writeln!(
                s,
                "{:<14}{:>10}{:>10}{:>10}{:>10}",
                name,
                fmt2(c.precision),
                fmt2(c.recall),
                fmt2(c.f1),
                c.support
            );
        }
        let _ = writeln!(
            s,
            "{:<14}{:>10}{:>10}{:>10}{:>10}",
            "Accuracy",
            "",
            "",
            fmt2(self.accuracy),
            self.total
        );
        row(
            &mut s,
            "Macro avg",
            self.macro_avg.precision,
            self.macro_avg.recall,
            self.macro_avg.f1,
        );
        row(
            &mut s,
            "Weighted avg",
            self.weighted_avg.precision,
            self.weighted_avg.recall,
            self.weighted_avg.f1,
        );
        if let Some(roc) = &self.roc {
            let _ = writeln!(s, "AUC {:.4}", roc.auc);
        }
        if self.zero_division {
            let _ = writeln!(
                s,
                "warning: some metrics had zero denominators and are shown as 0"
            );
        }
        s
    }
}

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn fmt2(x: f64) -> String {
    format!("{:.2}", round2(x))
}

pub fn evaluate(gold: &[Label], predicted: &[Label]) -> Result<EvalReport, MetricsError> {
    let cm = ConfusionMatrix::from_labels(gold, predicted)?;
    EvalReport::from_confusion(cm)
}

/// Sweeps thresholds over the distinct scores from high to low; tied
/// scores move together, giving one diagonal segment. AUC by trapezoids.
pub fn roc(gold: &[Label], scores: &[f64]) -> Result<RocCurve, MetricsError> {
    if gold.len() != scores.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            predicted: scores.len(),
        });
    }
    if let Some((i, &s)) = scores
        .iter()
        .enumerate()
        .find(|(_, s)| !(0.0..=1.0).contains(*s))
    {
        return Err(MetricsError::BadScore(s, i));
    }
    let pos = gold.iter().filter(|&&g| g == Label::Concerning).count() as f64;
    let neg = gold.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            match gold[order[i]] {
                Label::Concerning => tp += 1,
                Label::Benign => fp += 1,
            }
            i += 1;
        }
        let prev = *points.last().expect("origin present");
        let p = RocPoint {
            fpr: fp as f64 / neg,
            tpr: tp as f64 / pos,
            threshold: Some(threshold),
        };
        auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}
