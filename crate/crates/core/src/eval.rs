//! Binarized evaluation: unclick is the negative class, every other
//! behavior positive.

use std::fmt::Write as _;

use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::Behavior;
use crate::model::{ModelParams, NewsBank, SampleInput, CLASSES};

pub const METRICS_FILE: &str = "metrics.json";
pub const CONFUSION_FILE: &str = "confusion.tsv";

pub fn binarize(label: Behavior) -> bool {
    label != Behavior::Unclick
}

/// `1 − p(unclick)`.
pub fn positive_score(probs: &[f64]) -> f64 {
    1.0 - probs[Behavior::Unclick.class_index()]
}

/// Index of the largest probability; the first wins ties.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Mann-Whitney statistic: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("AUC needs at least one positive and one negative"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the number of correctly ordered pairs, kept integral
    let mut doubled: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group_pos = order[i..j].iter().filter(|&&k| labels[k]).count() as u64;
        let group_neg = (j - i) as u64 - group_pos;
        doubled += group_pos * (2 * neg_below + group_neg);
        neg_below += group_neg;
        i = j;
    }
    Ok(doubled as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Precision {
    pub value: f64,
    /// set when nothing was predicted positive and the value is defined as 0
    pub warning: bool,
}

/// `TP / (TP + FP)` over binarized argmax predictions.
pub fn precision(predictions: &[Behavior], labels: &[Behavior]) -> Precision {
    let (mut tp, mut fp) = (0usize, 0usize);
    for (&p, &l) in predictions.iter().zip(labels) {
        if binarize(p) {
            if binarize(l) {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    if tp + fp == 0 {
        Precision {
            value: 0.0,
            warning: true,
        }
    } else {
        Precision {
            value: tp as f64 / (tp + fp) as f64,
            warning: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub auc: f64,
    pub precision: f64,
    pub precision_warning: bool,
    pub samples: usize,
    /// rows: true class, columns: predicted class
    pub confusion: [[u64; CLASSES]; CLASSES],
}

impl EvalReport {
    pub fn to_json_line(&self) -> String {
        json!({
            "auc": self.auc,
            "precision": self.precision,
            "precision_warning": self.precision_warning,
            "samples": self.samples,
            "confusion": self.confusion,
        })
        .to_string()
    }

    pub fn confusion_tsv(&self) -> String {
        let mut out = String::from("true\\pred");
        for b in Behavior::ALL {
            out.push('\t');
            out.push_str(b.as_str());
        }
        out.push('\n');
        for (b, row) in Behavior::ALL.iter().zip(&self.confusion) {
            out.push_str(b.as_str());
            for c in row {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Scores every sample and summarizes. Also returns the probabilities.
pub fn evaluate(
    params: &ModelParams,
    bank: &NewsBank,
    samples: &[SampleInput],
) -> Result<(EvalReport, Vec<Vec<f64>>)> {
    let probs = samples
        .iter()
        .map(|s| params.predict(bank, s))
        .collect::<Result<Vec<_>>>()?;
    let report = summarize(&probs, &samples.iter().map(|s| s.label).collect::<Vec<_>>())?;
    Ok((report, probs))
}

pub fn summarize(probs: &[Vec<f64>], labels: &[usize]) -> Result<EvalReport> {
    let to_behavior = |i: usize| {
        Behavior::from_class_index(i).ok_or_else(|| Error::invalid(format!("class index {i}")))
    };
    let truth = labels.iter().map(|&l| to_behavior(l)).collect::<Result<Vec<_>>>()?;
    let predicted = probs.iter().map(|p| to_behavior(argmax(p))).collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = probs.iter().map(|p| positive_score(p)).collect();
    let binary: Vec<bool> = truth.iter().map(|&b| binarize(b)).collect();
    let mut confusion = [[0u64; CLASSES]; CLASSES];
    for (t, p) in truth.iter().zip(&predicted) {
        confusion[t.class_index()][p.class_index()] += 1;
    }
    let prec = precision(&predicted, &truth);
    Ok(EvalReport {
        auc: auc(&scores, &binary)?,
        precision: prec.value,
        precision_warning: prec.warning,
        samples: labels.len(),
        confusion,
    })
}
