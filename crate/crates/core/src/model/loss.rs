use super::{NewsBank, CLASSES};
use crate::error::{Error, Result};

/// Weights of the composite loss: weighted cross entropy, a unit-margin
/// hinge on the softmax outputs (`c1`) and a graph-Laplacian smoothness
/// term over the batch (`c2`).
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub c1: f64,
    pub c2: f64,
    pub alpha: [f64; CLASSES],
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            c1: 0.1,
            c2: 0.01,
            alpha: [1.0; CLASSES],
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 0.0 && self.c1.is_finite() && self.c2 >= 0.0 && self.c2.is_finite()) {
            return Err(Error::invalid("loss constants c1, c2 must be finite and non-negative"));
        }
        if self.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("class weights must be positive"));
        }
        let sum: f64 = self.alpha.iter().sum();
        if (sum - CLASSES as f64).abs() > 1e-9 {
            return Err(Error::invalid(format!("class weights sum to {sum}, expected 6")));
        }
        Ok(())
    }
}

/// Inverse class frequencies renormalized to sum to 6. Absent classes are
/// counted once so their weight stays finite.
pub fn class_weights(counts: &[usize; CLASSES]) -> [f64; CLASSES] {
    let inv: Vec<f64> = counts.iter().map(|&c| 1.0 / c.max(1) as f64).collect();
    let total: f64 = inv.iter().sum();
    let mut out = [0.0; CLASSES];
    for (o, v) in out.iter_mut().zip(&inv) {
        *o = v * CLASSES as f64 / total;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub ce: f64,
    pub r1: f64,
    pub r2: f64,
    pub total: f64,
}

/// Batch loss and its gradient with respect to every prediction vector.
///
/// `w` is the `n × n` row-major similarity matrix; it must be symmetric,
/// non-negative and zero on the diagonal.
pub fn batch_loss(
    probs: &[Vec<f64>],
    labels: &[usize],
    w: &[f64],
    cfg: &LossConfig,
) -> Result<(LossParts, Vec<Vec<f64>>)> {
    let n = probs.len();
    if n == 0 || labels.len() != n || w.len() != n * n {
        return Err(Error::shape(format!(
            "batch of {n} predictions, {} labels, {} similarity entries",
            labels.len(),
            w.len()
        )));
    }
    for k in 0..n {
        if w[k * n + k] != 0.0 {
            return Err(Error::invalid("similarity matrix must have a zero diagonal"));
        }
        for j in 0..k {
            if w[k * n + j] != w[j * n + k] {
                return Err(Error::invalid("similarity matrix must be symmetric"));
            }
            if w[k * n + j] < 0.0 {
                return Err(Error::invalid("similarity weights must be non-negative"));
            }
        }
    }
    let mut parts = LossParts {
        ce: 0.0,
        r1: 0.0,
        r2: 0.0,
        total: 0.0,
    };
    let mut grads = vec![vec![0.0; CLASSES]; n];
    for (k, (p, &l)) in probs.iter().zip(labels).enumerate() {
        if p.len() != CLASSES || l >= CLASSES {
            return Err(Error::shape("predictions must have 6 classes"));
        }
        parts.ce -= cfg.alpha[l] * p[l].ln();
        grads[k][l] -= cfg.alpha[l] / p[l];

        let (rival, best) = (0..CLASSES)
            .filter(|&i| i != l)
            .map(|i| (i, p[i]))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let hinge = 1.0 + best - p[l];
        if hinge > 0.0 {
            parts.r1 += hinge;
            grads[k][rival] += cfg.c1;
            grads[k][l] -= cfg.c1;
        }
    }
    for k in 0..n {
        for j in 0..n {
            let wkj = w[k * n + j];
            if wkj == 0.0 {
                continue;
            }
            let mut sq = 0.0;
            for i in 0..CLASSES {
                let diff = probs[k][i] - probs[j][i];
                sq += diff * diff;
                grads[k][i] += cfg.c2 * 2.0 * wkj * diff;
            }
            parts.r2 += 0.5 * wkj * sq;
        }
    }
    parts.total = parts.ce + cfg.c1 * parts.r1 + cfg.c2 * parts.r2;
    Ok((parts, grads))
}

/// `W[k][j] = 1` when candidates `k ≠ j` share a topic, a tag or a level-1
/// category.
pub fn batch_similarity(bank: &NewsBank, candidates: &[usize]) -> Vec<f64> {
    let n = candidates.len();
    let mut w = vec![0.0; n * n];
    for k in 0..n {
        for j in 0..k {
            if bank.attrs[candidates[k]].similar(&bank.attrs[candidates[j]]) {
                w[k * n + j] = 1.0;
                w[j * n + k] = 1.0;
            }
        }
    }
    w
}
