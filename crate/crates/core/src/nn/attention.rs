//! Additive attention over a key sequence that also serves as the values:
//! `s_t = v · tanh(Wq q + Wk k_t)`, `a = softmax(s)`, `out = Σ a_t k_t`.

use super::{axpy, dot, matvec, matvec_t, outer_acc, softmax, softmax_backward, Parameter, Tensor};
use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub query_dim: usize,
    pub key_dim: usize,
    pub attn_dim: usize,
    /// `attn_dim × query_dim`
    pub wq: Parameter,
    /// `attn_dim × key_dim`
    pub wk: Parameter,
    /// `attn_dim`
    pub v: Parameter,
}

impl AttentionParams {
    pub fn new(query_dim: usize, key_dim: usize, attn_dim: usize, scale: f64, rng: &mut impl Rng) -> Self {
        AttentionParams {
            query_dim,
            key_dim,
            attn_dim,
            wq: Parameter::new(Tensor::uniform(&[attn_dim, query_dim], scale, rng)),
            wk: Parameter::new(Tensor::uniform(&[attn_dim, key_dim], scale, rng)),
            v: Parameter::new(Tensor::uniform(&[attn_dim], scale, rng)),
        }
    }

    pub fn zero_grad(&mut self) {
        self.wq.zero_grad();
        self.wk.zero_grad();
        self.v.zero_grad();
    }
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    query: Vec<f64>,
    keys: Vec<Vec<f64>>,
    /// `tanh(Wq q + Wk k_t)` per key
    hidden: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

/// Returns the attended summary vector (length `key_dim`).
pub fn additive_attention(
    p: &AttentionParams,
    query: &[f64],
    keys: &[Vec<f64>],
) -> Result<(Vec<f64>, AttentionCache)> {
    if query.len() != p.query_dim {
        return Err(Error::shape(format!(
            "attention query has {} values, expected {}",
            query.len(),
            p.query_dim
        )));
    }
    if keys.is_empty() || keys.iter().any(|k| k.len() != p.key_dim) {
        return Err(Error::shape(format!(
            "attention needs a non-empty key sequence of width {}",
            p.key_dim
        )));
    }
    let a = p.attn_dim;
    let qp = matvec(p.wq.value(), query, a);
    let mut hidden = Vec::with_capacity(keys.len());
    let mut scores = Vec::with_capacity(keys.len());
    for k in keys {
        let mut u = matvec(p.wk.value(), k, a);
        for (ui, qi) in u.iter_mut().zip(&qp) {
            *ui = (*ui + qi).tanh();
        }
        scores.push(dot(p.v.value(), &u));
        hidden.push(u);
    }
    let weights = softmax(&scores);
    let mut out = vec![0.0; p.key_dim];
    for (w, k) in weights.iter().zip(keys) {
        axpy(*w, k, &mut out);
    }
    Ok((
        out,
        AttentionCache {
            query: query.to_vec(),
            keys: keys.to_vec(),
            hidden,
            weights,
        },
    ))
}

/// Accumulates parameter gradients; returns `(d_query, d_keys)`.
pub fn attention_backward(
    p: &mut AttentionParams,
    cache: &AttentionCache,
    d_out: &[f64],
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let a = p.attn_dim;
    let d_weights: Vec<f64> = cache.keys.iter().map(|k| dot(k, d_out)).collect();
    let d_scores = softmax_backward(&cache.weights, &d_weights);
    let mut d_keys: Vec<Vec<f64>> = cache
        .weights
        .iter()
        .map(|w| d_out.iter().map(|d| w * d).collect())
        .collect();
    let mut d_qp = vec![0.0; a];
    for (t, ds) in d_scores.iter().enumerate() {
        let u = &cache.hidden[t];
        axpy(*ds, u, p.v.grad_mut());
        let du: Vec<f64> = u
            .iter()
            .zip(p.v.value())
            .map(|(u, v)| ds * v * (1.0 - u * u))
            .collect();
        outer_acc(p.wk.grad_mut(), &du, &cache.keys[t]);
        axpy(1.0, &matvec_t(p.wk.value(), &du, p.key_dim), &mut d_keys[t]);
        axpy(1.0, &du, &mut d_qp);
    }
    outer_acc(p.wq.grad_mut(), &d_qp, &cache.query);
    let d_query = matvec_t(p.wq.value(), &d_qp, p.query_dim);
    (d_query, d_keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradient_check;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_average_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = AttentionParams::new(2, 2, 3, 0.0, &mut rng);
        let keys = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0], vec![1.0, 1.0]];
        let (out, cache) = additive_attention(&p, &[0.3, 0.4], &keys).unwrap();
        assert!(cache.weights.iter().all(|w| (w - 0.25).abs() < 1e-15));
        assert!((out[0] - 1.0).abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
        assert!(additive_attention(&p, &[0.3], &keys).is_err());
        assert!(additive_attention(&p, &[0.3, 0.4], &[]).is_err());
    }

    #[test]
    fn gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (dq, dk, da, n) = (4, 3, 5, 5);
        for _ in 0..10 {
            let mut p = AttentionParams::new(dq, dk, da, 0.8, &mut rng);
            let q: Vec<f64> = (0..dq).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let keys: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dk).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let r: Vec<f64> = (0..dk).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss = |p: &AttentionParams, q: &[f64], keys: &[Vec<f64>]| {
                dot(&additive_attention(p, q, keys).unwrap().0, &r)
            };
            let (_, cache) = additive_attention(&p, &q, &keys).unwrap();
            let (d_q, d_keys) = attention_backward(&mut p, &cache, &r);
            assert!(gradient_check(|v| loss(&p, v, &keys), &d_q, &q, 1e-5) < 1e-4);
            let fk = |v: &[f64]| {
                let ks: Vec<Vec<f64>> = v.chunks(dk).map(|c| c.to_vec()).collect();
                loss(&p, &q, &ks)
            };
            assert!(gradient_check(fk, &d_keys.concat(), &keys.concat(), 1e-5) < 1e-4);
            let with = |which: usize, v: &[f64]| {
                let mut o = p.clone();
                match which {
                    0 => o.wq.value.data_mut().copy_from_slice(v),
                    1 => o.wk.value.data_mut().copy_from_slice(v),
                    _ => o.v.value.data_mut().copy_from_slice(v),
                }
                loss(&o, &q, &keys)
            };
            assert!(gradient_check(|v| with(0, v), p.wq.grad.data(), p.wq.value(), 1e-5) < 1e-4);
            assert!(gradient_check(|v| with(1, v), p.wk.grad.data(), p.wk.value(), 1e-5) < 1e-4);
            assert!(gradient_check(|v| with(2, v), p.v.grad.data(), p.v.value(), 1e-5) < 1e-4);
        }
    }
}
