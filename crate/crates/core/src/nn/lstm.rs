//! Single-layer LSTM with zero initial state. Gate blocks are stacked in the
//! order input, forget, candidate, output.

use super::{matvec, matvec_t, outer_acc, sigmoid, Parameter, Tensor};
use crate::error::{Error, Result};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    /// `4h × input_dim`
    pub wx: Parameter,
    /// `4h × h`
    pub wh: Parameter,
    /// `4h`
    pub b: Parameter,
}

impl LstmParams {
    pub fn new(input_dim: usize, hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let g = 4 * hidden;
        let mut b = Parameter::zeros(&[g]);
        // forget-gate bias of 1
        b.value.data_mut()[hidden..2 * hidden].fill(1.0);
        LstmParams {
            input_dim,
            hidden,
            wx: Parameter::new(Tensor::uniform(&[g, input_dim], scale, rng)),
            wh: Parameter::new(Tensor::uniform(&[g, hidden], scale, rng)),
            b,
        }
    }

    pub fn zero_grad(&mut self) {
        self.wx.zero_grad();
        self.wh.zero_grad();
        self.b.zero_grad();
    }
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    inputs: Vec<Vec<f64>>,
    /// post-activation gates `[i f g o]` per step
    gates: Vec<Vec<f64>>,
    /// cell states, `cells[t]` after step t
    cells: Vec<Vec<f64>>,
    /// hidden states, `hiddens[t]` after step t
    hiddens: Vec<Vec<f64>>,
}

/// Runs the sequence and returns every hidden state.
pub fn lstm_sequence(p: &LstmParams, inputs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, LstmCache)> {
    let h = p.hidden;
    let mut prev_h = vec![0.0; h];
    let mut prev_c = vec![0.0; h];
    let mut cache = LstmCache {
        inputs: inputs.to_vec(),
        gates: Vec::with_capacity(inputs.len()),
        cells: Vec::with_capacity(inputs.len()),
        hiddens: Vec::with_capacity(inputs.len()),
    };
    for x in inputs {
        if x.len() != p.input_dim {
            return Err(Error::shape(format!(
                "lstm input has {} values, expected {}",
                x.len(),
                p.input_dim
            )));
        }
        let mut z = matvec(p.wx.value(), x, 4 * h);
        let zh = matvec(p.wh.value(), &prev_h, 4 * h);
        for ((zi, a), b) in z.iter_mut().zip(&zh).zip(p.b.value()) {
            *zi += a + b;
        }
        for (j, zj) in z.iter_mut().enumerate() {
            *zj = if (2 * h..3 * h).contains(&j) {
                zj.tanh()
            } else {
                sigmoid(*zj)
            };
        }
        let mut c = vec![0.0; h];
        let mut hn = vec![0.0; h];
        for k in 0..h {
            c[k] = z[h + k] * prev_c[k] + z[k] * z[2 * h + k];
            hn[k] = z[3 * h + k] * c[k].tanh();
        }
        cache.gates.push(z);
        cache.cells.push(c.clone());
        cache.hiddens.push(hn.clone());
        prev_h = hn;
        prev_c = c;
    }
    Ok((cache.hiddens.clone(), cache))
}

/// Backpropagates `d_hiddens[t]` (gradient w.r.t. each returned hidden
/// state), accumulates parameter gradients and returns per-step input
/// gradients.
pub fn lstm_backward(p: &mut LstmParams, cache: &LstmCache, d_hiddens: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let h = p.hidden;
    let steps = cache.inputs.len();
    let zero = vec![0.0; h];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dx = vec![Vec::new(); steps];
    for t in (0..steps).rev() {
        let z = &cache.gates[t];
        let c = &cache.cells[t];
        let prev_c = if t > 0 { &cache.cells[t - 1] } else { &zero };
        let prev_h = if t > 0 { &cache.hiddens[t - 1] } else { &zero };
        let mut dz = vec![0.0; 4 * h];
        let mut dc_prev = vec![0.0; h];
        for k in 0..h {
            let dh = d_hiddens[t][k] + dh_next[k];
            let (i, f, g, o) = (z[k], z[h + k], z[2 * h + k], z[3 * h + k]);
            let tc = c[k].tanh();
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            dz[k] = dc * g * i * (1.0 - i);
            dz[h + k] = dc * prev_c[k] * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - g * g);
            dz[3 * h + k] = dh * tc * o * (1.0 - o);
            dc_prev[k] = dc * f;
        }
        outer_acc(p.wx.grad_mut(), &dz, &cache.inputs[t]);
        outer_acc(p.wh.grad_mut(), &dz, prev_h);
        for (g, d) in p.b.grad_mut().iter_mut().zip(&dz) {
            *g += d;
        }
        dx[t] = matvec_t(p.wx.value(), &dz, p.input_dim);
        dh_next = matvec_t(p.wh.value(), &dz, h);
        dc_next = dc_prev;
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{dot, gradient_check};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_give_closed_form_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = LstmParams::new(3, 2, 0.0, &mut rng);
        p.b.value.fill(0.0);
        let (hs, _) = lstm_sequence(&p, &[vec![1.0, 2.0, 3.0]]).unwrap();
        // all gates: sigmoid(0)=0.5, tanh(0)=0 → c=0, h=0
        assert_eq!(hs[0], vec![0.0, 0.0]);
        assert!(lstm_sequence(&p, &[vec![1.0]]).is_err());
    }

    #[test]
    fn single_step_known_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = LstmParams::new(1, 1, 0.0, &mut rng);
        p.b.value.fill(0.0);
        // candidate pre-activation = x, other gates 0
        p.wx.value.data_mut()[2] = 1.0;
        let (hs, _) = lstm_sequence(&p, &[vec![0.5]]).unwrap();
        let expected = 0.5 * (0.5 * 0.5f64.tanh()).tanh();
        assert!((hs[0][0] - expected).abs() < 1e-15);
    }

    #[test]
    fn gradients_through_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (din, h, steps) = (4, 3, 5);
        for _ in 0..10 {
            let mut p = LstmParams::new(din, h, 0.5, &mut rng);
            p.b.value = Tensor::uniform(&[4 * h], 0.5, &mut rng);
            let xs: Vec<Vec<f64>> = (0..steps)
                .map(|_| (0..din).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let rs: Vec<Vec<f64>> = (0..steps)
                .map(|_| (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let loss = |p: &LstmParams, xs: &[Vec<f64>]| {
                let (hs, _) = lstm_sequence(p, xs).unwrap();
                hs.iter().zip(&rs).map(|(a, b)| dot(a, b)).sum::<f64>()
            };
            let (_, cache) = lstm_sequence(&p, &xs).unwrap();
            p.zero_grad();
            let dx = lstm_backward(&mut p, &cache, &rs);

            let flat: Vec<f64> = xs.concat();
            let fx = |v: &[f64]| {
                let xs: Vec<Vec<f64>> = v.chunks(din).map(|c| c.to_vec()).collect();
                loss(&p, &xs)
            };
            assert!(gradient_check(fx, &dx.concat(), &flat, 1e-5) < 1e-4);

            let probe = |set: &dyn Fn(&mut LstmParams, &[f64]), grad: &[f64], at: &[f64]| {
                let f = |v: &[f64]| {
                    let mut q = p.clone();
                    set(&mut q, v);
                    loss(&q, &xs)
                };
                gradient_check(f, grad, at, 1e-5)
            };
            let set_wx = |q: &mut LstmParams, v: &[f64]| q.wx.value.data_mut().copy_from_slice(v);
            let set_wh = |q: &mut LstmParams, v: &[f64]| q.wh.value.data_mut().copy_from_slice(v);
            let set_b = |q: &mut LstmParams, v: &[f64]| q.b.value.data_mut().copy_from_slice(v);
            assert!(probe(&set_wx, p.wx.grad.data(), p.wx.value()) < 1e-4);
            assert!(probe(&set_wh, p.wh.grad.data(), p.wh.value()) < 1e-4);
            assert!(probe(&set_b, p.b.grad.data(), p.b.value()) < 1e-4);
        }
    }
}
