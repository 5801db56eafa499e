//! Multi-channel 1-D convolution over embedding columns, and max-over-time
//! pooling.
//!
//! Layouts (row-major):
//! - input: `channels × len × dim`, i.e. each column of a `dim × len`
//!   embedding matrix is contiguous;
//! - filters: `filters × channels × width × dim`;
//! - output: `filters × len` (same-length, zero padded, stride 1).

use crate::error::{Error, Result};

/// im2col patches kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    pub channels: usize,
    pub len: usize,
    pub dim: usize,
    pub width: usize,
    /// `len × (channels · width · dim)`
    patches: Vec<f64>,
}

impl ConvCache {
    fn patch_len(&self) -> usize {
        self.channels * self.width * self.dim
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv1d_multichannel(
    input: &[f64],
    channels: usize,
    len: usize,
    dim: usize,
    filters: &[f64],
    bias: &[f64],
    width: usize,
) -> Result<(Vec<f64>, ConvCache)> {
    let k = bias.len();
    if input.len() != channels * len * dim {
        return Err(Error::shape(format!(
            "conv input has {} values, expected {channels}×{len}×{dim}",
            input.len()
        )));
    }
    if width % 2 == 0 || width > len + (width - 1) {
        return Err(Error::shape(format!("conv width {width} must be odd")));
    }
    let patch = channels * width * dim;
    if filters.len() != k * patch {
        return Err(Error::shape(format!(
            "conv filters have {} values, expected {k}×{channels}×{width}×{dim}",
            filters.len()
        )));
    }
    if len == 0 {
        return Err(Error::shape("conv input has no columns"));
    }
    let pad = (width - 1) / 2;
    let mut patches = vec![0.0; len * patch];
    for l in 0..len {
        let row = &mut patches[l * patch..(l + 1) * patch];
        for c in 0..channels {
            for w in 0..width {
                let src = l + w;
                if src < pad || src - pad >= len {
                    continue;
                }
                let col = src - pad;
                let from = (c * len + col) * dim;
                let to = (c * width + w) * dim;
                row[to..to + dim].copy_from_slice(&input[from..from + dim]);
            }
        }
    }
    let mut out = vec![0.0; k * len];
    for (kk, b) in bias.iter().enumerate() {
        out[kk * len..(kk + 1) * len].iter_mut().for_each(|o| *o = *b);
    }
    // out (k × len) += filters (k × patch) · patchesᵀ (patch × len)
    unsafe {
        matrixmultiply::dgemm(
            k,
            patch,
            len,
            1.0,
            filters.as_ptr(),
            patch as isize,
            1,
            patches.as_ptr(),
            1,
            patch as isize,
            1.0,
            out.as_mut_ptr(),
            len as isize,
            1,
        );
    }
    Ok((
        out,
        ConvCache {
            channels,
            len,
            dim,
            width,
            patches,
        },
    ))
}

/// Accumulates filter and bias gradients; returns the input gradient when
/// `want_input` is set. Zero entries of `d_out` are skipped, so sparse
/// upstream gradients (from max pooling) are cheap.
pub fn conv1d_backward(
    cache: &ConvCache,
    filters: &[f64],
    d_out: &[f64],
    d_filters: &mut [f64],
    d_bias: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let patch = cache.patch_len();
    let len = cache.len;
    let mut d_patches = want_input.then(|| vec![0.0; len * patch]);
    for (kk, db) in d_bias.iter_mut().enumerate() {
        let filt = &filters[kk * patch..(kk + 1) * patch];
        for l in 0..len {
            let g = d_out[kk * len + l];
            if g == 0.0 {
                continue;
            }
            *db += g;
            let p = &cache.patches[l * patch..(l + 1) * patch];
            for (df, x) in d_filters[kk * patch..(kk + 1) * patch].iter_mut().zip(p) {
                *df += g * x;
            }
            if let Some(dp) = d_patches.as_mut() {
                for (d, f) in dp[l * patch..(l + 1) * patch].iter_mut().zip(filt) {
                    *d += g * f;
                }
            }
        }
    }
    let d_patches = d_patches?;
    let (dim, width, pad) = (cache.dim, cache.width, (cache.width - 1) / 2);
    let mut d_input = vec![0.0; cache.channels * len * dim];
    for l in 0..len {
        let row = &d_patches[l * patch..(l + 1) * patch];
        for c in 0..cache.channels {
            for w in 0..width {
                let src = l + w;
                if src < pad || src - pad >= len {
                    continue;
                }
                let to = (c * len + src - pad) * dim;
                let from = (c * width + w) * dim;
                for (d, g) in d_input[to..to + dim].iter_mut().zip(&row[from..from + dim]) {
                    *d += g;
                }
            }
        }
    }
    Some(d_input)
}

/// Row-wise maximum of a `rows × len` map; ties go to the first position.
pub fn max_over_time_pool(map: &[f64], rows: usize, len: usize) -> (Vec<f64>, Vec<usize>) {
    assert!(len >= 1 && map.len() == rows * len, "pool shape mismatch");
    let mut vals = Vec::with_capacity(rows);
    let mut arg = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &map[r * len..(r + 1) * len];
        let mut best = 0;
        for (i, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = i;
            }
        }
        vals.push(row[best]);
        arg.push(best);
    }
    (vals, arg)
}

/// Routes each pooled gradient back to its argmax position.
pub fn pool_backward(argmax: &[usize], d_pooled: &[f64], len: usize) -> Vec<f64> {
    let mut d = vec![0.0; argmax.len() * len];
    for (r, (&a, &g)) in argmax.iter().zip(d_pooled).enumerate() {
        d[r * len + a] = g;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{dot, gradient_check};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct-loop reference cross-correlation.
    fn naive(
        input: &[f64],
        (c, len, dim): (usize, usize, usize),
        filters: &[f64],
        bias: &[f64],
        width: usize,
    ) -> Vec<f64> {
        let pad = (width - 1) as isize / 2;
        let mut out = vec![0.0; bias.len() * len];
        for k in 0..bias.len() {
            for l in 0..len {
                let mut s = bias[k];
                for ch in 0..c {
                    for w in 0..width {
                        let col = l as isize + w as isize - pad;
                        if col < 0 || col >= len as isize {
                            continue;
                        }
                        for r in 0..dim {
                            s += filters[((k * c + ch) * width + w) * dim + r]
                                * input[(ch * len + col as usize) * dim + r];
                        }
                    }
                }
                out[k * len + l] = s;
            }
        }
        out
    }

    #[test]
    fn ones_filter_and_zero_filters() {
        let (out, _) = conv1d_multichannel(&[1.0; 3], 1, 3, 1, &[1.0], &[0.0], 1).unwrap();
        assert_eq!(out, vec![1.0, 1.0, 1.0]);
        let (out, _) =
            conv1d_multichannel(&[0.7; 2 * 4 * 3], 2, 4, 3, &[0.0; 5 * 2 * 3 * 3], &[0.0; 5], 3)
                .unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
        assert!(conv1d_multichannel(&[1.0; 3], 1, 3, 1, &[1.0; 2], &[0.0], 2).is_err());
        assert!(conv1d_multichannel(&[1.0; 4], 1, 3, 1, &[1.0], &[0.0], 1).is_err());
    }

    #[test]
    fn matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (c, len, dim, k, width) = (3, 7, 4, 5, 3);
        let input: Vec<f64> = (0..c * len * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let filt: Vec<f64> = (0..k * c * width * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (out, _) = conv1d_multichannel(&input, c, len, dim, &filt, &bias, width).unwrap();
        let reference = naive(&input, (c, len, dim), &filt, &bias, width);
        for (a, b) in out.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (c, len, dim, k, width) = (2, 5, 3, 4, 3);
        for _ in 0..10 {
            let input: Vec<f64> = (0..c * len * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let filt: Vec<f64> =
                (0..k * c * width * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bias: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..k * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, cache) = conv1d_multichannel(&input, c, len, dim, &filt, &bias, width).unwrap();
            let mut df = vec![0.0; filt.len()];
            let mut db = vec![0.0; k];
            let dx = conv1d_backward(&cache, &filt, &r, &mut df, &mut db, true).unwrap();
            let run = |i: &[f64], f: &[f64], b: &[f64]| {
                dot(&conv1d_multichannel(i, c, len, dim, f, b, width).unwrap().0, &r)
            };
            assert!(gradient_check(|p| run(p, &filt, &bias), &dx, &input, 1e-5) < 1e-4);
            assert!(gradient_check(|p| run(&input, p, &bias), &df, &filt, 1e-5) < 1e-4);
            assert!(gradient_check(|p| run(&input, &filt, p), &db, &bias, 1e-5) < 1e-4);
        }
    }

    #[test]
    fn pooling() {
        let (v, a) = max_over_time_pool(&[1.0, 5.0, 3.0], 1, 3);
        assert_eq!((v, a), (vec![5.0], vec![1]));
        let (v, a) = max_over_time_pool(&[2.0, 2.0, 2.0], 1, 3);
        assert_eq!((v, a.clone()), (vec![2.0], vec![0]));
        assert_eq!(pool_backward(&a, &[1.5], 3), vec![1.5, 0.0, 0.0]);
    }

    #[test]
    fn pooling_gradient_at_untied_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let (rows, len) = (3, 6);
            let map: Vec<f64> = (0..rows * len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (_, arg) = max_over_time_pool(&map, rows, len);
            let analytic = pool_backward(&arg, &r, len);
            let f = |m: &[f64]| dot(&max_over_time_pool(m, rows, len).0, &r);
            assert!(gradient_check(f, &analytic, &map, 1e-5) < 1e-4);
        }
    }
}
