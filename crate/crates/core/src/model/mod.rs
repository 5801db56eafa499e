//! The six-class behavior model.
//!
//! A news item becomes a `(max_words + 11) × dim` matrix: content words mapped
//! into graph space by `tanh(M w + d)`, then 9 tag and 2 category node
//! embeddings. The candidate and its environmental news stack into a
//! multi-channel tensor (channel `c` scaled by `1 / (1 + c)`), which a
//! convolution, ReLU and max-over-time pooling reduce to the news
//! representation. Five history representations run through an LSTM, are
//! summarized by additive attention queried with the candidate (or by the
//! last hidden state), and are joined with the concentration pair into the
//! user representation. A tanh layer and a six-way softmax classify.

mod loss;
mod news;

pub use loss::{batch_loss, batch_similarity, class_weights, LossConfig, LossParts};
pub use news::{build_news_input, word_space_map, NewsAttrs, NewsBank, NewsInput, NewsRef};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::TAG_SLOTS;
use crate::nn::{
    additive_attention, attention_backward, conv1d_backward, conv1d_multichannel, dense,
    dense_backward, lstm_backward, lstm_sequence, max_over_time_pool, outer_acc, pool_backward,
    softmax, softmax_backward, Activation, AttentionCache, AttentionParams, Checkpoint, ConvCache,
    LstmCache, LstmParams, Parameter, Tensor,
};

pub const HISTORY_LEN: usize = 5;
pub const CLASSES: usize = 6;
/// Tag and category columns appended after the word columns.
pub const FIXED_COLUMNS: usize = TAG_SLOTS + 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// node embedding (graph space) dimension
    pub dim: usize,
    pub word_dim: usize,
    /// `M_b`, word columns per news
    pub max_words: usize,
    pub filters: usize,
    pub width: usize,
    pub hidden: usize,
    pub attn_dim: usize,
    pub fc_hidden: usize,
    /// environmental news per candidate; the tensor has `ensi_depth + 1`
    /// channels
    pub ensi_depth: usize,
    pub attention: bool,
    pub concentration: bool,
    pub fc1_activation: Activation,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 300,
            word_dim: 300,
            max_words: 64,
            filters: 50,
            width: 3,
            hidden: 50,
            attn_dim: 50,
            fc_hidden: 64,
            ensi_depth: 5,
            attention: true,
            concentration: true,
            fc1_activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Scaled-down dimensions for desk-sized runs.
    pub fn desk() -> Self {
        ModelConfig {
            dim: 32,
            word_dim: 32,
            max_words: 12,
            hidden: 8,
            attn_dim: 32,
            fc_hidden: 32,
            ..Self::default()
        }
    }

    pub fn channels(&self) -> usize {
        self.ensi_depth + 1
    }

    pub fn columns(&self) -> usize {
        self.max_words + FIXED_COLUMNS
    }

    pub fn user_dim(&self) -> usize {
        self.hidden + 2
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("dim", self.dim),
            ("word_dim", self.word_dim),
            ("filters", self.filters),
            ("width", self.width),
            ("hidden", self.hidden),
            ("attn_dim", self.attn_dim),
            ("fc_hidden", self.fc_hidden),
        ];
        for (k, v) in sizes {
            if v == 0 {
                return Err(Error::Config {
                    key: k.into(),
                    msg: "must be positive".into(),
                });
            }
        }
        if self.width % 2 == 0 {
            return Err(Error::Config {
                key: "width".into(),
                msg: "convolution width must be odd".into(),
            });
        }
        Ok(())
    }

    fn to_meta(&self, ck: &mut Checkpoint) {
        ck.set_meta("dim", self.dim);
        ck.set_meta("word_dim", self.word_dim);
        ck.set_meta("max_words", self.max_words);
        ck.set_meta("filters", self.filters);
        ck.set_meta("width", self.width);
        ck.set_meta("hidden", self.hidden);
        ck.set_meta("attn_dim", self.attn_dim);
        ck.set_meta("fc_hidden", self.fc_hidden);
        ck.set_meta("ensi_depth", self.ensi_depth);
        ck.set_meta("channels", self.channels());
        ck.set_meta("attention", self.attention);
        ck.set_meta("concentration", self.concentration);
        ck.set_meta("fc1_activation", self.fc1_activation);
        ck.set_meta("seed", self.seed);
    }

    fn from_meta(ck: &Checkpoint) -> Result<Self> {
        fn get<T: std::str::FromStr>(ck: &Checkpoint, key: &str) -> Result<T> {
            ck.meta(key)
                .ok_or_else(|| Error::invalid(format!("checkpoint lacks '{key}'")))?
                .parse()
                .map_err(|_| Error::invalid(format!("checkpoint has a malformed '{key}'")))
        }
        let fc1: String = get(ck, "fc1_activation")?;
        Ok(ModelConfig {
            dim: get(ck, "dim")?,
            word_dim: get(ck, "word_dim")?,
            max_words: get(ck, "max_words")?,
            filters: get(ck, "filters")?,
            width: get(ck, "width")?,
            hidden: get(ck, "hidden")?,
            attn_dim: get(ck, "attn_dim")?,
            fc_hidden: get(ck, "fc_hidden")?,
            ensi_depth: get(ck, "ensi_depth")?,
            attention: get(ck, "attention")?,
            concentration: get(ck, "concentration")?,
            fc1_activation: fc1.parse().map_err(Error::Invalid)?,
            seed: get(ck, "seed")?,
        })
    }
}

/// One supervised example resolved against a [`NewsBank`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleInput {
    pub candidate: NewsRef,
    pub history: Vec<NewsRef>,
    pub concentration: (f64, f64),
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub cfg: ModelConfig,
    /// `dim × word_dim`
    pub word_map: Parameter,
    pub word_bias: Parameter,
    /// `filters × channels × width × dim`
    pub conv_filters: Parameter,
    pub conv_bias: Parameter,
    pub lstm: LstmParams,
    pub attention: Option<AttentionParams>,
    pub fc1_w: Parameter,
    pub fc1_b: Parameter,
    pub fc2_w: Parameter,
    pub fc2_b: Parameter,
}

/// Activations of one news representation.
#[derive(Debug, Clone)]
pub struct NewsCache {
    channels: Vec<Option<usize>>,
    /// unscaled `channels × columns × dim` tensor
    tensor: Vec<f64>,
    conv: ConvCache,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct UserCache {
    lstm: LstmCache,
    attention: Option<AttentionCache>,
}

#[derive(Debug, Clone)]
pub struct SampleCache {
    candidate: NewsCache,
    history: Vec<NewsCache>,
    user: UserCache,
    head_input: Vec<f64>,
    h1: Vec<f64>,
    logits: Vec<f64>,
    pub probs: Vec<f64>,
}

fn inv_sqrt(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

impl ModelParams {
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let c = cfg.channels();
        let patch = c * cfg.width * cfg.dim;
        let head_in = cfg.user_dim() + cfg.filters;
        let word_map = Tensor::uniform(&[cfg.dim, cfg.word_dim], inv_sqrt(cfg.word_dim), &mut rng);
        let conv = Tensor::uniform(&[cfg.filters, c, cfg.width, cfg.dim], inv_sqrt(patch), &mut rng);
        let lstm = LstmParams::new(cfg.filters, cfg.hidden, inv_sqrt(cfg.filters), &mut rng);
        let attention = cfg.attention.then(|| {
            AttentionParams::new(cfg.filters, cfg.hidden, cfg.attn_dim, inv_sqrt(cfg.hidden), &mut rng)
        });
        let fc1 = Tensor::uniform(&[cfg.fc_hidden, head_in], inv_sqrt(head_in), &mut rng);
        let fc2 = Tensor::uniform(&[CLASSES, cfg.fc_hidden], inv_sqrt(cfg.fc_hidden), &mut rng);
        Ok(ModelParams {
            word_map: Parameter::new(word_map),
            word_bias: Parameter::zeros(&[cfg.dim]),
            conv_filters: Parameter::new(conv),
            conv_bias: Parameter::zeros(&[cfg.filters]),
            lstm,
            attention,
            fc1_w: Parameter::new(fc1),
            fc1_b: Parameter::zeros(&[cfg.fc_hidden]),
            fc2_w: Parameter::new(fc2),
            fc2_b: Parameter::zeros(&[CLASSES]),
            cfg,
        })
    }

    /// Every trainable block with a stable name, in a fixed order.
    pub fn parameters(&self) -> Vec<(&'static str, &Parameter)> {
        let mut v = vec![
            ("word_map", &self.word_map),
            ("word_bias", &self.word_bias),
            ("conv_filters", &self.conv_filters),
            ("conv_bias", &self.conv_bias),
            ("lstm_wx", &self.lstm.wx),
            ("lstm_wh", &self.lstm.wh),
            ("lstm_b", &self.lstm.b),
        ];
        if let Some(a) = &self.attention {
            v.extend([("attn_wq", &a.wq), ("attn_wk", &a.wk), ("attn_v", &a.v)]);
        }
        v.extend([
            ("fc1_w", &self.fc1_w),
            ("fc1_b", &self.fc1_b),
            ("fc2_w", &self.fc2_w),
            ("fc2_b", &self.fc2_b),
        ]);
        v
    }

    /// Same order as [`ModelParams::parameters`].
    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut v = vec![
            &mut self.word_map,
            &mut self.word_bias,
            &mut self.conv_filters,
            &mut self.conv_bias,
            &mut self.lstm.wx,
            &mut self.lstm.wh,
            &mut self.lstm.b,
        ];
        if let Some(a) = &mut self.attention {
            v.extend([&mut a.wq, &mut a.wk, &mut a.v]);
        }
        v.extend([&mut self.fc1_w, &mut self.fc1_b, &mut self.fc2_w, &mut self.fc2_b]);
        v
    }

    pub fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        self.cfg.to_meta(&mut ck);
        for (name, p) in self.parameters() {
            ck.push(name, &p.value);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut params = ModelParams::new(ModelConfig::from_meta(ck)?)?;
        let names: Vec<&str> = params.parameters().iter().map(|(n, _)| *n).collect();
        if names.len() != ck.tensors.len() {
            return Err(Error::invalid(format!(
                "checkpoint holds {} tensors, model expects {}",
                ck.tensors.len(),
                names.len()
            )));
        }
        for (name, p) in names.into_iter().zip(params.parameters_mut()) {
            let t = ck
                .tensor(name)
                .ok_or_else(|| Error::invalid(format!("checkpoint lacks tensor '{name}'")))?;
            if t.shape() != p.value.shape() {
                return Err(Error::shape(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(params)
    }

    /// Unscaled multi-channel tensor for a news item and its environment.
    /// Channels without an environmental news stay zero.
    pub fn news_tensor(&self, bank: &NewsBank, item: &NewsRef) -> Result<(Vec<f64>, Vec<Option<usize>>)> {
        let c = self.cfg.channels();
        let block = self.cfg.columns() * self.cfg.dim;
        let mut tensor = vec![0.0; c * block];
        let mut channels = Vec::with_capacity(c);
        for ch in 0..c {
            let idx = if ch == 0 {
                Some(item.news)
            } else {
                item.env.get(ch - 1).copied()
            };
            if let Some(i) = idx {
                let input = bank
                    .inputs
                    .get(i)
                    .ok_or_else(|| Error::shape(format!("news index {i} outside the bank")))?;
                tensor[ch * block..(ch + 1) * block].copy_from_slice(&input.matrix(self)?);
            }
            channels.push(idx);
        }
        Ok((tensor, channels))
    }

    /// Scales channel `c` by `1 / (1 + c)`, convolves, applies ReLU and
    /// pools over time. Returns the `filters`-dimensional representation.
    pub fn news_representation(&self, tensor: &[f64]) -> Result<(Vec<f64>, ConvCache, Vec<f64>, Vec<usize>)> {
        let (c, len, dim) = (self.cfg.channels(), self.cfg.columns(), self.cfg.dim);
        if tensor.len() != c * len * dim {
            return Err(Error::shape(format!(
                "news tensor has {} values, the convolution expects {c} channels of {len}×{dim}",
                tensor.len()
            )));
        }
        let block = len * dim;
        let scaled: Vec<f64> = tensor
            .iter()
            .enumerate()
            .map(|(i, v)| v / (1 + i / block) as f64)
            .collect();
        let (map, conv) = conv1d_multichannel(
            &scaled,
            c,
            len,
            dim,
            self.conv_filters.value(),
            self.conv_bias.value(),
            self.cfg.width,
        )?;
        let (pooled, argmax) = max_over_time_pool(&map, self.cfg.filters, len);
        let rep = pooled.iter().map(|v| v.max(0.0)).collect();
        Ok((rep, conv, pooled, argmax))
    }

    fn encode_news(&self, bank: &NewsBank, item: &NewsRef) -> Result<(Vec<f64>, NewsCache)> {
        let (tensor, channels) = self.news_tensor(bank, item)?;
        let (rep, conv, pooled, argmax) = self.news_representation(&tensor)?;
        Ok((
            rep,
            NewsCache {
                channels,
                tensor,
                conv,
                pooled,
                argmax,
            },
        ))
    }

    /// LSTM over the history representations, summarized by attention or
    /// the last hidden state, followed by the concentration pair (zeros when
    /// the feature is disabled).
    pub fn user_representation(
        &self,
        history: &[Vec<f64>],
        candidate: &[f64],
        concentration: (f64, f64),
    ) -> Result<(Vec<f64>, UserCache)> {
        if history.len() != HISTORY_LEN {
            return Err(Error::shape(format!(
                "user history has {} items, expected {HISTORY_LEN}",
                history.len()
            )));
        }
        let (hs, lstm) = lstm_sequence(&self.lstm, history)?;
        let (mut rep, attention) = match &self.attention {
            Some(a) => {
                let (ctx, cache) = additive_attention(a, candidate, &hs)?;
                (ctx, Some(cache))
            }
            None => (hs[HISTORY_LEN - 1].clone(), None),
        };
        let conc = if self.cfg.concentration {
            concentration
        } else {
            (0.0, 0.0)
        };
        rep.extend([conc.0, conc.1]);
        Ok((rep, UserCache { lstm, attention }))
    }

    fn head(&self, user: &[f64], news: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut x = user.to_vec();
        x.extend_from_slice(news);
        let h1 = dense(&x, self.fc1_w.value(), self.fc1_b.value(), self.cfg.fc1_activation)?;
        let logits = dense(&h1, self.fc2_w.value(), self.fc2_b.value(), Activation::None)?;
        let probs = softmax(&logits);
        Ok((probs, x, h1, logits))
    }

    /// Class probabilities in behavior order (unclick, click, like, follow,
    /// comment, share).
    pub fn predict_probs(&self, user: &[f64], news: &[f64]) -> Result<Vec<f64>> {
        self.head(user, news).map(|(p, ..)| p)
    }

    pub fn forward(&self, bank: &NewsBank, s: &SampleInput) -> Result<SampleCache> {
        let (cand_rep, candidate) = self.encode_news(bank, &s.candidate)?;
        let mut reps = Vec::with_capacity(s.history.len());
        let mut history = Vec::with_capacity(s.history.len());
        for h in &s.history {
            let (r, c) = self.encode_news(bank, h)?;
            reps.push(r);
            history.push(c);
        }
        let (user_rep, user) = self.user_representation(&reps, &cand_rep, s.concentration)?;
        let (probs, head_input, h1, logits) = self.head(&user_rep, &cand_rep)?;
        Ok(SampleCache {
            candidate,
            history,
            user,
            head_input,
            h1,
            logits,
            probs,
        })
    }

    pub fn predict(&self, bank: &NewsBank, s: &SampleInput) -> Result<Vec<f64>> {
        Ok(self.forward(bank, s)?.probs)
    }

    /// Accumulates parameter gradients for one sample given `d loss / d probs`.
    pub fn backward(&mut self, bank: &NewsBank, cache: &SampleCache, d_probs: &[f64]) {
        let d_logits = softmax_backward(&cache.probs, d_probs);
        let d_h1 = dense_backward(
            &cache.h1,
            self.fc2_w.value.data(),
            &cache.logits,
            &d_logits,
            Activation::None,
            self.fc2_w.grad.data_mut(),
            self.fc2_b.grad.data_mut(),
        );
        let d_x = dense_backward(
            &cache.head_input,
            self.fc1_w.value.data(),
            &cache.h1,
            &d_h1,
            self.cfg.fc1_activation,
            self.fc1_w.grad.data_mut(),
            self.fc1_b.grad.data_mut(),
        );
        let (d_user, d_cand) = d_x.split_at(self.cfg.user_dim());
        let mut d_cand = d_cand.to_vec();
        let d_ctx = &d_user[..self.cfg.hidden];
        let d_hidden = match (&mut self.attention, &cache.user.attention) {
            (Some(a), Some(ac)) => {
                let (d_query, d_keys) = attention_backward(a, ac, d_ctx);
                crate::nn::axpy(1.0, &d_query, &mut d_cand);
                d_keys
            }
            _ => {
                let mut d = vec![vec![0.0; self.cfg.hidden]; HISTORY_LEN];
                d[HISTORY_LEN - 1] = d_ctx.to_vec();
                d
            }
        };
        let d_reps = lstm_backward(&mut self.lstm, &cache.user.lstm, &d_hidden);
        self.news_backward(bank, &cache.candidate, &d_cand);
        for (c, d) in cache.history.iter().zip(&d_reps) {
            self.news_backward(bank, c, d);
        }
    }

    fn news_backward(&mut self, bank: &NewsBank, cache: &NewsCache, d_rep: &[f64]) {
        let d_pooled: Vec<f64> = d_rep
            .iter()
            .zip(&cache.pooled)
            .map(|(d, p)| if *p > 0.0 { *d } else { 0.0 })
            .collect();
        if d_pooled.iter().all(|d| *d == 0.0) {
            return;
        }
        let (len, dim, wd) = (self.cfg.columns(), self.cfg.dim, self.cfg.word_dim);
        let d_map = pool_backward(&cache.argmax, &d_pooled, len);
        let d_in = conv1d_backward(
            &cache.conv,
            self.conv_filters.value.data(),
            &d_map,
            self.conv_filters.grad.data_mut(),
            self.conv_bias.grad.data_mut(),
            true,
        )
        .expect("input gradient requested");
        for (ch, idx) in cache.channels.iter().enumerate() {
            let Some(i) = *idx else { continue };
            let input = &bank.inputs[i];
            let scale = 1.0 / (1 + ch) as f64;
            for j in (0..self.cfg.max_words).filter(|&j| input.known[j]) {
                let at = (ch * len + j) * dim;
                let dz: Vec<f64> = cache.tensor[at..at + dim]
                    .iter()
                    .zip(&d_in[at..at + dim])
                    .map(|(y, g)| g * scale * (1.0 - y * y))
                    .collect();
                crate::nn::axpy(1.0, &dz, self.word_bias.grad.data_mut());
                outer_acc(self.word_map.grad.data_mut(), &dz, &input.words[j * wd..(j + 1) * wd]);
            }
        }
    }
}

#[cfg(test)]
mod tests;
