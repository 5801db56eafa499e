//! Supervised samples from behavior logs and the mini-batch Adam loop.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{co_triggered, rank_environment, BehaviorGraph, NodeKind, TriggerIndex};
use crate::ingest::{Behavior, BehaviorLog};
use crate::nn::Parameter;
use crate::model::{
    batch_loss, batch_similarity, LossConfig, ModelParams, NewsBank, NewsRef, SampleCache,
    SampleInput, CLASSES, HISTORY_LEN,
};

/// The last day before the final event is held out for testing.
pub const HOLDOUT_SECONDS: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub user_id: String,
    /// oldest first
    pub history: Vec<String>,
    pub candidate: String,
    pub label: Behavior,
    pub as_of: i64,
}

/// Every event with at least five earlier events of the same user yields a
/// sample whose history is the five most recent of them. Ordered by
/// `(user, as_of)`.
pub fn build_samples(logs: &[BehaviorLog]) -> Vec<TrainingSample> {
    let mut by_user: BTreeMap<&str, Vec<&BehaviorLog>> = BTreeMap::new();
    for l in logs {
        by_user.entry(l.user_id.as_str()).or_default().push(l);
    }
    let mut out = Vec::new();
    for (user, mut events) in by_user {
        events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.news_id.cmp(&b.news_id)));
        for (i, e) in events.iter().enumerate() {
            let prior = events[..i].partition_point(|p| p.timestamp < e.timestamp);
            if prior < HISTORY_LEN {
                continue;
            }
            out.push(TrainingSample {
                user_id: user.to_string(),
                history: events[prior - HISTORY_LEN..prior]
                    .iter()
                    .map(|p| p.news_id.clone())
                    .collect(),
                candidate: e.news_id.clone(),
                label: e.behavior,
                as_of: e.timestamp,
            });
        }
    }
    out
}

/// Splits off samples in the final [`HOLDOUT_SECONDS`] as the test set.
pub fn split_by_time(samples: &[TrainingSample]) -> (Vec<TrainingSample>, Vec<TrainingSample>) {
    let Some(last) = samples.iter().map(|s| s.as_of).max() else {
        return (Vec::new(), Vec::new());
    };
    let cutoff = last - HOLDOUT_SECONDS;
    samples.iter().cloned().partition(|s| s.as_of <= cutoff)
}

/// Resolves news ids to bank rows and attaches ranked environmental news.
pub struct SamplePreparer<'a> {
    graph: &'a BehaviorGraph,
    bank: &'a NewsBank,
    triggers: TriggerIndex,
    concentration: HashMap<String, (f64, f64)>,
    ensi_depth: usize,
    use_concentration: bool,
    neighbors: HashMap<usize, Vec<usize>>,
}

impl<'a> SamplePreparer<'a> {
    pub fn new(
        graph: &'a BehaviorGraph,
        bank: &'a NewsBank,
        logs: &[BehaviorLog],
        concentration: HashMap<String, (f64, f64)>,
        ensi_depth: usize,
        use_concentration: bool,
    ) -> Self {
        SamplePreparer {
            graph,
            bank,
            triggers: TriggerIndex::new(logs),
            concentration,
            ensi_depth,
            use_concentration,
            neighbors: HashMap::new(),
        }
    }

    fn news_ref(&mut self, news_id: &str, as_of: i64) -> Result<NewsRef> {
        let missing = || Error::Coverage(format!("news '{news_id}' has no node or embedding input"));
        let news = self.bank.get(news_id).ok_or_else(missing)?;
        let node = self.graph.find(NodeKind::News, news_id).ok_or_else(missing)?;
        let graph = self.graph;
        let co = self
            .neighbors
            .entry(node)
            .or_insert_with(|| co_triggered(graph, node));
        let env = rank_environment(graph, co, self.ensi_depth, as_of, &self.triggers)
            .into_iter()
            .map(|n| {
                let id = &graph.node(n).id;
                self.bank
                    .get(id)
                    .ok_or_else(|| Error::Coverage(format!("news '{id}' has no embedding input")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NewsRef { news, env })
    }

    pub fn prepare(&mut self, s: &TrainingSample) -> Result<SampleInput> {
        let concentration = if self.use_concentration {
            *self.concentration.get(&s.user_id).ok_or_else(|| {
                Error::Coverage(format!("user '{}' has no concentration feature", s.user_id))
            })?
        } else {
            (0.0, 0.0)
        };
        let candidate = self.news_ref(&s.candidate, s.as_of)?;
        let history = s
            .history
            .iter()
            .map(|h| self.news_ref(h, s.as_of))
            .collect::<Result<Vec<_>>>()?;
        Ok(SampleInput {
            candidate,
            history,
            concentration,
            label: s.label.class_index(),
        })
    }

    pub fn prepare_all(&mut self, samples: &[TrainingSample]) -> Result<Vec<SampleInput>> {
        samples.iter().map(|s| self.prepare(s)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            batch_size: 64,
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: 5,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| {
            Err(Error::Config {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam_beta", "betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            return bad("adam_eps", "must be positive");
        }
        Ok(())
    }
}

/// Adam moments for every parameter block of a model.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: OptimizerConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(params: &ModelParams, cfg: &OptimizerConfig) -> Self {
        let sizes: Vec<usize> = params.parameters().iter().map(|(_, p)| p.len()).collect();
        Adam {
            cfg: cfg.clone(),
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams) {
        self.t += 1;
        let c = &self.cfg;
        let lr = c.lr * (1.0 - c.beta2.powi(self.t)).sqrt() / (1.0 - c.beta1.powi(self.t));
        for ((p, m), v) in params.parameters_mut().into_iter().zip(&mut self.m).zip(&mut self.v) {
            let Parameter { value, grad } = p;
            for (((x, g), m), v) in value.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                *x -= lr * *m / (v.sqrt() + c.eps);
            }
        }
    }
}

/// Per-class label counts.
pub fn label_counts(samples: &[SampleInput]) -> [usize; CLASSES] {
    let mut c = [0; CLASSES];
    for s in samples {
        c[s.label] += 1;
    }
    c
}

/// Forward and backward over one mini-batch; returns the batch loss and
/// leaves gradients in `params`.
pub fn batch_gradient(
    params: &mut ModelParams,
    bank: &NewsBank,
    batch: &[&SampleInput],
    loss: &LossConfig,
) -> Result<f64> {
    let caches: Vec<SampleCache> = batch
        .iter()
        .map(|s| params.forward(bank, s))
        .collect::<Result<_>>()?;
    let probs: Vec<Vec<f64>> = caches.iter().map(|c| c.probs.clone()).collect();
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let cands: Vec<usize> = batch.iter().map(|s| s.candidate.news).collect();
    let w = if loss.c2 > 0.0 {
        batch_similarity(bank, &cands)
    } else {
        vec![0.0; batch.len() * batch.len()]
    };
    let (parts, grads) = batch_loss(&probs, &labels, &w, loss)?;
    params.zero_grad();
    for (c, g) in caches.iter().zip(&grads) {
        params.backward(bank, c, g);
    }
    Ok(parts.total)
}

/// Mini-batch Adam over `samples`, reshuffled each epoch. Returns the mean
/// per-sample loss of every epoch. `on_epoch` sees each epoch's mean as it
/// completes.
pub fn train(
    params: &mut ModelParams,
    bank: &NewsBank,
    samples: &[SampleInput],
    loss: &LossConfig,
    opt: &OptimizerConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    opt.validate()?;
    loss.validate()?;
    if samples.is_empty() && opt.epochs > 0 {
        return Err(Error::invalid("no training samples"));
    }
    let mut adam = Adam::new(params, opt);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut curve = Vec::with_capacity(opt.epochs);
    for epoch in 0..opt.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(opt.batch_size) {
            let batch: Vec<&SampleInput> = chunk.iter().map(|&i| &samples[i]).collect();
            total += batch_gradient(params, bank, &batch, loss)?;
            adam.step(params);
        }
        let mean = total / samples.len() as f64;
        on_epoch(epoch, mean);
        curve.push(mean);
    }
    Ok(curve)
}
