//! In-process stage functions shared by the CLI and the experiments.

use std::collections::HashMap;
use std::time::Instant;

use crate::coritivity::{all_concentration_features, ConcentrationFeature, MmasParams};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::graph::{build_graph, BehaviorGraph};
use crate::ingest::{Dataset, NewsRecord};
use crate::model::{class_weights, LossConfig, ModelConfig, ModelParams, NewsBank, SampleInput};
use crate::skipgram::{train_skipgram, EmbeddingTable, SkipGramConfig, Vocabulary};
use crate::train::{build_samples, label_counts, split_by_time, train, OptimizerConfig, SamplePreparer};
use crate::walks::{sample_walks, WalkConfig};

/// SkipGram over walks; rows are keyed by node key (`kind:id`).
pub fn node_embeddings(
    g: &BehaviorGraph,
    walks: &[Vec<usize>],
    cfg: &SkipGramConfig,
) -> Result<EmbeddingTable> {
    let corpus: Vec<Vec<String>> = walks
        .iter()
        .map(|w| {
            w.iter()
                .map(|&i| {
                    if i >= g.node_count() {
                        Err(Error::invalid(format!("walk visits node {i} outside the graph")))
                    } else {
                        Ok(g.node(i).key())
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    embed_corpus(&corpus, cfg)
}

/// SkipGram over news content, one sentence per news item.
pub fn word_embeddings(news: &[NewsRecord], cfg: &SkipGramConfig) -> Result<EmbeddingTable> {
    let corpus: Vec<Vec<String>> = news.iter().map(|n| n.content.clone()).collect();
    embed_corpus(&corpus, cfg)
}

fn embed_corpus(corpus: &[Vec<String>], cfg: &SkipGramConfig) -> Result<EmbeddingTable> {
    let vocab = Vocabulary::from_corpus(corpus);
    if vocab.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    let model = train_skipgram(&vocab.encode(corpus), vocab.counts(), cfg)?;
    Ok(EmbeddingTable::from_model(&vocab, &model))
}

pub fn concentration_map(features: &[(String, ConcentrationFeature)]) -> HashMap<String, (f64, f64)> {
    features
        .iter()
        .map(|(u, f)| (u.clone(), f.normalized))
        .collect()
}

/// Everything one end-to-end run needs besides the data.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub walks: WalkConfig,
    pub node_skipgram: SkipGramConfig,
    pub word_skipgram: SkipGramConfig,
    pub mmas: MmasParams,
    pub loss: LossConfig,
    /// the manifold term; `false` forces `c2 = 0`
    pub manifold: bool,
    /// inverse-frequency class weights instead of uniform ones
    pub class_weighting: bool,
    pub optimizer: OptimizerConfig,
}

impl ExperimentConfig {
    /// Desk-scale defaults; embedding dimensions follow the model.
    pub fn desk(seed: u64) -> Self {
        let model = ModelConfig {
            seed,
            ..ModelConfig::desk()
        };
        let skipgram = |dim| SkipGramConfig {
            dim,
            seed,
            ..SkipGramConfig::default()
        };
        ExperimentConfig {
            node_skipgram: skipgram(model.dim),
            word_skipgram: skipgram(model.word_dim),
            model,
            walks: WalkConfig {
                seed,
                ..WalkConfig::default()
            },
            mmas: MmasParams {
                seed,
                ..MmasParams::default()
            },
            loss: LossConfig::default(),
            manifold: true,
            class_weighting: false,
            optimizer: OptimizerConfig {
                seed,
                ..OptimizerConfig::default()
            },
        }
    }

    /// The loss actually optimized, given training label counts.
    pub fn effective_loss(&self, counts: &[usize; 6]) -> LossConfig {
        LossConfig {
            c1: self.loss.c1,
            c2: if self.manifold { self.loss.c2 } else { 0.0 },
            alpha: if self.class_weighting {
                class_weights(counts)
            } else {
                self.loss.alpha
            },
        }
    }
}

/// Upstream artifacts of the model stage.
pub struct Artifacts {
    pub graph: BehaviorGraph,
    pub concentration: Vec<(String, ConcentrationFeature)>,
    pub nodes: EmbeddingTable,
    pub words: EmbeddingTable,
}

pub fn build_artifacts(ds: &Dataset, cfg: &ExperimentConfig) -> Result<Artifacts> {
    let graph = build_graph(ds)?;
    let concentration = if cfg.model.concentration {
        all_concentration_features(&graph, &cfg.mmas)?
    } else {
        Vec::new()
    };
    let walks = sample_walks(&graph, &cfg.walks)?;
    let nodes = node_embeddings(&graph, &walks, &cfg.node_skipgram)?;
    let words = word_embeddings(&ds.news, &cfg.word_skipgram)?;
    Ok(Artifacts {
        graph,
        concentration,
        nodes,
        words,
    })
}

/// Resolved train and test samples.
pub struct Prepared {
    pub bank: NewsBank,
    pub train: Vec<SampleInput>,
    pub test: Vec<SampleInput>,
    /// `(user_id, news_id)` of each test sample
    pub test_keys: Vec<(String, String)>,
}

pub fn prepare(ds: &Dataset, art: &Artifacts, model: &ModelConfig) -> Result<Prepared> {
    prepare_split(ds, art, model, true)
}

/// Like [`prepare`], but leaves `train` empty.
pub fn prepare_test(ds: &Dataset, art: &Artifacts, model: &ModelConfig) -> Result<Prepared> {
    prepare_split(ds, art, model, false)
}

fn prepare_split(ds: &Dataset, art: &Artifacts, model: &ModelConfig, with_train: bool) -> Result<Prepared> {
    let bank = NewsBank::build(&ds.news, &art.nodes, &art.words, model)?;
    let (train_s, test_s) = split_by_time(&build_samples(&ds.logs));
    let mut prep = SamplePreparer::new(
        &art.graph,
        &bank,
        &ds.logs,
        concentration_map(&art.concentration),
        model.ensi_depth,
        model.concentration,
    );
    let train = if with_train {
        prep.prepare_all(&train_s)?
    } else {
        Vec::new()
    };
    let test = prep.prepare_all(&test_s)?;
    let test_keys = test_s
        .iter()
        .map(|s| (s.user_id.clone(), s.candidate.clone()))
        .collect();
    Ok(Prepared {
        bank,
        train,
        test,
        test_keys,
    })
}

pub struct Outcome {
    pub params: ModelParams,
    pub curve: Vec<f64>,
    pub untrained: EvalReport,
    pub trained: EvalReport,
    pub seconds: f64,
}

/// Trains from scratch on `prepared.train` and evaluates on `prepared.test`
/// before and after training.
pub fn run_model(
    prepared: &Prepared,
    cfg: &ExperimentConfig,
    mut log: impl FnMut(&str),
) -> Result<Outcome> {
    let start = Instant::now();
    let mut params = ModelParams::new(cfg.model.clone())?;
    let (untrained, _) = evaluate(&params, &prepared.bank, &prepared.test)?;
    let loss = cfg.effective_loss(&label_counts(&prepared.train));
    let curve = train(
        &mut params,
        &prepared.bank,
        &prepared.train,
        &loss,
        &cfg.optimizer,
        |e, l| log(&format!("epoch {e}: mean loss {l:.6}")),
    )?;
    let (trained, _) = evaluate(&params, &prepared.bank, &prepared.test)?;
    Ok(Outcome {
        params,
        curve,
        untrained,
        trained,
        seconds: start.elapsed().as_secs_f64(),
    })
}
