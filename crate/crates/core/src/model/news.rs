use std::collections::HashMap;

use super::{ModelConfig, ModelParams, FIXED_COLUMNS};
use crate::error::{Error, Result};
use crate::graph::{node_key, NodeKind};
use crate::ingest::{NewsRecord, NULL_TAG};
use crate::skipgram::EmbeddingTable;

/// Static ingredients of one news embedding matrix. Word columns are stored
/// raw (word space) because the map into graph space is trainable.
#[derive(Debug, Clone, PartialEq)]
pub struct NewsInput {
    /// `max_words × word_dim`, zero for padding and unknown words
    pub words: Vec<f64>,
    /// whether each word slot holds a known word
    pub known: Vec<bool>,
    /// 9 tag columns then 2 category columns, `11 × dim`
    pub fixed: Vec<f64>,
}

impl NewsInput {
    /// The `(max_words + 11) × dim` embedding matrix, one contiguous column
    /// per row of the result.
    pub fn matrix(&self, p: &ModelParams) -> Result<Vec<f64>> {
        let mut m = word_space_map(p, &self.words, &self.known)?;
        m.extend_from_slice(&self.fixed);
        Ok(m)
    }
}

/// Column-wise `tanh(M w + d)`; columns flagged unknown map to zero.
pub fn word_space_map(p: &ModelParams, words: &[f64], known: &[bool]) -> Result<Vec<f64>> {
    let (dim, wd) = (p.cfg.dim, p.cfg.word_dim);
    if words.len() != known.len() * wd {
        return Err(Error::shape(format!(
            "word block has {} values, expected {}×{wd}",
            words.len(),
            known.len()
        )));
    }
    let m = p.word_map.value();
    let d = p.word_bias.value();
    let mut out = vec![0.0; known.len() * dim];
    for (j, _) in known.iter().enumerate().filter(|(_, k)| **k) {
        let w = &words[j * wd..(j + 1) * wd];
        for (r, o) in out[j * dim..(j + 1) * dim].iter_mut().enumerate() {
            *o = (crate::nn::dot(&m[r * wd..(r + 1) * wd], w) + d[r]).tanh();
        }
    }
    Ok(out)
}

/// Resolves content words, tags and categories of `news` against the
/// embedding tables. Content is truncated or zero padded to `max_words`.
pub fn build_news_input(
    news: &NewsRecord,
    nodes: &EmbeddingTable,
    words: &EmbeddingTable,
    cfg: &ModelConfig,
) -> Result<NewsInput> {
    if nodes.dim != cfg.dim || words.dim != cfg.word_dim {
        return Err(Error::shape(format!(
            "embedding tables are {}/{}-dimensional, model expects {}/{}",
            nodes.dim, words.dim, cfg.dim, cfg.word_dim
        )));
    }
    let mut word_block = vec![0.0; cfg.max_words * cfg.word_dim];
    let mut known = vec![false; cfg.max_words];
    for (j, w) in news.content.iter().take(cfg.max_words).enumerate() {
        if let Some(v) = words.get(w) {
            word_block[j * cfg.word_dim..(j + 1) * cfg.word_dim].copy_from_slice(v);
            known[j] = true;
        }
    }
    let lookup = |kind: NodeKind, id: &str| -> Result<&[f64]> {
        let key = node_key(kind, id);
        nodes
            .get(&key)
            .ok_or_else(|| Error::Coverage(format!("no node embedding for '{key}'")))
    };
    let mut fixed = Vec::with_capacity(FIXED_COLUMNS * cfg.dim);
    for t in &news.tag_ids {
        if t == NULL_TAG {
            fixed.extend(std::iter::repeat(0.0).take(cfg.dim));
        } else {
            fixed.extend_from_slice(lookup(NodeKind::Tag, t)?);
        }
    }
    fixed.extend_from_slice(lookup(NodeKind::Cat1, &news.cat1_id)?);
    fixed.extend_from_slice(lookup(NodeKind::Cat2, &news.cat2_id)?);
    if fixed.len() != FIXED_COLUMNS * cfg.dim {
        return Err(Error::shape(format!(
            "news '{}' does not have exactly 9 tag slots",
            news.news_id
        )));
    }
    Ok(NewsInput {
        words: word_block,
        known,
        fixed,
    })
}

/// Attributes used by the intra-batch similarity graph.
#[derive(Debug, Clone, PartialEq)]
pub struct NewsAttrs {
    pub topic: String,
    pub cat1: String,
    pub tags: Vec<String>,
}

impl NewsAttrs {
    pub fn similar(&self, other: &NewsAttrs) -> bool {
        self.topic == other.topic
            || self.cat1 == other.cat1
            || self.tags.iter().any(|t| other.tags.contains(t))
    }
}

/// All news inputs, addressed by position.
#[derive(Debug, Clone)]
pub struct NewsBank {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    pub inputs: Vec<NewsInput>,
    pub attrs: Vec<NewsAttrs>,
}

impl NewsBank {
    pub fn build(
        news: &[NewsRecord],
        nodes: &EmbeddingTable,
        words: &EmbeddingTable,
        cfg: &ModelConfig,
    ) -> Result<NewsBank> {
        let mut bank = NewsBank {
            ids: Vec::with_capacity(news.len()),
            index: HashMap::with_capacity(news.len()),
            inputs: Vec::with_capacity(news.len()),
            attrs: Vec::with_capacity(news.len()),
        };
        for n in news {
            bank.index.insert(n.news_id.clone(), bank.ids.len());
            bank.ids.push(n.news_id.clone());
            bank.inputs.push(build_news_input(n, nodes, words, cfg)?);
            bank.attrs.push(NewsAttrs {
                topic: n.topic_id.clone(),
                cat1: n.cat1_id.clone(),
                tags: n.real_tags().map(str::to_string).collect(),
            });
        }
        Ok(bank)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, news_id: &str) -> Option<usize> {
        self.index.get(news_id).copied()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }
}

/// A news item together with its ranked environmental news (bank indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewsRef {
    pub news: usize,
    pub env: Vec<usize>,
}
