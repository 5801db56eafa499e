//! SkipGram with hierarchical softmax over a Huffman tree, used for node
//! embeddings (walk corpora) and word embeddings (news content).

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const NODE_EMBEDDINGS_FILE: &str = "node_embeddings.tsv";
pub const WORD_EMBEDDINGS_FILE: &str = "word_embeddings.tsv";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Symbols are indexed in order of first appearance.
    pub fn from_corpus<S: AsRef<str>>(corpus: &[Vec<S>]) -> Self {
        let mut v = Vocabulary::default();
        for sentence in corpus {
            for s in sentence {
                v.add(s.as_ref());
            }
        }
        v
    }

    fn add(&mut self, s: &str) -> usize {
        if let Some(&i) = self.index.get(s) {
            self.counts[i] += 1;
            return i;
        }
        let i = self.symbols.len();
        self.symbols.push(s.to_string());
        self.index.insert(s.to_string(), i);
        self.counts.push(1);
        i
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn encode<S: AsRef<str>>(&self, corpus: &[Vec<S>]) -> Vec<Vec<usize>> {
        corpus
            .iter()
            .map(|s| s.iter().filter_map(|t| self.get(t.as_ref())).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCoding {
    /// Per symbol: bits from the root down.
    pub codes: Vec<Vec<u8>>,
    /// Per symbol: inner-node indexes from the root down, aligned with `codes`.
    pub paths: Vec<Vec<usize>>,
}

impl HuffmanCoding {
    pub fn inner_count(&self) -> usize {
        self.codes.len() - 1
    }
}

/// Optimal prefix code by frequency. Merges always take the two smallest
/// `(frequency, node id)` pairs, leaves numbered before inner nodes.
pub fn build_huffman(freqs: &[u64]) -> Result<HuffmanCoding> {
    let n = freqs.len();
    if n < 2 {
        return Err(Error::invalid("Huffman coding needs at least two symbols"));
    }
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        freqs.iter().enumerate().map(|(i, &f)| Reverse((f, i))).collect();
    // node ids: 0..n leaves, n.. inner nodes in creation order
    let mut parent = vec![usize::MAX; 2 * n - 1];
    let mut bit = vec![0u8; 2 * n - 1];
    let mut next = n;
    while heap.len() > 1 {
        let Reverse((fa, a)) = heap.pop().expect("two nodes");
        let Reverse((fb, b)) = heap.pop().expect("two nodes");
        parent[a] = next;
        parent[b] = next;
        bit[a] = 0;
        bit[b] = 1;
        heap.push(Reverse((fa + fb, next)));
        next += 1;
    }
    let root = next - 1;
    let mut codes = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    for leaf in 0..n {
        let mut code = Vec::new();
        let mut path = Vec::new();
        let mut node = leaf;
        while node != root {
            code.push(bit[node]);
            node = parent[node];
            // inner nodes indexed from the root: root gets 0
            path.push(root - node);
        }
        code.reverse();
        path.reverse();
        codes.push(code);
        paths.push(path);
    }
    Ok(HuffmanCoding { codes, paths })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 300,
            window: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
        }
    }
}

/// Input vectors plus Huffman inner-node vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramModel {
    pub dim: usize,
    pub coding: HuffmanCoding,
    /// `vocab × dim`, row-major.
    pub input: Vec<f64>,
    /// `(vocab − 1) × dim`, row-major.
    pub inner: Vec<f64>,
}

/// Gradient of `−log p(context | center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradient {
    pub nll: f64,
    pub center: Vec<f64>,
    /// `(inner node, gradient)` along the context's Huffman path.
    pub inner: Vec<(usize, Vec<f64>)>,
}

impl SkipGramModel {
    pub fn new(freqs: &[u64], dim: usize, seed: u64) -> Result<Self> {
        let coding = build_huffman(freqs)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = 0.5 / dim as f64;
        let input = (0..freqs.len() * dim)
            .map(|_| rng.gen_range(-half..half))
            .collect();
        let inner = vec![0.0; (freqs.len() - 1) * dim];
        Ok(SkipGramModel {
            dim,
            coding,
            input,
            inner,
        })
    }

    pub fn vocab_len(&self) -> usize {
        self.coding.codes.len()
    }

    pub fn input_row(&self, i: usize) -> &[f64] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn inner_row(&self, j: usize) -> &[f64] {
        &self.inner[j * self.dim..(j + 1) * self.dim]
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.vocab_len() {
            return Err(Error::invalid(format!("symbol {i} not in vocabulary")));
        }
        Ok(())
    }

    /// `p(context | center)`: product over the context's path of
    /// `σ(±⟨v_center, u_inner⟩)`, `+` for bit 0 and `−` for bit 1.
    pub fn pair_probability(&self, center: usize, context: usize) -> Result<f64> {
        self.check(center)?;
        self.check(context)?;
        let v = self.input_row(center);
        let mut p = 1.0;
        for (&node, &bit) in self.coding.paths[context]
            .iter()
            .zip(&self.coding.codes[context])
        {
            let x = dot(v, self.inner_row(node));
            p *= if bit == 0 { sigmoid(x) } else { sigmoid(-x) };
        }
        Ok(p)
    }

    pub fn pair_gradient(&self, center: usize, context: usize) -> Result<PairGradient> {
        self.check(center)?;
        self.check(context)?;
        let v = self.input_row(center);
        let mut nll = 0.0;
        let mut g_center = vec![0.0; self.dim];
        let mut inner = Vec::new();
        for (&node, &bit) in self.coding.paths[context]
            .iter()
            .zip(&self.coding.codes[context])
        {
            let u = self.inner_row(node);
            let sign = if bit == 0 { 1.0 } else { -1.0 };
            let s = sigmoid(sign * dot(v, u));
            nll -= s.ln();
            // d(−ln σ(sign·x))/dx = −sign·(1 − σ(sign·x))
            let coeff = -sign * (1.0 - s);
            for (g, ui) in g_center.iter_mut().zip(u) {
                *g += coeff * ui;
            }
            inner.push((node, v.iter().map(|vi| coeff * vi).collect()));
        }
        Ok(PairGradient {
            nll,
            center: g_center,
            inner,
        })
    }

    /// One SGD step on `−log p(context | center)` with learning rate `lr`.
    fn sgd_pair(&mut self, center: usize, context: usize, lr: f64, acc: &mut [f64]) {
        let dim = self.dim;
        acc.iter_mut().for_each(|a| *a = 0.0);
        let v_off = center * dim;
        for (&node, &bit) in self.coding.paths[context]
            .iter()
            .zip(&self.coding.codes[context])
        {
            let u_off = node * dim;
            let v = &self.input[v_off..v_off + dim];
            let u = &mut self.inner[u_off..u_off + dim];
            let label = if bit == 0 { 1.0 } else { 0.0 };
            let f = sigmoid(dot(v, u));
            let g = (label - f) * lr;
            for ((a, ui), vi) in acc.iter_mut().zip(u.iter_mut()).zip(v) {
                *a += g * *ui;
                *ui += g * vi;
            }
        }
        for (vi, a) in self.input[v_off..v_off + dim].iter_mut().zip(acc.iter()) {
            *vi += a;
        }
    }

    /// Mean `−log p` over a list of (center, context) pairs.
    pub fn mean_nll(&self, pairs: &[(usize, usize)]) -> Result<f64> {
        let mut total = 0.0;
        for &(c, x) in pairs {
            total -= self.pair_probability(c, x)?.ln();
        }
        Ok(total / pairs.len().max(1) as f64)
    }
}

/// All (center, context) pairs within `window` positions.
pub fn window_pairs(corpus: &[Vec<usize>], window: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for s in corpus {
        for i in 0..s.len() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(s.len() - 1);
            for j in lo..=hi {
                if j != i {
                    out.push((s[i], s[j]));
                }
            }
        }
    }
    out
}

/// Trains on an encoded corpus with linearly decaying learning rate.
pub fn train_skipgram(
    corpus: &[Vec<usize>],
    freqs: &[u64],
    cfg: &SkipGramConfig,
) -> Result<SkipGramModel> {
    let tokens: usize = corpus.iter().map(Vec::len).sum();
    if tokens == 0 {
        return Err(Error::invalid("empty corpus"));
    }
    let mut model = SkipGramModel::new(freqs, cfg.dim, cfg.seed)?;
    let total = (tokens * cfg.epochs) as f64;
    let mut seen = 0usize;
    let mut acc = vec![0.0; cfg.dim];
    for _ in 0..cfg.epochs {
        for s in corpus {
            for i in 0..s.len() {
                let lr = cfg.lr * (1.0 - seen as f64 / total).max(1e-4);
                seen += 1;
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(s.len() - 1);
                for j in lo..=hi {
                    if j != i {
                        model.sgd_pair(s[i], s[j], lr, &mut acc);
                    }
                }
            }
        }
    }
    Ok(model)
}

/// Symbol → vector lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    symbols: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            symbols: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn from_model(vocab: &Vocabulary, model: &SkipGramModel) -> Self {
        let mut t = EmbeddingTable::new(model.dim);
        for i in 0..vocab.len() {
            t.insert(vocab.symbol(i), model.input_row(i))
                .expect("fresh symbols");
        }
        t
    }

    pub fn insert(&mut self, symbol: &str, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::shape(format!(
                "embedding for '{symbol}' has {} entries, expected {}",
                v.len(),
                self.dim
            )));
        }
        if self.index.contains_key(symbol) {
            return Err(Error::Duplicate {
                field: "symbol",
                id: symbol.to_string(),
            });
        }
        self.index.insert(symbol.to_string(), self.symbols.len());
        self.symbols.push(symbol.to_string());
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn get(&self, symbol: &str) -> Option<&[f64]> {
        self.index
            .get(symbol)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (i, sym) in self.symbols.iter().enumerate() {
            s.push_str(sym);
            s.push('\t');
            for (k, x) in self.data[i * self.dim..(i + 1) * self.dim].iter().enumerate() {
                if k > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{x}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |msg: String| Error::Parse {
                path: "embeddings".into(),
                line: i + 1,
                msg,
            };
            let (sym, rest) = line
                .split_once('\t')
                .ok_or_else(|| bad("missing tab".into()))?;
            let v: Vec<f64> = rest
                .split(' ')
                .map(|x| x.parse().map_err(|_| bad(format!("bad value '{x}'"))))
                .collect::<Result<_>>()?;
            let t = table.get_or_insert_with(|| EmbeddingTable::new(v.len()));
            t.insert(sym, &v)?;
        }
        table.ok_or_else(|| Error::invalid("empty embedding file"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}
