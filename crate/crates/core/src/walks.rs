//! Random-walk corpora over the behavior graph.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::BehaviorGraph;

pub const WALKS_FILE: &str = "walks.txt";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WalkStrategy {
    /// Uniform over neighbors.
    DeepWalk,
    /// Second-order walk with return parameter `p` and in-out parameter `q`.
    Node2vec { p: f64, q: f64 },
    /// First-order walk with probabilities proportional to edge weights.
    BehaviorWeighted,
}

impl fmt::Display for WalkStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WalkStrategy::DeepWalk => f.write_str("deepwalk"),
            WalkStrategy::Node2vec { .. } => f.write_str("node2vec"),
            WalkStrategy::BehaviorWeighted => f.write_str("behavior-weighted"),
        }
    }
}

impl FromStr for WalkStrategy {
    type Err = Error;

    /// `deepwalk`, `behavior-weighted`, `node2vec` (p=1, q=2) or `node2vec:P:Q`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deepwalk" => Ok(WalkStrategy::DeepWalk),
            "behavior-weighted" | "behavior_weighted" => Ok(WalkStrategy::BehaviorWeighted),
            "node2vec" => Ok(WalkStrategy::Node2vec { p: 1.0, q: 2.0 }),
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                let bad = || Error::invalid(format!("unknown walk strategy '{s}'"));
                if parts.len() != 3 || parts[0] != "node2vec" {
                    return Err(bad());
                }
                let p: f64 = parts[1].parse().map_err(|_| bad())?;
                let q: f64 = parts[2].parse().map_err(|_| bad())?;
                Ok(WalkStrategy::Node2vec { p, q })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub strategy: WalkStrategy,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            strategy: WalkStrategy::BehaviorWeighted,
            walk_length: 20,
            walks_per_node: 10,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(Error::invalid("walk_length must be at least 2"));
        }
        if self.walks_per_node == 0 {
            return Err(Error::invalid("walks_per_node must be positive"));
        }
        if let WalkStrategy::Node2vec { p, q } = self.strategy {
            if !(p > 0.0 && q > 0.0) {
                return Err(Error::invalid("node2vec p and q must be positive"));
            }
        }
        Ok(())
    }
}

/// Sorted neighbor lists for O(log d) adjacency tests.
struct Adjacency {
    sorted: Vec<Vec<usize>>,
}

impl Adjacency {
    fn new(g: &BehaviorGraph) -> Self {
        let sorted = (0..g.node_count())
            .map(|v| {
                let mut ns: Vec<usize> = g.neighbors(v).iter().map(|n| n.node).collect();
                ns.sort_unstable();
                ns
            })
            .collect();
        Adjacency { sorted }
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.sorted[a].binary_search(&b).is_ok()
    }
}

fn unnormalized(
    g: &BehaviorGraph,
    adj: &Adjacency,
    prev: Option<usize>,
    current: usize,
    strategy: WalkStrategy,
    out: &mut Vec<f64>,
) {
    out.clear();
    let ns = g.neighbors(current);
    match (strategy, prev) {
        (WalkStrategy::DeepWalk, _) => out.extend(ns.iter().map(|_| 1.0)),
        (WalkStrategy::BehaviorWeighted, _) | (WalkStrategy::Node2vec { .. }, None) => {
            out.extend(ns.iter().map(|n| n.weight))
        }
        (WalkStrategy::Node2vec { p, q }, Some(t)) => out.extend(ns.iter().map(|n| {
            let bias = if n.node == t {
                1.0 / p
            } else if adj.adjacent(t, n.node) {
                1.0
            } else {
                1.0 / q
            };
            bias * n.weight
        })),
    }
}

/// Next-step probabilities over `g.neighbors(current)`, in adjacency order.
pub fn transition_distribution(
    g: &BehaviorGraph,
    prev: Option<usize>,
    current: usize,
    strategy: WalkStrategy,
) -> Result<Vec<f64>> {
    if g.degree(current) == 0 {
        return Err(Error::invalid(format!("node {current} is isolated")));
    }
    if let Some(t) = prev {
        if g.weight(current, t).is_none() {
            return Err(Error::invalid(format!(
                "previous node {t} is not adjacent to {current}"
            )));
        }
    }
    let adj = Adjacency::new(g);
    let mut w = Vec::new();
    unnormalized(g, &adj, prev, current, strategy, &mut w);
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Single-step sampler over a fixed graph and strategy.
pub struct Walker<'g> {
    graph: &'g BehaviorGraph,
    adj: Adjacency,
    strategy: WalkStrategy,
    weights: Vec<f64>,
}

impl<'g> Walker<'g> {
    pub fn new(graph: &'g BehaviorGraph, strategy: WalkStrategy) -> Self {
        Walker {
            graph,
            adj: Adjacency::new(graph),
            strategy,
            weights: Vec::new(),
        }
    }

    /// Draws the node after `current`. `current` must not be isolated.
    pub fn step(&mut self, prev: Option<usize>, current: usize, rng: &mut impl Rng) -> usize {
        unnormalized(
            self.graph,
            &self.adj,
            prev,
            current,
            self.strategy,
            &mut self.weights,
        );
        let total: f64 = self.weights.iter().sum();
        let mut x = rng.gen::<f64>() * total;
        let ns = self.graph.neighbors(current);
        for (n, w) in ns.iter().zip(&self.weights) {
            if x < *w {
                return n.node;
            }
            x -= w;
        }
        ns[ns.len() - 1].node
    }
}

fn walk_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `walks_per_node` walks of exactly `walk_length` nodes from every
/// non-isolated node. Each walk draws from its own random stream keyed by
/// (epoch, start node), so the corpus does not depend on generation order.
pub fn sample_walks(g: &BehaviorGraph, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let mut walker = Walker::new(g, cfg.strategy);
    let n = g.node_count() as u64;
    let starts: Vec<usize> = (0..g.node_count()).filter(|&v| g.degree(v) > 0).collect();
    let mut order_rng = walk_rng(cfg.seed, u64::MAX);
    let mut walks = Vec::with_capacity(starts.len() * cfg.walks_per_node);
    for epoch in 0..cfg.walks_per_node as u64 {
        let mut order = starts.clone();
        order.shuffle(&mut order_rng);
        for start in order {
            let mut rng = walk_rng(cfg.seed, epoch * n + start as u64);
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start);
            let mut prev = None;
            while walk.len() < cfg.walk_length {
                let current = *walk.last().expect("non-empty walk");
                let next = walker.step(prev, current, &mut rng);
                prev = Some(current);
                walk.push(next);
            }
            walks.push(walk);
        }
    }
    Ok(walks)
}

pub fn write_walks(walks: &[Vec<usize>]) -> String {
    let mut s = String::new();
    for w in walks {
        for (i, v) in w.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_walks(text: &str) -> Result<Vec<Vec<usize>>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.split_whitespace()
                .map(|t| {
                    t.parse().map_err(|_| Error::Parse {
                        path: WALKS_FILE.into(),
                        line: i + 1,
                        msg: format!("bad node index '{t}'"),
                    })
                })
                .collect()
        })
        .collect()
}

pub fn read_walks(path: &Path) -> Result<Vec<Vec<usize>>> {
    parse_walks(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeLabel, NodeKind};

    /// Walker at `c` arriving from `t`; `x1` is adjacent to `t`, `x2` is not.
    fn node2vec_fixture() -> (BehaviorGraph, usize, usize) {
        let mut g = BehaviorGraph::new();
        let c = g.add_node(NodeKind::User, "c");
        let t = g.add_node(NodeKind::News, "t");
        let x1 = g.add_node(NodeKind::Topic, "x1");
        let x2 = g.add_node(NodeKind::Cat1, "x2");
        g.add_edge(c, t, EdgeLabel::UserNews, 1.0).unwrap();
        g.add_edge(c, x1, EdgeLabel::UserTopic, 1.0).unwrap();
        g.add_edge(c, x2, EdgeLabel::UserCat1, 1.0).unwrap();
        g.add_edge(t, x1, EdgeLabel::NewsTopic, 1.0).unwrap();
        (g, t, c)
    }

    #[test]
    fn node2vec_example() {
        let (g, t, c) = node2vec_fixture();
        let d = transition_distribution(
            &g,
            Some(t),
            c,
            WalkStrategy::Node2vec { p: 1.0, q: 2.0 },
        )
        .unwrap();
        let expected = [0.4, 0.4, 0.2];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_and_uniform_examples() {
        let mut g = BehaviorGraph::new();
        let u = g.add_node(NodeKind::User, "u");
        let a = g.add_node(NodeKind::News, "a");
        let b = g.add_node(NodeKind::News, "b");
        g.add_edge(u, a, EdgeLabel::UserNews, 2.0).unwrap();
        g.add_edge(u, b, EdgeLabel::UserNews, 6.0).unwrap();
        let d = transition_distribution(&g, None, u, WalkStrategy::BehaviorWeighted).unwrap();
        assert_eq!(d, vec![0.25, 0.75]);

        let mut g = BehaviorGraph::new();
        let u = g.add_node(NodeKind::User, "u");
        for i in 0..4 {
            let n = g.add_node(NodeKind::News, &format!("n{i}"));
            g.add_edge(u, n, EdgeLabel::UserNews, (i + 1) as f64).unwrap();
        }
        let d = transition_distribution(&g, Some(1), u, WalkStrategy::DeepWalk).unwrap();
        assert_eq!(d, vec![0.25; 4]);
    }

    #[test]
    fn isolated_and_non_adjacent_prev() {
        let mut g = BehaviorGraph::new();
        let u = g.add_node(NodeKind::User, "u");
        let n = g.add_node(NodeKind::News, "n");
        let lonely = g.add_node(NodeKind::News, "m");
        g.add_edge(u, n, EdgeLabel::UserNews, 1.0).unwrap();
        assert!(transition_distribution(&g, None, lonely, WalkStrategy::DeepWalk).is_err());
        assert!(transition_distribution(&g, Some(lonely), u, WalkStrategy::DeepWalk).is_err());
    }

    #[test]
    fn minimal_walks_follow_edges() {
        let (g, _, _) = node2vec_fixture();
        let cfg = WalkConfig {
            walk_length: 2,
            walks_per_node: 3,
            ..WalkConfig::default()
        };
        let walks = sample_walks(&g, &cfg).unwrap();
        assert_eq!(walks.len(), 12);
        for w in &walks {
            assert_eq!(w.len(), 2);
            assert!(g.weight(w[0], w[1]).is_some());
        }
        assert!(sample_walks(
            &g,
            &WalkConfig {
                walk_length: 1,
                ..cfg
            }
        )
        .is_err());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("deepwalk".parse::<WalkStrategy>().unwrap(), WalkStrategy::DeepWalk);
        assert_eq!(
            "node2vec".parse::<WalkStrategy>().unwrap(),
            WalkStrategy::Node2vec { p: 1.0, q: 2.0 }
        );
        assert_eq!(
            "node2vec:0.5:4".parse::<WalkStrategy>().unwrap(),
            WalkStrategy::Node2vec { p: 0.5, q: 4.0 }
        );
        assert!("levy".parse::<WalkStrategy>().is_err());
    }

    #[test]
    fn walk_file_round_trip() {
        let walks = vec![vec![0, 3, 1], vec![2, 2]];
        assert_eq!(parse_walks(&write_walks(&walks)).unwrap(), walks);
    }
}
