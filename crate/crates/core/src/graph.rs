//! The interaction behavior graph: a weighted, undirected, heterogeneous
//! graph over users, news, posters, topics, tags and two category levels.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{Behavior, BehaviorLog, Dataset, NewsRecord};

pub const NODES_FILE: &str = "nodes.tsv";
pub const EDGES_FILE: &str = "edges.tsv";

/// Weight of the news-topic edge; a news item belongs to exactly one topic.
pub const NEWS_TOPIC_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    User,
    News,
    Topic,
    Tag,
    Cat1,
    Cat2,
    Poster,
}

impl NodeKind {
    pub const ALL: [NodeKind; 7] = [
        NodeKind::User,
        NodeKind::News,
        NodeKind::Topic,
        NodeKind::Tag,
        NodeKind::Cat1,
        NodeKind::Cat2,
        NodeKind::Poster,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::User => "user",
            NodeKind::News => "news",
            NodeKind::Topic => "topic",
            NodeKind::Tag => "tag",
            NodeKind::Cat1 => "cat1",
            NodeKind::Cat2 => "cat2",
            NodeKind::Poster => "poster",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown node kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    UserNews,
    UserTopic,
    UserTag,
    UserCat1,
    UserCat2,
    UserPoster,
    NewsTopic,
    NewsTag,
    NewsCat1,
    NewsCat2,
    NewsPoster,
}

impl EdgeLabel {
    pub const ALL: [EdgeLabel; 11] = [
        EdgeLabel::UserNews,
        EdgeLabel::UserTopic,
        EdgeLabel::UserTag,
        EdgeLabel::UserCat1,
        EdgeLabel::UserCat2,
        EdgeLabel::UserPoster,
        EdgeLabel::NewsTopic,
        EdgeLabel::NewsTag,
        EdgeLabel::NewsCat1,
        EdgeLabel::NewsCat2,
        EdgeLabel::NewsPoster,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeLabel::UserNews => "user-news",
            EdgeLabel::UserTopic => "user-topic",
            EdgeLabel::UserTag => "user-tag",
            EdgeLabel::UserCat1 => "user-cat1",
            EdgeLabel::UserCat2 => "user-cat2",
            EdgeLabel::UserPoster => "user-poster",
            EdgeLabel::NewsTopic => "news-topic",
            EdgeLabel::NewsTag => "news-tag",
            EdgeLabel::NewsCat1 => "news-cat1",
            EdgeLabel::NewsCat2 => "news-cat2",
            EdgeLabel::NewsPoster => "news-poster",
        }
    }

    /// The two endpoint kinds, in (first, second) order.
    pub fn kinds(self) -> (NodeKind, NodeKind) {
        use NodeKind::*;
        match self {
            EdgeLabel::UserNews => (User, News),
            EdgeLabel::UserTopic => (User, Topic),
            EdgeLabel::UserTag => (User, Tag),
            EdgeLabel::UserCat1 => (User, Cat1),
            EdgeLabel::UserCat2 => (User, Cat2),
            EdgeLabel::UserPoster => (User, Poster),
            EdgeLabel::NewsTopic => (News, Topic),
            EdgeLabel::NewsTag => (News, Tag),
            EdgeLabel::NewsCat1 => (News, Cat1),
            EdgeLabel::NewsCat2 => (News, Cat2),
            EdgeLabel::NewsPoster => (News, Poster),
        }
    }
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EdgeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown edge label '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub id: String,
    pub index: usize,
}

impl NodeRef {
    /// `kind:id`, unique across the graph.
    pub fn key(&self) -> String {
        node_key(self.kind, &self.id)
    }
}

pub fn node_key(kind: NodeKind, id: &str) -> String {
    format!("{kind}:{id}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub label: EdgeLabel,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub node: usize,
    pub weight: f64,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BehaviorGraph {
    nodes: Vec<NodeRef>,
    lookup: HashMap<(NodeKind, String), usize>,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<Neighbor>>,
}

impl BehaviorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a node if absent and returns its index.
    pub fn add_node(&mut self, kind: NodeKind, id: &str) -> usize {
        if let Some(&i) = self.lookup.get(&(kind, id.to_string())) {
            return i;
        }
        let index = self.nodes.len();
        self.nodes.push(NodeRef {
            kind,
            id: id.to_string(),
            index,
        });
        self.lookup.insert((kind, id.to_string()), index);
        self.adjacency.push(Vec::new());
        index
    }

    pub fn add_edge(&mut self, a: usize, b: usize, label: EdgeLabel, weight: f64) -> Result<()> {
        if a == b {
            return Err(Error::invalid(format!("self-loop on node {a}")));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::invalid(format!("edge weight {weight} is not positive")));
        }
        let n = self.nodes.len();
        if a >= n || b >= n {
            return Err(Error::invalid(format!("edge ({a},{b}) out of range")));
        }
        let (ka, kb) = label.kinds();
        let kinds = (self.nodes[a].kind, self.nodes[b].kind);
        if kinds != (ka, kb) && kinds != (kb, ka) {
            return Err(Error::invalid(format!(
                "edge label {label} does not connect {} and {}",
                kinds.0, kinds.1
            )));
        }
        self.edges.push(Edge { a, b, label, weight });
        self.adjacency[a].push(Neighbor {
            node: b,
            weight,
            label,
        });
        self.adjacency[b].push(Neighbor {
            node: a,
            weight,
            label,
        });
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeRef] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &NodeRef {
        &self.nodes[index]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbors(&self, index: usize) -> &[Neighbor] {
        &self.adjacency[index]
    }

    pub fn degree(&self, index: usize) -> usize {
        self.adjacency[index].len()
    }

    pub fn find(&self, kind: NodeKind, id: &str) -> Option<usize> {
        self.lookup.get(&(kind, id.to_string())).copied()
    }

    pub fn find_key(&self, key: &str) -> Option<usize> {
        let (kind, id) = key.split_once(':')?;
        self.find(kind.parse().ok()?, id)
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a]
            .iter()
            .find(|n| n.node == b)
            .map(|n| n.weight)
    }

    pub fn nodes_of_kind(&self, kind: NodeKind) -> impl Iterator<Item = &NodeRef> {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }

    /// Induced subgraph on `{user} ∪ N(user)`. Nodes keep their original
    /// relative order; indexes are re-densified.
    pub fn ego_subgraph(&self, user: usize) -> Result<BehaviorGraph> {
        if self.degree(user) == 0 {
            return Err(Error::DegenerateEgo(self.nodes[user].id.clone()));
        }
        let mut members: Vec<usize> = self.adjacency[user].iter().map(|n| n.node).collect();
        members.push(user);
        members.sort_unstable();
        members.dedup();
        self.induced(&members)
    }

    /// Induced subgraph on a sorted, deduplicated list of node indexes.
    pub fn induced(&self, members: &[usize]) -> Result<BehaviorGraph> {
        let mut remap = HashMap::with_capacity(members.len());
        let mut sub = BehaviorGraph::new();
        for &m in members {
            let node = &self.nodes[m];
            remap.insert(m, sub.add_node(node.kind, &node.id));
        }
        for e in &self.edges {
            if let (Some(&a), Some(&b)) = (remap.get(&e.a), remap.get(&e.b)) {
                sub.add_edge(a, b, e.label, e.weight)?;
            }
        }
        Ok(sub)
    }

    pub fn export_nodes(&self) -> String {
        let mut s = String::new();
        for n in &self.nodes {
            let _ = writeln!(s, "{}\t{}\t{}", n.index, n.kind, n.id);
        }
        s
    }

    pub fn export_edges(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", e.a, e.b, e.label, e.weight);
        }
        s
    }

    pub fn import(nodes: &str, edges: &str) -> Result<BehaviorGraph> {
        let mut g = BehaviorGraph::new();
        for (ln, line) in nodes.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Parse {
                path: NODES_FILE.into(),
                line: ln + 1,
                msg: format!("malformed node line '{line}'"),
            };
            if f.len() != 3 {
                return Err(bad());
            }
            let index: usize = f[0].parse().map_err(|_| bad())?;
            if index != g.node_count() {
                return Err(bad());
            }
            g.add_node(f[1].parse()?, f[2]);
            if g.node_count() != index + 1 {
                return Err(Error::Duplicate {
                    field: "node",
                    id: f[2].to_string(),
                });
            }
        }
        for (ln, line) in edges.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::Parse {
                path: EDGES_FILE.into(),
                line: ln + 1,
                msg: format!("malformed edge line '{line}'"),
            };
            if f.len() != 4 {
                return Err(bad());
            }
            let a: usize = f[0].parse().map_err(|_| bad())?;
            let b: usize = f[1].parse().map_err(|_| bad())?;
            let weight: f64 = f[3].parse().map_err(|_| bad())?;
            g.add_edge(a, b, f[2].parse()?, weight)?;
        }
        Ok(g)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(NODES_FILE), self.export_nodes())?;
        std::fs::write(dir.join(EDGES_FILE), self.export_edges())?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<BehaviorGraph> {
        let nodes = std::fs::read_to_string(dir.join(NODES_FILE))?;
        let edges = std::fs::read_to_string(dir.join(EDGES_FILE))?;
        Self::import(&nodes, &edges)
    }
}

/// Weight of a user-news edge: the behavior's rank on a linear 1..6 scale.
pub fn user_news_weight(b: Behavior) -> f64 {
    f64::from(b.rank())
}

/// Builds the behavior graph from the four datasets.
///
/// Node indexes are assigned kind by kind (users, news, topics, tags, cat1,
/// cat2, posters), each in order of first appearance across the datasets.
pub fn build_graph(ds: &Dataset) -> Result<BehaviorGraph> {
    let news_by_id: HashMap<&str, &NewsRecord> =
        ds.news.iter().map(|n| (n.news_id.as_str(), n)).collect();
    for l in &ds.logs {
        if !news_by_id.contains_key(l.news_id.as_str()) {
            return Err(Error::Dangling {
                kind: "news",
                id: l.news_id.clone(),
            });
        }
    }

    let mut g = BehaviorGraph::new();
    for p in &ds.profiles {
        g.add_node(NodeKind::User, &p.user_id);
    }
    for l in &ds.logs {
        g.add_node(NodeKind::User, &l.user_id);
    }
    for n in &ds.news {
        g.add_node(NodeKind::News, &n.news_id);
    }
    for t in &ds.topics {
        g.add_node(NodeKind::Topic, &t.topic_id);
    }
    for n in &ds.news {
        g.add_node(NodeKind::Topic, &n.topic_id);
    }
    for l in &ds.logs {
        g.add_node(NodeKind::Topic, &l.topic_id);
    }
    for t in &ds.topics {
        for tag in &t.tag_ids {
            g.add_node(NodeKind::Tag, tag);
        }
    }
    for n in &ds.news {
        for tag in n.real_tags() {
            g.add_node(NodeKind::Tag, tag);
        }
    }
    for p in &ds.profiles {
        for tag in &p.tag_ids {
            g.add_node(NodeKind::Tag, tag);
        }
    }
    for t in &ds.topics {
        g.add_node(NodeKind::Cat1, &t.cat1_id);
    }
    for n in &ds.news {
        g.add_node(NodeKind::Cat1, &n.cat1_id);
    }
    for p in &ds.profiles {
        for c in &p.cat1_ids {
            g.add_node(NodeKind::Cat1, c);
        }
    }
    for t in &ds.topics {
        g.add_node(NodeKind::Cat2, &t.cat2_id);
    }
    for n in &ds.news {
        g.add_node(NodeKind::Cat2, &n.cat2_id);
    }
    for p in &ds.profiles {
        for c in &p.cat2_ids {
            g.add_node(NodeKind::Cat2, c);
        }
    }
    for n in &ds.news {
        g.add_node(NodeKind::Poster, &n.poster_id);
    }

    let idx = |g: &BehaviorGraph, kind, id: &str| g.find(kind, id).expect("node registered");

    // Strongest behavior per (user, news).
    let mut strongest: BTreeMap<(usize, usize), Behavior> = BTreeMap::new();
    for l in &ds.logs {
        let u = idx(&g, NodeKind::User, &l.user_id);
        let n = idx(&g, NodeKind::News, &l.news_id);
        let e = strongest.entry((u, n)).or_insert(l.behavior);
        if l.behavior > *e {
            *e = l.behavior;
        }
    }
    for (&(u, n), &b) in &strongest {
        g.add_edge(u, n, EdgeLabel::UserNews, user_news_weight(b))?;
    }

    // User-class proportions over each user's distinct triggered news.
    let mut per_user: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(u, n) in strongest.keys() {
        per_user.entry(u).or_default().push(n);
    }
    for (&u, user_news) in &per_user {
        let total = user_news.len() as f64;
        let mut single: [(EdgeLabel, BTreeMap<usize, f64>); 4] = [
            (EdgeLabel::UserTopic, BTreeMap::new()),
            (EdgeLabel::UserCat1, BTreeMap::new()),
            (EdgeLabel::UserCat2, BTreeMap::new()),
            (EdgeLabel::UserPoster, BTreeMap::new()),
        ];
        let mut tags: BTreeMap<usize, f64> = BTreeMap::new();
        let mut tagged_news = 0usize;
        for &n in user_news {
            let rec = news_by_id[g.node(n).id.as_str()];
            let targets = [
                idx(&g, NodeKind::Topic, &rec.topic_id),
                idx(&g, NodeKind::Cat1, &rec.cat1_id),
                idx(&g, NodeKind::Cat2, &rec.cat2_id),
                idx(&g, NodeKind::Poster, &rec.poster_id),
            ];
            for ((_, acc), t) in single.iter_mut().zip(targets) {
                *acc.entry(t).or_insert(0.0) += 1.0;
            }
            let real: Vec<&str> = rec.real_tags().collect();
            if !real.is_empty() {
                tagged_news += 1;
                let share = 1.0 / real.len() as f64;
                for tag in real {
                    *tags.entry(idx(&g, NodeKind::Tag, tag)).or_insert(0.0) += share;
                }
            }
        }
        for (label, acc) in single {
            for (t, count) in acc {
                g.add_edge(u, t, label, count / total)?;
            }
        }
        for (t, mass) in tags {
            g.add_edge(u, t, EdgeLabel::UserTag, mass / tagged_news as f64)?;
        }
    }

    // News attribute edges.
    for rec in &ds.news {
        let n = idx(&g, NodeKind::News, &rec.news_id);
        let topic = idx(&g, NodeKind::Topic, &rec.topic_id);
        g.add_edge(n, topic, EdgeLabel::NewsTopic, NEWS_TOPIC_WEIGHT)?;
        let real: Vec<&str> = rec.real_tags().collect();
        for tag in &real {
            let t = idx(&g, NodeKind::Tag, tag);
            g.add_edge(n, t, EdgeLabel::NewsTag, 1.0 / real.len() as f64)?;
        }
        let c1 = idx(&g, NodeKind::Cat1, &rec.cat1_id);
        g.add_edge(n, c1, EdgeLabel::NewsCat1, 1.0)?;
        let c2 = idx(&g, NodeKind::Cat2, &rec.cat2_id);
        g.add_edge(n, c2, EdgeLabel::NewsCat2, 1.0)?;
        let p = idx(&g, NodeKind::Poster, &rec.poster_id);
        g.add_edge(n, p, EdgeLabel::NewsPoster, 1.0)?;
    }
    Ok(g)
}

/// Per-news sorted trigger timestamps, used to rank environmental news.
#[derive(Debug, Clone, Default)]
pub struct TriggerIndex {
    times: HashMap<String, Vec<i64>>,
}

impl TriggerIndex {
    pub fn new(logs: &[BehaviorLog]) -> Self {
        let mut times: HashMap<String, Vec<i64>> = HashMap::new();
        for l in logs {
            times.entry(l.news_id.clone()).or_default().push(l.timestamp);
        }
        for v in times.values_mut() {
            v.sort_unstable();
        }
        TriggerIndex { times }
    }

    /// Latest trigger of `news_id` strictly before `as_of`.
    pub fn latest_before(&self, news_id: &str, as_of: i64) -> Option<i64> {
        let v = self.times.get(news_id)?;
        let k = v.partition_point(|&t| t < as_of);
        (k > 0).then(|| v[k - 1])
    }
}

/// News nodes sharing at least one user neighbor with `news`, excluding it.
/// Sorted by node index.
pub fn co_triggered(g: &BehaviorGraph, news: usize) -> Vec<usize> {
    let mut seen = HashSet::new();
    for u in g.neighbors(news).iter().filter(|n| g.node(n.node).kind == NodeKind::User) {
        for m in g.neighbors(u.node) {
            if m.node != news && g.node(m.node).kind == NodeKind::News {
                seen.insert(m.node);
            }
        }
    }
    let mut out: Vec<usize> = seen.into_iter().collect();
    out.sort_unstable();
    out
}

/// Up to `n` co-triggered news most recently triggered strictly before
/// `as_of`; equal timestamps are ordered by news id.
pub fn environmental_news(
    g: &BehaviorGraph,
    news: usize,
    n: usize,
    as_of: i64,
    triggers: &TriggerIndex,
) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    rank_environment(g, &co_triggered(g, news), n, as_of, triggers)
}

/// Ranks a precomputed co-triggered candidate list; see [`environmental_news`].
pub fn rank_environment(
    g: &BehaviorGraph,
    candidates: &[usize],
    n: usize,
    as_of: i64,
    triggers: &TriggerIndex,
) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut ranked: Vec<(i64, &str, usize)> = candidates
        .iter()
        .filter_map(|&c| {
            let id = g.node(c).id.as_str();
            triggers.latest_before(id, as_of).map(|t| (t, id, c))
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    ranked.truncate(n);
    // collect from a slice: an in-place collect would keep the large buffer
    ranked.iter().map(|&(_, _, c)| c).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{generate_synthetic, SynthConfig, TopicRecord, UserProfile, NULL_TAG};

    fn news(id: &str, topic: &str, cat1: &str, tags: &[&str]) -> NewsRecord {
        let mut tag_ids: Vec<String> = tags.iter().map(|s| s.to_string()).collect();
        tag_ids.resize(9, NULL_TAG.into());
        NewsRecord {
            news_id: id.into(),
            topic_id: topic.into(),
            content: vec!["w".into()],
            cat1_id: cat1.into(),
            cat2_id: "c2".into(),
            poster_id: "p".into(),
            tag_ids,
        }
    }

    fn log(user: &str, ts: i64, news: &str, topic: &str, b: Behavior) -> BehaviorLog {
        BehaviorLog {
            user_id: user.into(),
            timestamp: ts,
            news_id: news.into(),
            topic_id: topic.into(),
            behavior: b,
        }
    }

    #[test]
    fn behavior_weights_are_linear() {
        assert_eq!(user_news_weight(Behavior::Unclick), 1.0);
        assert_eq!(user_news_weight(Behavior::Click), 2.0);
        assert_eq!(user_news_weight(Behavior::Share), 6.0);
        for w in Behavior::ALL.windows(2) {
            assert!(user_news_weight(w[0]) < user_news_weight(w[1]));
        }
    }

    #[test]
    fn news_topic_weight_and_user_proportions() {
        let mut ds = Dataset::default();
        for i in 0..10 {
            let cat = if i < 4 { "sports" } else { "tech" };
            ds.news.push(news(&format!("n{i}"), "t", cat, &["g1"]));
            ds.logs.push(log("u", 10 + i, &format!("n{i}"), "t", Behavior::Click));
        }
        let g = build_graph(&ds).unwrap();
        let n0 = g.find(NodeKind::News, "n0").unwrap();
        let t = g.find(NodeKind::Topic, "t").unwrap();
        assert_eq!(g.weight(n0, t), Some(0.5));
        let u = g.find(NodeKind::User, "u").unwrap();
        let sports = g.find(NodeKind::Cat1, "sports").unwrap();
        assert!((g.weight(u, sports).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn news_tag_split_is_uniform_and_null_tag_has_no_node() {
        let mut ds = Dataset::default();
        let tags: Vec<String> = (0..9).map(|i| format!("g{i}")).collect();
        let tag_refs: Vec<&str> = tags.iter().map(String::as_str).collect();
        ds.news.push(news("n0", "t", "c", &tag_refs));
        ds.news.push(news("n1", "t", "c", &["g0", "g1", "g2"]));
        let g = build_graph(&ds).unwrap();
        let n0 = g.find(NodeKind::News, "n0").unwrap();
        for tg in g.neighbors(n0).iter().filter(|n| n.label == EdgeLabel::NewsTag) {
            assert!((tg.weight - 1.0 / 9.0).abs() < 1e-15);
        }
        assert!(g.find(NodeKind::Tag, NULL_TAG).is_none());
        let n1 = g.find(NodeKind::News, "n1").unwrap();
        assert_eq!(
            g.neighbors(n1).iter().filter(|n| n.label == EdgeLabel::NewsTag).count(),
            3
        );
    }

    #[test]
    fn strongest_behavior_wins() {
        let mut ds = Dataset::default();
        ds.news.push(news("n", "t", "c", &["g"]));
        ds.logs.push(log("u", 1, "n", "t", Behavior::Like));
        ds.logs.push(log("u", 2, "n", "t", Behavior::Click));
        let g = build_graph(&ds).unwrap();
        let u = g.find(NodeKind::User, "u").unwrap();
        let n = g.find(NodeKind::News, "n").unwrap();
        assert_eq!(g.weight(u, n), Some(3.0));
    }

    #[test]
    fn dangling_news_is_rejected() {
        let mut ds = Dataset::default();
        ds.logs.push(log("u", 1, "missing", "t", Behavior::Click));
        let err = build_graph(&ds).unwrap_err();
        assert!(err.to_string().contains("missing"));
    }

    #[test]
    fn node_count_on_small_synthetic_set() {
        let cfg = SynthConfig {
            n_users: 10,
            n_news: 20,
            n_topics: 3,
            n_tags: 5,
            n_cat1: 2,
            n_cat2: 2,
            n_posters: 4,
            logs_per_user: 30,
            affinity_sharpness: 3.0,
            seed: 1,
        };
        let g = build_graph(&generate_synthetic(&cfg).unwrap()).unwrap();
        assert_eq!(g.node_count(), 46);
        let counts: Vec<usize> = NodeKind::ALL
            .iter()
            .map(|k| g.nodes_of_kind(*k).count())
            .collect();
        assert_eq!(counts, vec![10, 20, 3, 5, 2, 2, 4]);
    }

    #[test]
    fn user_class_weights_sum_to_one_and_symmetric() {
        let cfg = SynthConfig {
            n_users: 30,
            n_news: 40,
            logs_per_user: 15,
            ..SynthConfig::default()
        };
        let g = build_graph(&generate_synthetic(&cfg).unwrap()).unwrap();
        for u in g.nodes_of_kind(NodeKind::User) {
            let mut sums: HashMap<EdgeLabel, f64> = HashMap::new();
            for nb in g.neighbors(u.index) {
                if nb.label != EdgeLabel::UserNews {
                    *sums.entry(nb.label).or_default() += nb.weight;
                }
            }
            assert_eq!(sums.len(), 5);
            for s in sums.values() {
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
        for e in g.edges() {
            assert_eq!(g.weight(e.a, e.b), Some(e.weight));
            assert_eq!(g.weight(e.b, e.a), Some(e.weight));
        }
    }

    #[test]
    fn build_is_deterministic_and_round_trips() {
        let ds = generate_synthetic(&SynthConfig {
            n_users: 20,
            n_news: 30,
            ..SynthConfig::default()
        })
        .unwrap();
        let a = build_graph(&ds).unwrap();
        let b = build_graph(&ds).unwrap();
        assert_eq!(a, b);
        let c = BehaviorGraph::import(&a.export_nodes(), &a.export_edges()).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn profiles_and_topics_contribute_nodes() {
        let ds = Dataset {
            profiles: vec![UserProfile {
                user_id: "u".into(),
                cat1_ids: vec!["lonely".into()],
                cat2_ids: vec![],
                tag_ids: vec![],
            }],
            topics: vec![TopicRecord {
                topic_id: "t9".into(),
                title: vec![],
                cat1_id: "c".into(),
                cat2_id: "d".into(),
                tag_ids: vec!["gx".into()],
            }],
            ..Dataset::default()
        };
        let g = build_graph(&ds).unwrap();
        assert!(g.find(NodeKind::Cat1, "lonely").is_some());
        assert!(g.find(NodeKind::Tag, "gx").is_some());
        assert!(g.find(NodeKind::Topic, "t9").is_some());
    }

    fn hand_graph(edges: &[(usize, usize)], kinds: &[NodeKind]) -> BehaviorGraph {
        let mut g = BehaviorGraph::new();
        for (i, k) in kinds.iter().enumerate() {
            g.add_node(*k, &format!("x{i}"));
        }
        for &(a, b) in edges {
            let label = EdgeLabel::ALL
                .iter()
                .copied()
                .find(|l| {
                    let (x, y) = l.kinds();
                    (x, y) == (kinds[a], kinds[b]) || (y, x) == (kinds[a], kinds[b])
                })
                .unwrap();
            g.add_edge(a, b, label, 1.0).unwrap();
        }
        g
    }

    #[test]
    fn ego_star() {
        use NodeKind::*;
        let g = hand_graph(
            &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (6, 1)],
            &[User, News, News, News, News, News, User],
        );
        let ego = g.ego_subgraph(0).unwrap();
        assert_eq!(ego.node_count(), 6);
        assert_eq!(ego.edge_count(), 5);
    }

    #[test]
    fn ego_with_shared_topic() {
        use NodeKind::*;
        let mut edges: Vec<(usize, usize)> = (1..=5).map(|n| (0, n)).collect();
        edges.push((0, 6));
        edges.extend((1..=5).map(|n| (n, 6)));
        let g = hand_graph(&edges, &[User, News, News, News, News, News, Topic]);
        let ego = g.ego_subgraph(0).unwrap();
        assert_eq!(ego.node_count(), 7);
        assert_eq!(ego.edge_count(), 11);
    }

    #[test]
    fn ego_single_edge_and_isolated() {
        use NodeKind::*;
        let g = hand_graph(&[(0, 1)], &[User, News, User]);
        let ego = g.ego_subgraph(0).unwrap();
        assert_eq!((ego.node_count(), ego.edge_count()), (2, 1));
        let err = g.ego_subgraph(2).unwrap_err();
        assert!(err.to_string().contains("degenerate ego graph"));
    }

    #[test]
    fn environmental_news_ranking() {
        let mut ds = Dataset::default();
        for id in ["a", "b", "c", "d", "z"] {
            ds.news.push(news(id, "t", "c", &["g"]));
        }
        ds.logs = vec![
            log("u1", 100, "a", "t", Behavior::Click),
            log("u1", 50, "b", "t", Behavior::Click),
            log("u1", 50, "c", "t", Behavior::Click),
            log("u2", 10, "a", "t", Behavior::Click),
            log("u2", 20, "d", "t", Behavior::Click),
            log("u3", 5, "z", "t", Behavior::Click),
        ];
        let g = build_graph(&ds).unwrap();
        let tr = TriggerIndex::new(&ds.logs);
        let a = g.find(NodeKind::News, "a").unwrap();
        let ids = |v: Vec<usize>| -> Vec<String> {
            v.into_iter().map(|i| g.node(i).id.clone()).collect()
        };
        assert!(environmental_news(&g, a, 0, 1000, &tr).is_empty());
        // b and c tie at 50: lexicographic order.
        assert_eq!(ids(environmental_news(&g, a, 5, 1000, &tr)), ["b", "c", "d"]);
        assert_eq!(ids(environmental_news(&g, a, 2, 1000, &tr)), ["b", "c"]);
        // Strictly before as_of.
        assert_eq!(ids(environmental_news(&g, a, 5, 50, &tr)), ["d"]);
        let z = g.find(NodeKind::News, "z").unwrap();
        assert!(environmental_news(&g, z, 5, 1000, &tr).is_empty());
        let d = g.find(NodeKind::News, "d").unwrap();
        assert_eq!(ids(environmental_news(&g, d, 5, 1000, &tr)), ["a"]);
    }
}
