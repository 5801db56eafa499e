//! Coritivity `h(G) = max_S { ω(G − S) − |S| }` and its cores, computed by
//! exhaustive enumeration on small graphs or approximated with a Max-Min Ant
//! System, plus the per-user concentration feature derived from them.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::BehaviorGraph;

/// Largest vertex count accepted by [`exact_coritivity`].
pub const EXACT_LIMIT: usize = 20;

pub const CONCENTRATION_FILE: &str = "concentration.tsv";

/// Unweighted adjacency view of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adj: Vec<Vec<usize>>,
}

impl Topology {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        Topology { adj }
    }

    pub fn from_graph(g: &BehaviorGraph) -> Self {
        let edges: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.a, e.b)).collect();
        Self::from_edges(g.node_count(), &edges)
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn is_connected(&self) -> bool {
        self.is_empty() || count_components(self, &vec![false; self.len()]) == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoritivityResult {
    pub h: i64,
    /// Sorted vertex indexes of the core.
    pub core: Vec<usize>,
    pub is_exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmasParams {
    pub n_ants: usize,
    pub max_iters: usize,
    pub rho: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

impl Default for MmasParams {
    fn default() -> Self {
        MmasParams {
            n_ants: 20,
            max_iters: 50,
            rho: 0.1,
            tau_min: 0.1,
            tau_max: 5.0,
            alpha: 1.0,
            beta: 1.0,
            seed: 0,
        }
    }
}

impl MmasParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_ants == 0 || self.max_iters == 0 {
            return Err(Error::invalid("MMAS needs at least one ant and one iteration"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::invalid("MMAS rho must lie in (0, 1)"));
        }
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max) {
            return Err(Error::invalid("MMAS requires 0 < tau_min < tau_max"));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::invalid("MMAS alpha and beta must be non-negative"));
        }
        Ok(())
    }
}

fn count_components(t: &Topology, removed: &[bool]) -> usize {
    let mut seen = removed.to_vec();
    let mut stack = Vec::new();
    let mut comps = 0;
    for start in 0..t.len() {
        if seen[start] {
            continue;
        }
        comps += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &w in &t.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    comps
}

/// ω(G − S): connected components of the graph induced on `V \ S`.
pub fn components_after_removal(t: &Topology, removed: &[usize]) -> Result<usize> {
    let mut mask = vec![false; t.len()];
    for &v in removed {
        if v >= t.len() {
            return Err(Error::invalid(format!("vertex {v} out of range")));
        }
        mask[v] = true;
    }
    if mask.iter().all(|&m| m) {
        return Err(Error::invalid("cannot remove every vertex"));
    }
    Ok(count_components(t, &mask))
}

/// `ω(G − S) − |S|` for a core candidate.
pub fn core_value(t: &Topology, core: &[usize]) -> Result<i64> {
    Ok(components_after_removal(t, core)? as i64 - core.len() as i64)
}

fn mask_components(adj: &[u32], alive: u32) -> u32 {
    let mut rest = alive;
    let mut comps = 0;
    while rest != 0 {
        let mut comp = rest & rest.wrapping_neg();
        let mut frontier = comp;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let fresh = adj[v] & rest & !comp;
            comp |= fresh;
            frontier |= fresh;
        }
        rest &= !comp;
        comps += 1;
    }
    comps
}

/// Lexicographic comparison of the sorted index lists encoded by two masks.
fn lex_cmp(a: u32, b: u32) -> Ordering {
    let diff = a ^ b;
    if diff == 0 {
        return Ordering::Equal;
    }
    let m = diff.trailing_zeros();
    let above = |x: u32| if m >= 31 { 0 } else { x >> (m + 1) };
    if a & (1 << m) != 0 {
        // b lacks m: b is smaller only if it ends here.
        if above(b) != 0 {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    } else if above(a) != 0 {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Exhaustive coritivity over all non-empty proper vertex subsets. Among
/// maximizers the lexicographically smallest index set is returned.
pub fn exact_coritivity(t: &Topology) -> Result<CoritivityResult> {
    let n = t.len();
    if n > EXACT_LIMIT {
        return Err(Error::TooLargeForExact(n));
    }
    if n < 2 {
        return Err(Error::invalid("coritivity needs at least two vertices"));
    }
    if !t.is_connected() {
        return Err(Error::Disconnected);
    }
    let adj: Vec<u32> = t
        .adj
        .iter()
        .map(|ns| ns.iter().fold(0u32, |m, &w| m | (1 << w)))
        .collect();
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut best_h = i64::MIN;
    let mut best_mask = 0u32;
    for mask in 1..full {
        let h = mask_components(&adj, full & !mask) as i64 - mask.count_ones() as i64;
        if h > best_h || (h == best_h && lex_cmp(mask, best_mask) == Ordering::Less) {
            best_h = h;
            best_mask = mask;
        }
    }
    Ok(CoritivityResult {
        h: best_h,
        core: (0..n).filter(|v| best_mask & (1 << v) != 0).collect(),
        is_exact: true,
    })
}

fn ant_rng(seed: u64, iter: usize, ant: usize, n_ants: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iter * n_ants + ant) as u64);
    rng
}

/// Max-Min Ant System approximation of coritivity.
///
/// Pheromone lives on vertices. Each ant picks a subset size uniformly in
/// `[1, ⌈|V|/2⌉]` and draws that many distinct vertices with probability
/// proportional to `τ^alpha · deg^beta`. After every iteration the best
/// subset found so far reinforces its vertices by 1 and all trails evaporate,
/// clamped to `[tau_min, tau_max]`.
pub fn mmas_coritivity(t: &Topology, p: &MmasParams) -> Result<CoritivityResult> {
    p.validate()?;
    let n = t.len();
    if n < 2 {
        return Err(Error::invalid("coritivity needs at least two vertices"));
    }
    if !t.is_connected() {
        return Err(Error::Disconnected);
    }
    let heuristic: Vec<f64> = (0..n).map(|v| (t.degree(v) as f64).powf(p.beta)).collect();
    let mut tau = vec![p.tau_max; n];
    let max_k = n.div_ceil(2);
    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut removed = vec![false; n];
    let mut weights = vec![0.0; n];

    for iter in 0..p.max_iters {
        for ant in 0..p.n_ants {
            let mut rng = ant_rng(p.seed, iter, ant, p.n_ants);
            let k = rng.gen_range(1..=max_k);
            for v in 0..n {
                weights[v] = tau[v].powf(p.alpha) * heuristic[v];
                removed[v] = false;
            }
            let mut subset = Vec::with_capacity(k);
            for _ in 0..k {
                let total: f64 = weights.iter().sum();
                let pick = if total > 0.0 {
                    let mut x = rng.gen::<f64>() * total;
                    let mut chosen = None;
                    for (v, w) in weights.iter().enumerate() {
                        if *w > 0.0 {
                            chosen = Some(v);
                            if x < *w {
                                break;
                            }
                            x -= w;
                        }
                    }
                    chosen.expect("positive total weight")
                } else {
                    let free: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
                    free[rng.gen_range(0..free.len())]
                };
                removed[pick] = true;
                weights[pick] = 0.0;
                subset.push(pick);
            }
            let h = count_components(t, &removed) as i64 - k as i64;
            subset.sort_unstable();
            let better = match &best {
                None => true,
                Some((bh, bs)) => h > *bh || (h == *bh && subset < *bs),
            };
            if better {
                best = Some((h, subset));
            }
        }
        let (_, core) = best.as_ref().expect("at least one ant ran");
        let mut deposit = vec![false; n];
        for &v in core {
            deposit[v] = true;
        }
        for v in 0..n {
            let add = if deposit[v] { 1.0 } else { 0.0 };
            tau[v] = ((1.0 - p.rho) * tau[v] + add).clamp(p.tau_min, p.tau_max);
        }
    }
    let (h, core) = best.expect("at least one ant ran");
    Ok(CoritivityResult {
        h,
        core,
        is_exact: false,
    })
}

/// Exact when the graph is small enough, MMAS otherwise.
pub fn coritivity(t: &Topology, p: &MmasParams) -> Result<CoritivityResult> {
    if t.len() <= EXACT_LIMIT {
        exact_coritivity(t)
    } else {
        mmas_coritivity(t, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationFeature {
    pub core_size: usize,
    pub coritivity: i64,
    /// `(|S| / |V_ego|, h / |V_ego|)`
    pub normalized: (f64, f64),
}

impl ConcentrationFeature {
    pub fn zero() -> Self {
        ConcentrationFeature {
            core_size: 0,
            coritivity: 0,
            normalized: (0.0, 0.0),
        }
    }
}

/// Core size and coritivity of the user's ego graph.
pub fn concentration_feature(
    g: &BehaviorGraph,
    user: usize,
    p: &MmasParams,
) -> Result<ConcentrationFeature> {
    let ego = g.ego_subgraph(user)?;
    let topo = Topology::from_graph(&ego);
    let r = coritivity(&topo, p)?;
    let n = topo.len() as f64;
    Ok(ConcentrationFeature {
        core_size: r.core.len(),
        coritivity: r.h,
        normalized: (r.core.len() as f64 / n, r.h as f64 / n),
    })
}

/// Concentration features for every user node with at least one edge, in
/// node order.
pub fn all_concentration_features(
    g: &BehaviorGraph,
    p: &MmasParams,
) -> Result<Vec<(String, ConcentrationFeature)>> {
    let mut out = Vec::new();
    for u in g.nodes_of_kind(crate::graph::NodeKind::User) {
        if g.degree(u.index) == 0 {
            continue;
        }
        out.push((u.id.clone(), concentration_feature(g, u.index, p)?));
    }
    Ok(out)
}

pub fn write_concentration(features: &[(String, ConcentrationFeature)]) -> String {
    let mut s = String::new();
    for (user, f) in features {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            user, f.core_size, f.coritivity, f.normalized.0, f.normalized.1
        );
    }
    s
}

pub fn parse_concentration(text: &str) -> Result<Vec<(String, ConcentrationFeature)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
        let bad = || Error::Parse {
            path: CONCENTRATION_FILE.into(),
            line: i + 1,
            msg: format!("malformed concentration line '{line}'"),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad());
        }
        out.push((
            f[0].to_string(),
            ConcentrationFeature {
                core_size: f[1].parse().map_err(|_| bad())?,
                coritivity: f[2].parse().map_err(|_| bad())?,
                normalized: (
                    f[3].parse().map_err(|_| bad())?,
                    f[4].parse().map_err(|_| bad())?,
                ),
            },
        ));
    }
    Ok(out)
}

pub fn read_concentration(path: &Path) -> Result<Vec<(String, ConcentrationFeature)>> {
    parse_concentration(&std::fs::read_to_string(path)?)
}

/// Seeded `G(n, prob)` graph, resampled until connected.
pub fn random_connected(n: usize, prob: f64, rng: &mut impl Rng) -> Topology {
    loop {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(prob) {
                    edges.push((a, b));
                }
            }
        }
        let t = Topology::from_edges(n, &edges);
        if t.is_connected() {
            return t;
        }
    }
}
