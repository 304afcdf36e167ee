//! Choosing a chain of qubits on a device graph from calibration data.
//!
//! Metrics are min–max normalized across the graph (error metrics inverted),
//! shaped by `ln(ε + x)` or the identity, weighted, and summed along a
//! simple path. The best path of `k` nodes is found by exhaustive DFS.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};

/// Guard inside the logarithmic shape.
pub const LOG_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: u32,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

/// Undirected qubit connectivity with per-node and per-edge calibration metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph")]
pub struct DeviceGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    #[serde(skip)]
    index: HashMap<u32, usize>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
    #[serde(skip)]
    edge_index: HashMap<(usize, usize), usize>,
}

#[derive(Deserialize)]
struct RawGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl TryFrom<RawGraph> for DeviceGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        DeviceGraph::new(raw.nodes, raw.edges)
    }
}

impl DeviceGraph {
    pub fn new(mut nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return Err(Error::Format(format!("duplicate node id {}", n.id)));
            }
            check_metrics(&n.metrics, &format!("node {}", n.id))?;
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut edge_index = HashMap::with_capacity(edges.len());
        for (e_idx, e) in edges.iter().enumerate() {
            let a = *index.get(&e.a).ok_or(Error::UnknownNode(e.a))?;
            let b = *index.get(&e.b).ok_or(Error::UnknownNode(e.b))?;
            if a == b {
                return Err(Error::Format(format!("self-loop on node {}", e.a)));
            }
            if edge_index.insert((a.min(b), a.max(b)), e_idx).is_some() {
                return Err(Error::Format(format!("duplicate edge {}–{}", e.a, e.b)));
            }
            check_metrics(&e.metrics, &format!("edge {}–{}", e.a, e.b))?;
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        // sorted by index, which is sorted by id
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self { nodes, edges, index, adjacency, edge_index })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: u32) -> Option<&Node> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn edge(&self, a: u32, b: u32) -> Option<&Edge> {
        let (i, j) = (*self.index.get(&a)?, *self.index.get(&b)?);
        self.edge_index.get(&(i.min(j), i.max(j))).map(|&e| &self.edges[e])
    }

    /// Neighbour ids of `id`, ascending.
    pub fn neighbors(&self, id: u32) -> Vec<u32> {
        self.index.get(&id).map_or_else(Vec::new, |&i| self.adjacency[i].iter().map(|&j| self.nodes[j].id).collect())
    }

    /// Checks that `path` is simple and walks existing edges.
    pub fn validate_path(&self, path: &[u32]) -> Result<()> {
        let mut seen = std::collections::HashSet::with_capacity(path.len());
        for &id in path {
            if !self.index.contains_key(&id) {
                return Err(Error::UnknownNode(id));
            }
            if !seen.insert(id) {
                return Err(Error::RepeatedNode(id));
            }
        }
        for w in path.windows(2) {
            if self.edge(w[0], w[1]).is_none() {
                return Err(Error::NotAdjacent(w[0], w[1]));
            }
        }
        Ok(())
    }
}

fn check_metrics(metrics: &BTreeMap<String, f64>, owner: &str) -> Result<()> {
    for (name, v) in metrics {
        if !v.is_finite() || *v < 0.0 {
            return Err(Error::Format(format!("{owner}: metric {name} = {v} must be finite and nonnegative")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Fidelity,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub direction: Direction,
    pub shape: Shape,
    pub weight: f64,
}

impl MetricConfig {
    pub fn new(direction: Direction, shape: Shape, weight: f64) -> Self {
        Self { direction, shape, weight }
    }

    /// `weight · g(x)` for a normalized value `x`.
    pub fn term(&self, x: f64) -> f64 {
        let g = match self.shape {
            Shape::Log => (LOG_EPSILON + x).ln(),
            Shape::Linear => x,
        };
        self.weight * g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathScoreConfig {
    pub metrics: BTreeMap<String, MetricConfig>,
}

impl Default for PathScoreConfig {
    fn default() -> Self {
        use Direction::*;
        use Shape::*;
        let metrics = [
            ("T1", MetricConfig::new(Fidelity, Log, 1.0)),
            ("T2", MetricConfig::new(Fidelity, Log, 1.0)),
            ("xeb_error", MetricConfig::new(Error, Log, 1.0)),
            ("p00", MetricConfig::new(Error, Linear, 0.25)),
            ("p11", MetricConfig::new(Error, Linear, 0.25)),
            ("rb_error", MetricConfig::new(Error, Linear, 1.0)),
        ];
        Self { metrics: metrics.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
    }
}

impl PathScoreConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }

    /// Every weight scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let metrics = self.metrics.iter().map(|(k, m)| (k.clone(), MetricConfig { weight: m.weight * factor, ..*m })).collect();
        Self { metrics }
    }

    fn get(&self, name: &str) -> Result<&MetricConfig> {
        self.metrics.get(name).ok_or_else(|| Error::InvalidConfig(format!("metric {name:?} has no score configuration")))
    }

    fn validate(&self) -> Result<()> {
        for (name, m) in &self.metrics {
            if !(m.weight >= 0.0 && m.weight.is_finite()) {
                return Err(Error::InvalidConfig(format!("metric {name:?} weight {} must be finite and nonnegative", m.weight)));
            }
        }
        Ok(())
    }
}

fn min_max_normalize(mut maps: Vec<&mut BTreeMap<String, f64>>, cfg: &PathScoreConfig, owner: &str) -> Result<()> {
    let mut ranges: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for m in &maps {
        for (name, &v) in m.iter() {
            cfg.get(name)?;
            let r = ranges.entry(name.clone()).or_insert((v, v));
            *r = (r.0.min(v), r.1.max(v));
        }
    }
    for (name, (lo, hi)) in &ranges {
        if lo == hi {
            log::warn!("{owner} metric {name:?} is constant across the graph; using 0.5");
        }
    }
    for m in &mut maps {
        for (name, v) in m.iter_mut() {
            let (lo, hi) = ranges[name];
            let x = if hi > lo { (*v - lo) / (hi - lo) } else { 0.5 };
            *v = match cfg.get(name)?.direction {
                Direction::Fidelity => x,
                Direction::Error => 1.0 - x,
            };
        }
    }
    Ok(())
}

/// Min–max normalizes every metric across nodes (or edges) and inverts error
/// metrics. A metric with a single distinct value becomes 0.5.
pub fn normalize_metrics(graph: &DeviceGraph, cfg: &PathScoreConfig) -> Result<DeviceGraph> {
    cfg.validate()?;
    let mut out = graph.clone();
    min_max_normalize(out.nodes.iter_mut().map(|n| &mut n.metrics).collect(), cfg, "node")?;
    min_max_normalize(out.edges.iter_mut().map(|e| &mut e.metrics).collect(), cfg, "edge")?;
    Ok(out)
}

/// Per-node and per-edge score terms of an already normalized graph.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    node_terms: Vec<f64>,
    edge_terms: HashMap<(usize, usize), f64>,
}

impl ScoreTable {
    pub fn new(normalized: &DeviceGraph, cfg: &PathScoreConfig) -> Result<Self> {
        cfg.validate()?;
        let sum_terms = |metrics: &BTreeMap<String, f64>| -> Result<f64> { metrics.iter().try_fold(0.0, |acc, (name, &x)| Ok(acc + cfg.get(name)?.term(x))) };
        let node_terms = normalized.nodes.iter().map(|n| sum_terms(&n.metrics)).collect::<Result<Vec<_>>>()?;
        let edge_terms =
            normalized.edge_index.iter().map(|(&key, &e)| Ok((key, sum_terms(&normalized.edges[e].metrics)?))).collect::<Result<HashMap<_, _>>>()?;
        Ok(Self { node_terms, edge_terms })
    }

    fn edge_term(&self, a: usize, b: usize) -> f64 {
        self.edge_terms[&(a.min(b), a.max(b))]
    }

    /// Sums node and edge terms along the path read with the smaller endpoint
    /// first, so a path and its reverse score identically.
    fn score_indices(&self, path: &[usize], graph: &DeviceGraph) -> f64 {
        let forward = graph.nodes[path[0]].id <= graph.nodes[path[path.len() - 1]].id;
        let mut seq = path.to_vec();
        if !forward {
            seq.reverse();
        }
        let mut total = 0.0;
        for (pos, &v) in seq.iter().enumerate() {
            if pos > 0 {
                total += self.edge_term(seq[pos - 1], v);
            }
            total += self.node_terms[v];
        }
        total
    }
}

/// Score of `path` on a graph whose metrics are already normalized.
pub fn score_path(path: &[u32], normalized: &DeviceGraph, cfg: &PathScoreConfig) -> Result<f64> {
    if path.is_empty() {
        return Ok(0.0);
    }
    normalized.validate_path(path)?;
    let table = ScoreTable::new(normalized, cfg)?;
    let idx: Vec<usize> = path.iter().map(|id| normalized.index[id]).collect();
    Ok(table.score_indices(&idx, normalized))
}

/// Contribution of one metric to a path score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricContribution {
    pub metric: String,
    pub on: MetricOwner,
    pub contribution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricOwner {
    Node,
    Edge,
}

/// Per-metric totals over the nodes and edges of `path`.
pub fn score_breakdown(path: &[u32], normalized: &DeviceGraph, cfg: &PathScoreConfig) -> Result<Vec<MetricContribution>> {
    normalized.validate_path(path)?;
    let mut totals: BTreeMap<(MetricOwner, String), f64> = BTreeMap::new();
    for id in path {
        for (name, &x) in &normalized.node(*id).expect("validated").metrics {
            *totals.entry((MetricOwner::Node, name.clone())).or_default() += cfg.get(name)?.term(x);
        }
    }
    for w in path.windows(2) {
        for (name, &x) in &normalized.edge(w[0], w[1]).expect("validated").metrics {
            *totals.entry((MetricOwner::Edge, name.clone())).or_default() += cfg.get(name)?.term(x);
        }
    }
    Ok(totals.into_iter().map(|((on, metric), contribution)| MetricContribution { metric, on, contribution }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPath {
    pub path: Vec<u32>,
    pub score: f64,
}

/// `a` beats `b`: higher score, or equal score and lexicographically smaller ids.
fn better(a: &BestPath, b: &BestPath) -> bool {
    a.score > b.score || (a.score == b.score && a.path < b.path)
}

struct Search<'a> {
    graph: &'a DeviceGraph,
    table: &'a ScoreTable,
    k: usize,
    stack: Vec<usize>,
    on_path: Vec<bool>,
    best: Option<BestPath>,
}

impl Search<'_> {
    fn extend(&mut self, partial: f64) {
        let last = *self.stack.last().expect("nonempty");
        if self.stack.len() == self.k {
            // canonical orientation only: smaller endpoint id first
            if self.graph.nodes[self.stack[0]].id < self.graph.nodes[last].id {
                let cand = BestPath { path: self.stack.iter().map(|&i| self.graph.nodes[i].id).collect(), score: partial };
                if self.best.as_ref().is_none_or(|b| better(&cand, b)) {
                    self.best = Some(cand);
                }
            }
            return;
        }
        for &next in &self.graph.adjacency[last] {
            if self.on_path[next] {
                continue;
            }
            let score = partial + self.table.edge_term(last, next) + self.table.node_terms[next];
            self.on_path[next] = true;
            self.stack.push(next);
            self.extend(score);
            self.stack.pop();
            self.on_path[next] = false;
        }
    }
}

/// Highest-scoring simple path of `k` nodes on a normalized graph.
///
/// Start nodes are searched independently (in parallel under
/// [`Execution::Parallel`]) and reduced in id order, so the result does not
/// depend on scheduling.
pub fn best_path(normalized: &DeviceGraph, k: usize, cfg: &PathScoreConfig, exec: Execution) -> Result<BestPath> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("path length k = {k} must be at least 2")));
    }
    let table = ScoreTable::new(normalized, cfg)?;
    let n = normalized.nodes.len();
    if k > n {
        return Err(Error::NoPath(k));
    }
    let per_start = map_indices(n, exec, |start| {
        let mut search = Search { graph: normalized, table: &table, k, stack: vec![start], on_path: vec![false; n], best: None };
        search.on_path[start] = true;
        search.extend(table.node_terms[start]);
        search.best
    });
    per_start.into_iter().flatten().reduce(|a, b| if better(&b, &a) { b } else { a }).ok_or(Error::NoPath(k))
}

/// Normalizes `graph` and returns its best `k`-node path with a per-metric breakdown.
pub fn select_qubits(graph: &DeviceGraph, k: usize, cfg: &PathScoreConfig, exec: Execution) -> Result<(BestPath, Vec<MetricContribution>)> {
    let normalized = normalize_metrics(graph, cfg)?;
    let best = best_path(&normalized, k, cfg, exec)?;
    let breakdown = score_breakdown(&best.path, &normalized, cfg)?;
    Ok((best, breakdown))
}

/// Rectangular grid with ids `r · cols + c`, minus the listed ids.
pub fn grid_graph(rows: u32, cols: u32, removed: &[u32]) -> Result<DeviceGraph> {
    let keep = |id: u32| !removed.contains(&id);
    let nodes = (0..rows * cols).filter(|&id| keep(id)).map(|id| Node { id, metrics: BTreeMap::new() }).collect();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let id = r * cols + c;
            if c + 1 < cols && keep(id) && keep(id + 1) {
                edges.push(Edge { a: id, b: id + 1, metrics: BTreeMap::new() });
            }
            if r + 1 < rows && keep(id) && keep(id + cols) {
                edges.push(Edge { a: id, b: id + cols, metrics: BTreeMap::new() });
            }
        }
    }
    DeviceGraph::new(nodes, edges)
}
