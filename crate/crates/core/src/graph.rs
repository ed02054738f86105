//! Weighted undirected graphs, binary label signals and the cut a signal
//! induces on a graph.
//!
//! Edge *lengths* are dissimilarities (positive, finite). An edge may also
//! carry an optional nonnegative *similarity* weight, which is what the
//! spectral code builds its Laplacian from.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Per-edge payload.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeData {
    pub length: f64,
    pub similarity: Option<f64>,
}

/// An undirected edge with `u < v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub length: f64,
    pub similarity: Option<f64>,
}

impl Edge {
    pub fn new(u: NodeId, v: NodeId, length: f64) -> Self {
        Self {
            u: u.min(v),
            v: u.max(v),
            length,
            similarity: None,
        }
    }

    pub fn with_similarity(mut self, similarity: f64) -> Self {
        self.similarity = Some(similarity);
        self
    }
}

/// Distance metric for path queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Sum of edge lengths.
    Length,
    /// Number of edges.
    Hop,
}

impl Metric {
    #[inline]
    fn cost(self, data: &EdgeData) -> f64 {
        match self {
            Metric::Length => data.length,
            Metric::Hop => 1.0,
        }
    }
}

/// Undirected graph on nodes `0..n` with positive edge lengths.
///
/// Neighbor maps are ordered so every traversal is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    adj: Vec<BTreeMap<NodeId, EdgeData>>,
    edge_count: usize,
}

impl WeightedGraph {
    /// Edgeless graph on `n` nodes.
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![BTreeMap::new(); n],
            edge_count: 0,
        }
    }

    pub fn from_edges<I: IntoIterator<Item = Edge>>(n: usize, edges: I) -> Result<Self> {
        let mut g = Self::new(n);
        for e in edges {
            g.add_edge(e)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, e: Edge) -> Result<()> {
        let n = self.node_count();
        for node in [e.u, e.v] {
            if node >= n {
                return Err(Error::NodeOutOfRange { node, n });
            }
        }
        if e.u == e.v {
            return Err(Error::SelfLoop(e.u));
        }
        if !(e.length.is_finite() && e.length > 0.0) {
            return Err(Error::InvalidLength {
                u: e.u,
                v: e.v,
                length: e.length,
            });
        }
        if let Some(s) = e.similarity {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::InvalidSimilarity {
                    u: e.u,
                    v: e.v,
                    similarity: s,
                });
            }
        }
        if self.adj[e.u].contains_key(&e.v) {
            return Err(Error::DuplicateEdge(e.u.min(e.v), e.u.max(e.v)));
        }
        let data = EdgeData {
            length: e.length,
            similarity: e.similarity,
        };
        self.adj[e.u].insert(e.v, data);
        self.adj[e.v].insert(e.u, data);
        self.edge_count += 1;
        Ok(())
    }

    /// Removes the edge `{u, v}` in place and returns its payload.
    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> Result<EdgeData> {
        if u >= self.node_count() || v >= self.node_count() {
            return Err(Error::MissingEdge(u, v));
        }
        let data = self.adj[u].remove(&v).ok_or(Error::MissingEdge(u, v))?;
        self.adj[v].remove(&u);
        self.edge_count -= 1;
        Ok(data)
    }

    /// Copy of the graph without the edge `{u, v}`.
    pub fn without_edge(&self, u: NodeId, v: NodeId) -> Result<Self> {
        let mut g = self.clone();
        g.remove_edge(u, v)?;
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn edge(&self, u: NodeId, v: NodeId) -> Option<&EdgeData> {
        self.adj.get(u).and_then(|m| m.get(&v))
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.edge(u, v).is_some()
    }

    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = (NodeId, &EdgeData)> + '_ {
        self.adj[u].iter().map(|(&v, d)| (v, d))
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adj[u].len()
    }

    /// All edges with `u < v`, sorted by `(u, v)`.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, m)| {
            m.range(u + 1..).map(move |(&v, d)| Edge {
                u,
                v,
                length: d.length,
                similarity: d.similarity,
            })
        })
    }

    /// True when both graphs have the same node count and edge set.
    pub fn same_topology(&self, other: &WeightedGraph) -> bool {
        self.node_count() == other.node_count()
            && self
                .adj
                .iter()
                .zip(&other.adj)
                .all(|(a, b)| a.keys().eq(b.keys()))
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if node >= self.node_count() {
            Err(Error::NodeOutOfRange {
                node,
                n: self.node_count(),
            })
        } else {
            Ok(())
        }
    }

    /// Single-source distances under `metric`; unreachable nodes get `+inf`.
    pub fn distances_from(&self, source: NodeId, metric: Metric) -> Vec<f64> {
        dijkstra(self, source, metric)
    }

    /// Shortest path from `u` to `v`.
    ///
    /// Among equally short paths the lexicographically smallest node
    /// sequence is returned. `None` when `v` is unreachable from `u`.
    pub fn shortest_path(
        &self,
        u: NodeId,
        v: NodeId,
        metric: Metric,
    ) -> Result<Option<(f64, Vec<NodeId>)>> {
        self.check_node(u)?;
        self.check_node(v)?;
        let to_target = dijkstra(self, v, metric);
        if !to_target[u].is_finite() {
            return Ok(None);
        }
        Ok(Some((
            to_target[u],
            lexicographic_walk(self, u, &to_target, metric),
        )))
    }

    /// Connected components, each sorted ascending; components are ordered
    /// by their smallest node.
    pub fn connected_components(&self) -> Vec<Vec<NodeId>> {
        let labels = self.component_labels();
        let count = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut comps = vec![Vec::new(); count];
        for (node, &c) in labels.iter().enumerate() {
            comps[c].push(node);
        }
        comps
    }

    /// Component index per node, numbered in order of first appearance.
    pub fn component_labels(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for (&w, _) in &self.adj[u] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }
}

/// Heap entry ordered so that `BinaryHeap` pops the smallest key first.
#[derive(Clone, Copy, Debug)]
pub(crate) struct HeapEntry {
    pub dist: f64,
    pub tie: NodeId,
    pub node: NodeId,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.tie.cmp(&self.tie))
            .then_with(|| other.node.cmp(&self.node))
    }
}

pub(crate) fn dijkstra(g: &WeightedGraph, source: NodeId, metric: Metric) -> Vec<f64> {
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        tie: 0,
        node: source,
    });
    while let Some(HeapEntry {
        dist: d, node: u, ..
    }) = heap.pop()
    {
        if d > dist[u] {
            continue;
        }
        for (v, data) in g.neighbors(u) {
            let nd = d + metric.cost(data);
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapEntry {
                    dist: nd,
                    tie: 0,
                    node: v,
                });
            }
        }
    }
    dist
}

/// Walks from `start` towards the target encoded in `to_target`
/// (distances to the target), always taking the smallest-id neighbor that
/// stays on a shortest path.
pub(crate) fn lexicographic_walk(
    g: &WeightedGraph,
    start: NodeId,
    to_target: &[f64],
    metric: Metric,
) -> Vec<NodeId> {
    let mut path = vec![start];
    let mut cur = start;
    while to_target[cur] > 0.0 {
        let here = to_target[cur];
        let tol = 1e-12 * here.max(1.0);
        let next = g
            .neighbors(cur)
            .find(|(w, data)| {
                to_target[*w] < here && (to_target[*w] + metric.cost(data) - here).abs() <= tol
            })
            .map(|(w, _)| w)
            .expect("a shortest-path successor exists for every reachable node");
        path.push(next);
        cur = next;
    }
    path
}

/// Binary node label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "-1")]
    Neg,
    #[serde(rename = "1")]
    Pos,
}

impl Label {
    pub fn value(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }

    pub fn from_i64(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Label::Neg),
            1 => Ok(Label::Pos),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "+1" | "1.0" | "+1.0" => Ok(Label::Pos),
            "-1" | "-1.0" => Ok(Label::Neg),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

/// A full ±1 labeling of the nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSignal(Vec<Label>);

impl LabelSignal {
    pub fn new(labels: Vec<Label>) -> Self {
        Self(labels)
    }

    pub fn constant(n: usize, label: Label) -> Self {
        Self(vec![label; n])
    }

    pub fn from_values(values: &[i64]) -> Result<Self> {
        values
            .iter()
            .map(|&v| Label::from_i64(v))
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, node: NodeId) -> Label {
        self.0[node]
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|l| l.flipped()).collect())
    }

    pub fn check_matches(&self, g: &WeightedGraph) -> Result<()> {
        if self.len() != g.node_count() {
            return Err(Error::LengthMismatch {
                labels: self.len(),
                nodes: g.node_count(),
            });
        }
        Ok(())
    }

    /// Fraction of positions where the two signals disagree.
    pub fn error_rate(&self, other: &LabelSignal) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let wrong = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        wrong as f64 / self.len() as f64
    }
}

/// A cut edge oriented by label: `pos` carries +1, `neg` carries -1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutEdge {
    pub pos: NodeId,
    pub neg: NodeId,
    pub length: f64,
}

impl CutEdge {
    /// `(min, max)` endpoint pair.
    pub fn key(&self) -> (NodeId, NodeId) {
        (self.pos.min(self.neg), self.pos.max(self.neg))
    }
}

/// The cut induced by a signal on a graph together with the quantities the
/// query-complexity analysis is phrased in.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutStructure {
    /// Sorted by endpoint key.
    pub cut_edges: Vec<CutEdge>,
    /// Sorted boundary nodes (endpoints of cut edges).
    pub boundary: Vec<NodeId>,
    /// Label-connected regions `V_1..V_k` (components of `G - C`).
    pub signal_components: Vec<Vec<NodeId>>,
    /// Region index per node.
    pub region_of: Vec<usize>,
    /// Cut components keyed by region pair `(i, j)`, `i < j`; values index into `cut_edges`.
    pub components: BTreeMap<(usize, usize), Vec<usize>>,
    pub m: usize,
    /// Shortest cut-edge length; `None` for an empty cut.
    pub l_cut: Option<f64>,
    /// Largest finite pairwise shortest-path length.
    pub l_n: f64,
    pub beta: f64,
}

impl CutStructure {
    pub fn cut_size(&self) -> usize {
        self.cut_edges.len()
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary.len()
    }

    pub fn cut_keys(&self) -> Vec<(NodeId, NodeId)> {
        self.cut_edges.iter().map(CutEdge::key).collect()
    }
}

/// Splits `g` into cut and non-cut edges under `f`.
pub fn cut_edges(g: &WeightedGraph, f: &LabelSignal) -> Result<Vec<CutEdge>> {
    f.check_matches(g)?;
    Ok(g.edges()
        .filter(|e| f.get(e.u) != f.get(e.v))
        .map(|e| {
            let (pos, neg) = if f.get(e.u) == Label::Pos {
                (e.u, e.v)
            } else {
                (e.v, e.u)
            };
            CutEdge {
                pos,
                neg,
                length: e.length,
            }
        })
        .collect())
}

/// `g` with every cut edge of `f` removed.
pub fn remove_cut(g: &WeightedGraph, f: &LabelSignal) -> Result<WeightedGraph> {
    let mut h = g.clone();
    for e in cut_edges(g, f)? {
        h.remove_edge(e.pos, e.neg)?;
    }
    Ok(h)
}

/// Largest finite shortest-path length over all node pairs.
pub fn max_finite_distance(g: &WeightedGraph) -> f64 {
    (0..g.node_count())
        .map(|s| {
            dijkstra(g, s, Metric::Length)
                .into_iter()
                .filter(|d| d.is_finite())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

pub fn cut_structure(g: &WeightedGraph, f: &LabelSignal) -> Result<CutStructure> {
    let cut = cut_edges(g, f)?;
    let residual = remove_cut(g, f)?;
    let region_of = residual.component_labels();
    let signal_components = residual.connected_components();

    let mut components: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (idx, e) in cut.iter().enumerate() {
        let (a, b) = (region_of[e.pos], region_of[e.neg]);
        components
            .entry((a.min(b), a.max(b)))
            .or_default()
            .push(idx);
    }

    let mut boundary: Vec<NodeId> = cut.iter().flat_map(|e| [e.pos, e.neg]).collect();
    boundary.sort_unstable();
    boundary.dedup();

    let n = g.node_count();
    let beta = if n == 0 {
        1.0
    } else {
        signal_components.iter().map(Vec::len).min().unwrap_or(n) as f64 / n as f64
    };
    let l_cut = cut.iter().map(|e| e.length).min_by(f64::total_cmp);

    Ok(CutStructure {
        m: components.len(),
        cut_edges: cut,
        boundary,
        signal_components,
        region_of,
        components,
        l_cut,
        l_n: max_finite_distance(g),
        beta,
    })
}
