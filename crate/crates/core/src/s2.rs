//! The S² boundary-search sampler and its length-aware variant.
//!
//! The sampler alternates between uniform random queries and bisection
//! queries. A bisection query takes the shortest path, in the residual graph,
//! between any two oppositely labeled nodes and samples its middle node.
//! Whenever a sample lands next to an oppositely labeled node the connecting
//! cut edge is removed from the residual graph, so the residual graph always
//! holds only the undiscovered part of the cut.
//!
//! The unweighted rule measures paths in hops and takes the hop midpoint. The
//! weighted rule measures paths by edge length and takes the unlabeled node
//! closest to the length midpoint, which lets long (low similarity) cut
//! edges be isolated in fewer queries.

use std::collections::BinaryHeap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    dijkstra, lexicographic_walk, HeapEntry, Label, LabelSignal, Metric, NodeId, WeightedGraph,
};

/// Midpoint rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Hop-count shortest paths, hop midpoint.
    Unweighted,
    /// Length shortest paths, node nearest the length midpoint.
    Weighted,
}

impl Variant {
    pub fn metric(self) -> Metric {
        match self {
            Variant::Unweighted => Metric::Hop,
            Variant::Weighted => Metric::Length,
        }
    }
}

/// How a node came to be queried.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Random,
    Bisect,
    Spectral,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Random => "random",
            Phase::Bisect => "bisect",
            Phase::Spectral => "spectral",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// Stop once `budget` nodes are labeled.
    Budget,
    /// Ignore the budget and stop once every cut edge is discovered.
    /// Needs an oracle that knows the true cut size.
    FullCut,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct S2Config {
    pub budget: usize,
    pub variant: Variant,
    pub seed: u64,
    pub stop_mode: StopMode,
}

impl S2Config {
    pub fn new(budget: usize, variant: Variant, seed: u64) -> Self {
        Self {
            budget,
            variant,
            seed,
            stop_mode: StopMode::Budget,
        }
    }

    pub fn full_cut(variant: Variant, seed: u64) -> Self {
        Self {
            budget: usize::MAX,
            variant,
            seed,
            stop_mode: StopMode::FullCut,
        }
    }
}

/// Label source answering node queries.
pub trait Oracle {
    fn query(&mut self, node: NodeId) -> Result<Label>;

    fn query_count(&self) -> usize;

    /// Size of the true cut, when the oracle is backed by ground truth.
    /// Only used to decide when a full-cut run may stop.
    fn true_cut_size(&self) -> Option<usize> {
        None
    }
}

/// Oracle backed by a ground-truth signal.
#[derive(Clone, Debug)]
pub struct SignalOracle<'a> {
    signal: &'a LabelSignal,
    cut_size: Option<usize>,
    queries: usize,
}

impl<'a> SignalOracle<'a> {
    pub fn new(signal: &'a LabelSignal) -> Self {
        Self {
            signal,
            cut_size: None,
            queries: 0,
        }
    }

    /// Oracle that also knows the size of the cut `signal` induces on `g`.
    pub fn for_graph(g: &WeightedGraph, signal: &'a LabelSignal) -> Result<Self> {
        let cut = crate::graph::cut_edges(g, signal)?.len();
        Ok(Self {
            signal,
            cut_size: Some(cut),
            queries: 0,
        })
    }
}

impl Oracle for SignalOracle<'_> {
    fn query(&mut self, node: NodeId) -> Result<Label> {
        if node >= self.signal.len() {
            return Err(Error::NodeOutOfRange {
                node,
                n: self.signal.len(),
            });
        }
        self.queries += 1;
        Ok(self.signal.get(node))
    }

    fn query_count(&self) -> usize {
        self.queries
    }

    fn true_cut_size(&self) -> Option<usize> {
        self.cut_size
    }
}

/// One entry of the query log.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub node: NodeId,
    pub label: Label,
    pub phase: Phase,
    /// Cut edges discovered after ingesting this sample.
    pub cut_found: usize,
}

/// Labeled set, residual graph and discovery history of one sampling run.
#[derive(Clone, Debug)]
pub struct SamplerState {
    residual: WeightedGraph,
    labels: Vec<Option<Label>>,
    labeled_count: usize,
    query_log: Vec<QueryRecord>,
    discovered_cut: Vec<(NodeId, NodeId)>,
}

impl SamplerState {
    pub fn new(g: &WeightedGraph) -> Self {
        Self {
            residual: g.clone(),
            labels: vec![None; g.node_count()],
            labeled_count: 0,
            query_log: Vec::new(),
            discovered_cut: Vec::new(),
        }
    }

    pub fn residual_graph(&self) -> &WeightedGraph {
        &self.residual
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label_of(&self, node: NodeId) -> Option<Label> {
        self.labels[node]
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled_count
    }

    /// Labeled nodes in ascending id order.
    pub fn labeled(&self) -> impl Iterator<Item = (NodeId, Label)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (i, l)))
    }

    pub fn unlabeled(&self) -> Vec<NodeId> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i].is_none())
            .collect()
    }

    pub fn query_log(&self) -> &[QueryRecord] {
        &self.query_log
    }

    /// Discovered cut edges as `(min, max)` pairs, in discovery order.
    pub fn discovered_cut(&self) -> &[(NodeId, NodeId)] {
        &self.discovered_cut
    }

    /// Adds `(node, label)` to the labeled set and moves every residual edge
    /// from `node` to an oppositely labeled neighbor into the discovered cut.
    /// Returns the number of newly discovered cut edges.
    pub fn ingest_sample(&mut self, node: NodeId, label: Label, phase: Phase) -> Result<usize> {
        if node >= self.labels.len() {
            return Err(Error::NodeOutOfRange {
                node,
                n: self.labels.len(),
            });
        }
        if self.labels[node].is_some() {
            return Err(Error::AlreadyLabeled(node));
        }
        self.labels[node] = Some(label);
        self.labeled_count += 1;
        let opposite: Vec<NodeId> = self
            .residual
            .neighbors(node)
            .filter(|(w, _)| self.labels[*w] == Some(label.flipped()))
            .map(|(w, _)| w)
            .collect();
        for &w in &opposite {
            self.residual.remove_edge(node, w)?;
            self.discovered_cut.push((node.min(w), node.max(w)));
        }
        self.query_log.push(QueryRecord {
            node,
            label,
            phase,
            cut_found: self.discovered_cut.len(),
        });
        Ok(opposite.len())
    }
}

/// The globally shortest residual path between two oppositely labeled nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct OppositePath {
    /// Path from the smaller endpoint id to the larger.
    pub path: Vec<NodeId>,
    pub distance: f64,
}

/// Finds the shortest residual path between any labeled `+1` node and any
/// labeled `-1` node under `metric`.
///
/// Ties between pairs go to the smaller `(min id, max id)` pair; within the
/// chosen pair the lexicographically smallest node sequence wins.
pub fn shortest_opposite_path(state: &SamplerState, metric: Metric) -> Option<OppositePath> {
    let g = &state.residual;
    let n = g.node_count();
    // Multi-source search from every +1 node, keyed by (distance, source id).
    let mut best: Vec<(f64, NodeId)> = vec![(f64::INFINITY, usize::MAX); n];
    let mut heap = BinaryHeap::new();
    for (node, label) in state.labeled() {
        if label == Label::Pos {
            best[node] = (0.0, node);
            heap.push(HeapEntry {
                dist: 0.0,
                tie: node,
                node,
            });
        }
    }
    let mut found: Option<f64> = None;
    let mut pair: Option<(NodeId, NodeId)> = None;
    while let Some(HeapEntry {
        dist,
        tie: src,
        node,
    }) = heap.pop()
    {
        if (dist, src) != best[node] {
            continue;
        }
        if let Some(d) = found {
            if dist > d {
                break;
            }
        }
        if state.labels[node] == Some(Label::Neg) {
            found = Some(dist);
            let key = (src.min(node), src.max(node));
            if pair.is_none_or(|p| key < p) {
                pair = Some(key);
            }
            continue;
        }
        for (w, data) in g.neighbors(node) {
            let cost = match metric {
                Metric::Length => data.length,
                Metric::Hop => 1.0,
            };
            let cand = (dist + cost, src);
            if cand.0 < best[w].0 || (cand.0 == best[w].0 && cand.1 < best[w].1) {
                best[w] = cand;
                heap.push(HeapEntry {
                    dist: cand.0,
                    tie: src,
                    node: w,
                });
            }
        }
    }
    let (a, b) = pair?;
    let to_b = dijkstra(g, b, metric);
    let path = lexicographic_walk(g, a, &to_b, metric);
    Some(OppositePath {
        path,
        distance: to_b[a],
    })
}

/// Middle-of-shortest-path rule. `None` when no pair of oppositely labeled
/// nodes is connected in the residual graph.
pub fn msp(state: &SamplerState, variant: Variant) -> Option<NodeId> {
    let OppositePath { path, .. } = shortest_opposite_path(state, variant.metric())?;
    let hops = path.len() - 1;
    debug_assert!(
        hops >= 2,
        "adjacent opposite labels are always separated by cut removal"
    );
    match variant {
        Variant::Unweighted => Some(path[hops.div_ceil(2)]),
        Variant::Weighted => {
            let g = &state.residual;
            let mut cum = Vec::with_capacity(path.len());
            let mut acc = 0.0;
            cum.push(0.0);
            for w in path.windows(2) {
                acc += g.edge(w[0], w[1]).expect("path edges exist").length;
                cum.push(acc);
            }
            let half = acc / 2.0;
            (1..hops)
                .filter(|&i| state.labels[path[i]].is_none())
                .min_by(|&i, &j| {
                    (cum[i] - half)
                        .abs()
                        .total_cmp(&(cum[j] - half).abs())
                        .then(path[i].cmp(&path[j]))
                })
                .map(|i| path[i])
        }
    }
}

/// Runs S² from an empty labeled set.
pub fn run_s2<O: Oracle + ?Sized>(
    g: &WeightedGraph,
    oracle: &mut O,
    cfg: &S2Config,
) -> Result<SamplerState> {
    run_s2_observed(g, oracle, cfg, &mut |_| {})
}

/// [`run_s2`] with a callback invoked after every ingested sample.
pub fn run_s2_observed<O: Oracle + ?Sized>(
    g: &WeightedGraph,
    oracle: &mut O,
    cfg: &S2Config,
    observer: &mut dyn FnMut(&SamplerState),
) -> Result<SamplerState> {
    let stop = stop_rule(g.node_count(), oracle, cfg)?;
    let mut state = SamplerState::new(g);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    continue_s2(
        &mut state,
        oracle,
        cfg.variant,
        &mut rng,
        false,
        &|s| stop.reached(s),
        observer,
    )?;
    Ok(state)
}

/// Termination rule derived from a config and an oracle.
#[derive(Clone, Copy, Debug)]
pub enum StopRule {
    Budget(usize),
    /// All cut edges discovered and every residual component labeled, so
    /// the signal is determined.
    CutSize(usize),
}

impl StopRule {
    pub fn reached(&self, state: &SamplerState) -> bool {
        match *self {
            StopRule::Budget(b) => state.labeled_count() >= b,
            StopRule::CutSize(c) => {
                state.discovered_cut().len() >= c && all_components_labeled(state)
            }
        }
    }
}

pub fn stop_rule<O: Oracle + ?Sized>(n: usize, oracle: &O, cfg: &S2Config) -> Result<StopRule> {
    match cfg.stop_mode {
        StopMode::Budget => {
            if cfg.budget == 0 || cfg.budget > n {
                return Err(Error::InvalidBudget {
                    budget: cfg.budget,
                    n,
                });
            }
            Ok(StopRule::Budget(cfg.budget))
        }
        StopMode::FullCut => oracle
            .true_cut_size()
            .map(StopRule::CutSize)
            .ok_or(Error::UnknownCutSize),
    }
}

/// Drives the S² loop on an existing state until `stop` holds or every node
/// is labeled.
///
/// With `msp_first` the loop begins with a bisection check instead of a
/// random query, which is how a state seeded with prior labels resumes.
pub fn continue_s2<O: Oracle + ?Sized, R: Rng + ?Sized>(
    state: &mut SamplerState,
    oracle: &mut O,
    variant: Variant,
    rng: &mut R,
    msp_first: bool,
    stop: &dyn Fn(&SamplerState) -> bool,
    observer: &mut dyn FnMut(&SamplerState),
) -> Result<()> {
    let mut next = if msp_first { msp(state, variant) } else { None };
    loop {
        if stop(state) {
            return Ok(());
        }
        let (node, phase) = match next {
            Some(node) => (node, Phase::Bisect),
            None => {
                let pool = state.unlabeled();
                if pool.is_empty() {
                    return Ok(());
                }
                (pool[rng.random_range(0..pool.len())], Phase::Random)
            }
        };
        let label = oracle.query(node)?;
        state.ingest_sample(node, label, phase)?;
        observer(state);
        next = msp(state, variant);
    }
}

/// Whether every residual component holds a labeled node.
fn all_components_labeled(state: &SamplerState) -> bool {
    state.labeled_count == state.node_count()
        || state
            .residual
            .connected_components()
            .iter()
            .all(|c| c.iter().any(|&v| state.labels[v].is_some()))
}

/// Labels every residual component with the label of its labeled members.
///
/// Succeeds exactly when each component has at least one labeled member and
/// they all agree, which is the case once the whole cut is discovered.
pub fn complete_by_components(state: &SamplerState) -> Result<LabelSignal> {
    let mut out = vec![Label::Pos; state.node_count()];
    for comp in state.residual.connected_components() {
        let mut label = None;
        for &v in &comp {
            match (label, state.labels[v]) {
                (_, None) => {}
                (None, Some(l)) => label = Some(l),
                (Some(a), Some(b)) if a != b => return Err(Error::ConflictingComponent(comp[0])),
                _ => {}
            }
        }
        let label = label.ok_or(Error::UnlabeledComponent(comp[0]))?;
        for &v in &comp {
            out[v] = label;
        }
    }
    Ok(LabelSignal::new(out))
}

/// Writes the query log as CSV:
/// `step,node,label,phase,cut_edges_discovered_so_far`.
pub fn write_query_log_csv<W: Write>(log: &[QueryRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "step",
        "node",
        "label",
        "phase",
        "cut_edges_discovered_so_far",
    ])?;
    for (i, r) in log.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            r.node.to_string(),
            r.label.to_string(),
            r.phase.to_string(),
            r.cut_found.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
