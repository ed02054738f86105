//! Query-complexity quantities for the weighted S² sampler: the cut
//! clustering distance between cut edges, the threshold meta graph over cut
//! edges, the clustering length `l_kappa`, and the resulting budget bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    cut_structure, dijkstra, remove_cut, CutEdge, CutStructure, LabelSignal, Metric, NodeId,
    WeightedGraph,
};

/// Clustering distance between two cut edges.
///
/// Endpoints are matched by label, so the result is the residual distance
/// between the `+1` endpoints plus the residual distance between the `-1`
/// endpoints plus the longer of the two edge lengths. Infinite when either
/// pair is disconnected in `g_minus_c`.
pub fn delta(g_minus_c: &WeightedGraph, e1: &CutEdge, e2: &CutEdge) -> Result<f64> {
    for e in [e1, e2] {
        if g_minus_c.has_edge(e.pos, e.neg) {
            return Err(Error::NotCutEdge(e.pos.min(e.neg), e.pos.max(e.neg)));
        }
    }
    let dp = dijkstra(g_minus_c, e1.pos, Metric::Length)[e2.pos];
    let dn = dijkstra(g_minus_c, e1.neg, Metric::Length)[e2.neg];
    Ok(dp + dn + e1.length.max(e2.length))
}

/// Pairwise clustering distances over all cut edges, computed with one
/// shortest-path search per boundary node.
#[derive(Clone, Debug)]
pub struct DeltaMatrix {
    pub edges: Vec<CutEdge>,
    values: Vec<f64>,
}

impl DeltaMatrix {
    pub fn new(g: &WeightedGraph, f: &LabelSignal, cut: &CutStructure) -> Result<Self> {
        let residual = remove_cut(g, f)?;
        let mut cache: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
        for &b in &cut.boundary {
            cache.insert(b, dijkstra(&residual, b, Metric::Length));
        }
        let edges = cut.cut_edges.clone();
        let k = edges.len();
        let mut values = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                let (a, b) = (&edges[i], &edges[j]);
                let d = cache[&a.pos][b.pos] + cache[&a.neg][b.neg] + a.length.max(b.length);
                values[i * k + j] = d;
                values[j * k + i] = d;
            }
        }
        Ok(Self { edges, values })
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.edges.len() + j]
    }

    /// Distinct finite off-diagonal values together with 0, ascending.
    pub fn thresholds(&self) -> Vec<f64> {
        let k = self.len();
        let mut t: Vec<f64> = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .filter(|d| d.is_finite())
            .collect();
        t.push(0.0);
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// The meta graph whose nodes are cut edges, with `{e, e'}` joined when
    /// their clustering distance is at most `r`.
    pub fn meta_graph(&self, r: f64) -> MetaGraph {
        let k = self.len();
        let meta_edges = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j) <= r)
            .collect();
        MetaGraph {
            meta_nodes: self.edges.clone(),
            meta_edges,
            r,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MetaGraph {
    pub meta_nodes: Vec<CutEdge>,
    /// Index pairs `(i, j)` with `i < j` into `meta_nodes`.
    pub meta_edges: Vec<(usize, usize)>,
    pub r: f64,
}

impl MetaGraph {
    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.meta_nodes.len());
        for &(i, j) in &self.meta_edges {
            uf.union(i, j);
        }
        uf.count()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    sets: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            sets: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
            self.sets -= 1;
        }
    }

    fn count(&self) -> usize {
        self.sets
    }
}

/// Smallest threshold at which the meta graph has exactly `m` components.
///
/// The component count is non-increasing in the threshold, so the answer
/// is found by binary search over the sorted candidate thresholds.
pub fn l_kappa(g: &WeightedGraph, f: &LabelSignal) -> Result<f64> {
    let cut = cut_structure(g, f)?;
    if cut.cut_edges.is_empty() {
        return Err(Error::EmptyCut);
    }
    let deltas = DeltaMatrix::new(g, f, &cut)?;
    Ok(l_kappa_from(&deltas, cut.m))
}

pub(crate) fn l_kappa_from(deltas: &DeltaMatrix, m: usize) -> f64 {
    let t = deltas.thresholds();
    let (mut lo, mut hi) = (0usize, t.len() - 1);
    debug_assert_eq!(deltas.meta_graph(t[hi]).component_count(), m);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if deltas.meta_graph(t[mid]).component_count() <= m {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    t[lo]
}

/// Itemized budget bound for full cut recovery by weighted S².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub m: usize,
    pub boundary_size: usize,
    pub l_cut: Option<f64>,
    pub l_n: f64,
    pub l_kappa: Option<f64>,
    pub beta: f64,
    pub epsilon: f64,
    pub first_edge_term: f64,
    pub remaining_term: f64,
    pub random_term: f64,
    pub total: f64,
    pub total_ceil: u64,
    /// Conventions applied where the closed form is undefined.
    pub conventions: Vec<String>,
}

/// `max(0, ceil(2 log2(x / l_cut)))`, with `x = 0` mapping to 0.
pub fn bisection_queries(x: f64, l_cut: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (2.0 * (x / l_cut).log2()).ceil().max(0.0)
}

/// Random-phase term `log(1/(beta eps)) / log(1/(1 - beta))`; 1 when `beta = 1`.
pub fn random_phase_term(beta: f64, epsilon: f64) -> f64 {
    if beta >= 1.0 {
        1.0
    } else {
        (1.0 / (beta * epsilon)).ln() / (1.0 / (1.0 - beta)).ln()
    }
}

pub fn theorem1_budget(g: &WeightedGraph, f: &LabelSignal, epsilon: f64) -> Result<BudgetReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let cut = cut_structure(g, f)?;
    let mut conventions = Vec::new();
    let random_term = random_phase_term(cut.beta, epsilon);
    if cut.beta >= 1.0 {
        conventions.push("beta = 1: random term set to 1".to_string());
    }

    let (first_edge_term, remaining_term, l_kappa) = match cut.l_cut {
        None => {
            conventions.push("m = 0: bisection terms set to 0".to_string());
            (0.0, 0.0, None)
        }
        Some(l_cut) => {
            let deltas = DeltaMatrix::new(g, f, &cut)?;
            let lk = l_kappa_from(&deltas, cut.m);
            let raw_first = 2.0 * (cut.l_n / l_cut).log2();
            let raw_rest = 2.0 * (lk / l_cut).log2();
            if raw_first.ceil() < 0.0 || raw_rest.ceil() < 0.0 || lk == 0.0 {
                conventions.push("log terms clamped at 0".to_string());
            }
            let first = cut.m as f64 * bisection_queries(cut.l_n, l_cut);
            let rest = (cut.boundary_size() - cut.m) as f64 * bisection_queries(lk, l_cut);
            (first, rest, Some(lk))
        }
    };
    let total = first_edge_term + remaining_term + random_term;
    Ok(BudgetReport {
        m: cut.m,
        boundary_size: cut.boundary_size(),
        l_cut: cut.l_cut,
        l_n: cut.l_n,
        l_kappa,
        beta: cut.beta,
        epsilon,
        first_edge_term,
        remaining_term,
        random_term,
        total,
        total_ceil: total.ceil() as u64,
        conventions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cut_edges, Edge, Label};

    fn path(lengths: &[f64]) -> WeightedGraph {
        WeightedGraph::from_edges(
            lengths.len() + 1,
            lengths
                .iter()
                .enumerate()
                .map(|(i, &l)| Edge::new(i, i + 1, l)),
        )
        .unwrap()
    }

    #[test]
    fn delta_self_is_edge_length() {
        let g = path(&[1.0, 2.5, 1.0]);
        let f = LabelSignal::from_values(&[1, 1, -1, -1]).unwrap();
        let e = cut_edges(&g, &f).unwrap()[0];
        let h = remove_cut(&g, &f).unwrap();
        assert_eq!(delta(&h, &e, &e).unwrap(), 2.5);
    }

    #[test]
    fn delta_adjacent_gadget() {
        // + node 0 joined to - nodes 1 (len 4) and 2 (len 5); 1 and 2 linked
        // through - nodes 3, 4 with total residual distance 3.
        let g = WeightedGraph::from_edges(
            5,
            [
                Edge::new(0, 1, 4.0),
                Edge::new(0, 2, 5.0),
                Edge::new(1, 3, 1.0),
                Edge::new(3, 4, 1.0),
                Edge::new(4, 2, 1.0),
            ],
        )
        .unwrap();
        let f = LabelSignal::from_values(&[1, -1, -1, -1, -1]).unwrap();
        let cut = cut_edges(&g, &f).unwrap();
        let h = remove_cut(&g, &f).unwrap();
        assert_eq!(delta(&h, &cut[0], &cut[1]).unwrap(), 8.0);
        assert_eq!(delta(&h, &cut[1], &cut[0]).unwrap(), 8.0);
    }

    #[test]
    fn delta_across_components_is_infinite() {
        // + {0}, - {1}, + {2}: edges 0-1 and 1-2 are separate cut components.
        let g = path(&[1.0, 1.0]);
        let f = LabelSignal::from_values(&[1, -1, 1]).unwrap();
        let cut = cut_edges(&g, &f).unwrap();
        let h = remove_cut(&g, &f).unwrap();
        assert!(delta(&h, &cut[0], &cut[1]).unwrap().is_infinite());
    }

    #[test]
    fn delta_rejects_non_cut_edge() {
        let g = path(&[1.0]);
        let e = CutEdge {
            pos: 0,
            neg: 1,
            length: 1.0,
        };
        assert!(matches!(delta(&g, &e, &e), Err(Error::NotCutEdge(0, 1))));
    }

    #[test]
    fn l_kappa_single_edge_is_zero() {
        let g = path(&[1.0, 1.0, 1.0]);
        let f = LabelSignal::from_values(&[1, 1, -1, -1]).unwrap();
        assert_eq!(l_kappa(&g, &f).unwrap(), 0.0);
    }

    #[test]
    fn l_kappa_two_edges() {
        // 4-cycle 0(+)-1(+)-2(-)-3(-)-0 with cut edges 1-2 (len 4) and 3-0 (len 2):
        // delta = d(1,0) + d(2,3) + 4 = 3 + 3 + 4 = 10.
        let g = WeightedGraph::from_edges(
            4,
            [
                Edge::new(0, 1, 3.0),
                Edge::new(1, 2, 4.0),
                Edge::new(2, 3, 3.0),
                Edge::new(3, 0, 2.0),
            ],
        )
        .unwrap();
        let f = LabelSignal::from_values(&[1, 1, -1, -1]).unwrap();
        assert_eq!(l_kappa(&g, &f).unwrap(), 10.0);
    }

    #[test]
    fn l_kappa_empty_cut_errors() {
        let g = path(&[1.0]);
        assert!(matches!(
            l_kappa(&g, &LabelSignal::constant(2, Label::Neg)),
            Err(Error::EmptyCut)
        ));
    }

    #[test]
    fn budget_constant_signal() {
        let g = path(&[1.0, 2.0]);
        let r = theorem1_budget(&g, &LabelSignal::constant(3, Label::Pos), 0.1).unwrap();
        assert_eq!(r.total, 1.0);
        assert_eq!(r.m, 0);
        assert!(!r.conventions.is_empty());
    }

    #[test]
    fn budget_four_path() {
        let g = path(&[1.0, 1.0, 1.0]);
        let f = LabelSignal::from_values(&[1, 1, -1, -1]).unwrap();
        let r = theorem1_budget(&g, &f, 0.1).unwrap();
        assert_eq!(r.m, 1);
        assert_eq!(r.boundary_size, 2);
        assert_eq!(r.l_cut, Some(1.0));
        assert_eq!(r.l_n, 3.0);
        assert_eq!(r.l_kappa, Some(0.0));
        assert_eq!(r.beta, 0.5);
        // ceil(2 log2 3) = ceil(3.1699) = 4
        assert_eq!(r.first_edge_term, 4.0);
        assert_eq!(r.remaining_term, 0.0);
        // ln(20) / ln(2)
        assert!((r.random_term - 4.321928094887363).abs() < 1e-12);
        assert!((r.total - 8.321928094887363).abs() < 1e-12);
        assert_eq!(r.total_ceil, 9);
    }

    #[test]
    fn budget_rejects_bad_epsilon() {
        let g = path(&[1.0]);
        let f = LabelSignal::constant(2, Label::Pos);
        for eps in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                theorem1_budget(&g, &f, eps),
                Err(Error::InvalidEpsilon(_))
            ));
        }
    }

    #[test]
    fn bisection_clamp() {
        assert_eq!(bisection_queries(0.0, 1.0), 0.0);
        assert_eq!(bisection_queries(0.5, 1.0), 0.0);
        assert_eq!(bisection_queries(1.0, 1.0), 0.0);
        assert_eq!(bisection_queries(2.0, 1.0), 2.0);
    }
}
