#![allow(dead_code)]

use rand::Rng;
use std::collections::BTreeSet;

use s2graph::graph::CutEdge;
use s2graph::{Edge, Label, LabelSignal, WeightedGraph};

/// Log-uniform draw from `[lo, hi]`.
pub fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// Random connected graph: a random tree plus `extra` random chords, lengths
/// log-uniform over `[0.1, 10]` and Gaussian similarities.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, extra: usize) -> WeightedGraph {
    let mut g = WeightedGraph::new(n);
    let add = |g: &mut WeightedGraph, u: usize, v: usize, rng: &mut R| {
        if u != v && !g.has_edge(u, v) {
            let l = log_uniform(rng, 0.1, 10.0);
            g.add_edge(Edge::new(u, v, l).with_similarity((-l * l / 8.0).exp()))
                .unwrap();
        }
    };
    for v in 1..n {
        let u = rng.random_range(0..v);
        add(&mut g, u, v, rng);
    }
    for _ in 0..extra {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        add(&mut g, u, v, rng);
    }
    g
}

/// Random labels, guaranteed to use both values when `n >= 2`.
pub fn random_labels<R: Rng>(rng: &mut R, n: usize) -> LabelSignal {
    let mut v: Vec<Label> = (0..n)
        .map(|_| {
            if rng.random_bool(0.5) {
                Label::Pos
            } else {
                Label::Neg
            }
        })
        .collect();
    if n >= 2 {
        v[0] = Label::Pos;
        v[n - 1] = Label::Neg;
    }
    LabelSignal::new(v)
}

/// All-pairs shortest path lengths by Floyd-Warshall. `hop` counts edges.
pub fn floyd_warshall(g: &WeightedGraph, hop: bool) -> Vec<Vec<f64>> {
    let n = g.node_count();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for e in g.edges() {
        let w = if hop { 1.0 } else { e.length };
        d[e.u][e.v] = d[e.u][e.v].min(w);
        d[e.v][e.u] = d[e.v][e.u].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Union-find with a set counter.
pub struct Dsu {
    parent: Vec<usize>,
    pub sets: usize,
}

impl Dsu {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            sets: n,
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra] = rb;
            self.sets -= 1;
        }
    }
}

/// Label regions by flood fill over same-label edges, as a canonical
/// partition: sorted list of sorted node sets.
pub fn label_regions(g: &WeightedGraph, f: &LabelSignal) -> Vec<Vec<usize>> {
    let n = g.node_count();
    let mut dsu = Dsu::new(n);
    for e in g.edges() {
        if f.get(e.u) == f.get(e.v) {
            dsu.union(e.u, e.v);
        }
    }
    partition(&mut dsu, n)
}

pub fn partition(dsu: &mut Dsu, n: usize) -> Vec<Vec<usize>> {
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for v in 0..n {
        groups.entry(dsu.find(v)).or_default().push(v);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Smooth labels: `+1` within a length ball around a random center, sized so
/// both labels occur.
pub fn ball_signal<R: Rng>(rng: &mut R, g: &WeightedGraph) -> LabelSignal {
    let n = g.node_count();
    let center = rng.random_range(0..n);
    let d = g.distances_from(center, s2graph::Metric::Length);
    let mut sorted: Vec<f64> = d.iter().copied().filter(|x| x.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let q = rng.random_range(0.2..0.8);
    let radius = sorted[((sorted.len() - 1) as f64 * q) as usize];
    let mut labels: Vec<Label> = d
        .iter()
        .map(|&x| if x <= radius { Label::Pos } else { Label::Neg })
        .collect();
    if labels.iter().all(|&l| l == Label::Pos) {
        let far = (0..n).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        labels[far] = Label::Neg;
    }
    LabelSignal::new(labels)
}

/// Result of bisecting a labeled path with one cut edge.
pub struct PathRun {
    /// Total path length.
    pub length: f64,
    pub l_cut: f64,
    /// Queries after the two endpoints were labeled.
    pub queries: usize,
    /// Length of the interval known to contain the cut edge, initially and
    /// after every query.
    pub intervals: Vec<f64>,
    pub all_bisect: bool,
}

/// Path `0 - 1 - ... - n-1` with edge lengths `lengths`, labels `+1` on
/// `0..=cut` and `-1` beyond. Both endpoints are labeled first, then S²
/// runs until the cut edge is discovered.
pub fn bisect_path(lengths: &[f64], cut: usize, variant: s2graph::s2::Variant) -> PathRun {
    use rand::SeedableRng;
    use s2graph::s2::{continue_s2, Phase, SamplerState, SignalOracle};

    let n = lengths.len() + 1;
    let g = WeightedGraph::from_edges(
        n,
        lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| Edge::new(i, i + 1, l)),
    )
    .unwrap();
    let f = LabelSignal::new(
        (0..n)
            .map(|i| if i <= cut { Label::Pos } else { Label::Neg })
            .collect(),
    );
    let mut pos = vec![0.0; n];
    for i in 1..n {
        pos[i] = pos[i - 1] + lengths[i - 1];
    }
    let interval = |s: &SamplerState| {
        let lo = (0..n)
            .filter(|&i| s.label_of(i) == Some(Label::Pos))
            .max()
            .unwrap();
        let hi = (0..n)
            .filter(|&i| s.label_of(i) == Some(Label::Neg))
            .min()
            .unwrap();
        pos[hi] - pos[lo]
    };
    let mut state = SamplerState::new(&g);
    state.ingest_sample(0, Label::Pos, Phase::Random).unwrap();
    state
        .ingest_sample(n - 1, Label::Neg, Phase::Random)
        .unwrap();
    let mut intervals = vec![interval(&state)];
    let mut oracle = SignalOracle::new(&f);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    continue_s2(
        &mut state,
        &mut oracle,
        variant,
        &mut rng,
        true,
        &|s| !s.discovered_cut().is_empty(),
        &mut |s| intervals.push(interval(s)),
    )
    .unwrap();
    let log = &state.query_log()[2..];
    PathRun {
        length: pos[n - 1],
        l_cut: lengths[cut],
        queries: log.len(),
        intervals,
        all_bisect: log.iter().all(|r| r.phase == Phase::Bisect),
    }
}

/// Random path instance: `n` in `2..=200`, lengths log-uniform over
/// `[0.1, 10]`, cut position uniform.
pub fn random_path<R: Rng>(rng: &mut R) -> (Vec<f64>, usize) {
    let n = rng.random_range(2..=200);
    let lengths: Vec<f64> = (0..n - 1).map(|_| log_uniform(rng, 0.1, 10.0)).collect();
    let cut = rng.random_range(0..n - 1);
    (lengths, cut)
}

/// Cut clustering computed from scratch: Floyd-Warshall on the graph without
/// its cut, clustering distances by definition, then a linear scan over
/// every candidate threshold.
pub fn brute_l_kappa(g: &WeightedGraph, f: &LabelSignal) -> f64 {
    let n = g.node_count();
    let mut h = WeightedGraph::new(n);
    let mut cut: Vec<CutEdge> = Vec::new();
    for e in g.edges() {
        if f.get(e.u) == f.get(e.v) {
            h.add_edge(e).unwrap();
        } else {
            let (pos, neg) = if f.get(e.u) == Label::Pos {
                (e.u, e.v)
            } else {
                (e.v, e.u)
            };
            cut.push(CutEdge {
                pos,
                neg,
                length: e.length,
            });
        }
    }
    let d = floyd_warshall(&h, false);
    let regions = label_regions(g, f);
    let mut region = vec![0; n];
    for (i, r) in regions.iter().enumerate() {
        for &v in r {
            region[v] = i;
        }
    }
    let m = cut
        .iter()
        .map(|e| {
            (
                region[e.pos].min(region[e.neg]),
                region[e.pos].max(region[e.neg]),
            )
        })
        .collect::<BTreeSet<_>>()
        .len();
    let k = cut.len();
    let delta =
        |a: &CutEdge, b: &CutEdge| d[a.pos][b.pos] + d[a.neg][b.neg] + a.length.max(b.length);
    let mut candidates = vec![0.0];
    for i in 0..k {
        for j in i + 1..k {
            let v = delta(&cut[i], &cut[j]);
            if v.is_finite() {
                candidates.push(v);
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    for r in candidates {
        let mut dsu = Dsu::new(k);
        for i in 0..k {
            for j in i + 1..k {
                if delta(&cut[i], &cut[j]) <= r {
                    dsu.union(i, j);
                }
            }
        }
        if dsu.sets == m {
            return r;
        }
    }
    unreachable!("the largest finite threshold joins every cut component")
}
