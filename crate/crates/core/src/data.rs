//! Datasets and the k-NN graph bundle built from them.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Label, LabelSignal, NodeId, WeightedGraph};
use crate::io::write_edge_list;

/// Shortest edge length stored for coincident points, since graph lengths
/// must be positive.
pub const MIN_LENGTH: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMetric {
    #[default]
    Euclidean,
    Cosine,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDataset {
    points: Vec<Vec<f64>>,
    labels: LabelSignal,
    metric: FeatureMetric,
}

impl FeatureDataset {
    pub fn new(points: Vec<Vec<f64>>, labels: LabelSignal, metric: FeatureMetric) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter(
                "a dataset needs at least 2 points".into(),
            ));
        }
        if labels.len() != points.len() {
            return Err(Error::LengthMismatch {
                labels: labels.len(),
                nodes: points.len(),
            });
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(dim, p.len()));
            }
            if !p.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            if metric == FeatureMetric::Cosine && p.iter().all(|&x| x == 0.0) {
                return Err(Error::ZeroNorm);
            }
        }
        Ok(Self {
            points,
            labels,
            metric,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &LabelSignal {
        &self.labels
    }

    pub fn metric(&self) -> FeatureMetric {
        self.metric
    }

    fn euclidean(&self, i: usize, j: usize) -> f64 {
        self.points[i]
            .iter()
            .zip(&self.points[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn cosine(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.points[i], &self.points[j]);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }

    /// Dissimilarity used to rank neighbors.
    fn rank_distance(&self, i: usize, j: usize) -> f64 {
        match self.metric {
            FeatureMetric::Euclidean => self.euclidean(i, j),
            FeatureMetric::Cosine => 1.0 - self.cosine(i, j),
        }
    }
}

/// How the two-circles spread parameters are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpreadKind {
    /// The spread is a variance; the normal's standard deviation is its root.
    #[default]
    Variance,
    StdDev,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoCirclesConfig {
    pub inner_count: usize,
    pub outer_count: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub inner_spread: f64,
    pub outer_spread: f64,
    pub spread_kind: SpreadKind,
    pub min_radius: f64,
}

impl Default for TwoCirclesConfig {
    fn default() -> Self {
        Self {
            inner_count: 900,
            outer_count: 100,
            inner_radius: 1.0,
            outer_radius: 1.1,
            inner_spread: 0.05,
            outer_spread: 0.45,
            spread_kind: SpreadKind::Variance,
            min_radius: 0.01,
        }
    }
}

impl TwoCirclesConfig {
    fn std_dev(&self, spread: f64) -> f64 {
        match self.spread_kind {
            SpreadKind::Variance => spread.sqrt(),
            SpreadKind::StdDev => spread,
        }
    }

    /// Points with evenly spaced angles and normal radii: the inner class
    /// (label -1) first, then the outer class (label +1).
    pub fn generate(&self, seed: u64) -> Result<FeatureDataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(self.inner_count + self.outer_count);
        let mut labels = Vec::with_capacity(points.capacity());
        for (count, mean, spread, label) in [
            (
                self.inner_count,
                self.inner_radius,
                self.inner_spread,
                Label::Neg,
            ),
            (
                self.outer_count,
                self.outer_radius,
                self.outer_spread,
                Label::Pos,
            ),
        ] {
            let normal = Normal::new(mean, self.std_dev(spread))
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for i in 0..count {
                let angle = 2.0 * PI * i as f64 / count as f64;
                let r = normal.sample(&mut rng).max(self.min_radius);
                points.push(vec![r * angle.cos(), r * angle.sin()]);
                labels.push(label);
            }
        }
        FeatureDataset::new(points, LabelSignal::new(labels), FeatureMetric::Euclidean)
    }
}

pub fn gen_two_circles(seed: u64) -> Result<FeatureDataset> {
    TwoCirclesConfig::default().generate(seed)
}

fn check_k(ds: &FeatureDataset, k: usize) -> Result<()> {
    if k == 0 || k >= ds.len() {
        return Err(Error::InvalidParameter(format!(
            "k must satisfy 0 < k < n, got k={k}, n={}",
            ds.len()
        )));
    }
    Ok(())
}

/// The `k` nearest neighbors of every node, ties broken by smaller index.
fn neighbor_lists(ds: &FeatureDataset, k: usize) -> Vec<Vec<(f64, NodeId)>> {
    let n = ds.len();
    (0..n)
        .map(|i| {
            let mut cand: Vec<(f64, NodeId)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (ds.rank_distance(i, j), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand
        })
        .collect()
}

/// Symmetrized k-NN edges as sorted `(u, v)` pairs with `u < v`.
pub fn knn_graph(ds: &FeatureDataset, k: usize) -> Result<Vec<(NodeId, NodeId)>> {
    check_k(ds, k)?;
    Ok(knn_edges(&neighbor_lists(ds, k)))
}

fn knn_edges(lists: &[Vec<(f64, NodeId)>]) -> Vec<(NodeId, NodeId)> {
    let mut edges: Vec<(NodeId, NodeId)> = lists
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().map(move |&(_, j)| (i.min(j), i.max(j))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// The three graphs over one k-NN topology.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBundle {
    /// Every edge has length 1.
    pub unweighted: WeightedGraph,
    /// Lengths are the dissimilarities `d(i, j)`.
    pub dissimilarity: WeightedGraph,
    /// Lengths `d(i, j)` with similarity weights `w(i, j)`.
    pub similarity: WeightedGraph,
    /// Gaussian kernel width; `None` for cosine datasets.
    pub sigma: Option<f64>,
}

pub fn build_bundle(ds: &FeatureDataset, k: usize) -> Result<GraphBundle> {
    check_k(ds, k)?;
    let lists = neighbor_lists(ds, k);
    let edges = knn_edges(&lists);
    let sigma = match ds.metric() {
        FeatureMetric::Euclidean => {
            let mean_kth = lists.iter().map(|l| l[k - 1].0).sum::<f64>() / lists.len() as f64;
            let sigma = mean_kth / 3.0;
            if !(sigma > 0.0) {
                return Err(Error::DegenerateSigma);
            }
            Some(sigma)
        }
        FeatureMetric::Cosine => None,
    };
    let n = ds.len();
    let mut unweighted = WeightedGraph::new(n);
    let mut dissimilarity = WeightedGraph::new(n);
    let mut similarity = WeightedGraph::new(n);
    for (u, v) in edges {
        let (d, w) = match sigma {
            Some(s) => {
                let d = ds.euclidean(u, v);
                (d, (-d * d / (2.0 * s * s)).exp())
            }
            None => {
                let w = ds.cosine(u, v).max(0.0);
                ((1.0 - w * w).max(0.0).sqrt(), w)
            }
        };
        let len = d.max(MIN_LENGTH);
        unweighted.add_edge(Edge::new(u, v, 1.0))?;
        dissimilarity.add_edge(Edge::new(u, v, len))?;
        similarity.add_edge(Edge::new(u, v, len).with_similarity(w))?;
    }
    Ok(GraphBundle {
        unweighted,
        dissimilarity,
        similarity,
        sigma,
    })
}

/// Writes `unweighted.edges`, `dissimilarity.edges` and `similarity.edges`.
pub fn write_bundle(bundle: &GraphBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_edge_list(&bundle.unweighted, dir.join("unweighted.edges"))?;
    write_edge_list(&bundle.dissimilarity, dir.join("dissimilarity.edges"))?;
    write_edge_list(&bundle.similarity, dir.join("similarity.edges"))?;
    Ok(())
}

pub fn read_bundle(dir: impl AsRef<Path>) -> Result<GraphBundle> {
    let dir = dir.as_ref();
    let unweighted = crate::io::read_edge_list(dir.join("unweighted.edges"))?;
    let dissimilarity = crate::io::read_edge_list(dir.join("dissimilarity.edges"))?;
    let similarity = crate::io::read_edge_list(dir.join("similarity.edges"))?;
    if !(unweighted.same_topology(&dissimilarity) && unweighted.same_topology(&similarity)) {
        return Err(Error::TopologyMismatch);
    }
    Ok(GraphBundle {
        unweighted,
        dissimilarity,
        similarity,
        sigma: None,
    })
}

/// Reads `label,f0,f1,...` rows.
pub fn parse_features_csv<R: Read>(input: R, metric: FeatureMetric) -> Result<FeatureDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    let header_ok = header.get(0) == Some("label")
        && header.len() >= 2
        && header
            .iter()
            .skip(1)
            .enumerate()
            .all(|(i, h)| h == format!("f{i}"));
    if !header_ok {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `label,f0,f1,...`".into(),
        });
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let label: Label = rec[0].parse().map_err(|e: Error| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        let row = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad number {s:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(row);
        labels.push(label);
    }
    FeatureDataset::new(points, LabelSignal::new(labels), metric)
}

pub fn load_features_csv(path: impl AsRef<Path>, metric: FeatureMetric) -> Result<FeatureDataset> {
    parse_features_csv(fs::File::open(path)?, metric)
}

pub fn write_features_csv<W: Write>(ds: &FeatureDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.dim()).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for (p, l) in ds.points().iter().zip(ds.labels().labels()) {
        let mut row = vec![l.to_string()];
        row.extend(p.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(points: Vec<Vec<f64>>) -> FeatureDataset {
        let labels = LabelSignal::new(vec![Label::Pos; points.len()]);
        FeatureDataset::new(points, labels, FeatureMetric::Euclidean).unwrap()
    }

    #[test]
    fn two_points_single_edge() {
        let ds = dataset(vec![vec![0.0], vec![1.0]]);
        assert_eq!(knn_graph(&ds, 1).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn collinear_points_form_a_path() {
        let ds = dataset((0..4).map(|i| vec![i as f64]).collect());
        assert_eq!(knn_graph(&ds, 1).unwrap(), vec![(0, 1), (1, 2), (2, 3)]);
        assert!(knn_graph(&ds, 0).is_err());
        assert!(knn_graph(&ds, 4).is_err());
    }

    #[test]
    fn bundle_lengths_are_distances() {
        let ds = dataset(vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0]]);
        let b = build_bundle(&ds, 2).unwrap();
        assert_eq!(b.dissimilarity.edge(1, 2).unwrap().length, 5.0);
        assert_eq!(b.dissimilarity.edge(0, 1).unwrap().length, 3.0);
        assert!(b.unweighted.edges().all(|e| e.length == 1.0));
        // k-th (2nd) neighbor distances: 4, 5, 5.
        assert!((b.sigma.unwrap() - 14.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_have_unit_similarity() {
        let ds = dataset(vec![vec![0.0], vec![0.0], vec![2.0]]);
        let b = build_bundle(&ds, 2).unwrap();
        let e = b.similarity.edge(0, 1).unwrap();
        assert_eq!(e.similarity, Some(1.0));
        assert_eq!(e.length, MIN_LENGTH);
    }

    #[test]
    fn all_duplicates_degenerate() {
        let ds = dataset(vec![vec![1.0]; 3]);
        assert!(matches!(build_bundle(&ds, 1), Err(Error::DegenerateSigma)));
    }

    #[test]
    fn cosine_bundle_uses_similarity_directly() {
        let pts = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        let ds = FeatureDataset::new(
            pts,
            LabelSignal::new(vec![Label::Pos; 3]),
            FeatureMetric::Cosine,
        )
        .unwrap();
        let b = build_bundle(&ds, 1).unwrap();
        let e = b.similarity.edge(0, 1).unwrap();
        let w = 1.0 / 2f64.sqrt();
        assert!((e.similarity.unwrap() - w).abs() < 1e-12);
        assert!((e.length - (1.0 - w * w).sqrt()).abs() < 1e-12);
        assert_eq!(b.sigma, None);
        let zero = FeatureDataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            LabelSignal::new(vec![Label::Pos; 2]),
            FeatureMetric::Cosine,
        );
        assert!(zero.is_err());
    }

    #[test]
    fn two_circles_shape_and_determinism() {
        let a = gen_two_circles(7).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(
            a.labels()
                .labels()
                .iter()
                .filter(|&&l| l == Label::Neg)
                .count(),
            900
        );
        assert_eq!(a, gen_two_circles(7).unwrap());
        assert_ne!(a.points(), gen_two_circles(8).unwrap().points());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let ds = FeatureDataset::new(
            vec![vec![0.5, -1.0], vec![2.0, 3.25]],
            LabelSignal::from_values(&[1, -1]).unwrap(),
            FeatureMetric::Euclidean,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_features_csv(&ds, &mut buf).unwrap();
        assert_eq!(
            parse_features_csv(buf.as_slice(), FeatureMetric::Euclidean).unwrap(),
            ds
        );
        assert!(parse_features_csv("".as_bytes(), FeatureMetric::Euclidean).is_err());
        assert!(parse_features_csv("label,f0\n".as_bytes(), FeatureMetric::Euclidean).is_err());
        assert!(
            parse_features_csv("label,f0\n1,0\n0,1\n".as_bytes(), FeatureMetric::Euclidean)
                .is_err()
        );
        assert!(parse_features_csv(
            "label,f0\n1,0\n-1,1,2\n".as_bytes(),
            FeatureMetric::Euclidean
        )
        .is_err());
        assert!(
            parse_features_csv("lab,f0\n1,0\n-1,1\n".as_bytes(), FeatureMetric::Euclidean).is_err()
        );
    }
}
