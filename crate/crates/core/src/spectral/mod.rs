//! Spectral side of the toolkit: the similarity-graph Laplacian, greedy
//! cutoff-maximization sampling and POCS bandlimited reconstruction.

mod cutoff;
mod pocs;

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Label, LabelSignal, NodeId, WeightedGraph};

pub use cutoff::{cutoff_greedy_select, estimated_cutoff, CutoffSelector};
pub use pocs::{
    pocs_reconstruct, pocs_reconstruct_traced, pocs_reconstruct_values, reconstruction_rank,
    PocsOutput,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    /// `D - W`.
    #[default]
    Combinatorial,
    /// `I - D^{-1/2} W D^{-1/2}`.
    Normalized,
}

/// How many low-frequency eigenvectors the reconstruction keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CutoffRankRule {
    /// As many as there are samples.
    #[default]
    SampleCount,
    /// Every eigenvector whose eigenvalue lies below the cutoff frequency
    /// estimated from the sample set.
    EstimatedCutoff,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Power `k` of the `L^k` spectral proxy.
    pub proxy_power: u32,
    pub pocs_max_iters: usize,
    pub pocs_tol: f64,
    pub cutoff_rank_rule: CutoffRankRule,
    pub laplacian: LaplacianKind,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            proxy_power: 4,
            pocs_max_iters: 500,
            pocs_tol: 1e-6,
            cutoff_rank_rule: CutoffRankRule::SampleCount,
            laplacian: LaplacianKind::Combinatorial,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if self.proxy_power == 0 {
            return Err(Error::InvalidParameter(
                "proxy_power must be at least 1".into(),
            ));
        }
        if !(self.pocs_tol.is_finite() && self.pocs_tol > 0.0) {
            return Err(Error::InvalidParameter("pocs_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Eigenpairs sorted by ascending eigenvalue; column `j` of `vectors` pairs
/// with `values[j]`.
#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

pub(crate) fn sorted_eigen(matrix: DMatrix<f64>) -> Eigenpairs {
    let n = matrix.nrows();
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort: equal eigenvalues keep the solver's column order.
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&j| eig.eigenvalues[j]));
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Eigenpairs { values, vectors }
}

/// Dense graph Laplacian of a similarity graph, with lazily computed
/// eigenpairs.
#[derive(Debug)]
pub struct LaplacianModel {
    matrix: DMatrix<f64>,
    kind: LaplacianKind,
    components: Vec<Vec<NodeId>>,
    eigen: OnceLock<Eigenpairs>,
}

impl LaplacianModel {
    /// Builds the Laplacian from edge similarities. Edges without a
    /// similarity weight count as weight 1.
    pub fn from_graph(g: &WeightedGraph, kind: LaplacianKind) -> Self {
        let n = g.node_count();
        let mut w = DMatrix::<f64>::zeros(n, n);
        for e in g.edges() {
            let s = e.similarity.unwrap_or(1.0);
            w[(e.u, e.v)] = s;
            w[(e.v, e.u)] = s;
        }
        Self::from_similarity(w, kind)
    }

    /// Builds the Laplacian from a symmetric nonnegative similarity matrix.
    pub fn from_similarity(w: DMatrix<f64>, kind: LaplacianKind) -> Self {
        let n = w.nrows();
        let degree: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
        let matrix = match kind {
            LaplacianKind::Combinatorial => DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    degree[i] - w[(i, i)]
                } else {
                    -w[(i, j)]
                }
            }),
            LaplacianKind::Normalized => DMatrix::from_fn(n, n, |i, j| {
                if degree[i] == 0.0 || degree[j] == 0.0 {
                    0.0
                } else if i == j {
                    1.0 - w[(i, i)] / degree[i]
                } else {
                    -w[(i, j)] / (degree[i] * degree[j]).sqrt()
                }
            }),
        };
        let components = positive_components(&w);
        Self {
            matrix,
            kind,
            components,
            eigen: OnceLock::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn kind(&self) -> LaplacianKind {
        self.kind
    }

    /// Components of the positive-similarity graph, ordered by smallest node.
    pub fn components(&self) -> &[Vec<NodeId>] {
        &self.components
    }

    pub fn eigen(&self) -> &Eigenpairs {
        self.eigen.get_or_init(|| sorted_eigen(self.matrix.clone()))
    }

    /// Writes `index,eigenvalue` rows.
    pub fn write_eigenvalues_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "eigenvalue"])?;
        for (i, v) in self.eigen().values.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn positive_components(w: &DMatrix<f64>) -> Vec<Vec<NodeId>> {
    let n = w.nrows();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && v != u && w[(u, v)] > 0.0 {
                    seen[v] = true;
                    comp.push(v);
                    stack.push(v);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Real-valued label predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftLabels(pub Vec<f64>);

impl SoftLabels {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sign of each soft label; exact zero maps to `+1`.
pub fn threshold(soft: &SoftLabels) -> Result<LabelSignal> {
    soft.0
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if !v.is_finite() {
                Err(Error::NonFinite(i))
            } else if v >= 0.0 {
                Ok(Label::Pos)
            } else {
                Ok(Label::Neg)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(LabelSignal::new)
}
