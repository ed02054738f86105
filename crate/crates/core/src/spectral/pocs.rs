//! POCS bandlimited reconstruction.
//!
//! Iterates in coefficient space of the `r` lowest eigenvectors `U_r`:
//! reset-then-project is `c <- c + U_S^T (f_S - U_S c)`, which touches only
//! the sampled rows. The stopping test compares successive reset iterates,
//! which agree on `S`, so only `U_{S^c} dc` matters; its max-norm is
//! bracketed by 2-norm bounds that come for free and is computed exactly
//! only when the bounds straddle the tolerance.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{estimated_cutoff, CutoffRankRule, LaplacianModel, SoftLabels, SpectralConfig};
use crate::error::{Error, Result};
use crate::graph::{Label, NodeId};

/// Result of a traced reconstruction.
#[derive(Clone, Debug)]
pub struct PocsOutput {
    pub soft: SoftLabels,
    pub rank: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm differences of successive reset iterates, one per iteration.
    pub diffs: Vec<f64>,
}

pub fn pocs_reconstruct(
    model: &LaplacianModel,
    samples: &BTreeMap<NodeId, Label>,
    cfg: &SpectralConfig,
) -> Result<SoftLabels> {
    run(model, &values(samples), cfg, false).map(|o| o.soft)
}

/// Like [`pocs_reconstruct`] but records every iterate difference exactly.
pub fn pocs_reconstruct_traced(
    model: &LaplacianModel,
    samples: &BTreeMap<NodeId, Label>,
    cfg: &SpectralConfig,
) -> Result<PocsOutput> {
    run(model, &values(samples), cfg, true)
}

/// Traced reconstruction from real-valued observations.
pub fn pocs_reconstruct_values(
    model: &LaplacianModel,
    samples: &BTreeMap<NodeId, f64>,
    cfg: &SpectralConfig,
) -> Result<PocsOutput> {
    run(model, samples, cfg, true)
}

fn values(samples: &BTreeMap<NodeId, Label>) -> BTreeMap<NodeId, f64> {
    samples.iter().map(|(&v, l)| (v, l.value())).collect()
}

/// Number of eigenvectors kept for a sample set.
pub fn reconstruction_rank(
    model: &LaplacianModel,
    sampled: &[NodeId],
    cfg: &SpectralConfig,
) -> Result<usize> {
    let n = model.node_count();
    let r = match cfg.cutoff_rank_rule {
        CutoffRankRule::SampleCount => sampled.len(),
        CutoffRankRule::EstimatedCutoff => {
            let omega = estimated_cutoff(model, cfg.proxy_power, sampled)?;
            model.eigen().values.iter().filter(|&&l| l < omega).count()
        }
    };
    Ok(r.clamp(1, n.max(1)))
}

fn run(
    model: &LaplacianModel,
    samples: &BTreeMap<NodeId, f64>,
    cfg: &SpectralConfig,
    trace: bool,
) -> Result<PocsOutput> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if let Some((&v, _)) = samples.iter().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NonFinite(v));
    }
    let n = model.node_count();
    if let Some((&v, _)) = samples.iter().next_back().filter(|(&v, _)| v >= n) {
        return Err(Error::NodeOutOfRange { node: v, n });
    }
    let sampled: Vec<NodeId> = samples.keys().copied().collect();
    let f_s = DVector::from_iterator(sampled.len(), samples.values().copied());
    let rank = reconstruction_rank(model, &sampled, cfg)?;
    let u = &model.eigen().vectors;
    let u_s = DMatrix::from_fn(sampled.len(), rank, |i, j| u[(sampled[i], j)]);
    let mut in_s = vec![false; n];
    for &v in &sampled {
        in_s[v] = true;
    }
    let rest: Vec<NodeId> = (0..n).filter(|&v| !in_s[v]).collect();
    let mut u_rest: Option<DMatrix<f64>> = None;
    let mut exact_rest = |dc: &DVector<f64>| -> f64 {
        let m = u_rest
            .get_or_insert_with(|| DMatrix::from_fn(rest.len(), rank, |i, j| u[(rest[i], j)]));
        (&*m * dc).amax()
    };

    let tol = cfg.pocs_tol;
    let lower_scale = (rest.len().max(1) as f64).sqrt();
    // Reset of the zero vector has coefficients zero on S^c.
    let mut c = DVector::<f64>::zeros(rank);
    let mut fitted = DVector::<f64>::zeros(sampled.len());
    let mut diffs = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.pocs_max_iters {
        let dc = u_s.tr_mul(&(&f_s - &fitted));
        c += &dc;
        let u_s_dc = &u_s * &dc;
        fitted += &u_s_dc;
        iterations += 1;
        if !c.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite(iterations));
        }
        let diff = if trace || iterations == 1 {
            Some(exact_rest(&dc))
        } else {
            let total = dc.norm_squared();
            let upper = ((total - u_s_dc.norm_squared()).max(0.0) + 1e-13 * total).sqrt();
            if upper < tol {
                Some(upper)
            } else if upper / lower_scale >= tol * (1.0 + 1e-9) && total > 0.0 {
                None
            } else {
                Some(exact_rest(&dc))
            }
        };
        if trace {
            diffs.push(diff.unwrap_or(f64::NAN));
        }
        if diff.is_some_and(|d| d < tol) {
            converged = true;
            break;
        }
    }

    let mut x = u.columns(0, rank) * &c;
    for (&v, &value) in samples {
        x[v] = value;
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(PocsOutput {
        soft: SoftLabels(x.iter().copied().collect()),
        rank,
        iterations,
        converged,
        diffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, WeightedGraph};
    use crate::spectral::LaplacianKind;

    fn path(n: usize) -> WeightedGraph {
        WeightedGraph::from_edges(
            n,
            (0..n - 1).map(|i| Edge::new(i, i + 1, 1.0).with_similarity(1.0 + i as f64 * 0.1)),
        )
        .unwrap()
    }

    #[test]
    fn all_sampled_returns_labels() {
        let model = LaplacianModel::from_graph(&path(5), LaplacianKind::Combinatorial);
        let samples: BTreeMap<_, _> = [
            (0, Label::Pos),
            (1, Label::Neg),
            (2, Label::Pos),
            (3, Label::Pos),
            (4, Label::Neg),
        ]
        .into();
        let out = pocs_reconstruct(&model, &samples, &SpectralConfig::default()).unwrap();
        assert_eq!(out.values(), &[1.0, -1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn two_nodes_one_sample() {
        let model = LaplacianModel::from_graph(&path(2), LaplacianKind::Combinatorial);
        let samples: BTreeMap<_, _> = [(0, Label::Pos)].into();
        let out = pocs_reconstruct(&model, &samples, &SpectralConfig::default()).unwrap();
        assert_eq!(out.values()[0], 1.0);
        assert!((out.values()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn empty_samples_rejected() {
        let model = LaplacianModel::from_graph(&path(3), LaplacianKind::Combinatorial);
        assert!(matches!(
            pocs_reconstruct(&model, &BTreeMap::new(), &SpectralConfig::default()),
            Err(Error::EmptySamples)
        ));
        let bad: BTreeMap<_, _> = [(7, Label::Pos)].into();
        assert!(pocs_reconstruct(&model, &bad, &SpectralConfig::default()).is_err());
    }

    #[test]
    fn cheap_and_traced_runs_agree() {
        let model = LaplacianModel::from_graph(&path(12), LaplacianKind::Combinatorial);
        let samples: BTreeMap<_, _> = [(0, Label::Pos), (5, Label::Neg), (11, Label::Pos)].into();
        let cfg = SpectralConfig::default();
        let a = pocs_reconstruct(&model, &samples, &cfg).unwrap();
        let b = pocs_reconstruct_traced(&model, &samples, &cfg).unwrap();
        assert_eq!(b.diffs.len(), b.iterations);
        for (x, y) in a.values().iter().zip(b.soft.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn estimated_cutoff_rank_rule() {
        let model = LaplacianModel::from_graph(&path(8), LaplacianKind::Combinatorial);
        let cfg = SpectralConfig {
            cutoff_rank_rule: CutoffRankRule::EstimatedCutoff,
            ..Default::default()
        };
        let r = reconstruction_rank(&model, &[0, 7], &cfg).unwrap();
        assert!((1..=8).contains(&r));
        let samples: BTreeMap<_, _> = [(0, Label::Pos), (7, Label::Neg)].into();
        let out = pocs_reconstruct(&model, &samples, &cfg).unwrap();
        assert_eq!(out.values()[0], 1.0);
        assert_eq!(out.values()[7], -1.0);
    }
}
