//! Cutoff sampling followed by weighted S² once predictions stabilize.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Label, NodeId, WeightedGraph};
use crate::s2::{
    continue_s2, stop_rule, Oracle, Phase, S2Config, SamplerState, StopMode, StopRule, Variant,
};
use crate::spectral::{
    pocs_reconstruct, CutoffSelector, LaplacianModel, SoftLabels, SpectralConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub stability_threshold: f64,
    pub budget: usize,
    pub spectral: SpectralConfig,
    /// Seed and stop mode of the S² phase. The variant is always weighted.
    pub s2: S2Config,
}

impl HybridConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            stability_threshold: 0.001,
            budget,
            spectral: SpectralConfig::default(),
            s2: S2Config::new(budget, Variant::Weighted, seed),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.stability_threshold >= 0.0) {
            return Err(Error::InvalidThreshold(self.stability_threshold));
        }
        self.spectral.validate()
    }

    fn s2_config(&self) -> S2Config {
        S2Config {
            budget: self.budget,
            variant: Variant::Weighted,
            ..self.s2.clone()
        }
    }
}

/// `1 - cos(prev, curr)`, clamped to `[0, 2]`.
pub fn stability_stat(prev: &SoftLabels, curr: &SoftLabels) -> Result<f64> {
    if prev.len() != curr.len() {
        return Err(Error::DimensionMismatch(prev.len(), curr.len()));
    }
    let dot: f64 = prev
        .values()
        .iter()
        .zip(curr.values())
        .map(|(a, b)| a * b)
        .sum();
    let na = prev.values().iter().map(|a| a * a).sum::<f64>().sqrt();
    let nb = curr.values().iter().map(|b| b * b).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

/// Outcome of the spectral phase.
#[derive(Clone, Debug)]
pub struct SpectralPhase {
    /// Sampler state on the dissimilarity graph holding every phase-1 label.
    pub state: SamplerState,
    /// Number of samples taken when the switch fired.
    pub n_switch: Option<usize>,
    /// Reconstruction after each phase-1 sample.
    pub reconstructions: Vec<SoftLabels>,
    /// Stability statistic from the second sample on.
    pub stats: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct HybridOutcome {
    pub state: SamplerState,
    pub n_switch: Option<usize>,
    pub reconstructions: Vec<SoftLabels>,
}

fn check_topology(g_w: &WeightedGraph, g_d: &WeightedGraph) -> Result<()> {
    if g_w.same_topology(g_d) {
        Ok(())
    } else {
        Err(Error::TopologyMismatch)
    }
}

/// Runs phase 1: samples in cutoff order, reconstructing after each sample,
/// until the stability statistic drops below the threshold or the stop rule
/// of `cfg` holds.
pub fn spectral_phase<O: Oracle + ?Sized>(
    model: &LaplacianModel,
    g_d: &WeightedGraph,
    oracle: &mut O,
    cfg: &HybridConfig,
) -> Result<SpectralPhase> {
    let stop = stop_rule(g_d.node_count(), oracle, &cfg.s2_config())?;
    spectral_phase_until(model, g_d, oracle, cfg, &|s| stop.reached(s))
}

/// [`spectral_phase`] with an explicit stop rule.
pub fn spectral_phase_until<O: Oracle + ?Sized>(
    model: &LaplacianModel,
    g_d: &WeightedGraph,
    oracle: &mut O,
    cfg: &HybridConfig,
    stop: &dyn Fn(&SamplerState) -> bool,
) -> Result<SpectralPhase> {
    cfg.validate()?;
    if model.node_count() != g_d.node_count() {
        return Err(Error::DimensionMismatch(
            model.node_count(),
            g_d.node_count(),
        ));
    }
    let mut state = SamplerState::new(g_d);
    let mut samples: BTreeMap<NodeId, Label> = BTreeMap::new();
    let mut reconstructions = Vec::new();
    let mut stats = Vec::new();
    let mut selector = CutoffSelector::new(model, &cfg.spectral)?;
    while !stop(&state) {
        let Some(node) = selector.next().transpose()? else {
            break;
        };
        let label = oracle.query(node)?;
        state.ingest_sample(node, label, Phase::Spectral)?;
        samples.insert(node, label);
        let soft = pocs_reconstruct(model, &samples, &cfg.spectral)?;
        if let Some(prev) = reconstructions.last() {
            let stat = stability_stat(prev, &soft)?;
            stats.push(stat);
            if stat < cfg.stability_threshold {
                reconstructions.push(soft);
                return Ok(SpectralPhase {
                    state,
                    n_switch: Some(samples.len()),
                    reconstructions,
                    stats,
                });
            }
        }
        reconstructions.push(soft);
    }
    Ok(SpectralPhase {
        state,
        n_switch: None,
        reconstructions,
        stats,
    })
}

/// Continues a finished spectral phase with weighted S² on its graph.
pub fn resume_hybrid<O: Oracle + ?Sized>(
    phase: SpectralPhase,
    oracle: &mut O,
    cfg: &HybridConfig,
) -> Result<HybridOutcome> {
    let s2 = cfg.s2_config();
    let stop = match s2.stop_mode {
        StopMode::Budget => StopRule::Budget(cfg.budget),
        StopMode::FullCut => stop_rule(phase.state.node_count(), oracle, &s2)?,
    };
    resume_hybrid_until(phase, oracle, s2.seed, &|s| stop.reached(s))
}

/// [`resume_hybrid`] with an explicit seed and stop rule. A phase that never
/// switched is returned as is.
pub fn resume_hybrid_until<O: Oracle + ?Sized>(
    phase: SpectralPhase,
    oracle: &mut O,
    seed: u64,
    stop: &dyn Fn(&SamplerState) -> bool,
) -> Result<HybridOutcome> {
    let SpectralPhase {
        mut state,
        n_switch,
        reconstructions,
        ..
    } = phase;
    if n_switch.is_some() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        continue_s2(
            &mut state,
            oracle,
            Variant::Weighted,
            &mut rng,
            true,
            stop,
            &mut |_| {},
        )?;
    }
    Ok(HybridOutcome {
        state,
        n_switch,
        reconstructions,
    })
}

/// Full hybrid run on a similarity graph `g_w` and a dissimilarity graph
/// `g_d` with the same edges.
pub fn run_hybrid<O: Oracle + ?Sized>(
    g_w: &WeightedGraph,
    g_d: &WeightedGraph,
    oracle: &mut O,
    cfg: &HybridConfig,
) -> Result<HybridOutcome> {
    check_topology(g_w, g_d)?;
    let model = LaplacianModel::from_graph(g_w, cfg.spectral.laplacian);
    let phase = spectral_phase(&model, g_d, oracle, cfg)?;
    resume_hybrid(phase, oracle, cfg)
}
