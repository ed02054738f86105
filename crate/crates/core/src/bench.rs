//! Multi-trial experiment harness and report files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::GraphBundle;
use crate::error::{Error, Result};
use crate::graph::{cut_edges, Label, LabelSignal, NodeId, WeightedGraph};
use crate::hybrid::{
    resume_hybrid_until, spectral_phase_until, HybridConfig, HybridOutcome, SpectralPhase,
};
use crate::s2::{
    continue_s2, Oracle, Phase, QueryRecord, S2Config, SamplerState, SignalOracle, StopMode,
    Variant,
};
use crate::spectral::{
    pocs_reconstruct, threshold, CutoffSelector, LaplacianModel, SoftLabels, SpectralConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    UnweightedS2,
    WeightedS2,
    Cutoff,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::UnweightedS2,
        Method::WeightedS2,
        Method::Cutoff,
        Method::Hybrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::UnweightedS2 => "unweighted_s2",
            Method::WeightedS2 => "weighted_s2",
            Method::Cutoff => "cutoff",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method {s:?}")))
    }
}

/// Steps at which the classification error is evaluated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSteps {
    None,
    All,
    Every(usize),
    At(BTreeSet<usize>),
}

impl ErrorSteps {
    fn wants(&self, step: usize) -> bool {
        match self {
            ErrorSteps::None => false,
            ErrorSteps::All => true,
            ErrorSteps::Every(k) => *k > 0 && step % k == 0,
            ErrorSteps::At(set) => set.contains(&step),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub trials: usize,
    pub seed: u64,
    /// Minimum number of samples per trial.
    pub budget: usize,
    /// `budget` stops at the budget; `full_cut` additionally keeps sampling
    /// until every cut edge is discovered.
    pub stop_mode: StopMode,
    pub spectral: SpectralConfig,
    pub stability_threshold: f64,
    pub error_steps: ErrorSteps,
}

impl BenchConfig {
    pub fn new(trials: usize, seed: u64, budget: usize, stop_mode: StopMode) -> Self {
        Self {
            trials,
            seed,
            budget,
            stop_mode,
            spectral: SpectralConfig::default(),
            stability_threshold: 0.001,
            error_steps: ErrorSteps::All,
        }
    }
}

/// Seed of trial `t`: stream `t` of a generator keyed by the master seed,
/// so adding trials leaves earlier ones untouched.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng.next_u64()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub step: usize,
    pub node: NodeId,
    pub phase: Phase,
    /// Fraction of all nodes mislabeled after reconstruction; absent at
    /// steps where it was not evaluated.
    pub error: Option<f64>,
    pub cut_found: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub method: Method,
    pub seed: u64,
    /// Step at which the last cut edge was discovered.
    pub samples_to_full_cut: Option<usize>,
    pub n_switch: Option<usize>,
    pub error_curve: Vec<ExperimentRecord>,
}

/// Size statistics of the cut a signal induces on a bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n: usize,
    pub edges: usize,
    pub cut_size: usize,
    pub boundary_size: usize,
    /// Mean cut-edge length over mean non-cut-edge length on the
    /// dissimilarity graph.
    pub length_ratio: f64,
    pub sigma: Option<f64>,
}

pub fn dataset_stats(bundle: &GraphBundle, signal: &LabelSignal) -> Result<DatasetStats> {
    let g = &bundle.dissimilarity;
    let cut = cut_edges(g, signal)?;
    let boundary: BTreeSet<NodeId> = cut.iter().flat_map(|e| [e.pos, e.neg]).collect();
    let cut_len: f64 = cut.iter().map(|e| e.length).sum();
    let all_len: f64 = g.edges().map(|e| e.length).sum();
    let non_cut = g.edge_count() - cut.len();
    let length_ratio = if cut.is_empty() || non_cut == 0 {
        f64::NAN
    } else {
        (cut_len / cut.len() as f64) / ((all_len - cut_len) / non_cut as f64)
    };
    Ok(DatasetStats {
        n: g.node_count(),
        edges: g.edge_count(),
        cut_size: cut.len(),
        boundary_size: boundary.len(),
        length_ratio,
        sigma: bundle.sigma,
    })
}

/// Error of the POCS completion from the first `step` queries of a log.
pub fn prefix_error(
    model: &LaplacianModel,
    signal: &LabelSignal,
    log: &[QueryRecord],
    step: usize,
    cfg: &SpectralConfig,
) -> Result<f64> {
    let samples: BTreeMap<NodeId, Label> = log[..step].iter().map(|r| (r.node, r.label)).collect();
    soft_error(&pocs_reconstruct(model, &samples, cfg)?, signal)
}

fn soft_error(soft: &SoftLabels, signal: &LabelSignal) -> Result<f64> {
    Ok(threshold(soft)?.error_rate(signal))
}

/// Shared inputs of one experiment.
pub struct Experiment<'a> {
    bundle: &'a GraphBundle,
    signal: &'a LabelSignal,
    cfg: BenchConfig,
    model: LaplacianModel,
    cut_size: usize,
}

impl<'a> Experiment<'a> {
    pub fn new(bundle: &'a GraphBundle, signal: &'a LabelSignal, cfg: BenchConfig) -> Result<Self> {
        signal.check_matches(&bundle.similarity)?;
        if !(bundle.similarity.same_topology(&bundle.dissimilarity)
            && bundle.similarity.same_topology(&bundle.unweighted))
        {
            return Err(Error::TopologyMismatch);
        }
        if cfg.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        let n = signal.len();
        if cfg.budget > n || (cfg.budget == 0 && cfg.stop_mode == StopMode::Budget) {
            return Err(Error::InvalidBudget {
                budget: cfg.budget,
                n,
            });
        }
        cfg.spectral.validate()?;
        let model = LaplacianModel::from_graph(&bundle.similarity, cfg.spectral.laplacian);
        let cut_size = cut_edges(&bundle.similarity, signal)?.len();
        Ok(Self {
            bundle,
            signal,
            cfg,
            model,
            cut_size,
        })
    }

    pub fn model(&self) -> &LaplacianModel {
        &self.model
    }

    pub fn config(&self) -> &BenchConfig {
        &self.cfg
    }

    pub fn cut_size(&self) -> usize {
        self.cut_size
    }

    fn done(&self, state: &SamplerState) -> bool {
        let budget_met = state.labeled_count() >= self.cfg.budget;
        match self.cfg.stop_mode {
            StopMode::Budget => budget_met,
            StopMode::FullCut => budget_met && state.discovered_cut().len() >= self.cut_size,
        }
    }

    fn s2_trial(&self, variant: Variant, seed: u64) -> Result<SamplerState> {
        let g: &WeightedGraph = match variant {
            Variant::Unweighted => &self.bundle.unweighted,
            Variant::Weighted => &self.bundle.dissimilarity,
        };
        let mut oracle = SignalOracle::new(self.signal);
        let mut state = SamplerState::new(g);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        continue_s2(
            &mut state,
            &mut oracle,
            variant,
            &mut rng,
            false,
            &|s| self.done(s),
            &mut |_| {},
        )?;
        Ok(state)
    }

    /// Cutoff order ingested on the dissimilarity graph until the stop rule
    /// holds, with the reconstruction errors of the requested steps.
    pub fn cutoff_run(&self) -> Result<SamplerState> {
        let mut oracle = SignalOracle::new(self.signal);
        let mut state = SamplerState::new(&self.bundle.dissimilarity);
        let mut selector = CutoffSelector::new(&self.model, &self.cfg.spectral)?;
        while !self.done(&state) {
            let Some(node) = selector.next().transpose()? else {
                break;
            };
            let label = oracle.query(node)?;
            state.ingest_sample(node, label, Phase::Spectral)?;
        }
        Ok(state)
    }

    fn hybrid_config(&self) -> HybridConfig {
        HybridConfig {
            stability_threshold: self.cfg.stability_threshold,
            budget: self.cfg.budget,
            spectral: self.cfg.spectral.clone(),
            s2: S2Config {
                budget: self.cfg.budget,
                variant: Variant::Weighted,
                seed: self.cfg.seed,
                stop_mode: self.cfg.stop_mode,
            },
        }
    }

    /// The deterministic spectral phase of the hybrid method.
    pub fn hybrid_phase(&self) -> Result<SpectralPhase> {
        let mut oracle = SignalOracle::new(self.signal);
        spectral_phase_until(
            &self.model,
            &self.bundle.dissimilarity,
            &mut oracle,
            &self.hybrid_config(),
            &|s| self.done(s),
        )
    }

    fn hybrid_trial(&self, phase: &SpectralPhase, seed: u64) -> Result<HybridOutcome> {
        let mut oracle = SignalOracle::new(self.signal);
        resume_hybrid_until(phase.clone(), &mut oracle, seed, &|s| self.done(s))
    }

    fn summarize(
        &self,
        method: Method,
        seed: u64,
        state: &SamplerState,
        n_switch: Option<usize>,
        known: &dyn Fn(usize) -> Option<f64>,
    ) -> Result<TrialSummary> {
        let log = state.query_log();
        let samples_to_full_cut = if self.cut_size == 0 {
            Some(0)
        } else {
            log.iter()
                .position(|r| r.cut_found >= self.cut_size)
                .map(|i| i + 1)
        };
        let mut curve = Vec::with_capacity(log.len());
        for (i, rec) in log.iter().enumerate() {
            let step = i + 1;
            let error = if self.cfg.error_steps.wants(step) {
                Some(match known(step) {
                    Some(e) => e,
                    None => prefix_error(&self.model, self.signal, log, step, &self.cfg.spectral)?,
                })
            } else {
                None
            };
            curve.push(ExperimentRecord {
                step,
                node: rec.node,
                phase: rec.phase,
                error,
                cut_found: rec.cut_found,
            });
        }
        Ok(TrialSummary {
            method,
            seed,
            samples_to_full_cut,
            n_switch,
            error_curve: curve,
        })
    }

    /// Runs every trial of `method`. The cutoff method is deterministic and
    /// yields one summary.
    pub fn run(&self, method: Method) -> Result<Vec<TrialSummary>> {
        let seeds: Vec<u64> = (0..self.cfg.trials)
            .map(|t| trial_seed(self.cfg.seed, t))
            .collect();
        match method {
            Method::UnweightedS2 | Method::WeightedS2 => {
                let variant = if method == Method::UnweightedS2 {
                    Variant::Unweighted
                } else {
                    Variant::Weighted
                };
                seeds
                    .iter()
                    .map(|&s| {
                        let state = self.s2_trial(variant, s)?;
                        self.summarize(method, s, &state, None, &|_| None)
                    })
                    .collect()
            }
            Method::Cutoff => {
                let state = self.cutoff_run()?;
                Ok(vec![self.summarize(
                    method,
                    self.cfg.seed,
                    &state,
                    None,
                    &|_| None,
                )?])
            }
            Method::Hybrid => {
                let phase = self.hybrid_phase()?;
                let phase_errors: Vec<f64> = phase
                    .reconstructions
                    .iter()
                    .map(|s| soft_error(s, self.signal))
                    .collect::<Result<_>>()?;
                let known = |step: usize| phase_errors.get(step - 1).copied();
                seeds
                    .iter()
                    .map(|&s| {
                        let out = self.hybrid_trial(&phase, s)?;
                        self.summarize(method, s, &out.state, out.n_switch, &known)
                    })
                    .collect()
            }
        }
    }
}

pub fn run_experiment(
    bundle: &GraphBundle,
    signal: &LabelSignal,
    method: Method,
    cfg: &BenchConfig,
) -> Result<Vec<TrialSummary>> {
    Experiment::new(bundle, signal, cfg.clone())?.run(method)
}

/// Everything one `run` invocation produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub dataset: DatasetStats,
    pub config: BenchConfig,
    pub summaries: Vec<TrialSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: Method,
    pub trials: usize,
    pub trials_full_cut: usize,
    pub mean_samples_to_full_cut: Option<f64>,
    pub mean_n_switch: Option<f64>,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn table_rows(summaries: &[TrialSummary]) -> Vec<TableRow> {
    let mut by_method: BTreeMap<Method, Vec<&TrialSummary>> = BTreeMap::new();
    for s in summaries {
        by_method.entry(s.method).or_default().push(s);
    }
    by_method
        .into_iter()
        .map(|(method, rows)| {
            let full: Vec<f64> = rows
                .iter()
                .filter_map(|s| s.samples_to_full_cut)
                .map(|v| v as f64)
                .collect();
            let switches: Vec<f64> = rows
                .iter()
                .filter_map(|s| s.n_switch)
                .map(|v| v as f64)
                .collect();
            TableRow {
                method,
                trials: rows.len(),
                trials_full_cut: full.len(),
                mean_samples_to_full_cut: mean(&full),
                mean_n_switch: mean(&switches),
            }
        })
        .collect()
}

/// Mean error per method and step over the trials that evaluated it.
pub fn mean_curves(summaries: &[TrialSummary]) -> BTreeMap<Method, Vec<(usize, f64, usize)>> {
    let mut acc: BTreeMap<Method, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for s in summaries {
        for r in &s.error_curve {
            if let Some(e) = r.error {
                acc.entry(s.method)
                    .or_default()
                    .entry(r.step)
                    .or_default()
                    .push(e);
            }
        }
    }
    acc.into_iter()
        .map(|(m, steps)| {
            (
                m,
                steps
                    .into_iter()
                    .map(|(step, v)| (step, mean(&v).unwrap_or(f64::NAN), v.len()))
                    .collect(),
            )
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `table.csv`, `curves.csv` and `metadata.json` into `dir`.
pub fn report(runs: &[RunOutput], dir: impl AsRef<Path>) -> Result<()> {
    if runs.is_empty() || runs.iter().all(|r| r.summaries.is_empty()) {
        return Err(Error::InvalidParameter("nothing to report".into()));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let summaries: Vec<TrialSummary> = runs
        .iter()
        .flat_map(|r| r.summaries.iter().cloned())
        .collect();

    let mut table = csv::Writer::from_path(dir.join("table.csv"))?;
    table.write_record([
        "method",
        "trials",
        "trials_full_cut",
        "mean_samples_to_full_cut",
        "mean_n_switch",
    ])?;
    for row in table_rows(&summaries) {
        table.write_record([
            row.method.to_string(),
            row.trials.to_string(),
            row.trials_full_cut.to_string(),
            fmt_opt(row.mean_samples_to_full_cut),
            fmt_opt(row.mean_n_switch),
        ])?;
    }
    table.flush()?;

    let mut curves = csv::Writer::from_path(dir.join("curves.csv"))?;
    curves.write_record(["method", "step", "mean_error", "trials"])?;
    for (method, points) in mean_curves(&summaries) {
        for (step, err, count) in points {
            curves.write_record([
                method.to_string(),
                step.to_string(),
                err.to_string(),
                count.to_string(),
            ])?;
        }
    }
    curves.flush()?;

    #[derive(Serialize)]
    struct Metadata<'a> {
        error_denominator: &'static str,
        runs: Vec<RunMeta<'a>>,
    }
    #[derive(Serialize)]
    struct RunMeta<'a> {
        methods: Vec<Method>,
        seeds: Vec<u64>,
        config: &'a BenchConfig,
        dataset: &'a DatasetStats,
    }
    let meta = Metadata {
        error_denominator: "all nodes; sampled nodes count as correctly labeled",
        runs: runs
            .iter()
            .map(|r| RunMeta {
                methods: r
                    .summaries
                    .iter()
                    .map(|s| s.method)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
                seeds: r.summaries.iter().map(|s| s.seed).collect(),
                config: &r.config,
                dataset: &r.dataset,
            })
            .collect(),
    };
    fs::write(
        dir.join("metadata.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_bundle, FeatureDataset, FeatureMetric};

    fn small() -> (GraphBundle, LabelSignal) {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..12 {
            let x = i as f64 + if i >= 6 { 0.3 } else { 0.0 };
            pts.push(vec![x, (i % 3) as f64 * 0.1]);
            labels.push(if i < 6 { -1 } else { 1 });
        }
        let ds = FeatureDataset::new(
            pts,
            LabelSignal::from_values(&labels).unwrap(),
            FeatureMetric::Euclidean,
        )
        .unwrap();
        (build_bundle(&ds, 2).unwrap(), ds.labels().clone())
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("random".parse::<Method>().is_err());
    }

    #[test]
    fn trial_seeds_are_prefix_stable() {
        let a: Vec<u64> = (0..5).map(|t| trial_seed(9, t)).collect();
        let b: Vec<u64> = (0..8).map(|t| trial_seed(9, t)).collect();
        assert_eq!(a[..], b[..5]);
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 5);
    }

    #[test]
    fn exhaustive_budget_has_zero_final_error() {
        let (bundle, signal) = small();
        for m in Method::ALL {
            let mut cfg = BenchConfig::new(1, 4, 12, StopMode::Budget);
            cfg.error_steps = ErrorSteps::At([12].into());
            let out = run_experiment(&bundle, &signal, m, &cfg).unwrap();
            let last = out[0].error_curve.last().unwrap();
            assert_eq!(last.step, 12);
            assert_eq!(last.error, Some(0.0), "{m}");
            assert!(out[0].samples_to_full_cut.is_some());
        }
    }

    #[test]
    fn full_cut_mode_reaches_cut() {
        let (bundle, signal) = small();
        let mut cfg = BenchConfig::new(3, 1, 0, StopMode::FullCut);
        cfg.error_steps = ErrorSteps::None;
        let out = run_experiment(&bundle, &signal, Method::WeightedS2, &cfg).unwrap();
        assert_eq!(out.len(), 3);
        for s in out {
            assert_eq!(s.samples_to_full_cut, Some(s.error_curve.len()));
        }
    }

    #[test]
    fn stats_count_cut() {
        let (bundle, signal) = small();
        let st = dataset_stats(&bundle, &signal).unwrap();
        assert!(st.cut_size >= 1);
        assert!(st.length_ratio > 1.0);
    }

    #[test]
    fn report_single_trial_means() {
        let (bundle, signal) = small();
        let cfg = BenchConfig::new(1, 2, 6, StopMode::Budget);
        let summaries = run_experiment(&bundle, &signal, Method::WeightedS2, &cfg).unwrap();
        let rows = table_rows(&summaries);
        assert_eq!(rows.len(), 1);
        assert_eq!(
            rows[0].mean_samples_to_full_cut,
            summaries[0].samples_to_full_cut.map(|v| v as f64)
        );
        let curves = mean_curves(&summaries);
        assert_eq!(curves[&Method::WeightedS2].len(), 6);
        let dir = tempfile::tempdir().unwrap();
        let run = RunOutput {
            dataset: dataset_stats(&bundle, &signal).unwrap(),
            config: cfg,
            summaries,
        };
        report(&[run], dir.path()).unwrap();
        assert!(dir.path().join("metadata.json").exists());
        assert!(report(&[], dir.path()).is_err());
    }
}
