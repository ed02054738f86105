use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use s2graph::bench::{
    dataset_stats, report, BenchConfig, ErrorSteps, Experiment, Method, RunOutput,
};
use s2graph::cut_analysis::theorem1_budget;
use s2graph::data::{
    build_bundle, load_features_csv, read_bundle, write_bundle, write_features_csv, FeatureMetric,
    SpreadKind, TwoCirclesConfig,
};
use s2graph::io::{read_edge_list, read_labels, write_labels};
use s2graph::s2::StopMode;
use s2graph::spectral::{CutoffRankRule, LaplacianKind, SpectralConfig};

#[derive(Parser)]
#[command(name = "s2graph", version, about = "Graph active learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Euclidean,
    Cosine,
}

impl From<MetricArg> for FeatureMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Euclidean => FeatureMetric::Euclidean,
            MetricArg::Cosine => FeatureMetric::Cosine,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SpreadArg {
    Variance,
    StdDev,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    Budget,
    FullCut,
}

#[derive(Clone, Copy, ValueEnum)]
enum LaplacianArg {
    Combinatorial,
    Normalized,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankArg {
    SampleCount,
    EstimatedCutoff,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the two-circles dataset as a feature CSV.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// How the radius spread values are read.
        #[arg(long, value_enum, default_value = "variance")]
        spread: SpreadArg,
        #[arg(long)]
        inner_spread: Option<f64>,
        #[arg(long)]
        outer_spread: Option<f64>,
    },
    /// Build the k-NN graph bundle of a feature CSV.
    BuildGraph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, value_enum, default_value = "euclidean")]
        metric: MetricArg,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run sampling trials on a graph bundle and write their summaries as JSON.
    Run {
        /// Directory written by `build-graph`.
        #[arg(long)]
        graphs: PathBuf,
        /// Comma-separated methods, or `all`.
        #[arg(long, default_value = "all")]
        method: String,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Minimum samples per trial.
        #[arg(long, default_value_t = 0)]
        budget: usize,
        #[arg(long, value_enum, default_value = "full-cut")]
        stop_mode: StopArg,
        /// `all`, `none`, `every:K` or a comma-separated list of steps.
        #[arg(long, default_value = "none")]
        error_steps: String,
        #[arg(long, default_value_t = 0.001)]
        threshold: f64,
        #[arg(long, default_value_t = 4)]
        proxy_power: u32,
        #[arg(long, value_enum, default_value = "combinatorial")]
        laplacian: LaplacianArg,
        #[arg(long, value_enum, default_value = "sample-count")]
        rank_rule: RankArg,
        #[arg(long, default_value_t = 500)]
        pocs_max_iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        pocs_tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate run files into table.csv, curves.csv and metadata.json.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the query budget bound of a labeled graph as JSON.
    BudgetBound {
        /// Edge list file.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
}

fn parse_error_steps(s: &str) -> anyhow::Result<ErrorSteps> {
    Ok(match s {
        "all" => ErrorSteps::All,
        "none" => ErrorSteps::None,
        _ => match s.strip_prefix("every:") {
            Some(k) => ErrorSteps::Every(k.parse().context("bad --error-steps stride")?),
            None => ErrorSteps::At(
                s.split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<Result<BTreeSet<_>, _>>()
                    .context("bad --error-steps list")?,
            ),
        },
    })
}

fn parse_methods(s: &str) -> anyhow::Result<Vec<Method>> {
    if s == "all" {
        return Ok(Method::ALL.to_vec());
    }
    let mut out = Vec::new();
    for m in s.split(',') {
        let m: Method = m.trim().parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate {
            seed,
            out,
            spread,
            inner_spread,
            outer_spread,
        } => {
            let mut cfg = TwoCirclesConfig {
                spread_kind: match spread {
                    SpreadArg::Variance => SpreadKind::Variance,
                    SpreadArg::StdDev => SpreadKind::StdDev,
                },
                ..Default::default()
            };
            if let Some(v) = inner_spread {
                cfg.inner_spread = v;
            }
            if let Some(v) = outer_spread {
                cfg.outer_spread = v;
            }
            let ds = cfg.generate(seed)?;
            let file =
                fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_features_csv(&ds, std::io::BufWriter::new(file))?;
        }
        Command::BuildGraph {
            input,
            k,
            metric,
            out_dir,
        } => {
            let ds = load_features_csv(&input, metric.into())
                .with_context(|| format!("reading {}", input.display()))?;
            let bundle = build_bundle(&ds, k)?;
            write_bundle(&bundle, &out_dir)?;
            write_labels(ds.labels(), out_dir.join("labels.txt"))?;
            write_json(
                &dataset_stats(&bundle, ds.labels())?,
                &out_dir.join("stats.json"),
            )?;
        }
        Command::Run {
            graphs,
            method,
            trials,
            seed,
            budget,
            stop_mode,
            error_steps,
            threshold,
            proxy_power,
            laplacian,
            rank_rule,
            pocs_max_iters,
            pocs_tol,
            out,
        } => {
            let bundle = read_bundle(&graphs)
                .with_context(|| format!("reading bundle in {}", graphs.display()))?;
            let signal = read_labels(graphs.join("labels.txt"))?;
            let stop_mode = match stop_mode {
                StopArg::Budget => StopMode::Budget,
                StopArg::FullCut => StopMode::FullCut,
            };
            if stop_mode == StopMode::Budget && budget == 0 {
                bail!("--stop-mode budget needs a positive --budget");
            }
            let cfg = BenchConfig {
                trials,
                seed,
                budget,
                stop_mode,
                spectral: SpectralConfig {
                    proxy_power,
                    pocs_max_iters,
                    pocs_tol,
                    cutoff_rank_rule: match rank_rule {
                        RankArg::SampleCount => CutoffRankRule::SampleCount,
                        RankArg::EstimatedCutoff => CutoffRankRule::EstimatedCutoff,
                    },
                    laplacian: match laplacian {
                        LaplacianArg::Combinatorial => LaplacianKind::Combinatorial,
                        LaplacianArg::Normalized => LaplacianKind::Normalized,
                    },
                },
                stability_threshold: threshold,
                error_steps: parse_error_steps(&error_steps)?,
            };
            let methods = parse_methods(&method)?;
            let exp = Experiment::new(&bundle, &signal, cfg.clone())?;
            let mut summaries = Vec::new();
            for m in methods {
                summaries.extend(exp.run(m)?);
            }
            let output = RunOutput {
                dataset: dataset_stats(&bundle, &signal)?,
                config: cfg,
                summaries,
            };
            write_json(&output, &out)?;
        }
        Command::Report { runs, out_dir } => {
            let mut loaded = Vec::new();
            for path in &runs {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                loaded.push(
                    serde_json::from_str::<RunOutput>(&text)
                        .with_context(|| format!("parsing {}", path.display()))?,
                );
            }
            report(&loaded, &out_dir)?;
        }
        Command::BudgetBound {
            graph,
            labels,
            epsilon,
        } => {
            let g = read_edge_list(&graph)?;
            let f = read_labels(&labels)?;
            let rep = theorem1_budget(&g, &f, epsilon)?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", serde_json::to_string_pretty(&rep)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
