//! Command-line front end. Every analysis writes the exact JSON body the
//! service would return, plus file artifacts where one exists.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use runlens_core::cpc::DEFAULT_BINS;
use runlens_core::ensemble::Split;
use runlens_core::explain::{DEFAULT_GRID_SIZE, DEFAULT_LIME_SAMPLES};
use runlens_core::ml;

use crate::engine::{Analysis, Engine, DEFAULT_MAX_LEAF_NODES, DEFAULT_PERMUTATION_REPEATS, DEFAULT_PREVIEW_ROWS};
use crate::error::{Error, Result};
use crate::export::{export, Artifact};
use crate::interchange::save_run_history;
use crate::service::{serve, AppState};
use crate::simulate::{simulate_run, SimulationOptions};

#[derive(Debug, Parser)]
#[command(name = "runlens", version, about = "Post-hoc analysis of AutoML run histories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one analysis and write its outputs.
    Analyze(AnalyzeArgs),
    /// Run every analysis and export of a run.
    Sweep(SweepArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Write a simulated random-search run.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisKind {
    Overview,
    Leaderboard,
    MergeGraph,
    StructureGraph,
    Cpc,
    Sampling,
    Coverage,
    HpImportance,
    Report,
    Surrogate,
    LocalSurrogate,
    Effects,
    Config,
    Intermediate,
    Ensemble,
    EnsemblePredictions,
    EnsembleSurfaces,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, env = "RUNLENS_OUT", default_value = ".")]
    pub out: PathBuf,
    #[arg(long, env = "RUNLENS_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    pub analysis: AnalysisKind,
    /// Run file; `--run` is accepted as well.
    pub run_file: Option<PathBuf>,
    #[arg(long, env = "RUNLENS_RUN")]
    pub run: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of candidates (merge order) shown in time-lapse analyses.
    #[arg(long)]
    pub at: Option<usize>,
    #[arg(long)]
    pub candidate: Option<String>,
    #[arg(long)]
    pub node: Option<String>,
    #[arg(long)]
    pub hyperparameter: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long)]
    pub structure: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_LEAF_NODES)]
    pub max_leaf_nodes: usize,
    #[arg(long, default_value_t = 0)]
    pub row: usize,
    #[arg(long, default_value_t = DEFAULT_LIME_SAMPLES)]
    pub n_samples: usize,
    #[arg(long, default_value_t = DEFAULT_PERMUTATION_REPEATS)]
    pub n_repeats: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long, default_value_t = DEFAULT_PREVIEW_ROWS)]
    pub limit: usize,
    #[arg(long, value_parser = parse_split, default_value = "validation")]
    pub split: Split,
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "validation" => Ok(Split::Validation),
        other => Err(format!("unknown split `{other}` (train | validation)")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub run_file: Option<PathBuf>,
    #[arg(long, env = "RUNLENS_RUN")]
    pub run: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Run file or directory of run files.
    #[arg(long, env = "RUNLENS_RUN")]
    pub run: PathBuf,
    #[arg(long, env = "RUNLENS_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "RUNLENS_CACHE_MB", default_value_t = 256)]
    pub cache_mb: usize,
    #[arg(long, env = "RUNLENS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "RUNLENS_HOST", default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "simulated")]
    pub run_id: String,
    #[arg(long, default_value_t = 30)]
    pub candidates: usize,
    #[arg(long, default_value_t = 500)]
    pub rows: usize,
}

fn resolve_run(positional: Option<PathBuf>, flag: Option<PathBuf>) -> Result<PathBuf> {
    positional
        .or(flag)
        .ok_or_else(|| Error::BadRequest("no run file given (positional argument or --run)".into()))
}

fn load(path: &Path, seed: u64) -> Result<(Engine, String)> {
    let mut engine = Engine::new(seed);
    let ids = engine.load_path(path)?;
    match ids.as_slice() {
        [id] => Ok((engine, id.clone())),
        _ => Err(Error::BadRequest(format!(
            "{} must hold exactly one run, found {}",
            path.display(),
            ids.len()
        ))),
    }
}

fn write(out: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn need(value: &Option<String>, flag: &str) -> Result<String> {
    value
        .clone()
        .ok_or_else(|| Error::BadRequest(format!("this analysis needs --{flag}")))
}

/// Engine request and accompanying artifacts of a CLI analysis.
fn plan(a: &AnalyzeArgs) -> Result<(Option<Analysis>, Vec<Artifact>)> {
    let cand = || need(&a.candidate, "candidate");
    Ok(match a.analysis {
        AnalysisKind::Overview => (Some(Analysis::Overview), vec![]),
        AnalysisKind::Leaderboard => (Some(Analysis::Leaderboard), vec![]),
        AnalysisKind::MergeGraph => (None, vec![Artifact::MergeGraph { at: a.at }]),
        AnalysisKind::StructureGraph => (Some(Analysis::StructureGraph { at: a.at }), vec![]),
        AnalysisKind::Cpc => (Some(Analysis::Cpc { brush: Vec::new() }), vec![]),
        AnalysisKind::Sampling => (
            Some(Analysis::Sampling {
                hyperparameter: need(&a.hyperparameter, "hyperparameter")?,
                bins: a.bins,
            }),
            vec![],
        ),
        AnalysisKind::Coverage => (
            None,
            vec![Artifact::CoverageEmbedding { at: a.at }, Artifact::CoverageHeatmap { at: a.at }],
        ),
        AnalysisKind::HpImportance => (
            Some(Analysis::HpImportance {
                structure: a.structure.clone(),
            }),
            vec![Artifact::ImportanceTable {
                structure: a.structure.clone(),
            }],
        ),
        AnalysisKind::Report => (Some(Analysis::Report { candidate: cand()? }), vec![]),
        AnalysisKind::Surrogate => (
            Some(Analysis::Surrogate {
                candidate: cand()?,
                node: a.node.clone(),
                max_leaf_nodes: a.max_leaf_nodes,
            }),
            vec![Artifact::SurrogateTree {
                candidate: cand()?,
                node: a.node.clone(),
                max_leaf_nodes: a.max_leaf_nodes,
            }],
        ),
        AnalysisKind::LocalSurrogate => (
            Some(Analysis::LocalSurrogate {
                candidate: cand()?,
                node: a.node.clone(),
                row: a.row,
                n_samples: a.n_samples,
            }),
            vec![],
        ),
        AnalysisKind::Effects => (
            Some(Analysis::Effects {
                candidate: cand()?,
                node: a.node.clone(),
                n_repeats: a.n_repeats,
                grid_size: a.grid_size,
            }),
            vec![Artifact::PermutationImportance {
                candidate: cand()?,
                node: a.node.clone(),
                n_repeats: a.n_repeats,
            }],
        ),
        AnalysisKind::Config => (
            Some(Analysis::Config { candidate: cand()? }),
            vec![Artifact::Config { candidate: cand()? }],
        ),
        AnalysisKind::Intermediate => {
            let node = need(&a.node, "node")?;
            (
                Some(Analysis::Intermediate {
                    candidate: cand()?,
                    node: node.clone(),
                    limit: a.limit,
                }),
                vec![Artifact::IntermediateDataset {
                    candidate: cand()?,
                    node: Some(node),
                }],
            )
        }
        AnalysisKind::Ensemble => (Some(Analysis::Ensemble { split: a.split }), vec![]),
        AnalysisKind::EnsemblePredictions => (Some(Analysis::EnsemblePredictions { split: a.split }), vec![]),
        AnalysisKind::EnsembleSurfaces => (Some(Analysis::EnsembleSurfaces { split: a.split }), vec![]),
    })
}

/// File name of an analysis body: operation, then every parameter.
pub fn body_file_name(run_id: &str, analysis: &Analysis) -> String {
    let value = serde_json::to_value(analysis).expect("serializable analysis");
    let mut name = run_id.to_string();
    if let serde_json::Value::Object(map) = value {
        if let Some(op) = map.get("operation").and_then(|v| v.as_str()) {
            name.push('_');
            name.push_str(op);
        }
        for (k, v) in &map {
            match (k.as_str(), v) {
                ("operation", _) | (_, serde_json::Value::Null) => {}
                (_, serde_json::Value::Array(a)) if a.is_empty() => {}
                (_, serde_json::Value::String(s)) => name.push_str(&format!("_{s}")),
                (k, v) => name.push_str(&format!("_{k}{v}")),
            }
        }
    }
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.json")
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Vec<PathBuf>> {
    let path = resolve_run(args.run_file.clone(), args.run.clone())?;
    let (engine, run_id) = load(&path, args.common.seed)?;
    let (analysis, artifacts) = plan(args)?;
    let mut written = Vec::new();
    if let Some(a) = analysis {
        let body = engine.analyze(&run_id, &a)?;
        written.push(write(&args.common.out, &body_file_name(&run_id, &a), &body)?);
    }
    for art in artifacts {
        let f = export(&engine, &run_id, &art)?;
        written.push(write(&args.common.out, &f.file_name, &f.bytes)?);
    }
    Ok(written)
}

/// Every run-level analysis, every candidate-level analysis of supported
/// candidates, and every export, with default parameters.
pub fn sweep_requests(engine: &Engine, run_id: &str) -> Result<(Vec<Analysis>, Vec<Artifact>)> {
    let h = engine.run(run_id)?.history();
    let n = h.candidates.len();
    let mut analyses = vec![
        Analysis::Overview,
        Analysis::Leaderboard,
        Analysis::StructureGraph { at: None },
        Analysis::Cpc { brush: Vec::new() },
        Analysis::Coverage { at: None },
    ];
    let mut artifacts = vec![
        Artifact::MergeGraph { at: None },
        Artifact::CoverageEmbedding { at: None },
        Artifact::CoverageHeatmap { at: None },
    ];
    for at in 1..n.min(3) {
        analyses.push(Analysis::StructureGraph { at: Some(at) });
        analyses.push(Analysis::Coverage { at: Some(at) });
        artifacts.push(Artifact::MergeGraph { at: Some(at) });
    }
    for hp in &h.merged_space().hyperparameters {
        analyses.push(Analysis::Sampling {
            hyperparameter: hp.name.clone(),
            bins: DEFAULT_BINS,
        });
    }
    if h.scored().count() >= runlens_core::explain::MIN_SCORED_CANDIDATES {
        analyses.push(Analysis::HpImportance { structure: None });
        artifacts.push(Artifact::ImportanceTable { structure: None });
    }
    for c in h.ordered_candidates() {
        let candidate = c.id.clone();
        analyses.push(Analysis::Config {
            candidate: candidate.clone(),
        });
        artifacts.push(Artifact::Config {
            candidate: candidate.clone(),
        });
        if !c.pipeline.nodes.iter().all(|n| ml::is_supported(&n.primitive)) {
            continue;
        }
        analyses.push(Analysis::Report {
            candidate: candidate.clone(),
        });
        analyses.push(Analysis::Surrogate {
            candidate: candidate.clone(),
            node: None,
            max_leaf_nodes: DEFAULT_MAX_LEAF_NODES,
        });
        analyses.push(Analysis::LocalSurrogate {
            candidate: candidate.clone(),
            node: None,
            row: 0,
            n_samples: DEFAULT_LIME_SAMPLES,
        });
        analyses.push(Analysis::Effects {
            candidate: candidate.clone(),
            node: None,
            n_repeats: DEFAULT_PERMUTATION_REPEATS,
            grid_size: DEFAULT_GRID_SIZE,
        });
        artifacts.push(Artifact::SurrogateTree {
            candidate: candidate.clone(),
            node: None,
            max_leaf_nodes: DEFAULT_MAX_LEAF_NODES,
        });
        artifacts.push(Artifact::PermutationImportance {
            candidate: candidate.clone(),
            node: None,
            n_repeats: DEFAULT_PERMUTATION_REPEATS,
        });
        for node in std::iter::once(ml::SOURCE_NODE).chain(c.pipeline.nodes.iter().map(|n| n.id.as_str())) {
            analyses.push(Analysis::Intermediate {
                candidate: candidate.clone(),
                node: node.into(),
                limit: DEFAULT_PREVIEW_ROWS,
            });
            artifacts.push(Artifact::IntermediateDataset {
                candidate: candidate.clone(),
                node: Some(node.into()),
            });
        }
    }
    if h.ensemble.is_some() {
        for split in [Split::Validation, Split::Train] {
            analyses.push(Analysis::Ensemble { split });
            analyses.push(Analysis::EnsemblePredictions { split });
            analyses.push(Analysis::EnsembleSurfaces { split });
        }
    }
    Ok((analyses, artifacts))
}

pub fn sweep(args: &SweepArgs) -> Result<Vec<PathBuf>> {
    let path = resolve_run(args.run_file.clone(), args.run.clone())?;
    let (engine, run_id) = load(&path, args.common.seed)?;
    let (analyses, artifacts) = sweep_requests(&engine, &run_id)?;
    let mut written = Vec::new();
    for a in &analyses {
        let body = engine.analyze(&run_id, a)?;
        written.push(write(&args.common.out, &body_file_name(&run_id, a), &body)?);
    }
    for art in &artifacts {
        let f = export(&engine, &run_id, art)?;
        written.push(write(&args.common.out, &f.file_name, &f.bytes)?);
    }
    Ok(written)
}

pub fn simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let h = simulate_run(&SimulationOptions {
        run_id: args.run_id.clone(),
        n_candidates: args.candidates,
        n_rows: args.rows,
        seed: args.common.seed,
    })?;
    std::fs::create_dir_all(&args.common.out).map_err(|e| Error::io(&args.common.out, e))?;
    let json = save_run_history(&h, &args.common.out, &args.run_id)?;
    Ok(vec![json])
}

pub fn serve_blocking(args: &ServeArgs) -> Result<()> {
    let mut engine = Engine::new(args.seed);
    let ids = engine.load_path(&args.run)?;
    if ids.is_empty() {
        return Err(Error::BadRequest(format!("no run files in {}", args.run.display())));
    }
    let state = AppState::new(engine, args.cache_mb.saturating_mul(1 << 20));
    let addr = SocketAddr::new(args.host, args.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(&args.run, e))?;
    rt.block_on(async move {
        eprintln!("serving {} run(s) on http://{addr}", ids.len());
        serve(state, addr).await
    })
    .map_err(|e| Error::BadRequest(format!("cannot serve on {addr}: {e}")))
}

/// Runs a parsed command; returns the files written.
pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Analyze(a) => analyze(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Serve(a) => serve_blocking(&a).map(|_| Vec::new()),
    }
}
