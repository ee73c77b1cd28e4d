use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gil_core::data::GraphRecord;
use gil_core::graph::Construction;
use gil_core::interactions::{max_gap_order, total_variation, OrderGrid, ProfileConfig};
use gil_core::models::load_checkpoint;
use gil_core::train::{model_profile, record_graph};
use gil_core::{GeometricGraph, Level, Model, StrengthProfile};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::manifest::{ensure_dir, write_json, Manifest};
use crate::train::{load_records, Metrics, RunConfig, CONFIG_FILE, METRICS_FILE};
use crate::{resolve_seed, usage, CliResult};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    Graph,
    Node,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// `all`, a ratio range `start:end:step`, or a comma list of orders
    /// (integers) or ratios (fractions).
    #[arg(long, default_value = "all")]
    orders: String,
    /// Interaction level; must match the checkpoint's head.
    #[arg(long, value_enum)]
    level: Option<LevelArg>,
    /// Graphs drawn from the dataset.
    #[arg(long, default_value_t = 100)]
    graphs: usize,
    /// KNN neighbor count; defaults to the count the run ended with, else 8.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 64)]
    context_budget: usize,
    /// Node pairs per graph (default: all).
    #[arg(long)]
    pair_budget: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Analysis {
    pub level: Level,
    pub n: usize,
    pub graphs: usize,
    pub k: usize,
    pub seed: u64,
    pub orders: Vec<usize>,
    pub learned: Vec<f64>,
    pub random: Vec<f64>,
    pub tv_distance: f64,
    pub max_gap_order: usize,
    pub checkpoint_sha256: String,
}

pub const LEARNED_CSV: &str = "strength_learned.csv";
pub const RANDOM_CSV: &str = "strength_random.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";

pub fn parse_orders(spec: &str) -> CliResult<OrderGrid> {
    let bad = || usage(format!("cannot parse --orders `{spec}`"));
    let s = spec.trim();
    if s == "all" {
        return Ok(OrderGrid::All);
    }
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        let [start, end, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || !(end >= start) {
            return Err(bad());
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        return Ok(OrderGrid::Ratios(
            (0..count).map(|k| start + k as f64 * step).collect(),
        ));
    }
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if let Ok(ms) = items.iter().map(|t| t.parse::<usize>()).collect::<Result<Vec<_>, _>>() {
        return Ok(OrderGrid::Orders(ms));
    }
    items
        .iter()
        .map(|t| t.parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map(OrderGrid::Ratios)
        .map_err(|_| bad())
}

/// Neighbor count recorded by the run that produced the checkpoint.
fn run_k(checkpoint: &Path) -> Option<usize> {
    let dir = checkpoint.parent()?;
    let read = |name: &str| std::fs::read_to_string(dir.join(name)).ok();
    if let Some(m) = read(METRICS_FILE).and_then(|t| serde_json::from_str::<Metrics>(&t).ok()) {
        if let Some(k) = m.best_k {
            return Some(k);
        }
    }
    let cfg: RunConfig = serde_json::from_str(&read(CONFIG_FILE)?).ok()?;
    match cfg.train.graph {
        gil_core::config::GraphSpec::Knn { k } => Some(k),
        _ => None,
    }
}

fn pick_graphs(records: &[GraphRecord], count: usize, k: usize, seed: u64) -> CliResult<Vec<GeometricGraph>> {
    let count = count.min(records.len());
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), records.len(), count).into_vec();
    idx.sort_unstable();
    Ok(idx
        .into_iter()
        .map(|i| record_graph(&records[i], Construction::Knn(k)))
        .collect::<Result<_, _>>()?)
}

pub fn run(a: AnalyzeArgs) -> CliResult<()> {
    let seed = resolve_seed(a.seed)?;
    if a.graphs == 0 {
        return Err(usage("--graphs must be positive"));
    }
    if !a.checkpoint.is_file() {
        return Err(usage(format!("checkpoint {} not found", a.checkpoint.display())));
    }
    let grid = parse_orders(&a.orders)?;
    let learned_model = load_checkpoint(&a.checkpoint)?;
    let mut random_model = Model::new(learned_model.config().clone())?;
    let (shift, scale) = learned_model.output_affine();
    random_model.set_output_affine(shift, scale);

    let records = load_records(&a.data)?;
    let k = a.k.or_else(|| run_k(&a.checkpoint)).unwrap_or(8);
    if k == 0 {
        return Err(usage("--k must be positive"));
    }
    let graphs = pick_graphs(&records, a.graphs, k, seed)?;
    let refs: Vec<&GeometricGraph> = graphs.iter().collect();
    let level = a.level.map(|l| match l {
        LevelArg::Graph => Level::Graph,
        LevelArg::Node => Level::Node,
    });
    let cfg = ProfileConfig {
        orders: grid,
        pair_budget: a.pair_budget,
        context_budget: a.context_budget,
        seed,
        ..ProfileConfig::default()
    };
    let profile = |m: &Model| -> CliResult<StrengthProfile> {
        model_profile(m, &refs, level, &cfg).map_err(|e| match e {
            gil_core::Error::InvalidArgument(msg) | gil_core::Error::OutOfRange { detail: msg, .. } => usage(msg),
            other => other.into(),
        })
    };
    let learned = profile(&learned_model)?;
    let random = profile(&random_model)?;

    let dir = ensure_dir(&a.out_dir)?;
    let mut manifest = Manifest::new("analyze", Some(seed));
    let checkpoint_sha256 = manifest.input(&a.checkpoint)?;
    manifest.input(&a.data)?;
    let learned_path = dir.join(LEARNED_CSV);
    let random_path = dir.join(RANDOM_CSV);
    std::fs::write(&learned_path, learned.to_csv())?;
    std::fs::write(&random_path, random.to_csv())?;
    let analysis = Analysis {
        level: learned.level,
        n: learned.n,
        graphs: refs.len(),
        k,
        seed,
        orders: learned.orders.clone(),
        tv_distance: total_variation(&learned, &random)?,
        max_gap_order: max_gap_order(&learned, &random)?,
        learned: learned.j.clone(),
        random: random.j.clone(),
        checkpoint_sha256,
    };
    let analysis_path = dir.join(ANALYSIS_FILE);
    write_json(&analysis_path, &analysis)?;
    for p in [learned_path, random_path, analysis_path] {
        manifest.output(&p)?;
    }
    manifest.write(&dir.join(crate::train::MANIFEST_FILE))?;
    println!(
        "tv_distance {:.6} max_gap_order {}",
        analysis.tv_distance, analysis.max_gap_order
    );
    Ok(())
}
