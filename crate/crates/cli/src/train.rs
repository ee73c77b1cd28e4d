use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use gil_core::config::{GraphSpec, RewireMode, TrainConfig};
use gil_core::data::{load_graph_records, split_dataset, GraphRecord};
use gil_core::isgr::Baseline;
use gil_core::models::{save_checkpoint, Arch};
use gil_core::train::{train, EpochRecord};
use gil_core::{Head, Model, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::manifest::{ensure_dir, write_json, Manifest};
use crate::{resolve_seed, usage, CliResult};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Egnn,
    Attention,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GraphArg {
    Knn,
    Fc,
    Rball,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RewireArg {
    None,
    Isgr,
    Fa,
    Digl,
}

impl From<RewireArg> for RewireMode {
    fn from(r: RewireArg) -> Self {
        match r {
            RewireArg::None => RewireMode::None,
            RewireArg::Isgr => RewireMode::Isgr,
            RewireArg::Fa => RewireMode::Fa,
            RewireArg::Digl => RewireMode::Digl,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Previous,
    Initial,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset in JSON-lines format.
    #[arg(long)]
    data: PathBuf,
    /// Run directory; created if missing.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "egnn")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "none")]
    rewire: RewireArg,
    #[arg(long, value_enum, default_value = "knn")]
    graph: GraphArg,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 1.6)]
    radius: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    /// Epochs without validation improvement before stopping.
    #[arg(long, default_value_t = 30)]
    early_stopping: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Dropout rate (default: 0 for egnn, 0.1 for attention).
    #[arg(long)]
    dropout: Option<f64>,
    /// Multi-scale distance masks (attention model).
    #[arg(long)]
    multiscale: bool,
    /// Threshold on the growth of one order's strength; `inf` disables rewiring.
    #[arg(long, default_value = "0.05")]
    isgr_threshold: f64,
    #[arg(long, default_value_t = 10)]
    isgr_interval: usize,
    #[arg(long, default_value_t = 8)]
    isgr_k0: usize,
    #[arg(long, default_value_t = 8)]
    isgr_batch: usize,
    #[arg(long, default_value_t = 32)]
    isgr_context_budget: usize,
    #[arg(long, value_enum, default_value = "previous")]
    isgr_baseline: BaselineArg,
    /// Let the controller treat FC graphs as KNN with k = n - 1.
    #[arg(long)]
    isgr_allow_fc: bool,
    #[arg(long, default_value_t = 0.15)]
    digl_alpha: f64,
    #[arg(long, default_value_t = 8)]
    digl_k: usize,
    /// Seeds model initialization, shuffling, dropout and the controller.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seeds the 80/10/10 split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

/// Everything needed to repeat a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub split_seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub arch: Arch,
    pub rewire: RewireMode,
    pub seed: u64,
    pub test_mae: Option<f64>,
    pub best_val_mae: Option<f64>,
    pub best_epoch: usize,
    pub best_k: Option<usize>,
    pub final_k: Option<usize>,
    pub k_trajectory: Vec<usize>,
    pub stopped_early: bool,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub epochs: Vec<EpochRecord>,
}

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.json";
pub const ISGR_LOG_FILE: &str = "isgr.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn load_records(path: &Path) -> CliResult<Vec<GraphRecord>> {
    if !path.is_file() {
        return Err(usage(format!("dataset {} not found", path.display())));
    }
    let recs = load_graph_records(path)?;
    if recs.is_empty() {
        return Err(usage(format!("dataset {} has no records", path.display())));
    }
    Ok(recs)
}

pub fn head_for(records: &[GraphRecord]) -> CliResult<Head> {
    let graph = records.iter().all(|r| r.graph_target.is_some());
    let node = records.iter().all(|r| r.node_targets.is_some());
    match (graph, node) {
        (true, false) => Ok(Head::GraphScalar),
        (false, true) => Ok(Head::NodeVector),
        _ => Err(usage("every record needs exactly one kind of target, consistently")),
    }
}

fn build_config(a: &TrainArgs, records: &[GraphRecord], seed: u64) -> CliResult<RunConfig> {
    let head = head_for(records)?;
    let in_features = records[0].features.first().map_or(0, Vec::len);
    if in_features == 0 {
        return Err(usage("records carry no node features"));
    }
    let rewire: RewireMode = a.rewire.into();
    let base = match a.model {
        ModelArg::Egnn => ModelConfig::egnn(head, in_features, seed),
        ModelArg::Attention => ModelConfig::attention(head, in_features, seed),
    };
    let model = ModelConfig {
        hidden: a.hidden,
        depth: a.depth,
        dropout: a.dropout.unwrap_or(base.dropout),
        multiscale: a.multiscale,
        full_last_layer: rewire == RewireMode::Fa,
        ..base
    };
    let mut train = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        early_stopping: a.early_stopping,
        graph: match a.graph {
            GraphArg::Knn => GraphSpec::Knn { k: a.k },
            GraphArg::Fc => GraphSpec::Fc,
            GraphArg::Rball => GraphSpec::RBall { radius: a.radius },
        },
        rewire,
        seed,
        ..TrainConfig::default()
    };
    train.adam.lr = a.lr;
    train.isgr.threshold = a.isgr_threshold;
    train.isgr.interval = a.isgr_interval;
    train.isgr.k0 = a.isgr_k0;
    train.isgr.batch_graphs = a.isgr_batch;
    train.isgr.context_budget = a.isgr_context_budget;
    train.isgr.allow_fc = a.isgr_allow_fc;
    train.isgr.baseline = match a.isgr_baseline {
        BaselineArg::Previous => Baseline::Previous,
        BaselineArg::Initial => Baseline::Initial,
    };
    train.digl.alpha = a.digl_alpha;
    train.digl.top_k = Some(a.digl_k);
    train.validate().map_err(|e| usage(e.to_string()))?;
    Ok(RunConfig {
        data: a.data.clone(),
        split_seed: a.split_seed,
        model,
        train,
    })
}

pub fn run(a: TrainArgs) -> CliResult<()> {
    let seed = resolve_seed(a.seed)?;
    let records = load_records(&a.data)?;
    let cfg = build_config(&a, &records, seed)?;
    let dir = ensure_dir(&a.out_dir)?;
    let mut manifest = Manifest::new("train", Some(seed));
    manifest.input(&a.data)?;
    write_json(&dir.join(CONFIG_FILE), &cfg)?;

    let split = split_dataset(&records, cfg.split_seed);
    let model = Model::new(cfg.model.clone()).map_err(|e| usage(e.to_string()))?;
    let isgr_path = dir.join(ISGR_LOG_FILE);
    let mut isgr_log = BufWriter::new(File::create(&isgr_path)?);
    let started = Instant::now();
    let outcome = train(model, &split, &cfg.train, Some(&mut isgr_log))?;
    isgr_log.flush()?;
    drop(isgr_log);
    log::info!("trained in {:.1?}", started.elapsed());

    let ckpt = dir.join(CHECKPOINT_FILE);
    save_checkpoint(&outcome.model, &ckpt)?;
    let metrics = Metrics {
        arch: cfg.model.arch,
        rewire: cfg.train.rewire,
        seed,
        test_mae: outcome.test_mae,
        best_val_mae: outcome.best_val_mae,
        best_epoch: outcome.best_epoch,
        best_k: outcome.best_k,
        final_k: outcome.final_k,
        k_trajectory: outcome.isgr.as_ref().map(|s| s.k_trajectory()).unwrap_or_default(),
        stopped_early: outcome.stopped_early,
        train_size: split.train.len(),
        val_size: split.val.len(),
        test_size: split.test.len(),
        epochs: outcome.epochs,
    };
    let metrics_path = dir.join(METRICS_FILE);
    write_json(&metrics_path, &metrics)?;
    for p in [dir.join(CONFIG_FILE), ckpt, metrics_path, isgr_path] {
        manifest.output(&p)?;
    }
    manifest.write(&dir.join(MANIFEST_FILE))?;
    println!(
        "test_mae {} best_epoch {} final_k {}",
        metrics.test_mae.map_or("n/a".into(), |v| format!("{v:.6}")),
        metrics.best_epoch,
        metrics.final_k.map_or("n/a".into(), |k| k.to_string())
    );
    Ok(())
}
