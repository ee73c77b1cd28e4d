//! Supervised training with optional connectivity rewiring.

use std::io::Write;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{GraphSpec, RewireMode, TrainConfig};
use crate::data::{GraphRecord, Split};
use crate::error::{Error, Result};
use crate::graph::{rewire_digl, Construction, GeometricGraph, GraphView};
use crate::interactions::{
    node_strength_profile, strength_profile, Level, ModelGame, ModelNodeGame, NodeSetFunction,
    OrderGrid, ProfileConfig, SetFunction, StrengthProfile,
};
use crate::isgr::{isgr_step, IsgrState};
use crate::models::{Head, Mode, Model};
use crate::tensor::{Adam, EarlyStopping, PlateauScheduler, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: Option<f64>,
    pub lr: f64,
    pub k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation error.
    pub model: Model,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mae: Option<f64>,
    pub test_mae: Option<f64>,
    /// Neighbor count the best parameters were trained with.
    pub best_k: Option<usize>,
    pub final_k: Option<usize>,
    pub isgr: Option<IsgrState>,
    pub stopped_early: bool,
}

/// Builds the graph for one record: explicit edges when the record has them,
/// otherwise the given construction over node ids `0..n`.
pub fn record_graph(rec: &GraphRecord, construction: Construction) -> Result<GeometricGraph> {
    let ids: Vec<usize> = (0..rec.coords.len()).collect();
    match &rec.edges {
        Some(edges) => GeometricGraph::explicit(ids, rec.coords.clone(), rec.features.clone(), edges.clone()),
        None => GeometricGraph::from_construction(ids, rec.coords.clone(), rec.features.clone(), construction),
    }
}

/// Flattened targets for a set of records.
enum Targets {
    Graph(Vec<f64>),
    Node(Vec<Vec<[f64; 3]>>),
}

fn targets(records: &[GraphRecord], head: Head) -> Result<Targets> {
    match head {
        Head::GraphScalar => records
            .iter()
            .map(|r| r.graph_target.ok_or_else(|| Error::invalid("record lacks a graph target")))
            .collect::<Result<_>>()
            .map(Targets::Graph),
        Head::NodeVector => records
            .iter()
            .map(|r| {
                let t = r
                    .node_targets
                    .clone()
                    .ok_or_else(|| Error::invalid("record lacks node targets"))?;
                if t.len() != r.coords.len() {
                    return Err(Error::invalid("node target count differs from node count"));
                }
                Ok(t)
            })
            .collect::<Result<_>>()
            .map(Targets::Node),
    }
}

/// Shift and scale that standardize the training targets.
fn standardization(t: &Targets) -> (f64, f64) {
    match t {
        Targets::Graph(ys) => {
            let n = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / n;
            let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
            (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
        }
        Targets::Node(ys) => {
            let (mut sq, mut count) = (0.0, 0usize);
            for v in ys.iter().flatten() {
                sq += v.iter().map(|x| x * x).sum::<f64>();
                count += 3;
            }
            let rms = (sq / count.max(1) as f64).sqrt();
            (0.0, if rms > 0.0 { rms } else { 1.0 })
        }
    }
}

fn target_tensor(t: &Targets, idx: &[usize], shift: f64, scale: f64) -> Tensor {
    match t {
        Targets::Graph(ys) => {
            Array2::from_shape_fn((idx.len(), 1), |(r, _)| (ys[idx[r]] - shift) / scale)
        }
        Targets::Node(ys) => {
            let rows: Vec<&[f64; 3]> = idx.iter().flat_map(|&g| ys[g].iter()).collect();
            Array2::from_shape_fn((rows.len(), 3), |(r, c)| rows[r][c] / scale)
        }
    }
}

/// Mean absolute error in target units (per component for vector targets).
pub fn mean_absolute_error(model: &Model, graphs: &[GeometricGraph], records: &[GraphRecord]) -> Result<f64> {
    let views: Vec<&dyn GraphView> = graphs.iter().map(|g| g as &dyn GraphView).collect();
    match targets(records, model.config().head)? {
        Targets::Graph(ys) => {
            let pred = model.predict_graphs(&views)?;
            Ok(pred.iter().zip(&ys).map(|(p, y)| (p - y).abs()).sum::<f64>() / ys.len() as f64)
        }
        Targets::Node(ys) => {
            let pred = model.predict_nodes(&views)?;
            let (mut err, mut count) = (0.0, 0usize);
            for (pg, yg) in pred.iter().zip(&ys) {
                for (p, y) in pg.iter().zip(yg) {
                    err += (0..3).map(|c| (p[c] - y[c]).abs()).sum::<f64>();
                    count += 3;
                }
            }
            Ok(err / count as f64)
        }
    }
}

/// Strength profile of `model` on `graphs` at the level of its head (or the
/// requested level).
pub fn model_profile(
    model: &Model,
    graphs: &[&GeometricGraph],
    level: Option<Level>,
    cfg: &ProfileConfig,
) -> Result<StrengthProfile> {
    let head_level = match model.config().head {
        Head::GraphScalar => Level::Graph,
        Head::NodeVector => Level::Node,
    };
    if level.is_some_and(|l| l != head_level) {
        return Err(Error::invalid(format!(
            "{head_level:?}-level model cannot produce a {:?}-level profile",
            level.unwrap()
        )));
    }
    match head_level {
        Level::Graph => {
            let games: Vec<ModelGame> = graphs
                .iter()
                .map(|g| ModelGame::new(model, g))
                .collect::<Result<_>>()?;
            let refs: Vec<&dyn SetFunction> = games.iter().map(|g| g as &dyn SetFunction).collect();
            strength_profile(&refs, cfg)
        }
        Level::Node => {
            let games: Vec<ModelNodeGame> = graphs
                .iter()
                .map(|g| ModelNodeGame::new(model, g))
                .collect::<Result<_>>()?;
            let refs: Vec<&dyn NodeSetFunction> =
                games.iter().map(|g| g as &dyn NodeSetFunction).collect();
            node_strength_profile(&refs, cfg)
        }
    }
}

struct GraphSets {
    train: Vec<GeometricGraph>,
    val: Vec<GeometricGraph>,
    test: Vec<GeometricGraph>,
}

fn build_sets(data: &Split<GraphRecord>, construction: Construction, cfg: &TrainConfig) -> Result<GraphSets> {
    let build = |recs: &[GraphRecord]| -> Result<Vec<GeometricGraph>> {
        recs.iter()
            .map(|r| {
                let g = record_graph(r, construction)?;
                if cfg.rewire == RewireMode::Digl {
                    rewire_digl(&g, cfg.digl.alpha, cfg.digl.top_k, cfg.digl.eps)
                } else {
                    Ok(g)
                }
            })
            .collect()
    };
    Ok(GraphSets {
        train: build(&data.train)?,
        val: build(&data.val)?,
        test: build(&data.test)?,
    })
}

/// Initial construction and, under ISGR, the initial neighbor count.
fn initial_construction(cfg: &TrainConfig, n_max: usize) -> Result<(Construction, Option<usize>)> {
    if cfg.rewire != RewireMode::Isgr {
        return Ok((cfg.graph.construction(), None));
    }
    match cfg.graph {
        GraphSpec::Knn { .. } => Ok((Construction::Knn(cfg.isgr.k0), Some(cfg.isgr.k0))),
        GraphSpec::Fc if cfg.isgr.allow_fc => {
            let k = n_max.saturating_sub(1).max(1);
            Ok((Construction::Knn(k), Some(k)))
        }
        GraphSpec::Fc => Err(Error::invalid(
            "rewiring by interaction strength needs KNN graphs (enable allow_fc for FC graphs)",
        )),
        GraphSpec::RBall { .. } => Err(Error::invalid(
            "rewiring by interaction strength needs KNN graphs, not r-ball graphs",
        )),
    }
}

fn isgr_seed(seed: u64) -> u64 {
    seed ^ 0x1559_52c0_94a1_f00d
}

/// Trains `model` on the split. Under [`RewireMode::Isgr`] a profile is
/// measured every `interval` epochs (starting before the first epoch) and the
/// graphs are rebuilt whenever the controller fires; controller records are
/// appended to `isgr_log` as JSON lines when given.
pub fn train(
    mut model: Model,
    data: &Split<GraphRecord>,
    cfg: &TrainConfig,
    mut isgr_log: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    if cfg.rewire == RewireMode::Fa && !model.config().full_last_layer {
        return Err(Error::invalid("+FA rewiring needs a model built with a full last layer"));
    }
    let head = model.config().head;
    let train_targets = targets(&data.train, head)?;
    let (shift, scale) = standardization(&train_targets);
    model.set_output_affine(shift, scale);

    let n_max = data.train.iter().map(|r| r.coords.len()).max().unwrap_or(0);
    let (construction, k0) = initial_construction(cfg, n_max)?;
    let mut graphs = build_sets(data, construction, cfg)?;
    let mut isgr = k0.map(|_| IsgrState::from_config(&cfg.isgr));
    let mut isgr_rng = ChaCha8Rng::seed_from_u64(isgr_seed(cfg.seed));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut adam = Adam::new(cfg.adam);
    let mut plateau = PlateauScheduler::new(cfg.adam.lr, cfg.plateau);
    let mut stopper = EarlyStopping::new(cfg.early_stopping);
    let mut best_params = model.params().to_vec();
    let mut best_epoch = 0;
    let mut best_val = None;
    let mut best_k = isgr.as_ref().map(|s| s.k);
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 0..cfg.epochs {
        if let Some(state) = isgr.as_mut() {
            if epoch % cfg.isgr.interval == 0 {
                let profile_cfg = ProfileConfig {
                    orders: OrderGrid::All,
                    pair_budget: cfg.isgr.pair_budget,
                    context_budget: cfg.isgr.context_budget,
                    seed: isgr_seed(cfg.seed).wrapping_add(epoch as u64),
                    ..Default::default()
                };
                let mut pick: Vec<usize> = (0..graphs.train.len()).collect();
                pick.shuffle(&mut isgr_rng);
                pick.truncate(cfg.isgr.batch_graphs);
                let batch: Vec<&GeometricGraph> = pick.iter().map(|&i| &graphs.train[i]).collect();
                let profile = model_profile(&model, &batch, cfg.isgr.level, &profile_cfg)?;
                if isgr_step(state, profile, epoch)? {
                    log::info!("epoch {epoch}: rewiring to k = {}", state.k);
                    graphs = build_sets(data, Construction::Knn(state.k), cfg)?;
                }
                if let Some(w) = isgr_log.as_deref_mut() {
                    let rec = state.history.last().expect("just recorded");
                    writeln!(w, "{}", serde_json::to_string(rec)?)?;
                }
            }
        }

        order.shuffle(&mut rng);
        let (mut loss_sum, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let views: Vec<&dyn GraphView> =
                chunk.iter().map(|&i| &graphs.train[i] as &dyn GraphView).collect();
            let batch = model.batch(&views);
            let target = target_tensor(&train_targets, chunk, shift, scale);
            let tape = Tape::new();
            let vars: Vec<_> = model.params().iter().map(|p| tape.leaf(p.clone())).collect();
            let out = model.forward(&tape, &vars, &batch, Mode::Train(&mut rng));
            let diff = out.sub(tape.constant(target));
            let loss = diff.mul(diff).mean();
            let value = loss.item();
            if !value.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite training loss at epoch {epoch}, batch {batches}"
                )));
            }
            let grads = tape.grad(loss, &vars)?;
            adam.step(model.params_mut(), &grads)?;
            loss_sum += value;
            batches += 1;
        }
        let train_loss = loss_sum / batches as f64;

        let val_mae = if graphs.val.is_empty() {
            None
        } else {
            Some(mean_absolute_error(&model, &graphs.val, &data.val)?)
        };
        let metric = val_mae.unwrap_or(train_loss);
        let lr = adam.lr();
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_mae,
            lr,
            k: isgr.as_ref().map(|s| s.k),
        });
        let (improved, stop) = stopper.update(metric);
        if improved {
            best_params = model.params().to_vec();
            best_epoch = epoch;
            best_val = val_mae;
            best_k = isgr.as_ref().map(|s| s.k);
        }
        adam.set_lr(plateau.step(metric)?);
        log::debug!("epoch {epoch}: loss {train_loss:.6} val {val_mae:?} lr {lr:e}");
        if stop {
            stopped_early = true;
            break;
        }
    }

    let final_k = isgr.as_ref().map(|s| s.k);
    model.params_mut().clone_from_slice(&best_params);
    if best_k != final_k {
        let k = best_k.expect("isgr active");
        graphs = build_sets(data, Construction::Knn(k), cfg)?;
    }
    let test_mae = if graphs.test.is_empty() {
        None
    } else {
        Some(mean_absolute_error(&model, &graphs.test, &data.test)?)
    };
    Ok(TrainOutcome {
        model,
        epochs,
        best_epoch,
        best_val_mae: best_val,
        test_mae,
        best_k,
        final_k,
        isgr,
        stopped_early,
    })
}

/// [`train`] with the interaction-strength controller switched on.
pub fn train_with_isgr(
    model: Model,
    data: &Split<GraphRecord>,
    cfg: &TrainConfig,
    isgr_log: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        rewire: RewireMode::Isgr,
        ..cfg.clone()
    };
    train(model, data, &cfg, isgr_log)
}
