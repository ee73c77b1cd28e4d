//! JSON-lines datasets.
//!
//! The first line is a metadata header `{"meta": {...}}`; every following
//! line is one [`DatasetRecord`]. Floats are written with the shortest
//! representation that round-trips the 8-byte value exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::physics::{hamiltonian, simulate, spring_forces, Integrator, ParticleSystem};
use crate::error::{Error, Result};
use crate::geometry::{norm, Vec3};

pub const GENERATOR_VERSION: &str = concat!("gil-core ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Per-particle force vectors.
    Newtonian,
    /// Total energy of the system.
    Hamiltonian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: usize,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub masses: Vec<f64>,
    /// `[mass, |velocity|]` per particle.
    pub node_features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_targets: Option<Vec<Vec3>>,
}

impl DatasetRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        let n = self.positions.len();
        if n == 0 {
            return Err("record has no particles".into());
        }
        if self.velocities.len() != n || self.masses.len() != n || self.node_features.len() != n {
            return Err("array lengths disagree with particle count".into());
        }
        match (&self.graph_target, &self.node_targets) {
            (Some(_), None) => Ok(()),
            (None, Some(t)) if t.len() == n => Ok(()),
            (None, Some(_)) => Err("node_targets length disagrees with particle count".into()),
            _ => Err("exactly one of graph_target / node_targets must be present".into()),
        }
    }

    pub fn task(&self) -> Task {
        if self.graph_target.is_some() {
            Task::Hamiltonian
        } else {
            Task::Newtonian
        }
    }

    pub fn to_graph_record(&self) -> GraphRecord {
        GraphRecord {
            coords: self.positions.clone(),
            features: self.node_features.clone(),
            edges: None,
            graph_target: self.graph_target,
            node_targets: self.node_targets.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub system: String,
    pub task: Task,
    pub particles: usize,
    pub systems: usize,
    pub steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub integrator: Integrator,
    pub box_side: f64,
    pub velocity_sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: Option<DatasetMeta>,
    pub records: Vec<DatasetRecord>,
}

pub fn record_from_state(id: usize, sys: &ParticleSystem, task: Task) -> Result<DatasetRecord> {
    let node_features = sys
        .masses
        .iter()
        .zip(&sys.velocities)
        .map(|(&m, v)| vec![m, norm(*v)])
        .collect();
    let (graph_target, node_targets) = match task {
        Task::Hamiltonian => (Some(hamiltonian(sys)?), None),
        Task::Newtonian => (None, Some(spring_forces(sys)?)),
    };
    Ok(DatasetRecord {
        id,
        positions: sys.positions.clone(),
        velocities: sys.velocities.clone(),
        masses: sys.masses.clone(),
        node_features,
        graph_target,
        node_targets,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub particles: usize,
    /// Independent initial conditions; each contributes `steps` records.
    pub systems: usize,
    pub steps: usize,
    pub dt: f64,
    pub task: Task,
    pub seed: u64,
    pub box_side: f64,
    pub velocity_sigma: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            particles: 10,
            systems: 1,
            steps: 500,
            dt: 0.01,
            task: Task::Newtonian,
            seed: 42,
            box_side: 2.0,
            velocity_sigma: 0.5,
        }
    }
}

/// Simulates `systems` independent spring systems in parallel and records
/// the state after every integration step. System `s` is seeded with
/// `seed + s`, so output does not depend on the worker count.
pub fn generate_spring_dataset(cfg: &GenerateConfig) -> Result<Dataset> {
    if cfg.particles == 0 || cfg.systems == 0 || cfg.steps == 0 {
        return Err(Error::invalid("particles, systems and steps must be positive"));
    }
    let per_system: Vec<Result<Vec<ParticleSystem>>> = (0..cfg.systems)
        .into_par_iter()
        .map(|s| {
            let init = ParticleSystem::random(
                cfg.particles,
                cfg.box_side,
                cfg.velocity_sigma,
                cfg.seed.wrapping_add(s as u64),
            )?;
            let mut traj = simulate(&init, cfg.dt, cfg.steps, Integrator::VelocityVerlet)?;
            traj.remove(0);
            Ok(traj)
        })
        .collect();
    let mut records = Vec::with_capacity(cfg.systems * cfg.steps);
    for traj in per_system {
        for state in traj? {
            records.push(record_from_state(records.len(), &state, cfg.task)?);
        }
    }
    Ok(Dataset {
        meta: Some(DatasetMeta {
            generator: GENERATOR_VERSION.to_string(),
            system: "spring".into(),
            task: cfg.task,
            particles: cfg.particles,
            systems: cfg.systems,
            steps: cfg.steps,
            dt: cfg.dt,
            seed: cfg.seed,
            integrator: Integrator::VelocityVerlet,
            box_side: cfg.box_side,
            velocity_sigma: cfg.velocity_sigma,
        }),
        records,
    })
}

/// Writes a trajectory as records `0..len`.
pub fn emit_dataset(
    trajectory: &[ParticleSystem],
    task: Task,
    out_path: &Path,
    meta: Option<DatasetMeta>,
) -> Result<Dataset> {
    if trajectory.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let records = trajectory
        .iter()
        .enumerate()
        .map(|(i, s)| record_from_state(i, s, task))
        .collect::<Result<Vec<_>>>()?;
    let ds = Dataset { meta, records };
    write_dataset(&ds, out_path)?;
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: DatasetMeta,
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(meta) = &ds.meta {
        serde_json::to_writer(&mut w, &MetaLine { meta: meta.clone() })?;
        w.write_all(b"\n")?;
    }
    for r in &ds.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    let mut meta = None;
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 && line.trim_start().starts_with("{\"meta\"") {
            let m: MetaLine = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: lineno,
                reason: e.to_string(),
            })?;
            meta = Some(m.meta);
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: lineno,
            reason: e.to_string(),
        })?;
        rec.validate()
            .map_err(|reason| Error::MalformedRecord { line: lineno, reason })?;
        records.push(rec);
    }
    Ok(Dataset { meta, records })
}

/// A generic geometric sample, for externally prepared data. When `edges` is
/// given the graph is used as-is (explicit construction). Spring-system
/// records load directly: `positions` and `node_features` are accepted as
/// aliases and unknown fields are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    #[serde(alias = "positions")]
    pub coords: Vec<Vec3>,
    #[serde(default, alias = "node_features")]
    pub features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_targets: Option<Vec<Vec3>>,
}

/// Loads one [`GraphRecord`] per line; a leading `{"meta": ...}` line is skipped.
pub fn load_graph_records(path: &Path) -> Result<Vec<GraphRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || (idx == 0 && line.trim_start().starts_with("{\"meta\"")) {
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        if rec.coords.is_empty() {
            return Err(Error::MalformedRecord {
                line: idx + 1,
                reason: "no nodes".into(),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle, then `floor(n/10)` records each to validation and test and
/// the rest to training. Fewer than ten records all go to training.
pub fn split_dataset<T: Clone>(records: &[T], seed: u64) -> Split<T> {
    let n = records.len();
    if n < 10 {
        log::warn!("{n} records cannot be split 80/10/10; using all for training");
        return Split {
            train: records.to_vec(),
            val: Vec::new(),
            test: Vec::new(),
        };
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_eval = n / 10;
    let pick = |ix: &[usize]| ix.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Split {
        val: pick(&order[..n_eval]),
        test: pick(&order[n_eval..2 * n_eval]),
        train: pick(&order[2 * n_eval..]),
    }
}
