//! Geometric predictors exposing graph-scalar and per-node-vector heads.
//!
//! Both architectures run on a [`GraphBatch`] and are differentiable through
//! the [`crate::tensor`] tape. Inference entry points (`predict_*`) always
//! run with dropout off, so a model is a deterministic function of its input
//! graph.

mod attention;
mod batch;
mod checkpoint;
mod egnn;

pub use attention::{attention_weights, AttentionLayout};
pub use batch::GraphBatch;
pub use checkpoint::{checkpoint_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use egnn::{egnn_layer_reference, EgnnLayout};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::graph::GraphView;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Egnn,
    Attention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    GraphScalar,
    NodeVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Silu,
    Relu,
}

impl Activation {
    pub(crate) fn apply<'t>(self, x: Var<'t>) -> Var<'t> {
        match self {
            Activation::Silu => x.silu(),
            Activation::Relu => x.relu(),
        }
    }
}

/// Distance thresholds of the multi-scale attention masks.
pub const MULTISCALE_THRESHOLDS: [f64; 3] = [0.8, 1.6, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub head: Head,
    pub activation: Activation,
    pub in_features: usize,
    pub hidden: usize,
    pub depth: usize,
    /// Attention heads (attention model only).
    pub heads: usize,
    /// Feed-forward width (attention model only).
    pub ffn: usize,
    pub dropout: f64,
    pub multiscale: bool,
    /// Replace the final layer's edges by the complete graph (+FA).
    pub full_last_layer: bool,
    pub seed: u64,
}

impl ModelConfig {
    pub fn egnn(head: Head, in_features: usize, seed: u64) -> Self {
        Self {
            arch: Arch::Egnn,
            head,
            activation: Activation::Silu,
            in_features,
            hidden: 32,
            depth: 3,
            heads: 4,
            ffn: 128,
            dropout: 0.0,
            multiscale: false,
            full_last_layer: false,
            seed,
        }
    }

    pub fn attention(head: Head, in_features: usize, seed: u64) -> Self {
        Self {
            arch: Arch::Attention,
            dropout: 0.1,
            ..Self::egnn(head, in_features, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.depth == 0 || self.in_features == 0 {
            return Err(Error::invalid("hidden, depth and in_features must be positive"));
        }
        if self.arch == Arch::Attention && (self.heads == 0 || self.hidden % self.heads != 0) {
            return Err(Error::invalid("hidden width must be divisible by the head count"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Indices of a dense layer's weight and bias in the flat parameter list.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Linear {
    w: usize,
    b: usize,
}

impl Linear {
    pub(crate) fn apply<'t>(&self, p: &[Var<'t>], x: Var<'t>) -> Var<'t> {
        x.matmul(p[self.w]).add_row(p[self.b])
    }
}

/// Collects parameter shapes in declaration order.
#[derive(Default)]
pub(crate) struct ParamBuilder {
    pub(crate) names: Vec<String>,
    pub(crate) shapes: Vec<(usize, usize)>,
}

impl ParamBuilder {
    pub(crate) fn linear(&mut self, name: &str, input: usize, output: usize) -> Linear {
        let w = self.raw(&format!("{name}.w"), input, output);
        let b = self.raw(&format!("{name}.b"), 1, output);
        Linear { w, b }
    }

    pub(crate) fn raw(&mut self, name: &str, rows: usize, cols: usize) -> usize {
        self.names.push(name.to_string());
        self.shapes.push((rows, cols));
        self.names.len() - 1
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Layout {
    Egnn(EgnnLayout),
    Attention(AttentionLayout),
}

/// Forward-pass mode. Dropout only fires in training.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut ChaCha8Rng),
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    layout: Layout,
    names: Vec<String>,
    params: Vec<Tensor>,
    out_shift: f64,
    out_scale: f64,
}

impl Model {
    /// Fresh model with uniform fan-in initialization `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`
    /// drawn from a ChaCha stream seeded by `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut pb = ParamBuilder::default();
        let layout = match config.arch {
            Arch::Egnn => Layout::Egnn(EgnnLayout::build(&config, &mut pb)),
            Arch::Attention => Layout::Attention(AttentionLayout::build(&config, &mut pb)),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = pb
            .names
            .iter()
            .zip(&pb.shapes)
            .map(|(name, &(r, c))| {
                // biases share their weight's fan-in; weights are (fan_in x fan_out)
                let fan_in = if name.ends_with(".b") {
                    let w = &pb.shapes[pb.names.iter().position(|n| *n == name.replace(".b", ".w")).unwrap()];
                    w.0
                } else {
                    r
                };
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                Tensor::from_shape_fn((r, c), |_| rng.random_range(-bound..bound))
            })
            .collect();
        Ok(Self {
            config,
            layout,
            names: pb.names,
            params,
            out_shift: 0.0,
            out_scale: 1.0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.len()).sum()
    }

    /// Outputs are reported as `raw * scale + shift` so training can work on
    /// standardized targets.
    pub fn set_output_affine(&mut self, shift: f64, scale: f64) {
        self.out_shift = shift;
        self.out_scale = scale;
    }

    pub fn output_affine(&self) -> (f64, f64) {
        (self.out_shift, self.out_scale)
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        params: Vec<Tensor>,
        shift: f64,
        scale: f64,
    ) -> Result<Self> {
        let mut m = Self::new(config)?;
        if params.len() != m.params.len()
            || params.iter().zip(&m.params).any(|(a, b)| a.dim() != b.dim())
        {
            return Err(Error::Checkpoint("parameter layout mismatch".into()));
        }
        m.params = params;
        m.out_shift = shift;
        m.out_scale = scale;
        Ok(m)
    }

    pub fn batch(&self, graphs: &[&dyn GraphView]) -> GraphBatch {
        GraphBatch::new(graphs, self.config.in_features, self.config.full_last_layer)
    }

    /// Differentiable forward pass on standardized outputs: `G x 1` for the
    /// graph head, `N x 3` for the node head.
    pub fn forward<'t>(
        &self,
        tape: &'t Tape,
        params: &[Var<'t>],
        batch: &GraphBatch,
        mode: Mode<'_>,
    ) -> Var<'t> {
        match &self.layout {
            Layout::Egnn(l) => l.forward(&self.config, tape, params, batch),
            Layout::Attention(l) => l.forward(&self.config, tape, params, batch, mode, None),
        }
    }

    fn eval_raw(&self, graphs: &[&dyn GraphView]) -> Result<Tensor> {
        if graphs.iter().any(|g| g.node_count() == 0) {
            return Err(Error::EmptyGraph);
        }
        let batch = self.batch(graphs);
        let tape = Tape::new();
        let vars: Vec<_> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let out = self.forward(&tape, &vars, &batch, Mode::Eval);
        let v = out.value().clone();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite model output".into()));
        }
        Ok(v)
    }

    fn require_head(&self, head: Head) -> Result<()> {
        if self.config.head != head {
            return Err(Error::invalid(format!(
                "model head is {:?}, requested {:?}",
                self.config.head, head
            )));
        }
        Ok(())
    }

    pub fn predict_graph(&self, g: &dyn GraphView) -> Result<f64> {
        Ok(self.predict_graphs(&[g])?[0])
    }

    pub fn predict_node(&self, g: &dyn GraphView) -> Result<Vec<Vec3>> {
        Ok(self.predict_nodes(&[g])?.pop().expect("one graph"))
    }

    /// Batched graph-level inference; large inputs are split into chunks that
    /// run on the rayon pool.
    pub fn predict_graphs(&self, graphs: &[&dyn GraphView]) -> Result<Vec<f64>> {
        self.require_head(Head::GraphScalar)?;
        let chunks: Vec<Result<Vec<f64>>> = chunked(graphs)
            .par_iter()
            .map(|chunk| {
                let raw = self.eval_raw(chunk)?;
                Ok(raw
                    .column(0)
                    .iter()
                    .map(|r| r * self.out_scale + self.out_shift)
                    .collect())
            })
            .collect();
        let mut out = Vec::with_capacity(graphs.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }

    pub fn predict_nodes(&self, graphs: &[&dyn GraphView]) -> Result<Vec<Vec<Vec3>>> {
        self.require_head(Head::NodeVector)?;
        let chunks: Vec<Result<Vec<Vec<Vec3>>>> = chunked(graphs)
            .par_iter()
            .map(|chunk| {
                let raw = self.eval_raw(chunk)?;
                let mut out = Vec::with_capacity(chunk.len());
                let mut row = 0;
                for g in chunk.iter() {
                    let n = g.node_count();
                    out.push(
                        (row..row + n)
                            .map(|r| {
                                [
                                    raw[[r, 0]] * self.out_scale,
                                    raw[[r, 1]] * self.out_scale,
                                    raw[[r, 2]] * self.out_scale,
                                ]
                            })
                            .collect(),
                    );
                    row += n;
                }
                Ok(out)
            })
            .collect();
        let mut out = Vec::with_capacity(graphs.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}

const INFERENCE_CHUNK: usize = 64;

fn chunked<'a, 'g>(graphs: &'a [&'g dyn GraphView]) -> Vec<&'a [&'g dyn GraphView]> {
    graphs.chunks(INFERENCE_CHUNK).collect()
}

/// Bernoulli keep-mask scaled by `1 / (1 - p)`.
pub(crate) fn dropout_mask(rng: &mut ChaCha8Rng, shape: (usize, usize), p: f64) -> Tensor {
    Tensor::from_shape_fn(shape, |_| {
        if rng.random::<f64>() < p {
            0.0
        } else {
            1.0 / (1.0 - p)
        }
    })
}

#[cfg(test)]
mod tests;
