//! Attention message passing over (typically fully connected) graphs.
//!
//! Each node attends to itself and its out-neighbors. Geometry enters only
//! through a learned per-head bias proportional to the pairwise distance, so
//! graph outputs are invariant to rotations and translations. With
//! multi-scale masks enabled, head `h < 3` only sees neighbors within
//! [`MULTISCALE_THRESHOLDS`]`[h]`; remaining heads are global.

use std::rc::Rc;

use super::batch::GraphBatch;
use super::{dropout_mask, Head, Linear, Mode, ModelConfig, ParamBuilder, MULTISCALE_THRESHOLDS};
use crate::error::Result;
use crate::graph::GraphView;
use crate::tensor::{Idx, Tape, Tensor, Var};

const MASKED: f64 = -1e30;

#[derive(Debug, Clone)]
struct AttentionBlock {
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    dist_bias: usize,
    ff1: Linear,
    ff2: Linear,
}

#[derive(Debug, Clone)]
pub struct AttentionLayout {
    embed: Linear,
    blocks: Vec<AttentionBlock>,
    readout1: Linear,
    readout2: Linear,
}

impl AttentionLayout {
    pub(crate) fn build(c: &ModelConfig, pb: &mut ParamBuilder) -> Self {
        let h = c.hidden;
        let embed = pb.linear("embed", c.in_features, h);
        let blocks = (0..c.depth)
            .map(|l| AttentionBlock {
                q: pb.linear(&format!("layer{l}.q"), h, h),
                k: pb.linear(&format!("layer{l}.k"), h, h),
                v: pb.linear(&format!("layer{l}.v"), h, h),
                out: pb.linear(&format!("layer{l}.out"), h, h),
                dist_bias: pb.raw(&format!("layer{l}.dist_bias"), 1, c.heads),
                ff1: pb.linear(&format!("layer{l}.ff1"), h, c.ffn),
                ff2: pb.linear(&format!("layer{l}.ff2"), c.ffn, h),
            })
            .collect();
        // graph head: pooled MLP; node head: edge-weight MLP on [h_i, h_j, d^2]
        let (r1_in, r2_out) = match c.head {
            Head::GraphScalar => (h, 1),
            Head::NodeVector => (2 * h + 1, 1),
        };
        let readout1 = pb.linear("readout1", r1_in, h);
        let readout2 = pb.linear("readout2", h, r2_out);
        Self {
            embed,
            blocks,
            readout1,
            readout2,
        }
    }

    pub(crate) fn forward<'t>(
        &self,
        c: &ModelConfig,
        tape: &'t Tape,
        p: &[Var<'t>],
        batch: &GraphBatch,
        mut mode: Mode<'_>,
        mut trace: Option<&mut Vec<Tensor>>,
    ) -> Var<'t> {
        let act = c.activation;
        let hd = c.hidden;
        let nh = c.heads;
        let dk = hd / nh;
        // head_sum: (hidden x heads) sums the dk dims of each head
        let head_sum = Tensor::from_shape_fn((hd, nh), |(i, j)| if i / dk == j { 1.0 } else { 0.0 });
        let head_expand = tape.constant(head_sum.t().to_owned());
        let head_sum = tape.constant(head_sum);
        let x = tape.constant(batch.coords.clone());
        let mut h = self.embed.apply(p, tape.constant(batch.features.clone()));
        for (l, block) in self.blocks.iter().enumerate() {
            let (recv, send, _) = batch.layer_edges(l, c.depth);
            let (recv, send) = with_self_loops(recv, send, batch.n_nodes);
            let dist = x.gather(&recv).sub(x.gather(&send)).row_norm();
            let mut logits = block
                .q
                .apply(p, h)
                .gather(&recv)
                .mul(block.k.apply(p, h).gather(&send))
                .matmul(head_sum)
                .scale(1.0 / (dk as f64).sqrt())
                .add(dist.matmul(p[block.dist_bias]));
            if c.multiscale {
                let d = dist.value().clone();
                let mask = Tensor::from_shape_fn((recv.len(), nh), |(e, hh)| {
                    match MULTISCALE_THRESHOLDS.get(hh) {
                        Some(&t) if d[[e, 0]] > t => MASKED,
                        _ => 0.0,
                    }
                });
                logits = logits.add(tape.constant(mask));
            }
            let alpha = logits.segment_softmax(&recv);
            if let Some(t) = trace.as_deref_mut() {
                t.push(alpha.value().clone());
            }
            let msg = alpha
                .matmul(head_expand)
                .mul(block.v.apply(p, h).gather(&send))
                .scatter_add(&recv, batch.n_nodes);
            let attn = dropout(&mut mode, tape, block.out.apply(p, msg), c.dropout);
            h = h.add(attn);
            let ff = block.ff2.apply(p, act.apply(block.ff1.apply(p, h)));
            h = h.add(dropout(&mut mode, tape, ff, c.dropout));
        }
        match c.head {
            Head::GraphScalar => {
                let pooled = h
                    .scatter_add(&batch.node_graph, batch.n_graphs)
                    .mul_col(tape.constant(batch.inv_count.clone()));
                self.readout2.apply(p, act.apply(self.readout1.apply(p, pooled)))
            }
            Head::NodeVector => {
                let (recv, send, inv_deg) = (&batch.recv, &batch.send, &batch.inv_deg);
                let diff = x.gather(recv).sub(x.gather(send));
                let d2 = diff.mul(diff).row_sum();
                let input = Var::concat_cols(&[h.gather(recv), h.gather(send), d2]);
                let w = self.readout2.apply(p, act.apply(self.readout1.apply(p, input)));
                diff.mul_col(w)
                    .scatter_add(recv, batch.n_nodes)
                    .mul_col(tape.constant(inv_deg.clone()))
            }
        }
    }
}

fn dropout<'t>(mode: &mut Mode<'_>, tape: &'t Tape, v: Var<'t>, p: f64) -> Var<'t> {
    match mode {
        Mode::Train(rng) if p > 0.0 => {
            let mask = dropout_mask(rng, v.shape(), p);
            v.mul(tape.constant(mask))
        }
        _ => v,
    }
}

fn with_self_loops(recv: &Idx, send: &Idx, n: usize) -> (Idx, Idx) {
    let mut r = recv.as_ref().clone();
    let mut s = send.as_ref().clone();
    r.extend(0..n);
    s.extend(0..n);
    (Rc::new(r), Rc::new(s))
}

/// Per-layer attention weights (`edges x heads`, self-loops appended after
/// the graph's edges) for one graph, evaluated in inference mode.
pub fn attention_weights(model: &super::Model, g: &dyn GraphView) -> Result<Vec<(Vec<usize>, Tensor)>> {
    let super::Layout::Attention(layout) = &model.layout else {
        return Err(crate::error::Error::invalid("not an attention model"));
    };
    let batch = model.batch(&[g]);
    let tape = Tape::new();
    let vars: Vec<_> = model.params.iter().map(|p| tape.constant(p.clone())).collect();
    let mut trace = Vec::new();
    layout.forward(&model.config, &tape, &vars, &batch, Mode::Eval, Some(&mut trace));
    Ok(trace
        .into_iter()
        .enumerate()
        .map(|(l, a)| {
            let (recv, send, _) = batch.layer_edges(l, model.config.depth);
            let (recv, _) = with_self_loops(recv, send, batch.n_nodes);
            (recv.as_ref().clone(), a)
        })
        .collect())
}
