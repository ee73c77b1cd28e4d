//! E(n)-equivariant message passing.
//!
//! One layer, for an edge `i <- j`:
//!
//! ```text
//! m_ij = phi_e([h_i, h_j, |x_i - x_j|^2])
//! x_i' = x_i + (1 / deg_i) * sum_j (x_i - x_j) * phi_x(m_ij)
//! h_i' = h_i + phi_h([h_i, sum_j m_ij])
//! ```
//!
//! Only squared distances enter the invariant channel, and coordinates are
//! updated along relative position vectors, so the hidden state is
//! invariant and the coordinates equivariant under rotations, reflections
//! and translations. The node head reports the accumulated displacement
//! `x_final - x_input`, which is translation invariant and rotation
//! equivariant.

use super::{Activation, Head, Linear, ModelConfig, ParamBuilder};
use super::batch::GraphBatch;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Debug, Clone)]
pub(crate) struct EgnnBlock {
    edge1: Linear,
    edge2: Linear,
    coord1: Linear,
    coord2: Linear,
    node1: Linear,
    node2: Linear,
}

#[derive(Debug, Clone)]
pub struct EgnnLayout {
    embed: Linear,
    blocks: Vec<EgnnBlock>,
    readout1: Option<Linear>,
    readout2: Option<Linear>,
}

impl EgnnLayout {
    pub(crate) fn build(c: &ModelConfig, pb: &mut ParamBuilder) -> Self {
        let h = c.hidden;
        let embed = pb.linear("embed", c.in_features, h);
        let blocks = (0..c.depth)
            .map(|l| EgnnBlock {
                edge1: pb.linear(&format!("layer{l}.edge1"), 2 * h + 1, h),
                edge2: pb.linear(&format!("layer{l}.edge2"), h, h),
                coord1: pb.linear(&format!("layer{l}.coord1"), h, h),
                coord2: pb.linear(&format!("layer{l}.coord2"), h, 1),
                node1: pb.linear(&format!("layer{l}.node1"), 2 * h, h),
                node2: pb.linear(&format!("layer{l}.node2"), h, h),
            })
            .collect();
        let (readout1, readout2) = match c.head {
            Head::GraphScalar => (
                Some(pb.linear("readout1", h, h)),
                Some(pb.linear("readout2", h, 1)),
            ),
            Head::NodeVector => (None, None),
        };
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
    ) -> Var<'t> {
        let act = c.activation;
        let x0 = tape.constant(batch.coords.clone());
        let mut x = x0;
        let mut h = self.embed.apply(p, tape.constant(batch.features.clone()));
        for (l, block) in self.blocks.iter().enumerate() {
            let (recv, send, inv_deg) = batch.layer_edges(l, c.depth);
            let inv_deg = tape.constant(inv_deg.clone());
            (h, x) = block.apply(act, p, h, x, recv, send, inv_deg, batch.n_nodes);
        }
        match c.head {
            Head::NodeVector => x.sub(x0),
            Head::GraphScalar => {
                let pooled = h
                    .scatter_add(&batch.node_graph, batch.n_graphs)
                    .mul_col(tape.constant(batch.inv_count.clone()));
                let r1 = self.readout1.expect("graph head");
                let r2 = self.readout2.expect("graph head");
                r2.apply(p, act.apply(r1.apply(p, pooled)))
            }
        }
    }
}

impl EgnnBlock {
    #[allow(clippy::too_many_arguments)]
    fn apply<'t>(
        &self,
        act: Activation,
        p: &[Var<'t>],
        h: Var<'t>,
        x: Var<'t>,
        recv: &crate::tensor::Idx,
        send: &crate::tensor::Idx,
        inv_deg: Var<'t>,
        n: usize,
    ) -> (Var<'t>, Var<'t>) {
        let diff = x.gather(recv).sub(x.gather(send));
        let d2 = diff.mul(diff).row_sum();
        // phi_e's first layer on [h_i, h_j, d2], with the node terms multiplied
        // before they are gathered onto edges
        let w = p[self.edge1.w];
        let hd = h.shape().1;
        let own = h.matmul(w.slice_rows(0, hd)).gather(recv);
        let other = h.matmul(w.slice_rows(hd, 2 * hd)).gather(send);
        let pre = own
            .add(other)
            .add(d2.matmul(w.slice_rows(2 * hd, 2 * hd + 1)))
            .add_row(p[self.edge1.b]);
        let m = act.apply(self.edge2.apply(p, act.apply(pre)));
        let weight = self.coord2.apply(p, act.apply(self.coord1.apply(p, m)));
        let shift = diff.mul_col(weight).scatter_add(recv, n).mul_col(inv_deg);
        let agg = m.scatter_add(recv, n);
        let upd = self.node2.apply(
            p,
            act.apply(self.node1.apply(p, Var::concat_cols(&[h, agg]))),
        );
        (h.add(upd), x.add(shift))
    }
}

/// Straight-line evaluation of one layer on plain arrays, mirroring the
/// formulas in the module docs with explicit loops. `weights` are the twelve
/// parameter tensors of one block in declaration order.
pub fn egnn_layer_reference(
    weights: &[Tensor],
    h: &Tensor,
    x: &Tensor,
    edges: &[(usize, usize)],
) -> (Tensor, Tensor) {
    let silu = crate::tensor::silu;
    let dense = |v: &[f64], w: &Tensor, b: &Tensor, activate: bool| -> Vec<f64> {
        (0..w.ncols())
            .map(|o| {
                let s: f64 = b[[0, o]] + v.iter().enumerate().map(|(i, a)| a * w[[i, o]]).sum::<f64>();
                if activate {
                    silu(s)
                } else {
                    s
                }
            })
            .collect()
    };
    let n = h.nrows();
    let hd = h.ncols();
    let mut agg = vec![vec![0.0; hd]; n];
    let mut shift = vec![[0.0; 3]; n];
    let mut deg = vec![0usize; n];
    for &(i, j) in edges {
        deg[i] += 1;
        let rel: Vec<f64> = (0..3).map(|a| x[[i, a]] - x[[j, a]]).collect();
        let mut input: Vec<f64> = h.row(i).to_vec();
        input.extend(h.row(j).iter());
        input.push(rel.iter().map(|r| r * r).sum());
        let m1 = dense(&input, &weights[0], &weights[1], true);
        let m = dense(&m1, &weights[2], &weights[3], true);
        let c1 = dense(&m, &weights[4], &weights[5], true);
        let c = dense(&c1, &weights[6], &weights[7], false)[0];
        for a in 0..3 {
            shift[i][a] += rel[a] * c;
        }
        for k in 0..hd {
            agg[i][k] += m[k];
        }
    }
    let mut h_new = h.clone();
    let mut x_new = x.clone();
    for i in 0..n {
        let mut input: Vec<f64> = h.row(i).to_vec();
        input.extend(agg[i].iter());
        let u1 = dense(&input, &weights[8], &weights[9], true);
        let u = dense(&u1, &weights[10], &weights[11], false);
        for k in 0..hd {
            h_new[[i, k]] += u[k];
        }
        if deg[i] > 0 {
            for a in 0..3 {
                x_new[[i, a]] += shift[i][a] / deg[i] as f64;
            }
        }
    }
    (h_new, x_new)
}
