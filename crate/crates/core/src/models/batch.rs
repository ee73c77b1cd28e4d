use std::rc::Rc;

use crate::graph::{GraphView, fc_local_edges};
use crate::tensor::{Idx, Tensor};

/// A disjoint union of graphs laid out for one forward pass. Node rows of all
/// graphs are stacked; edge endpoints are rows into that stack.
pub struct GraphBatch {
    pub n_nodes: usize,
    pub n_graphs: usize,
    pub coords: Tensor,
    pub features: Tensor,
    /// Receiving node of each edge (the node that aggregates).
    pub recv: Idx,
    /// Sending node of each edge (the neighbor).
    pub send: Idx,
    /// `1 / out-degree`, zero for isolated nodes.
    pub inv_deg: Tensor,
    /// Fully connected edges for the final layer under +FA.
    pub last: Option<(Idx, Idx, Tensor)>,
    pub node_graph: Idx,
    /// `1 / node count` per graph.
    pub inv_count: Tensor,
}

impl GraphBatch {
    /// `in_features` columns are taken from each graph's features; graphs
    /// without features get a constant one in every column.
    pub fn new(graphs: &[&dyn GraphView], in_features: usize, full_last_layer: bool) -> Self {
        let n_nodes: usize = graphs.iter().map(|g| g.node_count()).sum();
        let mut coords = Tensor::zeros((n_nodes, 3));
        let mut features = Tensor::ones((n_nodes, in_features));
        let mut recv = Vec::new();
        let mut send = Vec::new();
        let mut last_recv = Vec::new();
        let mut last_send = Vec::new();
        let mut node_graph = Vec::with_capacity(n_nodes);
        let mut inv_count = Tensor::zeros((graphs.len(), 1));
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            let n = g.node_count();
            for (r, c) in g.coords().iter().enumerate() {
                for a in 0..3 {
                    coords[[offset + r, a]] = c[a];
                }
            }
            let feats = g.features();
            if !feats.is_empty() {
                for (r, f) in feats.iter().enumerate() {
                    for c in 0..in_features {
                        features[[offset + r, c]] = f.get(c).copied().unwrap_or(0.0);
                    }
                }
            }
            for (a, b) in g.local_edges() {
                recv.push(offset + a);
                send.push(offset + b);
            }
            if full_last_layer {
                for (a, b) in fc_local_edges(n) {
                    last_recv.push(offset + a);
                    last_send.push(offset + b);
                }
            }
            node_graph.extend(std::iter::repeat_n(gi, n));
            inv_count[[gi, 0]] = 1.0 / n as f64;
            offset += n;
        }
        let inv_deg = inverse_degree(&recv, n_nodes);
        let last = full_last_layer.then(|| {
            let d = inverse_degree(&last_recv, n_nodes);
            (Rc::new(last_recv), Rc::new(last_send), d)
        });
        Self {
            n_nodes,
            n_graphs: graphs.len(),
            coords,
            features,
            recv: Rc::new(recv),
            send: Rc::new(send),
            inv_deg,
            last,
            node_graph: Rc::new(node_graph),
            inv_count,
        }
    }

    /// Edge lists for layer `layer` of `depth`.
    pub fn layer_edges(&self, layer: usize, depth: usize) -> (&Idx, &Idx, &Tensor) {
        match &self.last {
            Some((r, s, d)) if layer + 1 == depth => (r, s, d),
            _ => (&self.recv, &self.send, &self.inv_deg),
        }
    }
}

fn inverse_degree(recv: &[usize], n: usize) -> Tensor {
    let mut deg = Tensor::zeros((n, 1));
    for &r in recv {
        deg[[r, 0]] += 1.0;
    }
    deg.mapv_inplace(|d| if d > 0.0 { 1.0 / d } else { 0.0 });
    deg
}
