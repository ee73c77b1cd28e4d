//! Structural rewiring baselines: last-layer full adjacency (+FA) and
//! diffusion-based rewiring (DIGL).

use ndarray::Array2;

use super::{build_fc, Construction, GeometricGraph, GraphView};
use crate::error::{Error, Result};

/// The dense diffusion solve is cubic; larger graphs are refused.
pub const DIGL_MAX_NODES: usize = 512;

/// Full adjacency for the final message-passing layer. Earlier layers keep
/// the original edges; the models take both edge sets.
pub fn rewire_fa(g: &GeometricGraph) -> Result<GeometricGraph> {
    let fc = build_fc(g.coords().to_vec())?;
    GeometricGraph::from_construction(
        g.node_ids().to_vec(),
        fc.coords().to_vec(),
        g.features().to_vec(),
        Construction::Fc,
    )
}

/// Transition matrix normalization used inside the diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiffusionNorm {
    /// `D^-1/2 (A + I) D^-1/2`
    #[default]
    Symmetric,
    /// `D^-1 (A + I)`; rows of the diffusion matrix then sum to one.
    RandomWalk,
}

/// Personalized-PageRank diffusion `S = alpha (I - (1 - alpha) T)^-1` over the
/// symmetrized adjacency with self-loops.
pub fn diffusion_matrix(g: &GeometricGraph, alpha: f64, norm: DiffusionNorm) -> Result<Array2<f64>> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let n = g.node_count();
    if n > DIGL_MAX_NODES {
        return Err(Error::DiffusionFailed(format!(
            "{n} nodes exceeds the dense limit of {DIGL_MAX_NODES}"
        )));
    }
    let mut a = Array2::<f64>::eye(n);
    for (i, j) in g.local_edges() {
        a[[i, j]] = 1.0;
        a[[j, i]] = 1.0;
    }
    let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    let mut t = a;
    for i in 0..n {
        for j in 0..n {
            t[[i, j]] *= match norm {
                DiffusionNorm::Symmetric => 1.0 / (deg[i] * deg[j]).sqrt(),
                DiffusionNorm::RandomWalk => 1.0 / deg[i],
            };
        }
    }
    let mut m = Array2::<f64>::eye(n);
    m.scaled_add(-(1.0 - alpha), &t);
    let mut s = invert(m)?;
    s *= alpha;
    Ok(s)
}

/// DIGL rewiring. Exactly one of `top_k` (keep the k largest entries per row)
/// or `eps` (keep entries at or above the threshold) must be given. Zero mass
/// and self-loops never become edges.
pub fn rewire_digl(
    g: &GeometricGraph,
    alpha: f64,
    top_k: Option<usize>,
    eps: Option<f64>,
) -> Result<GeometricGraph> {
    rewire_digl_with(g, alpha, top_k, eps, DiffusionNorm::default())
}

pub fn rewire_digl_with(
    g: &GeometricGraph,
    alpha: f64,
    top_k: Option<usize>,
    eps: Option<f64>,
    norm: DiffusionNorm,
) -> Result<GeometricGraph> {
    match (top_k, eps) {
        (Some(0), None) => return Err(Error::invalid("top_k must be positive")),
        (None, Some(e)) if !(e > 0.0) => return Err(Error::invalid("eps must be positive")),
        (Some(_), None) | (None, Some(_)) => {}
        _ => {
            return Err(Error::invalid(
                "exactly one of top_k / eps must be supplied",
            ))
        }
    }
    if !g.is_connected() {
        log::warn!("DIGL on a disconnected graph; diffusion stays within components");
    }
    let s = diffusion_matrix(g, alpha, norm)?;
    let n = g.node_count();
    let ids = g.node_ids();
    let mut edges = Vec::new();
    for i in 0..n {
        let row = s.row(i);
        let keep: Vec<usize> = match (top_k, eps) {
            (Some(k), _) => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                order.truncate(k);
                order
            }
            (_, Some(e)) => (0..n).filter(|&j| row[j] >= e).collect(),
            _ => unreachable!(),
        };
        edges.extend(
            keep.into_iter()
                .filter(|&j| j != i && row[j] > 0.0)
                .map(|j| (ids[i], ids[j])),
        );
    }
    GeometricGraph::explicit(ids.to_vec(), g.coords().to_vec(), g.features().to_vec(), edges)
}

/// Gauss-Jordan inverse with partial pivoting.
fn invert(mut m: Array2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[[a, col]].abs().total_cmp(&m[[b, col]].abs()))
            .expect("nonempty range");
        let p = m[[pivot, col]];
        if !(p.abs() > 1e-12) {
            return Err(Error::DiffusionFailed("singular diffusion system".into()));
        }
        if pivot != col {
            for c in 0..n {
                m.swap([pivot, c], [col, c]);
                inv.swap([pivot, c], [col, c]);
            }
        }
        for c in 0..n {
            m[[col, c]] /= p;
            inv[[col, c]] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[[r, col]];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m[[r, c]] -= f * m[[col, c]];
                inv[[r, c]] -= f * inv[[col, c]];
            }
        }
    }
    Ok(inv)
}
