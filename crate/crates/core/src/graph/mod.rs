//! Geometric graphs and their construction policies.
//!
//! Edges are directed pairs of node ids `(i, j)` meaning "j is a neighbor of
//! i"; node `i` receives messages along its out-edges. KNN graphs are
//! therefore asymmetric in general and consumers that need an undirected
//! adjacency symmetrize explicitly.

mod build;
mod rewire;

pub use build::{build_fc, build_knn, build_rball, fc_local_edges, knn_edges};
pub use rewire::{diffusion_matrix, rewire_digl, rewire_fa, DiffusionNorm, DIGL_MAX_NODES};

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// How a graph's edge set was produced. Subgraphs rebuild their edges with
/// the same policy after node removal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Knn(usize),
    Fc,
    RBall(f64),
    Explicit,
}

/// Read-only access to a graph in local (0-based, position) indexing, which is
/// what the models consume.
pub trait GraphView: Sync {
    fn node_ids(&self) -> &[usize];
    fn coords(&self) -> &[Vec3];
    fn features(&self) -> &[Vec<f64>];
    /// Directed edges as node ids.
    fn edges(&self) -> &[(usize, usize)];

    fn node_count(&self) -> usize {
        self.node_ids().len()
    }

    /// Position of a node id in [`GraphView::node_ids`].
    fn position(&self, id: usize) -> Option<usize> {
        self.node_ids().binary_search(&id).ok()
    }

    /// Edges re-expressed as positions.
    fn local_edges(&self) -> Vec<(usize, usize)> {
        self.edges()
            .iter()
            .map(|&(a, b)| {
                (
                    self.position(a).expect("edge endpoint is a node"),
                    self.position(b).expect("edge endpoint is a node"),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricGraph {
    node_ids: Vec<usize>,
    coords: Vec<Vec3>,
    features: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    construction: Construction,
}

impl GeometricGraph {
    /// Builds a graph over `coords` using `construction` to derive edges.
    /// `Construction::Explicit` yields an edgeless graph here; use
    /// [`GeometricGraph::explicit`] to supply edges.
    pub fn from_construction(
        node_ids: Vec<usize>,
        coords: Vec<Vec3>,
        features: Vec<Vec<f64>>,
        construction: Construction,
    ) -> Result<Self> {
        validate_nodes(&node_ids, &coords, &features)?;
        let edges = edges_for(construction, &node_ids, &coords)?;
        Ok(Self {
            node_ids,
            coords,
            features,
            edges,
            construction,
        })
    }

    /// A graph with a caller-supplied edge set.
    pub fn explicit(
        node_ids: Vec<usize>,
        coords: Vec<Vec3>,
        features: Vec<Vec<f64>>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        validate_nodes(&node_ids, &coords, &features)?;
        let edges: BTreeSet<(usize, usize)> = edges.into_iter().collect();
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop on node {a}")));
            }
            for id in [a, b] {
                if node_ids.binary_search(&id).is_err() {
                    return Err(Error::UnknownNode(id));
                }
            }
        }
        Ok(Self {
            node_ids,
            coords,
            features,
            edges: edges.into_iter().collect(),
            construction: Construction::Explicit,
        })
    }

    /// Replaces the per-node features. Length must match the node count.
    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != self.coords.len() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                features.len(),
                self.coords.len()
            )));
        }
        self.features = features;
        Ok(self)
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Rebuilds the edge set with a different policy, keeping nodes and features.
    pub fn rebuilt(&self, construction: Construction) -> Result<Self> {
        Self::from_construction(
            self.node_ids.clone(),
            self.coords.clone(),
            self.features.clone(),
            construction,
        )
    }

    pub fn out_degree(&self, id: usize) -> usize {
        self.edges.iter().filter(|&&(a, _)| a == id).count()
    }

    /// Weak connectivity of the directed edge set.
    pub fn is_connected(&self) -> bool {
        let n = self.node_ids.len();
        if n <= 1 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for (a, b) in self.local_edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }
}

impl GraphView for GeometricGraph {
    fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }
    fn coords(&self) -> &[Vec3] {
        &self.coords
    }
    fn features(&self) -> &[Vec<f64>] {
        &self.features
    }
    fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// A node-removed view of a parent graph whose edges were rebuilt with the
/// parent's construction policy. Features are copied verbatim; removal never
/// imputes or averages anything.
#[derive(Debug, Clone)]
pub struct Subgraph<'a> {
    parent: &'a GeometricGraph,
    kept: Vec<usize>,
    coords: Vec<Vec3>,
    features: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
}

impl<'a> Subgraph<'a> {
    pub fn parent(&self) -> &'a GeometricGraph {
        self.parent
    }

    pub fn kept_nodes(&self) -> &[usize] {
        &self.kept
    }

    /// Materializes the subgraph as a standalone explicit graph.
    pub fn to_graph(&self) -> GeometricGraph {
        GeometricGraph {
            node_ids: self.kept.clone(),
            coords: self.coords.clone(),
            features: self.features.clone(),
            edges: self.edges.clone(),
            construction: Construction::Explicit,
        }
    }
}

impl GraphView for Subgraph<'_> {
    fn node_ids(&self) -> &[usize] {
        &self.kept
    }
    fn coords(&self) -> &[Vec3] {
        &self.coords
    }
    fn features(&self) -> &[Vec<f64>] {
        &self.features
    }
    fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

/// Drops `drop` (node ids) and rebuilds connectivity over the survivors:
/// KNN is re-run, FC is recompleted, r-ball is re-thresholded and explicit
/// edges are restricted to the surviving endpoints.
pub fn remove_nodes<'a>(g: &'a GeometricGraph, drop: &[usize]) -> Result<Subgraph<'a>> {
    for &d in drop {
        if g.position(d).is_none() {
            return Err(Error::UnknownNode(d));
        }
    }
    let dropped: BTreeSet<usize> = drop.iter().copied().collect();
    keep_nodes_filtered(g, |id| !dropped.contains(&id))
}

/// Same as [`remove_nodes`] but phrased by the nodes to keep, given as local
/// positions (a bitmask over `0..n`). Used by the interaction estimators.
pub fn keep_positions(g: &GeometricGraph, mask: u64) -> Result<Subgraph<'_>> {
    let ids = &g.node_ids;
    keep_nodes_filtered(g, |id| {
        let pos = ids.binary_search(&id).expect("own id");
        mask >> pos & 1 == 1
    })
}

fn keep_nodes_filtered(g: &GeometricGraph, keep: impl Fn(usize) -> bool) -> Result<Subgraph<'_>> {
    let mut kept = Vec::new();
    let mut coords = Vec::new();
    let mut features = Vec::new();
    for (pos, &id) in g.node_ids.iter().enumerate() {
        if keep(id) {
            kept.push(id);
            coords.push(g.coords[pos]);
            if !g.features.is_empty() {
                features.push(g.features[pos].clone());
            }
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptySubgraph);
    }
    let edges = if kept.len() == g.node_ids.len() {
        g.edges.clone()
    } else {
        match g.construction {
            Construction::Explicit => {
                let set: BTreeSet<usize> = kept.iter().copied().collect();
                g.edges
                    .iter()
                    .copied()
                    .filter(|(a, b)| set.contains(a) && set.contains(b))
                    .collect()
            }
            c => edges_for(c, &kept, &coords)?,
        }
    };
    Ok(Subgraph {
        parent: g,
        kept,
        coords,
        features,
        edges,
    })
}

fn validate_nodes(node_ids: &[usize], coords: &[Vec3], features: &[Vec<f64>]) -> Result<()> {
    if node_ids.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if node_ids.len() != coords.len() {
        return Err(Error::Shape(format!(
            "{} ids for {} coordinates",
            node_ids.len(),
            coords.len()
        )));
    }
    if !features.is_empty() && features.len() != coords.len() {
        return Err(Error::Shape(format!(
            "{} feature rows for {} nodes",
            features.len(),
            coords.len()
        )));
    }
    if node_ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("node ids must be strictly increasing"));
    }
    if coords.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::invalid("non-finite coordinate"));
    }
    Ok(())
}

fn edges_for(
    construction: Construction,
    ids: &[usize],
    coords: &[Vec3],
) -> Result<Vec<(usize, usize)>> {
    let local = match construction {
        Construction::Knn(k) => {
            if k == 0 {
                return Err(Error::invalid("k must be positive"));
            }
            knn_edges(coords, k)
        }
        Construction::Fc => build::fc_local_edges(coords.len()),
        Construction::RBall(r) => {
            if !(r > 0.0) {
                return Err(Error::invalid("radius must be positive"));
            }
            build::rball_edges(coords, r)
        }
        Construction::Explicit => Vec::new(),
    };
    let mut edges: Vec<(usize, usize)> =
        local.into_iter().map(|(a, b)| (ids[a], ids[b])).collect();
    edges.sort_unstable();
    Ok(edges)
}
