use std::cmp::Ordering;

use super::{Construction, GeometricGraph};
use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Vec3};

fn default_ids(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Each node gets out-edges to its `min(k, n-1)` nearest neighbors.
/// Equidistant candidates are ordered by lower node id.
pub fn build_knn(coords: Vec<Vec3>, k: usize) -> Result<GeometricGraph> {
    if coords.is_empty() {
        return Err(Error::EmptyGraph);
    }
    GeometricGraph::from_construction(
        default_ids(coords.len()),
        coords,
        Vec::new(),
        Construction::Knn(k),
    )
}

pub fn build_fc(coords: Vec<Vec3>) -> Result<GeometricGraph> {
    if coords.is_empty() {
        return Err(Error::EmptyGraph);
    }
    GeometricGraph::from_construction(default_ids(coords.len()), coords, Vec::new(), Construction::Fc)
}

/// Edge iff the euclidean distance is at most `r`. The result may be
/// disconnected; such graphs are rejected by the interaction estimators.
pub fn build_rball(coords: Vec<Vec3>, r: f64) -> Result<GeometricGraph> {
    if coords.is_empty() {
        return Err(Error::EmptyGraph);
    }
    GeometricGraph::from_construction(
        default_ids(coords.len()),
        coords,
        Vec::new(),
        Construction::RBall(r),
    )
}

/// KNN edges over local positions.
pub fn knn_edges(coords: &[Vec3], k: usize) -> Vec<(usize, usize)> {
    let n = coords.len();
    let take = k.min(n.saturating_sub(1));
    let mut edges = Vec::with_capacity(n * take);
    if take == 0 {
        return edges;
    }
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        cand.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist_sq(coords[i], coords[j]), j)),
        );
        let by_dist_then_id =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if take < cand.len() {
            cand.select_nth_unstable_by(take - 1, by_dist_then_id);
        }
        edges.extend(cand[..take].iter().map(|&(_, j)| (i, j)));
    }
    edges
}

/// Complete digraph over local positions `0..n`.
pub fn fc_local_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

pub(super) fn rball_edges(coords: &[Vec3], r: f64) -> Vec<(usize, usize)> {
    let n = coords.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && dist_sq(coords[i], coords[j]).sqrt().partial_cmp(&r) != Some(Ordering::Greater)
            {
                edges.push((i, j));
            }
        }
    }
    edges
}
