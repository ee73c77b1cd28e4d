//! Multi-order pairwise interactions of set functions over graph nodes.
//!
//! A set function maps a coalition of kept nodes (all others removed from the
//! graph) to the predictor's output. For a pair `(i, j)` and order `m`, the
//! graph-level interaction averages
//!
//! ```text
//! f(S) - f(S \ i) - f(S \ j) + f(S \ {i, j})
//! ```
//!
//! over all contexts `S` of size `m` that contain both nodes (`3 <= m <= n`).
//! The node-level variant averages `|| f_i(S) - f_i(S \ j) ||_p` over contexts
//! of size `2 <= m <= n` containing both. Strength profiles normalize the mean
//! absolute interaction per order so that it sums to one across orders.

mod exact;
mod games;
mod mc;
mod normality;
mod profile;
mod theory;

pub use exact::{
    exact_interaction, exact_node_interaction, excluded_interaction, included_interaction,
    EXACT_MAX_NODES,
};
pub use games::{FnGame, FnNodeGame, ModelGame, ModelNodeGame, TabulatedGame, TabulatedNodeGame};
pub use mc::{
    mc_interaction_graph, mc_interaction_graph_with, mc_interaction_node, mc_interaction_node_with,
    PairInteractionEstimate, Sampling,
};
pub use normality::{normality_test, NormalityResult};
pub use profile::{
    max_gap_order, node_strength_profile, resolve_orders, strength_profile, total_variation,
    OrderGrid, ProfileConfig, StrengthProfile,
};
pub use theory::{efficiency_check, efficiency_weight, equivalence_check, f_m_curve, FmPoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest arity a [`Coalition`] bitmask can address.
pub const MAX_PLAYERS: usize = 64;

/// A subset of node positions `0..n` as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_PLAYERS);
        if n == 64 {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Self {
        Coalition(members.into_iter().fold(0, |m, i| m | 1 << i))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        Coalition(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Self {
        Coalition(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }
}

/// Which output an interaction analysis reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Graph,
    Node,
}

/// Scalar-valued game over node coalitions. Evaluation must be deterministic
/// and safe to call concurrently.
pub trait SetFunction: Sync {
    fn arity(&self) -> usize;

    fn value(&self, s: Coalition) -> Result<f64>;

    /// Batched evaluation; implementors backed by a model override this.
    fn values(&self, sets: &[Coalition]) -> Result<Vec<f64>> {
        sets.iter().map(|&s| self.value(s)).collect()
    }
}

/// Per-node vector-valued game. `node_values(s)[i]` is node `i`'s output when
/// `i` is in `s` and empty otherwise.
pub trait NodeSetFunction: Sync {
    fn arity(&self) -> usize;

    fn node_values(&self, s: Coalition) -> Result<Vec<Vec<f64>>>;

    fn node_values_batch(&self, sets: &[Coalition]) -> Result<Vec<Vec<Vec<f64>>>> {
        sets.iter().map(|&s| self.node_values(s)).collect()
    }
}

pub(crate) fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if i >= n || j >= n {
        return Err(Error::range("node", format!("pair ({i}, {j}) with n = {n}")));
    }
    if i == j {
        return Err(Error::invalid("interaction pair needs two distinct nodes"));
    }
    Ok(())
}

/// `C(n, k)` as f64 (exact for the sizes used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// Splits `seed` into an independent stream for one estimator call, so results
/// do not depend on evaluation order.
pub(crate) fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalition_ops() {
        let c = Coalition::from_members([0, 3, 5]);
        assert_eq!(c.len(), 3);
        assert!(c.contains(3) && !c.contains(1));
        assert_eq!(c.without(3).with(1), Coalition::from_members([0, 1, 5]));
        assert_eq!(c.members().collect::<Vec<_>>(), vec![0, 3, 5]);
        assert_eq!(Coalition::full(4).0, 0b1111);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(8, 4), 70.0);
        assert_eq!(binomial(48, 0), 1.0);
        assert_eq!(binomial(3, 5), 0.0);
        assert_eq!(binomial(10, 3), 120.0);
    }
}
