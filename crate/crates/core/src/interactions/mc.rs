//! Monte-Carlo estimators with exact fallback for small context spaces.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::exact::{contexts_with_pair, delta_from, delta_sets, p_norm_diff};
use super::{binomial, check_pair, Coalition, NodeSetFunction, SetFunction};
use crate::error::{Error, Result};

/// One estimated pair interaction at one order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairInteractionEstimate {
    pub i: usize,
    pub j: usize,
    pub m: usize,
    pub value: f64,
    /// Standard error of `value`; zero when every context was enumerated.
    pub stderr: f64,
    pub samples: usize,
    pub exact: bool,
}

/// Whether small context spaces are enumerated instead of sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Enumerate when `C(n-2, m-2) <= budget`, otherwise sample.
    #[default]
    Auto,
    /// Always draw `budget` contexts uniformly with replacement.
    Always,
}

fn check_budget(budget: usize) -> Result<()> {
    if budget == 0 {
        return Err(Error::invalid("sample budget must be at least 1"));
    }
    Ok(())
}

fn sample_contexts(n: usize, i: usize, j: usize, m: usize, budget: usize, seed: u64) -> Vec<Coalition> {
    let others: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
    let base = Coalition::from_members([i, j]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..budget)
        .map(|_| {
            let picked = sample(&mut rng, others.len(), m - 2);
            Coalition(base.0 | Coalition::from_members(picked.iter().map(|p| others[p])).0)
        })
        .collect()
}

fn contexts(
    n: usize,
    i: usize,
    j: usize,
    m: usize,
    budget: usize,
    seed: u64,
    sampling: Sampling,
) -> (Vec<Coalition>, bool) {
    let space = binomial(n - 2, m - 2);
    if sampling == Sampling::Auto && space <= budget as f64 {
        (contexts_with_pair(n, i, j, m), true)
    } else {
        (sample_contexts(n, i, j, m, budget, seed), false)
    }
}

fn summarize(i: usize, j: usize, m: usize, xs: &[f64], exact: bool) -> PairInteractionEstimate {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let stderr = if exact {
        0.0
    } else if xs.len() < 2 {
        f64::INFINITY
    } else {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    };
    PairInteractionEstimate {
        i,
        j,
        m,
        value: mean,
        stderr,
        samples: xs.len(),
        exact,
    }
}

/// Graph-level interaction estimate from `budget` uniformly drawn size-`m`
/// contexts containing `{i, j}`; enumerates exactly when the context space
/// is no larger than the budget.
pub fn mc_interaction_graph(
    f: &dyn SetFunction,
    i: usize,
    j: usize,
    m: usize,
    budget: usize,
    seed: u64,
) -> Result<PairInteractionEstimate> {
    mc_interaction_graph_with(f, i, j, m, budget, seed, Sampling::Auto)
}

pub fn mc_interaction_graph_with(
    f: &dyn SetFunction,
    i: usize,
    j: usize,
    m: usize,
    budget: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<PairInteractionEstimate> {
    let n = f.arity();
    check_budget(budget)?;
    check_pair(n, i, j)?;
    if m < 3 || m > n {
        return Err(Error::range("order", format!("m = {m} outside [3, {n}]")));
    }
    let (ctx, exact) = contexts(n, i, j, m, budget, seed, sampling);
    let sets: Vec<Coalition> = ctx.iter().flat_map(|&s| delta_sets(s, i, j)).collect();
    let vals = f.values(&sets)?;
    let deltas: Vec<f64> = vals.chunks_exact(4).map(delta_from).collect();
    Ok(summarize(i, j, m, &deltas, exact))
}

/// Node-level interaction estimate: how much node `j`'s presence moves node
/// `i`'s output, in the `p`-norm, averaged over size-`m` contexts.
pub fn mc_interaction_node(
    f: &dyn NodeSetFunction,
    i: usize,
    j: usize,
    m: usize,
    p: f64,
    budget: usize,
    seed: u64,
) -> Result<PairInteractionEstimate> {
    mc_interaction_node_with(f, i, j, m, p, budget, seed, Sampling::Auto)
}

#[allow(clippy::too_many_arguments)]
pub fn mc_interaction_node_with(
    f: &dyn NodeSetFunction,
    i: usize,
    j: usize,
    m: usize,
    p: f64,
    budget: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<PairInteractionEstimate> {
    let n = f.arity();
    check_budget(budget)?;
    check_pair(n, i, j)?;
    if m < 2 || m > n {
        return Err(Error::range("order", format!("m = {m} outside [2, {n}]")));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid(format!("norm order p = {p} must be >= 1")));
    }
    let (ctx, exact) = contexts(n, i, j, m, budget, seed, sampling);
    let sets: Vec<Coalition> = ctx.iter().flat_map(|&s| [s, s.without(j)]).collect();
    let vals = f.node_values_batch(&sets)?;
    let diffs: Vec<f64> = vals
        .chunks_exact(2)
        .map(|pair| p_norm_diff(&pair[0][i], &pair[1][i], p))
        .collect();
    Ok(summarize(i, j, m, &diffs, exact))
}
