//! Per-order interaction strength profiles.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::EXACT_MAX_NODES;
use super::{
    derive_seed, mc_interaction_graph, mc_interaction_node, Level, NodeSetFunction,
    PairInteractionEstimate, SetFunction, TabulatedGame, TabulatedNodeGame,
};
use crate::error::{Error, Result};

/// Which interaction orders a profile covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderGrid {
    /// Every valid order.
    All,
    /// Orders `round(r * n)` for each ratio, clamped to the valid range and
    /// deduplicated.
    Ratios(Vec<f64>),
    /// Explicit orders.
    Orders(Vec<usize>),
}

impl OrderGrid {
    /// The ratio grid `0.1, 0.2, ..., 1.0`.
    pub fn deciles() -> Self {
        OrderGrid::Ratios((1..=10).map(|k| k as f64 / 10.0).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub orders: OrderGrid,
    /// Pairs per graph; `None` uses every pair.
    pub pair_budget: Option<usize>,
    /// Contexts per (pair, order) cell.
    pub context_budget: usize,
    pub seed: u64,
    /// Norm order for node-level interactions.
    pub p: f64,
    /// Evaluate every coalition once up front when `n` is small enough.
    pub tabulate: bool,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            orders: OrderGrid::All,
            pair_budget: None,
            context_budget: 64,
            seed: 0,
            p: 2.0,
            tabulate: true,
        }
    }
}

/// Normalized mean absolute interaction per order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthProfile {
    pub level: Level,
    pub n: usize,
    pub orders: Vec<usize>,
    /// Sums to one across orders.
    pub j: Vec<f64>,
    /// Standard error of each entry of `j` from context sampling.
    pub stderr: Vec<f64>,
    /// Mean `|I^(m)|` before normalization.
    pub raw: Vec<f64>,
    pub graphs: usize,
    pub pairs: usize,
}

impl StrengthProfile {
    pub fn m_over_n(&self) -> Vec<f64> {
        self.orders.iter().map(|&m| m as f64 / self.n as f64).collect()
    }

    pub fn get(&self, m: usize) -> Option<f64> {
        self.orders.iter().position(|&o| o == m).map(|k| self.j[k])
    }

    /// CSV with header `m,m_over_n,J,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,m_over_n,J,stderr\n");
        for (k, &m) in self.orders.iter().enumerate() {
            out.push_str(&format!(
                "{m},{},{},{}\n",
                m as f64 / self.n as f64,
                self.j[k],
                self.stderr[k]
            ));
        }
        out
    }
}

/// Expands a grid into concrete orders for `n` nodes.
pub fn resolve_orders(grid: &OrderGrid, n: usize, level: Level) -> Result<Vec<usize>> {
    let lo = match level {
        Level::Graph => 3,
        Level::Node => 2,
    };
    if n < lo {
        return Err(Error::range(
            "n",
            format!("{level:?}-level interactions need at least {lo} nodes, got {n}"),
        ));
    }
    let mut orders: Vec<usize> = match grid {
        OrderGrid::All => (lo..=n).collect(),
        OrderGrid::Ratios(rs) => {
            if rs.iter().any(|r| !(r.is_finite() && *r > 0.0 && *r <= 1.0)) {
                return Err(Error::invalid("order ratios must lie in (0, 1]"));
            }
            rs.iter()
                .map(|r| ((r * n as f64).round() as usize).clamp(lo, n))
                .collect()
        }
        OrderGrid::Orders(ms) => {
            if let Some(m) = ms.iter().find(|&&m| m < lo || m > n) {
                return Err(Error::range("order", format!("m = {m} outside [{lo}, {n}]")));
            }
            ms.clone()
        }
    };
    orders.sort_unstable();
    orders.dedup();
    if orders.is_empty() {
        return Err(Error::invalid("empty order grid"));
    }
    Ok(orders)
}

fn check_config(cfg: &ProfileConfig) -> Result<()> {
    if cfg.context_budget == 0 || cfg.pair_budget == Some(0) {
        return Err(Error::invalid("profile budgets must be at least 1"));
    }
    Ok(())
}

fn common_arity(arities: impl Iterator<Item = usize>) -> Result<usize> {
    let mut n = None;
    for a in arities {
        match n {
            None => n = Some(a),
            Some(b) if b != a => {
                return Err(Error::invalid(format!(
                    "profile graphs must share a node count ({b} vs {a})"
                )))
            }
            _ => {}
        }
    }
    n.ok_or_else(|| Error::invalid("strength profile needs at least one graph"))
}

fn select_pairs(n: usize, ordered: bool, budget: Option<usize>, seed: u64) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| if ordered { i != j } else { i < j })
        .collect();
    match budget {
        Some(b) if b < all.len() => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<usize> = sample(&mut rng, all.len(), b).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|k| all[k]).collect()
        }
        _ => all,
    }
}

struct Cell {
    graph: usize,
    order_slot: usize,
    i: usize,
    j: usize,
    m: usize,
}

fn cells(graphs: usize, n: usize, orders: &[usize], ordered: bool, cfg: &ProfileConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for g in 0..graphs {
        let pairs = select_pairs(n, ordered, cfg.pair_budget, derive_seed(cfg.seed, &[g as u64, u64::MAX]));
        for &(i, j) in &pairs {
            for (slot, &m) in orders.iter().enumerate() {
                out.push(Cell { graph: g, order_slot: slot, i, j, m });
            }
        }
    }
    out
}

fn aggregate(
    level: Level,
    n: usize,
    orders: Vec<usize>,
    graphs: usize,
    cells: &[Cell],
    estimates: &[PairInteractionEstimate],
) -> Result<StrengthProfile> {
    let k = orders.len();
    let mut sum = vec![0.0; k];
    let mut var = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (c, e) in cells.iter().zip(estimates) {
        if !e.value.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite interaction at pair ({}, {}), m = {}",
                c.i, c.j, c.m
            )));
        }
        sum[c.order_slot] += e.value.abs();
        var[c.order_slot] += e.stderr * e.stderr;
        count[c.order_slot] += 1;
    }
    let raw: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateProfile);
    }
    let j = raw.iter().map(|r| r / total).collect();
    let stderr = var
        .iter()
        .zip(&count)
        .map(|(v, &c)| v.sqrt() / c as f64 / total)
        .collect();
    Ok(StrengthProfile {
        level,
        n,
        orders,
        j,
        stderr,
        raw,
        graphs,
        pairs: count[0],
    })
}

/// Graph-level strength profile over one or more games of equal arity
/// (typically one model restricted to several graphs). Pairs are unordered
/// since the graph-level interaction is symmetric.
pub fn strength_profile(games: &[&dyn SetFunction], cfg: &ProfileConfig) -> Result<StrengthProfile> {
    check_config(cfg)?;
    let n = common_arity(games.iter().map(|g| g.arity()))?;
    let orders = resolve_orders(&cfg.orders, n, Level::Graph)?;
    let tables: Option<Vec<TabulatedGame>> = if cfg.tabulate && n <= EXACT_MAX_NODES {
        Some(
            games
                .par_iter()
                .map(|g| TabulatedGame::tabulate(*g))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let game = |g: usize| -> &dyn SetFunction {
        match &tables {
            Some(t) => &t[g],
            None => games[g],
        }
    };
    let cells = cells(games.len(), n, &orders, false, cfg);
    let estimates: Vec<PairInteractionEstimate> = cells
        .par_iter()
        .map(|c| {
            let seed = derive_seed(cfg.seed, &[c.graph as u64, c.i as u64, c.j as u64, c.m as u64]);
            mc_interaction_graph(game(c.graph), c.i, c.j, c.m, cfg.context_budget, seed)
        })
        .collect::<Result<_>>()?;
    aggregate(Level::Graph, n, orders, games.len(), &cells, &estimates)
}

/// Node-level strength profile; pairs are ordered because the node-level
/// interaction measures the effect of `j` on `i`.
pub fn node_strength_profile(
    games: &[&dyn NodeSetFunction],
    cfg: &ProfileConfig,
) -> Result<StrengthProfile> {
    check_config(cfg)?;
    let n = common_arity(games.iter().map(|g| g.arity()))?;
    let orders = resolve_orders(&cfg.orders, n, Level::Node)?;
    let tables: Option<Vec<TabulatedNodeGame>> = if cfg.tabulate && n <= EXACT_MAX_NODES {
        Some(
            games
                .par_iter()
                .map(|g| TabulatedNodeGame::tabulate(*g))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let game = |g: usize| -> &dyn NodeSetFunction {
        match &tables {
            Some(t) => &t[g],
            None => games[g],
        }
    };
    let cells = cells(games.len(), n, &orders, true, cfg);
    let estimates: Vec<PairInteractionEstimate> = cells
        .par_iter()
        .map(|c| {
            let seed = derive_seed(cfg.seed, &[c.graph as u64, c.i as u64, c.j as u64, c.m as u64]);
            mc_interaction_node(game(c.graph), c.i, c.j, c.m, cfg.p, cfg.context_budget, seed)
        })
        .collect::<Result<_>>()?;
    aggregate(Level::Node, n, orders, games.len(), &cells, &estimates)
}

fn check_comparable(a: &StrengthProfile, b: &StrengthProfile) -> Result<()> {
    if a.orders != b.orders {
        return Err(Error::invalid("profiles cover different orders"));
    }
    Ok(())
}

/// Total-variation distance `½ Σ_m |a^(m) - b^(m)|`.
pub fn total_variation(a: &StrengthProfile, b: &StrengthProfile) -> Result<f64> {
    check_comparable(a, b)?;
    Ok(0.5 * a.j.iter().zip(&b.j).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Order with the largest `|a^(m) - b^(m)|`; ties go to the lowest order.
pub fn max_gap_order(a: &StrengthProfile, b: &StrengthProfile) -> Result<usize> {
    check_comparable(a, b)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (k, (x, y)) in a.j.iter().zip(&b.j).enumerate() {
        let gap = (x - y).abs();
        if gap > best.1 {
            best = (k, gap);
        }
    }
    Ok(a.orders[best.0])
}
