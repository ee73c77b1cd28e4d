//! Concrete set functions: closures, lookup tables and trained models.

use super::{Coalition, NodeSetFunction, SetFunction, MAX_PLAYERS};
use crate::error::{Error, Result};
use crate::graph::{keep_positions, GeometricGraph, GraphView, Subgraph};
use crate::models::Model;

/// Wraps a closure as a scalar game.
pub struct FnGame<F> {
    n: usize,
    f: F,
}

impl<F: Fn(Coalition) -> f64 + Sync> FnGame<F> {
    pub fn new(n: usize, f: F) -> Self {
        assert!(n <= MAX_PLAYERS);
        Self { n, f }
    }
}

impl<F: Fn(Coalition) -> f64 + Sync> SetFunction for FnGame<F> {
    fn arity(&self) -> usize {
        self.n
    }
    fn value(&self, s: Coalition) -> Result<f64> {
        Ok((self.f)(s))
    }
}

/// Wraps a closure returning one vector per node position (empty for absent
/// nodes) as a node-level game.
pub struct FnNodeGame<F> {
    n: usize,
    f: F,
}

impl<F: Fn(Coalition) -> Vec<Vec<f64>> + Sync> FnNodeGame<F> {
    pub fn new(n: usize, f: F) -> Self {
        assert!(n <= MAX_PLAYERS);
        Self { n, f }
    }
}

impl<F: Fn(Coalition) -> Vec<Vec<f64>> + Sync> NodeSetFunction for FnNodeGame<F> {
    fn arity(&self) -> usize {
        self.n
    }
    fn node_values(&self, s: Coalition) -> Result<Vec<Vec<f64>>> {
        Ok((self.f)(s))
    }
}

/// A scalar game stored as a table over all `2^n` coalitions. `f(∅)` may be
/// left undefined (NaN), in which case evaluating it is an error.
#[derive(Debug, Clone)]
pub struct TabulatedGame {
    n: usize,
    table: Vec<f64>,
}

impl TabulatedGame {
    pub fn new(n: usize, table: Vec<f64>) -> Result<Self> {
        if n >= 31 || table.len() != 1 << n {
            return Err(Error::invalid(format!(
                "table of length {} does not cover 2^{n} coalitions",
                table.len()
            )));
        }
        Ok(Self { n, table })
    }

    /// Evaluates every nonempty coalition of `f` once (batched).
    pub fn tabulate(f: &dyn SetFunction) -> Result<Self> {
        let n = f.arity();
        if n > 24 {
            return Err(Error::invalid(format!("cannot tabulate a game with {n} players")));
        }
        let sets: Vec<Coalition> = (1..1u64 << n).map(Coalition).collect();
        let vals = f.values(&sets)?;
        let mut table = Vec::with_capacity(1 << n);
        table.push(f64::NAN);
        table.extend(vals);
        Ok(Self { n, table })
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

impl SetFunction for TabulatedGame {
    fn arity(&self) -> usize {
        self.n
    }
    fn value(&self, s: Coalition) -> Result<f64> {
        let v = *self
            .table
            .get(s.0 as usize)
            .ok_or_else(|| Error::range("coalition", format!("{:#x} for n = {}", s.0, self.n)))?;
        if v.is_nan() {
            return Err(if s.is_empty() {
                Error::invalid("f(∅) is not defined for this game")
            } else {
                Error::Numeric(format!("undefined game value at {:#x}", s.0))
            });
        }
        Ok(v)
    }
}

/// A node-level game stored as a table over all nonempty coalitions.
#[derive(Debug, Clone)]
pub struct TabulatedNodeGame {
    n: usize,
    table: Vec<Vec<Vec<f64>>>,
}

impl TabulatedNodeGame {
    pub fn tabulate(f: &dyn NodeSetFunction) -> Result<Self> {
        let n = f.arity();
        if n > 20 {
            return Err(Error::invalid(format!("cannot tabulate a game with {n} players")));
        }
        let sets: Vec<Coalition> = (1..1u64 << n).map(Coalition).collect();
        let mut table = Vec::with_capacity(1 << n);
        table.push(vec![Vec::new(); n]);
        table.extend(f.node_values_batch(&sets)?);
        Ok(Self { n, table })
    }
}

impl NodeSetFunction for TabulatedNodeGame {
    fn arity(&self) -> usize {
        self.n
    }
    fn node_values(&self, s: Coalition) -> Result<Vec<Vec<f64>>> {
        self.table
            .get(s.0 as usize)
            .cloned()
            .ok_or_else(|| Error::range("coalition", format!("{:#x} for n = {}", s.0, self.n)))
    }
}

fn subgraphs<'g>(graph: &'g GeometricGraph, sets: &[Coalition]) -> Result<Vec<Subgraph<'g>>> {
    sets.iter()
        .map(|s| {
            if s.is_empty() {
                Err(Error::EmptySubgraph)
            } else {
                keep_positions(graph, s.0)
            }
        })
        .collect()
}

/// A graph-level model restricted to node subsets of one parent graph.
/// Removed nodes are deleted and connectivity is rebuilt with the parent's
/// construction policy.
pub struct ModelGame<'a> {
    model: &'a Model,
    graph: &'a GeometricGraph,
}

impl<'a> ModelGame<'a> {
    pub fn new(model: &'a Model, graph: &'a GeometricGraph) -> Result<Self> {
        check_arity(graph)?;
        model.predict_graph(graph)?;
        Ok(Self { model, graph })
    }
}

fn check_arity(graph: &GeometricGraph) -> Result<()> {
    let n = graph.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if n > MAX_PLAYERS {
        return Err(Error::invalid(format!("{n} nodes exceed the {MAX_PLAYERS}-player limit")));
    }
    Ok(())
}

impl SetFunction for ModelGame<'_> {
    fn arity(&self) -> usize {
        self.graph.node_count()
    }
    fn value(&self, s: Coalition) -> Result<f64> {
        Ok(self.values(&[s])?[0])
    }
    fn values(&self, sets: &[Coalition]) -> Result<Vec<f64>> {
        let subs = subgraphs(self.graph, sets)?;
        let views: Vec<&dyn GraphView> = subs.iter().map(|s| s as &dyn GraphView).collect();
        self.model.predict_graphs(&views)
    }
}

/// A node-level model restricted to node subsets of one parent graph.
pub struct ModelNodeGame<'a> {
    model: &'a Model,
    graph: &'a GeometricGraph,
}

impl<'a> ModelNodeGame<'a> {
    pub fn new(model: &'a Model, graph: &'a GeometricGraph) -> Result<Self> {
        check_arity(graph)?;
        model.predict_node(graph)?;
        Ok(Self { model, graph })
    }
}

impl NodeSetFunction for ModelNodeGame<'_> {
    fn arity(&self) -> usize {
        self.graph.node_count()
    }
    fn node_values(&self, s: Coalition) -> Result<Vec<Vec<f64>>> {
        Ok(self.node_values_batch(&[s])?.pop().expect("one coalition"))
    }
    fn node_values_batch(&self, sets: &[Coalition]) -> Result<Vec<Vec<Vec<f64>>>> {
        let n = self.arity();
        let subs = subgraphs(self.graph, sets)?;
        let views: Vec<&dyn GraphView> = subs.iter().map(|s| s as &dyn GraphView).collect();
        let preds = self.model.predict_nodes(&views)?;
        Ok(sets
            .iter()
            .zip(preds)
            .map(|(s, pred)| {
                let mut out = vec![Vec::new(); n];
                for (pos, v) in s.members().zip(pred) {
                    out[pos] = v.to_vec();
                }
                out
            })
            .collect())
    }
}
