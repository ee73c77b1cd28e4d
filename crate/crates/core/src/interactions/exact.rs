//! Exhaustive evaluation of multi-order interactions.

use itertools::Itertools;

use super::{check_pair, Coalition, NodeSetFunction, SetFunction};
use crate::error::{Error, Result};

/// Exhaustive enumeration refuses larger arities.
pub const EXACT_MAX_NODES: usize = 14;

fn check_exact_size(n: usize) -> Result<()> {
    if n > EXACT_MAX_NODES {
        return Err(Error::TooLargeForExact {
            n,
            limit: EXACT_MAX_NODES,
        });
    }
    Ok(())
}

/// All size-`m` coalitions that contain both `i` and `j`.
pub(crate) fn contexts_with_pair(n: usize, i: usize, j: usize, m: usize) -> Vec<Coalition> {
    let base = Coalition::from_members([i, j]);
    (0..n)
        .filter(|&k| k != i && k != j)
        .combinations(m - 2)
        .map(|extra| Coalition(base.0 | Coalition::from_members(extra).0))
        .collect()
}

/// The four coalitions of one interaction term, in the order
/// `S, S \ i, S \ j, S \ {i, j}`.
pub(crate) fn delta_sets(s: Coalition, i: usize, j: usize) -> [Coalition; 4] {
    [s, s.without(i), s.without(j), s.without(i).without(j)]
}

pub(crate) fn delta_from(v: &[f64]) -> f64 {
    v[0] - v[1] - v[2] + v[3]
}

/// Mean interaction over every size-`m` context containing `{i, j}`, for any
/// `2 <= m <= n`. Order 2 evaluates the empty coalition.
pub fn included_interaction(f: &dyn SetFunction, i: usize, j: usize, m: usize) -> Result<f64> {
    let n = f.arity();
    check_exact_size(n)?;
    check_pair(n, i, j)?;
    if m < 2 || m > n {
        return Err(Error::range("order", format!("m = {m} outside [2, {n}]")));
    }
    let contexts = contexts_with_pair(n, i, j, m);
    let sets: Vec<Coalition> = contexts.iter().flat_map(|&s| delta_sets(s, i, j)).collect();
    let vals = f.values(&sets)?;
    let total: f64 = vals.chunks_exact(4).map(delta_from).sum();
    Ok(total / contexts.len() as f64)
}

/// Graph-level interaction of order `3 <= m <= n`, by exhaustive enumeration
/// of the `C(n-2, m-2)` contexts. Never evaluates the empty graph.
pub fn exact_interaction(f: &dyn SetFunction, i: usize, j: usize, m: usize) -> Result<f64> {
    let n = f.arity();
    check_exact_size(n)?;
    if m < 3 || m > n {
        return Err(Error::range("order", format!("m = {m} outside [3, {n}]")));
    }
    included_interaction(f, i, j, m)
}

/// Interaction with contexts that exclude the pair: the mean over
/// `S ⊆ N \ {i, j}` with `|S| = m` of
/// `f(S ∪ {i, j}) - f(S ∪ {i}) - f(S ∪ {j}) + f(S)`, `0 <= m <= n - 2`.
pub fn excluded_interaction(f: &dyn SetFunction, i: usize, j: usize, m: usize) -> Result<f64> {
    let n = f.arity();
    check_exact_size(n)?;
    check_pair(n, i, j)?;
    if m + 2 > n {
        return Err(Error::range("order", format!("m = {m} exceeds n - 2 = {}", n as i64 - 2)));
    }
    let others: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
    let mut sets = Vec::new();
    let mut count = 0usize;
    for ctx in others.into_iter().combinations(m) {
        let s = Coalition::from_members(ctx);
        sets.extend([s.with(i).with(j), s.with(i), s.with(j), s]);
        count += 1;
    }
    let vals = f.values(&sets)?;
    let total: f64 = vals.chunks_exact(4).map(delta_from).sum();
    Ok(total / count as f64)
}

/// Node-level interaction by exhaustive enumeration: the mean of
/// `|| f_i(S) - f_i(S \ j) ||_p` over size-`m` contexts containing `{i, j}`.
pub fn exact_node_interaction(
    f: &dyn NodeSetFunction,
    i: usize,
    j: usize,
    m: usize,
    p: f64,
) -> Result<f64> {
    let n = f.arity();
    check_exact_size(n)?;
    check_pair(n, i, j)?;
    if m < 2 || m > n {
        return Err(Error::range("order", format!("m = {m} outside [2, {n}]")));
    }
    let contexts = contexts_with_pair(n, i, j, m);
    let sets: Vec<Coalition> = contexts.iter().flat_map(|&s| [s, s.without(j)]).collect();
    let vals = f.node_values_batch(&sets)?;
    let total: f64 = vals
        .chunks_exact(2)
        .map(|pair| p_norm_diff(&pair[0][i], &pair[1][i], p))
        .sum();
    Ok(total / contexts.len() as f64)
}

pub(crate) fn p_norm_diff(a: &[f64], b: &[f64], p: f64) -> f64 {
    let diffs = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    if p.is_infinite() {
        diffs.fold(0.0, f64::max)
    } else if p == 2.0 {
        diffs.map(|d| d * d).sum::<f64>().sqrt()
    } else {
        diffs.map(|d| d.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{FnGame, FnNodeGame};
    use super::*;

    #[test]
    fn additive_game_has_no_interactions() {
        let c = [0.25, -1.5, 2.0, 0.75, 5.5];
        let f = FnGame::new(5, move |s: Coalition| s.members().map(|i| c[i]).sum());
        for m in 3..=5 {
            assert_eq!(exact_interaction(&f, 0, 3, m).unwrap(), 0.0);
        }
    }

    #[test]
    fn pair_indicator_is_one() {
        let f = FnGame::new(6, |s: Coalition| {
            if s.contains(1) && s.contains(4) {
                1.0
            } else {
                0.0
            }
        });
        for m in 3..=6 {
            assert_eq!(exact_interaction(&f, 1, 4, m).unwrap(), 1.0);
        }
    }

    #[test]
    fn squared_size_is_two() {
        let f = FnGame::new(7, |s: Coalition| (s.len() * s.len()) as f64);
        for m in 3..=7 {
            assert_eq!(exact_interaction(&f, 2, 5, m).unwrap(), 2.0);
        }
    }

    #[test]
    fn argument_errors() {
        let f = FnGame::new(5, |s: Coalition| s.len() as f64);
        assert!(exact_interaction(&f, 0, 1, 2).is_err());
        assert!(exact_interaction(&f, 0, 1, 6).is_err());
        assert!(exact_interaction(&f, 1, 1, 3).is_err());
        assert!(exact_interaction(&f, 0, 9, 3).is_err());
        let big = FnGame::new(15, |s: Coalition| s.len() as f64);
        assert!(matches!(
            exact_interaction(&big, 0, 1, 3),
            Err(Error::TooLargeForExact { .. })
        ));
    }

    #[test]
    fn empty_coalition_never_evaluated() {
        let f = FnGame::new(4, |s: Coalition| {
            assert!(!s.is_empty(), "f(empty) requested");
            s.len() as f64
        });
        for m in 3..=4 {
            exact_interaction(&f, 0, 1, m).unwrap();
        }
    }

    #[test]
    fn node_level_examples() {
        let size = FnNodeGame::new(5, |s: Coalition| {
            (0..5)
                .map(|i| if s.contains(i) { vec![s.len() as f64] } else { vec![] })
                .collect()
        });
        for m in 2..=5 {
            assert_eq!(exact_node_interaction(&size, 0, 2, m, 2.0).unwrap(), 1.0);
        }
        // node 1's output ignores node 3
        let blind = FnNodeGame::new(5, |s: Coalition| {
            (0..5)
                .map(|i| {
                    if s.contains(i) {
                        vec![s.without(3).len() as f64, 1.0]
                    } else {
                        vec![]
                    }
                })
                .collect()
        });
        assert_eq!(exact_node_interaction(&blind, 1, 3, 3, 2.0).unwrap(), 0.0);
        assert!(exact_node_interaction(&blind, 1, 3, 1, 2.0).is_err());
    }

    #[test]
    fn p_norms() {
        assert_eq!(p_norm_diff(&[3.0, 0.0], &[0.0, 4.0], 2.0), 5.0);
        assert_eq!(p_norm_diff(&[3.0, 0.0], &[0.0, 4.0], 1.0), 7.0);
        assert_eq!(p_norm_diff(&[3.0, 0.0], &[0.0, 4.0], f64::INFINITY), 4.0);
    }
}
