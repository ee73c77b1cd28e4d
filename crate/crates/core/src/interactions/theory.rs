//! Closed-form curves and exhaustive checks of the game-theoretic properties.

use serde::{Deserialize, Serialize};

use super::{binomial, excluded_interaction, included_interaction, Coalition, SetFunction};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmPoint {
    pub m: usize,
    pub value: f64,
}

/// `F^(m) = (n - m + 1) / (n (n - 1)) / sqrt(C(n - 2, m - 2))` for `m` in
/// `2..=n`. With `include_empty` the curve is indexed by the excluded-context
/// order `m' = m - 2` in `0..=n-2`, the domain on which `f(∅)` enters.
pub fn f_m_curve(n: usize, include_empty: bool) -> Result<Vec<FmPoint>> {
    if n < 3 {
        return Err(Error::range("n", format!("n = {n} must be at least 3")));
    }
    let norm = (n * (n - 1)) as f64;
    Ok((2..=n)
        .map(|m| FmPoint {
            m: if include_empty { m - 2 } else { m },
            value: (n - m + 1) as f64 / norm / binomial(n - 2, m - 2).sqrt(),
        })
        .collect())
}

/// Weight of the excluded-context order `m` in the efficiency decomposition:
/// `(n - 1 - m) / (n (n - 1))`.
pub fn efficiency_weight(n: usize, m: usize) -> f64 {
    (n as f64 - 1.0 - m as f64) / (n * (n - 1)) as f64
}

/// Largest arity accepted by [`efficiency_check`].
pub const EFFICIENCY_MAX_NODES: usize = 10;

/// Residual of the efficiency decomposition
/// `f(N) - f(∅) = Σ_i μ_i + Σ_{i≠j} Σ_{m=0}^{n-2} w^(m) I^(m)(i, j)`
/// with `μ_i = f({i}) - f(∅)` and `I` in its excluded-context form.
/// Returns the absolute residual.
pub fn efficiency_check(f: &dyn SetFunction) -> Result<f64> {
    let n = f.arity();
    if n < 2 || n > EFFICIENCY_MAX_NODES {
        return Err(Error::range(
            "n",
            format!("efficiency check needs 2 <= n <= {EFFICIENCY_MAX_NODES}, got {n}"),
        ));
    }
    let empty = f
        .value(Coalition::EMPTY)
        .map_err(|_| Error::invalid("efficiency check needs f(∅)"))?;
    let sets: Vec<Coalition> = (0..1u64 << n).map(Coalition).collect();
    let table = f.values(&sets)?;
    let v = |s: Coalition| table[s.0 as usize];

    let full = v(Coalition::full(n));
    let mu: f64 = (0..n).map(|i| v(Coalition(1 << i)) - empty).sum();

    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut sums = vec![0.0; n - 1];
            for mask in 0..1u64 << n {
                let s = Coalition(mask);
                if s.contains(i) || s.contains(j) {
                    continue;
                }
                sums[s.len()] += v(s.with(i).with(j)) - v(s.with(i)) - v(s.with(j)) + v(s);
            }
            for (m, total) in sums.iter().enumerate() {
                pairs += efficiency_weight(n, m) * total / binomial(n - 2, m);
            }
        }
    }
    Ok((full - empty - mu - pairs).abs())
}

/// Both formulations of the order-`m` interaction: contexts that exclude the
/// pair (`|S| = m`) and contexts that include it (`|S| = m + 2`).
pub fn equivalence_check(f: &dyn SetFunction, i: usize, j: usize, m: usize) -> Result<(f64, f64)> {
    let n = f.arity();
    if n > 12 {
        return Err(Error::range("n", format!("equivalence check needs n <= 12, got {n}")));
    }
    if m + 2 > n {
        return Err(Error::range("order", format!("m + 2 = {} exceeds n = {n}", m + 2)));
    }
    Ok((
        excluded_interaction(f, i, j, m)?,
        included_interaction(f, i, j, m + 2)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::super::{FnGame, TabulatedGame};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_game(n: usize, seed: u64) -> TabulatedGame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TabulatedGame::new(n, (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn curve_values() {
        let c = f_m_curve(10, false).unwrap();
        assert_eq!(c.len(), 9);
        assert_eq!(c[0].m, 2);
        assert!((c[0].value - 0.1).abs() < 1e-15);
        assert!((c[8].value - 1.0 / 90.0).abs() < 1e-15);
        let m6 = c.iter().find(|p| p.m == 6).unwrap().value;
        assert!((m6 - 5.0 / 90.0 / 70f64.sqrt()).abs() < 1e-15);
        assert!((m6 - 0.006640).abs() < 5e-7);
        assert!(f_m_curve(2, false).is_err());
        let e = f_m_curve(10, true).unwrap();
        assert_eq!(e[0].m, 0);
        assert_eq!(e.last().unwrap().m, 8);
    }

    #[test]
    fn curve_endpoints_dominate_interior() {
        let c = f_m_curve(50, false).unwrap();
        let min = c.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
        let ends = c[0].value.min(c.last().unwrap().value);
        assert!(ends > 10.0 * min);
    }

    #[test]
    fn weights() {
        assert!((efficiency_weight(5, 0) - 0.2).abs() < 1e-15);
        assert_eq!(efficiency_weight(5, 4), 0.0);
    }

    #[test]
    fn efficiency_holds() {
        let c = [0.4, -0.1, 2.0, 1.5];
        let add = FnGame::new(4, move |s: Coalition| s.members().map(|i| c[i]).sum());
        assert!(efficiency_check(&add).unwrap() < 1e-12);
        for seed in 0..5 {
            assert!(efficiency_check(&random_game(5, seed)).unwrap() <= 1e-9);
        }
        assert!(efficiency_check(&random_game(8, 11)).unwrap() <= 1e-9);
    }

    #[test]
    fn efficiency_requires_empty_value() {
        let f = FnGame::new(4, |s: Coalition| s.len() as f64);
        let t = TabulatedGame::tabulate(&f).unwrap();
        assert!(efficiency_check(&t).is_err());
    }

    #[test]
    fn equivalence_examples() {
        let add = FnGame::new(6, |s: Coalition| s.members().map(|i| i as f64).sum());
        assert_eq!(equivalence_check(&add, 1, 2, 2).unwrap(), (0.0, 0.0));
        let sq = FnGame::new(6, |s: Coalition| (s.len() * s.len()) as f64);
        assert_eq!(equivalence_check(&sq, 0, 5, 1).unwrap(), (2.0, 2.0));
        let f = random_game(8, 3);
        for m in 0..=6 {
            for (i, j) in [(0, 1), (3, 7), (6, 2)] {
                let (a, b) = equivalence_check(&f, i, j, m).unwrap();
                assert!((a - b).abs() <= 1e-12);
            }
        }
        assert!(equivalence_check(&f, 0, 1, 7).is_err());
    }
}
