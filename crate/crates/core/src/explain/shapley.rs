//! Exact Shapley values by coalition enumeration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masks::{kernel_weight, ln_binomial, MAX_ENUMERATED_PLAYERS};
use crate::tensor::DenseMatrix;

/// Largest player count [`normal_matrix_check`] accepts.
pub const MAX_NORMAL_MATRIX_PLAYERS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    /// Value of the empty coalition.
    pub base_value: f64,
    pub phi: Vec<f64>,
}

/// Every coalition of `m` players; coalition `i` contains player `j` iff
/// bit `j` of `i` is set.
pub fn all_coalitions(m: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1usize << m).map(move |bits| (0..m).map(|j| bits >> j & 1 == 1).collect())
}

/// Shapley values of a game over `m` players.
pub fn exact_shapley<F>(m: usize, value_fn: F) -> Result<ShapleyValues>
where
    F: Fn(&[bool]) -> f64,
{
    if m > MAX_ENUMERATED_PLAYERS {
        return Err(Error::TooManyPlayers {
            players: m,
            limit: MAX_ENUMERATED_PLAYERS,
        });
    }
    let table: Vec<f64> = all_coalitions(m).map(|s| value_fn(&s)).collect();
    shapley_from_table(&table)
}

/// Shapley values from a table of coalition values indexed as in
/// [`all_coalitions`].
pub fn shapley_from_table(values: &[f64]) -> Result<ShapleyValues> {
    if !values.len().is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "coalition table of length {} is not a power of two",
            values.len()
        )));
    }
    let m = values.len().trailing_zeros() as usize;
    if m > MAX_ENUMERATED_PLAYERS {
        return Err(Error::TooManyPlayers {
            players: m,
            limit: MAX_ENUMERATED_PLAYERS,
        });
    }
    // s!(m−s−1)!/m! = 1 / (m·C(m−1, s))
    let weight: Vec<f64> = (0..m)
        .map(|s| (-(m as f64).ln() - ln_binomial(m - 1, s)).exp())
        .collect();
    let phi = (0..m)
        .map(|j| {
            let bit = 1usize << j;
            (0..values.len())
                .filter(|s| s & bit == 0)
                .map(|s| weight[s.count_ones() as usize] * (values[s | bit] - values[s]))
                .sum()
        })
        .collect();
    Ok(ShapleyValues {
        base_value: values[0],
        phi,
    })
}

/// `ZᵀWZ` over all `2^m` coalitions with Shapley kernel weights and the
/// empty and full coalitions weighted `c`.
pub fn normal_matrix(m: usize, c: f64) -> Result<DenseMatrix> {
    if m == 0 || m > MAX_NORMAL_MATRIX_PLAYERS {
        return Err(Error::InvalidArgument(format!(
            "normal matrix needs 1 ≤ M ≤ {MAX_NORMAL_MATRIX_PLAYERS}, got {m}"
        )));
    }
    let mut a = DenseMatrix::zeros(m, m);
    for z in all_coalitions(m) {
        let on: Vec<usize> = (0..m).filter(|&j| z[j]).collect();
        let w = kernel_weight(m, on.len(), c);
        for &i in &on {
            for &k in &on {
                a[(i, k)] += w;
            }
        }
    }
    Ok(a)
}

/// Largest entry of `|ZᵀWZ − ((M−1)/M)·I − c·J|`.
pub fn normal_matrix_check(m: usize, c: f64) -> Result<f64> {
    let a = normal_matrix(m, c)?;
    let diag = (m as f64 - 1.0) / m as f64;
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for k in 0..m {
            let expected = c + if i == k { diag } else { 0.0 };
            worst = worst.max((a[(i, k)] - expected).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Average marginal contribution over all orderings of the players.
    fn permutation_oracle(m: usize, val: &dyn Fn(usize) -> f64) -> Vec<f64> {
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let head = rest.remove(i);
                for mut p in perms(rest) {
                    p.insert(0, head);
                    out.push(p);
                }
            }
            out
        }
        let all = perms((0..m).collect());
        let mut phi = vec![0.0; m];
        for p in &all {
            let mut set = 0usize;
            for &j in p {
                phi[j] += val(set | 1 << j) - val(set);
                set |= 1 << j;
            }
        }
        phi.iter().map(|x| x / all.len() as f64).collect()
    }

    // val over players {1, 2, 3} stored at bit positions 0, 1, 2.
    const GAME3: [f64; 8] = [0.0, 1.0, 1.0, 3.0, 0.0, 1.0, 1.0, 4.0];

    #[test]
    fn three_player_fixture() {
        // Marginals of player 1 over the six orderings: 1, 1, 2, 3, 1, 3.
        let frozen = [11.0 / 6.0, 11.0 / 6.0, 1.0 / 3.0];
        let oracle = permutation_oracle(3, &|s| GAME3[s]);
        for (a, b) in oracle.iter().zip(frozen) {
            assert!((a - b).abs() < 1e-12);
        }
        let sv = shapley_from_table(&GAME3).unwrap();
        assert_eq!(sv.base_value, 0.0);
        for (a, b) in sv.phi.iter().zip(frozen) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn additive_and_dummy_games() {
        let w = [0.5, -2.0, 3.0, 0.0];
        let sv = exact_shapley(4, |s| s.iter().zip(w).filter(|(on, _)| **on).map(|(_, x)| x).sum()).unwrap();
        for (a, b) in sv.phi.iter().zip(w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn enumeration_guard() {
        assert!(matches!(
            exact_shapley(21, |_| 0.0),
            Err(Error::TooManyPlayers { players: 21, limit: 20 })
        ));
        assert!(shapley_from_table(&[0.0; 3]).is_err());
    }

    /// Σ_{s=2}^{M−1} (s−1) / (M(M−s)): what every entry of ZᵀWZ carries on
    /// top of ((M−1)/M)·I + c·J.
    fn extra_offset(m: usize) -> f64 {
        (2..m).map(|s| (s as f64 - 1.0) / (m as f64 * (m - s) as f64)).sum()
    }

    #[test]
    fn normal_matrix_structure() {
        assert!(normal_matrix_check(2, 1e6).unwrap() < 1e-9);
        assert!((normal_matrix_check(3, 1e6).unwrap() - 1.0 / 3.0).abs() < 1e-6);
        assert!((extra_offset(10) - 1.646_071_428_571_428_5).abs() < 1e-12);
        for m in 2..=10 {
            let a = normal_matrix(m, 0.0).unwrap();
            let off = extra_offset(m);
            let diag = (m as f64 - 1.0) / m as f64;
            for i in 0..m {
                for k in 0..m {
                    let expected = off + if i == k { diag } else { 0.0 };
                    assert!((a[(i, k)] - expected).abs() < 1e-12, "M={m} ({i},{k})");
                }
            }
        }
        assert!(normal_matrix(16, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn table_matches_permutation_average(
            m in 1usize..=5,
            raw in proptest::collection::vec(-3.0f64..3.0, 32),
        ) {
            let table = &raw[..1 << m];
            let sv = shapley_from_table(table).unwrap();
            let oracle = permutation_oracle(m, &|s| table[s]);
            for (a, b) in sv.phi.iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            let total: f64 = sv.phi.iter().sum();
            prop_assert!((sv.base_value + total - table[(1 << m) - 1]).abs() < 1e-10);
        }
    }
}
