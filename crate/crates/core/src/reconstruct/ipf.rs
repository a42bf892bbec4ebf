//! Iterative proportional fitting on a fixed sparsity pattern.

use serde::{Deserialize, Serialize};

use super::{ReconstructError, Result, WeightMatrix};
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpfReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Largest relative deviation of row and column sums from their targets.
/// Zero-target lines are measured relative to the mean positive target.
pub fn marginal_residual(w: &WeightMatrix, rows: &[f64], cols: &[f64]) -> f64 {
    let positive: Vec<f64> = rows.iter().chain(cols).copied().filter(|&t| t > 0.0).collect();
    let scale = if positive.is_empty() {
        1.0
    } else {
        compensated_sum(positive.iter().copied()) / positive.len() as f64
    };
    let rel = |got: f64, target: f64| {
        if target > 0.0 {
            (got - target).abs() / target
        } else {
            got.abs() / scale
        }
    };
    let r = (0..w.n()).map(|i| rel(w.row_sum(i), rows[i]));
    let c = (0..w.n()).map(|j| rel(w.col_sum(j), cols[j]));
    r.chain(c).fold(0.0, f64::max)
}

/// Alternating row and column scaling until every marginal is within
/// `tolerance` (relative). Zero entries, including the diagonal, stay zero.
pub fn ipf_rebalance(
    w: &WeightMatrix,
    row_targets: &[f64],
    col_targets: &[f64],
    tolerance: f64,
    max_iter: usize,
    labels: &[String],
) -> Result<(WeightMatrix, IpfReport)> {
    let n = w.n();
    assert_eq!(row_targets.len(), n);
    assert_eq!(col_targets.len(), n);
    debug_assert!((0..n).all(|i| w.get(i, i) == 0.0), "IPF input must have a zero diagonal");

    let label = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
    let total_rows = compensated_sum(row_targets.iter().copied());
    let total_cols = compensated_sum(col_targets.iter().copied());
    if (total_rows - total_cols).abs() > 1e-9 * total_rows.max(total_cols) {
        return Err(ReconstructError::InconsistentTargets { rows: total_rows, cols: total_cols });
    }
    if compensated_sum((0..n).map(|i| w.row_sum(i))) <= 0.0 {
        return Err(ReconstructError::EmptyNetwork);
    }
    for i in 0..n {
        if row_targets[i] > 0.0 && !(0..n).any(|j| w.get(i, j) > 0.0) {
            return Err(ReconstructError::InfeasiblePattern { node: label(i), axis: "out" });
        }
        if col_targets[i] > 0.0 && !(0..n).any(|k| w.get(k, i) > 0.0) {
            return Err(ReconstructError::InfeasiblePattern { node: label(i), axis: "in" });
        }
    }

    let mut out = w.clone();
    let mut residual = marginal_residual(&out, row_targets, col_targets);
    if residual < tolerance {
        return Ok((out, IpfReport { iterations: 0, residual }));
    }
    for iteration in 1..=max_iter {
        for i in 0..n {
            let s = out.row_sum(i);
            if s > 0.0 {
                let f = row_targets[i] / s;
                out.row_mut(i).iter_mut().for_each(|x| *x *= f);
            }
        }
        for j in 0..n {
            let s = out.col_sum(j);
            if s > 0.0 {
                let f = col_targets[j] / s;
                for i in 0..n {
                    let x = out.get(i, j);
                    out.set(i, j, x * f);
                }
            }
        }
        residual = marginal_residual(&out, row_targets, col_targets);
        if residual < tolerance {
            return Ok((out, IpfReport { iterations: iteration, residual }));
        }
    }
    Err(ReconstructError::IpfNotConverged { iterations: max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: &[&[f64]]) -> WeightMatrix {
        let n = rows.len();
        let mut w = WeightMatrix::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            for (j, &x) in r.iter().enumerate() {
                w.set(i, j, x);
            }
        }
        w
    }

    #[test]
    fn balanced_input_is_a_fixed_point() {
        let w = matrix(&[&[0.0, 2.0, 1.0], &[1.0, 0.0, 1.0], &[2.0, 1.0, 0.0]]);
        let rows = [3.0, 2.0, 3.0];
        let cols = [3.0, 3.0, 2.0];
        let (out, rep) = ipf_rebalance(&w, &rows, &cols, 1e-12, 100, &[]).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(out, w);
    }

    #[test]
    fn two_by_two_off_diagonal() {
        // the only pattern-consistent solution is w01 = r0 = c1, w10 = r1 = c0
        let w = matrix(&[&[0.0, 5.0], &[1.0, 0.0]]);
        let (out, _) = ipf_rebalance(&w, &[3.0, 7.0], &[7.0, 3.0], 1e-12, 100, &[]).unwrap();
        assert!((out.get(0, 1) - 3.0).abs() < 1e-9);
        assert!((out.get(1, 0) - 7.0).abs() < 1e-9);
        assert_eq!(out.get(0, 0), 0.0);
    }

    #[test]
    fn three_node_hand_sinkhorn() {
        // 3-cycle plus one chord, starting away from the targets
        let w = matrix(&[&[0.0, 3.0, 1.0], &[0.0, 0.0, 2.0], &[5.0, 0.0, 0.0]]);
        let rows = [2.0, 1.0, 1.0];
        let cols = [1.0, 1.0, 2.0];
        let (out, rep) = ipf_rebalance(&w, &rows, &cols, 1e-12, 10_000, &[]).unwrap();
        // forced: w20 = 1 (col 0), w12 = 1 (row 1), then w02 = 1, w01 = 1
        assert!((out.get(2, 0) - 1.0).abs() < 1e-9);
        assert!((out.get(1, 2) - 1.0).abs() < 1e-9);
        assert!((out.get(0, 1) - 1.0).abs() < 1e-9);
        assert!((out.get(0, 2) - 1.0).abs() < 1e-9);
        assert!(rep.iterations >= 1);
    }

    #[test]
    fn missing_out_links_is_infeasible() {
        let w = matrix(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        let labels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        // b lends to nobody but must lend 1
        let w2 = matrix(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        let err = ipf_rebalance(&w2, &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], 1e-9, 10, &labels).unwrap_err();
        assert!(matches!(err, ReconstructError::InfeasiblePattern { ref node, axis: "out" } if node == "b"));
        // nobody lends to c but c must borrow 1
        let err = ipf_rebalance(&w, &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], 1e-9, 10, &labels).unwrap_err();
        assert!(matches!(err, ReconstructError::InfeasiblePattern { ref node, axis: "in" } if node == "c"));
    }

    #[test]
    fn non_convergence_reports_residual() {
        // pattern cannot carry these marginals: column 1 only fed by row 0
        let w = matrix(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        let err = ipf_rebalance(&w, &[1.0, 1.0, 1.0], &[1.0, 1.5, 0.5], 1e-12, 50, &[]).unwrap_err();
        match err {
            ReconstructError::IpfNotConverged { iterations, residual } => {
                assert_eq!(iterations, 50);
                assert!(residual > 1e-12);
            }
            e => panic!("{e}"),
        }
    }

    proptest! {
        #[test]
        fn complete_pattern_restores_marginals(
            entries in proptest::collection::vec(0.1f64..10.0, 16),
            rows in proptest::collection::vec(0.5f64..5.0, 4),
            mix in proptest::collection::vec(0.5f64..5.0, 4),
        ) {
            let mut w = WeightMatrix::zeros(4);
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        w.set(i, j, entries[i * 4 + j]);
                    }
                }
            }
            let total: f64 = rows.iter().sum();
            let ms: f64 = mix.iter().sum();
            let cols: Vec<f64> = mix.iter().map(|m| m / ms * total).collect();
            // each line must stay below half the total for a zero-diagonal solution to exist
            prop_assume!(rows.iter().zip(&cols).all(|(r, c)| r + c < total));
            let (out, _) = ipf_rebalance(&w, &rows, &cols, 1e-10, 100_000, &[]).unwrap();
            for i in 0..4 {
                prop_assert_eq!(out.get(i, i), 0.0);
                prop_assert!((out.row_sum(i) - rows[i]).abs() <= 1e-9 * rows[i]);
                prop_assert!((out.col_sum(i) - cols[i]).abs() <= 1e-9 * cols[i]);
            }
        }
    }
}
